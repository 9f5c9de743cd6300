#include "pavad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pavad {

const char* to_string(PsnrPeak peak) { return peak == PsnrPeak::Unit ? "unit" : "reconstruction-max"; }

PsnrPeak parse_psnr_peak(const std::string& name) {
    if (name == "unit") return PsnrPeak::Unit;
    if (name == "reconstruction-max") return PsnrPeak::ReconstructionMax;
    fail(ErrorKind::Config, "unknown PSNR peak '" + name + "' (expected unit or reconstruction-max)");
}

double psnr_from_mse(double mse, double peak) { return 10.0 * std::log10(peak * peak / std::max(mse, kMseFloor)); }

double psnr(const Tensorf& frame, const Tensorf& reconstruction, PsnrPeak peak) {
    require(frame.shape() == reconstruction.shape(), ErrorKind::Score,
            "psnr shape mismatch " + shape_string(frame.shape()) + " vs " + shape_string(reconstruction.shape()));
    require(!frame.empty(), ErrorKind::Score, "psnr of an empty frame");
    double sum = 0.0, top = 0.0;
    for (std::size_t i = 0; i < frame.size(); ++i) {
        const double a = (static_cast<double>(frame[i]) + 1.0) * 0.5;
        const double b = (static_cast<double>(reconstruction[i]) + 1.0) * 0.5;
        sum += (a - b) * (a - b);
        top = i == 0 ? b : std::max(top, b);
    }
    const double m = peak == PsnrPeak::Unit ? 1.0 : top;
    return psnr_from_mse(sum / static_cast<double>(frame.size()), m);
}

std::vector<double> min_max_normalize(std::span<const double> raw, bool invert) {
    std::vector<double> out(raw.size(), 0.0);
    if (raw.empty()) return out;
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    const double span = *hi - *lo;
    if (!(span > 0.0)) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = (raw[i] - *lo) / span;
        out[i] = invert ? 1.0 - v : v;
    }
    return out;
}

int WindowAssignment::source_frame(int t) const {
    require(t >= 0 && t < frames, ErrorKind::Score, "frame index out of range");
    return std::clamp(t, first_scored(), last_scored());
}

WindowAssignment assign_windows(int frames, int window, int offset) {
    require(window >= 1 && offset >= 0 && offset < window, ErrorKind::Score, "bad window geometry");
    require(frames >= window, ErrorKind::Score,
            "video has " + std::to_string(frames) + " frames, scoring needs at least " + std::to_string(window));
    return {frames, window, offset};
}

std::vector<double> spread_to_frames(std::span<const double> per_window, const WindowAssignment& a) {
    require(static_cast<int>(per_window.size()) == a.window_count(), ErrorKind::Score,
            "expected one value per window");
    std::vector<double> out(static_cast<std::size_t>(a.frames));
    for (int t = 0; t < a.frames; ++t) out[static_cast<std::size_t>(t)] = per_window[a.source_frame(t) - a.offset];
    return out;
}

namespace {

// Runs the autoencoder over every window of `series` (N x C x H x W) and hands
// the scored frame of input and reconstruction to `score`.
template <typename Fn>
std::vector<double> per_window(const Tensorf& series, const Autoencoder<float>& ae, int batch, Fn score) {
    const WindowAssignment a = assign_windows(series.dim(0));
    const int C = series.dim(1), H = series.dim(2), W = series.dim(3);
    require(C == ae.config().in_channels, ErrorKind::Score,
            "autoencoder expects " + std::to_string(ae.config().in_channels) + " channels, input has " +
                std::to_string(C));
    const std::size_t frame = static_cast<std::size_t>(C) * H * W;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const int T = a.window;
    std::vector<double> out(static_cast<std::size_t>(a.window_count()));
    for (int w0 = 0; w0 < a.window_count(); w0 += batch) {
        const int n = std::min(batch, a.window_count() - w0);
        Tensorf x({n, C, T, H, W});
        for (int k = 0; k < n; ++k)
            for (int t = 0; t < T; ++t)
                for (int c = 0; c < C; ++c) {
                    const float* src = series.data() + static_cast<std::size_t>(w0 + k + t) * frame + c * plane;
                    float* dst = x.data() + ((static_cast<std::size_t>(k) * C + c) * T + t) * plane;
                    std::copy(src, src + plane, dst);
                }
        const Tensorf y = ae.infer(x);
        for (int k = 0; k < n; ++k) {
            Tensorf in({C, H, W}), rec({C, H, W});
            const int t = a.offset;
            for (int c = 0; c < C; ++c) {
                const std::size_t at = ((static_cast<std::size_t>(k) * C + c) * T + t) * plane;
                std::copy(x.data() + at, x.data() + at + plane, in.data() + c * plane);
                std::copy(y.data() + at, y.data() + at + plane, rec.data() + c * plane);
            }
            out[static_cast<std::size_t>(w0 + k)] = score(in, rec);
        }
    }
    return out;
}

}  // namespace

ComponentSeries score_recon(const VideoClip& video, const Autoencoder<float>& ae, const ScoreOptions& options) {
    require(video.length() >= kScoreWindow, ErrorKind::Score,
            "video " + video.video_id() + " has fewer than 16 frames");
    const WindowAssignment a = assign_windows(video.length());
    const auto p = per_window(video.frames(), ae, std::max(1, options.batch),
                              [&](const Tensorf& x, const Tensorf& r) { return psnr(x, r, options.peak); });
    ComponentSeries s;
    s.raw = spread_to_frames(p, a);
    s.normalized = spread_to_frames(min_max_normalize(p, true), a);
    return s;
}

ComponentSeries score_flow(const FlowField& flow, const Autoencoder<float>& ae, const FlowCodec& codec,
                           const ScoreOptions& options) {
    const Tensorf padded = pad_flow_to_frames(flow);
    require(padded.dim(0) >= kScoreWindow, ErrorKind::Score,
            "video " + flow.source_video_id + " has fewer than 16 frames");
    const WindowAssignment a = assign_windows(padded.dim(0));
    const Tensorf coded = codec.encode(padded);
    const auto raw = per_window(coded, ae, std::max(1, options.batch), [&](const Tensorf& x, const Tensorf& r) {
        const std::vector<int> one = {1, x.dim(0), x.dim(1), x.dim(2)};
        Tensorf xs = x, rs = r;
        xs.reshape(one);
        rs.reshape(one);
        const Tensorf phi = codec.decode(xs), phi_hat = codec.decode(rs);
        double sum = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const double d = static_cast<double>(phi_hat[i]) - phi[i];
            sum += d * d;
        }
        return sum / static_cast<double>(phi.size());  // R' = 2 * H * W
    });
    ComponentSeries s;
    s.raw = spread_to_frames(raw, a);
    s.normalized = spread_to_frames(min_max_normalize(raw), a);
    return s;
}

ComponentSeries score_flow(const VideoClip& video, const Autoencoder<float>& ae, const FlowBackend& backend,
                           const FlowCodec& codec, const ScoreOptions& options) {
    require(video.length() >= kScoreWindow, ErrorKind::Score,
            "video " + video.video_id() + " has fewer than 16 frames");
    return score_flow(compute_flow(video, backend), ae, codec, options);
}

std::vector<double> score_semantic(const Tensorf& features, const Discriminator<float>& disc) {
    require(features.rank() == 2 && features.dim(1) == Discriminator<float>::kFeatureDim, ErrorKind::Score,
            "features must be N x 512, got " + shape_string(features.shape()));
    std::vector<double> out(static_cast<std::size_t>(features.dim(0)));
    const std::size_t d = Discriminator<float>::kFeatureDim;
    for (std::size_t t = 0; t < out.size(); ++t)
        out[t] = disc_forward(disc, std::span<const float>(features.data() + t * d, d)).probability;
    return out;
}

std::vector<double> score_semantic(const VideoClip& video, const FeatureAdapter& adapter,
                                   const Discriminator<float>& disc) {
    Tensorf features;
    try {
        features = adapter.extract(video);
    } catch (const Error& e) {
        fail(ErrorKind::Score, "feature adapter '" + adapter.name() + "' failed on " + video.video_id() + ": " +
                                   e.what());
    }
    require(features.rank() == 2 && features.dim(0) == video.length(), ErrorKind::Score,
            "feature adapter must emit one feature per frame");
    return score_semantic(features, disc);
}

void AggWeights::validate() const {
    for (double e : {eta1, eta2, eta3})
        require(std::isfinite(e) && e >= 0.0 && e <= 1.0, ErrorKind::Weight, "weights must lie in [0, 1]");
    require(std::abs(eta1 + eta2 + eta3 - 1.0) <= 1e-9, ErrorKind::Weight,
            "weights must sum to 1, got " + std::to_string(eta1 + eta2 + eta3));
}

AggWeights AggWeights::without_discriminator() const {
    const double s = eta1 + eta2;
    require(s > 0.0, ErrorKind::Weight, "eta1 + eta2 must be positive without the discriminator");
    return {eta1 / s, eta2 / s, 0.0};
}

AggWeights weight_profile(const std::string& name) {
    if (name == "ped2") return {0.65, 0.25, 0.1};
    if (name == "avenue") return {0.45, 0.5, 0.05};
    if (name == "shanghai") return {0.85, 0.13, 0.02};
    if (name == "ubnormal") return {0.4, 0.5, 0.1};
    fail(ErrorKind::Config, "unknown weight profile '" + name + "' (ped2, avenue, shanghai, ubnormal)");
}

std::vector<std::string> weight_profile_names() { return {"ped2", "avenue", "shanghai", "ubnormal"}; }

std::vector<double> aggregate(std::span<const double> w1, std::span<const double> w2, std::span<const double> w3,
                              const AggWeights& weights) {
    weights.validate();
    require(w1.size() == w2.size() && w2.size() == w3.size(), ErrorKind::Score, "score series differ in length");
    std::vector<double> out(w1.size());
    for (std::size_t t = 0; t < out.size(); ++t)
        out[t] = weights.eta1 * w1[t] + weights.eta2 * w2[t] + weights.eta3 * w3[t];
    return out;
}

nlohmann::json to_json(const ScoreSeries& s, const AggWeights& weights) {
    return {{"video_id", s.video_id},
            {"frames", s.agg.size()},
            {"omega1", s.w1},
            {"omega2", s.w2},
            {"omega3", s.w3},
            {"omega_agg", s.agg},
            {"psnr_db", s.psnr_db},
            {"flow_mse", s.flow_mse},
            {"weights", {weights.eta1, weights.eta2, weights.eta3}}};
}

ScoreSeries score_series_from_json(const nlohmann::json& j) {
    ScoreSeries s;
    try {
        s.video_id = j.at("video_id").get<std::string>();
        s.w1 = j.at("omega1").get<std::vector<double>>();
        s.w2 = j.at("omega2").get<std::vector<double>>();
        s.w3 = j.at("omega3").get<std::vector<double>>();
        s.agg = j.at("omega_agg").get<std::vector<double>>();
        s.psnr_db = j.value("psnr_db", std::vector<double>{});
        s.flow_mse = j.value("flow_mse", std::vector<double>{});
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Evaluation, std::string("malformed score file: ") + e.what());
    }
    return s;
}

std::filesystem::path export_scores(const std::filesystem::path& out, const std::vector<ScoreSeries>& series,
                                    const AggWeights& weights, const nlohmann::json& config_echo) {
    const auto dir = out / "scores";
    std::filesystem::create_directories(dir);
    nlohmann::json index;
    index["weights"] = {weights.eta1, weights.eta2, weights.eta3};
    index["mode"] = weights.uses_discriminator() ? "with-discriminator" : "without-discriminator";
    index["config"] = config_echo;
    index["videos"] = nlohmann::json::array();
    for (const auto& s : series) {
        const auto file = dir / (s.video_id + ".json");
        std::ofstream(file) << to_json(s, weights).dump() << '\n';
        index["videos"].push_back({{"video_id", s.video_id}, {"file", "scores/" + s.video_id + ".json"}});
    }
    const auto index_file = out / "scores_index.json";
    std::ofstream(index_file) << index.dump(2) << '\n';
    return index_file;
}

}  // namespace pavad
