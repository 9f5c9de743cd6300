#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pavad/features.hpp"
#include "pavad/flow.hpp"
#include "pavad/models.hpp"

namespace pavad {

inline constexpr double kMseFloor = 1e-10;
inline constexpr int kScoreWindow = 16;
inline constexpr int kScoredOffset = 8;  // 9th frame of each window

enum class PsnrPeak {
    ReconstructionMax,  // realised per-frame max of the reconstruction
    Unit,               // fixed 1.0
};

const char* to_string(PsnrPeak peak);
PsnrPeak parse_psnr_peak(const std::string& name);

// PSNR in dB between two equally shaped frames given in [-1, 1]; both are
// rescaled to [0, 1] first and the MSE is floored at kMseFloor.
double psnr(const Tensorf& frame, const Tensorf& reconstruction, PsnrPeak peak = PsnrPeak::ReconstructionMax);
double psnr_from_mse(double mse, double peak);

// (x - min) / (max - min), or 1 minus that when inverting. Constant series map to zeros.
std::vector<double> min_max_normalize(std::span<const double> raw, bool invert = false);

// Frame <- window bookkeeping for a sliding window of stride 1.
struct WindowAssignment {
    int frames = 0;
    int window = kScoreWindow;
    int offset = kScoredOffset;

    int window_count() const { return frames - window + 1; }
    int first_scored() const { return offset; }
    int last_scored() const { return frames - window + offset; }
    int scored_frame(int window_start) const { return window_start + offset; }
    // Directly scored frame whose value frame t carries.
    int source_frame(int t) const;
};

WindowAssignment assign_windows(int frames, int window = kScoreWindow, int offset = kScoredOffset);

// Expands one value per window into one value per frame with edge replication.
std::vector<double> spread_to_frames(std::span<const double> per_window, const WindowAssignment& a);

struct ComponentSeries {
    std::vector<double> raw;         // per frame, before normalisation (PSNR dB, flow MSE)
    std::vector<double> normalized;  // per frame, in [0, 1]
};

struct ScoreOptions {
    PsnrPeak peak = PsnrPeak::ReconstructionMax;
    int batch = 8;  // windows per inference call
};

ComponentSeries score_recon(const VideoClip& video, const Autoencoder<float>& ae, const ScoreOptions& options = {});

// `flow` is the video's T-1 map series; it is padded to one map per frame.
ComponentSeries score_flow(const FlowField& flow, const Autoencoder<float>& ae, const FlowCodec& codec,
                           const ScoreOptions& options = {});
ComponentSeries score_flow(const VideoClip& video, const Autoencoder<float>& ae, const FlowBackend& backend,
                           const FlowCodec& codec, const ScoreOptions& options = {});

std::vector<double> score_semantic(const Tensorf& features, const Discriminator<float>& disc);
std::vector<double> score_semantic(const VideoClip& video, const FeatureAdapter& adapter,
                                   const Discriminator<float>& disc);

struct AggWeights {
    double eta1 = 0.65, eta2 = 0.25, eta3 = 0.1;

    void validate() const;
    // eta3 = 0 with eta1 and eta2 rescaled to sum to 1.
    AggWeights without_discriminator() const;
    bool uses_discriminator() const { return eta3 > 0.0; }
    friend bool operator==(const AggWeights&, const AggWeights&) = default;
};

// Named presets: ped2, avenue, shanghai, ubnormal.
AggWeights weight_profile(const std::string& name);
std::vector<std::string> weight_profile_names();

std::vector<double> aggregate(std::span<const double> w1, std::span<const double> w2, std::span<const double> w3,
                              const AggWeights& weights);

struct ScoreSeries {
    std::string video_id;
    std::vector<double> w1, w2, w3, agg;
    std::vector<double> psnr_db, flow_mse;
};

nlohmann::json to_json(const ScoreSeries& s, const AggWeights& weights);
ScoreSeries score_series_from_json(const nlohmann::json& j);

// Writes <out>/scores/<video_id>.json per series and <out>/scores_index.json.
std::filesystem::path export_scores(const std::filesystem::path& out, const std::vector<ScoreSeries>& series,
                                    const AggWeights& weights, const nlohmann::json& config_echo);

}  // namespace pavad
