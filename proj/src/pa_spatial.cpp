#include "pavad/pa_spatial.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <sstream>

#include <opencv2/imgproc.hpp>
#include <unistd.h>

#include "pavad/io.hpp"

namespace pavad {

BinaryMask::BinaryMask(int height, int width, std::uint8_t fill)
    : h_(height), w_(width), v_(static_cast<std::size_t>(height) * width, fill) {
    require(height > 0 && width > 0, ErrorKind::Mask, "mask dimensions must be positive");
}

std::size_t BinaryMask::hole_pixels() const {
    return static_cast<std::size_t>(std::count(v_.begin(), v_.end(), std::uint8_t{0}));
}

double BinaryMask::area_ratio() const { return v_.empty() ? 0.0 : static_cast<double>(hole_pixels()) / v_.size(); }

bool BinaryMask::has_both_values() const {
    const std::size_t holes = hole_pixels();
    return holes > 0 && holes < v_.size();
}

void BinaryMask::punch(int top, int left, int height, int width) {
    for (int y = std::max(0, top); y < std::min(h_, top + height); ++y)
        for (int x = std::max(0, left); x < std::min(w_, left + width); ++x) at(y, x) = 0;
}

namespace {

BinaryMask from_hole_mat(const cv::Mat& holes) {
    BinaryMask m(holes.rows, holes.cols);
    for (int y = 0; y < holes.rows; ++y) {
        const auto* row = holes.ptr<std::uint8_t>(y);
        for (int x = 0; x < holes.cols; ++x) m.at(y, x) = row[x] ? 0 : 1;
    }
    return m;
}

void draw_strokes(cv::Mat& holes, int count, const MaskParams& p, std::mt19937_64& rng) {
    const int h = holes.rows, w = holes.cols;
    std::uniform_int_distribution<int> vertices(1, std::max(1, p.max_vertices));
    std::uniform_int_distribution<int> brush(p.min_brush, std::max(p.min_brush, p.max_brush));
    std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> length(std::min(h, w) / 8.0, std::min(h, w) / 3.0);
    for (int s = 0; s < count; ++s) {
        cv::Point pt(px(rng), py(rng));
        const int nv = vertices(rng);
        for (int v = 0; v < nv; ++v) {
            const double a = angle(rng), len = length(rng);
            const int thickness = brush(rng);
            cv::Point next(std::clamp(static_cast<int>(pt.x + len * std::cos(a)), 0, w - 1),
                           std::clamp(static_cast<int>(pt.y + len * std::sin(a)), 0, h - 1));
            cv::line(holes, pt, next, cv::Scalar(255), thickness);
            cv::circle(holes, next, thickness / 2, cv::Scalar(255), cv::FILLED);
            pt = next;
        }
    }
}

void draw_rects(cv::Mat& holes, int count, const MaskParams& p, std::mt19937_64& rng) {
    const int h = holes.rows, w = holes.cols;
    std::uniform_real_distribution<double> frac(p.min_rect_frac, std::max(p.min_rect_frac, p.max_rect_frac));
    for (int r = 0; r < count; ++r) {
        const int rh = std::clamp(static_cast<int>(std::lround(frac(rng) * h)), 1, h);
        const int rw = std::clamp(static_cast<int>(std::lround(frac(rng) * w)), 1, w);
        std::uniform_int_distribution<int> top(0, h - rh), left(0, w - rw);
        const int y = top(rng), x = left(rng);
        holes(cv::Rect(x, y, rw, rh)).setTo(255);
    }
}

}  // namespace

BinaryMask gen_random_mask(int height, int width, std::uint64_t seed, const MaskParams& p) {
    require(height >= 16 && width >= 16, ErrorKind::Mask, "mask dimensions must be >= 16");
    require(p.min_ratio >= 0.0 && p.max_ratio < 1.0 && p.min_ratio <= p.max_ratio, ErrorKind::Mask,
            "infeasible hole ratio bounds");
    const double total = static_cast<double>(height) * width;
    const auto lo_px = static_cast<long>(std::ceil(std::max(p.min_ratio * total, 1.0)));
    const auto hi_px = static_cast<long>(std::floor(p.max_ratio * total));
    require(lo_px <= hi_px, ErrorKind::Mask, "hole ratio bounds admit no pixel count");
    require(p.min_strokes >= 0 && p.max_strokes >= p.min_strokes && p.min_rects >= 0 && p.max_rects >= p.min_rects,
            ErrorKind::Mask, "bad stroke/rectangle count ranges");
    require(p.min_rect_frac > 0 && p.max_rect_frac <= 1.0, ErrorKind::Mask, "rectangle fractions must lie in (0, 1]");

    for (int attempt = 0; attempt < p.max_attempts; ++attempt) {
        std::mt19937_64 rng(derive_seed(seed, attempt));
        std::uniform_int_distribution<int> n_strokes(p.min_strokes, p.max_strokes), n_rects(p.min_rects, p.max_rects);
        int strokes = n_strokes(rng), rects = n_rects(rng);
        if (strokes + rects == 0) (p.max_strokes > 0 ? strokes : rects) = 1;
        cv::Mat holes = cv::Mat::zeros(height, width, CV_8U);
        draw_strokes(holes, strokes, p, rng);
        draw_rects(holes, rects, p, rng);
        const auto n = static_cast<long>(cv::countNonZero(holes));
        if (n >= lo_px && n <= hi_px) return from_hole_mat(holes);
    }

    // Deterministic fallback: a centred rectangle at the middle of the ratio band.
    const double target = 0.5 * (lo_px + hi_px);
    int rh = std::clamp(static_cast<int>(std::lround(std::sqrt(target * height / width))), 1, height);
    int rw = std::clamp(static_cast<int>(std::lround(target / rh)), 1, width);
    BinaryMask m(height, width);
    m.punch((height - rh) / 2, (width - rw) / 2, rh, rw);
    const auto n = static_cast<long>(m.hole_pixels());
    require(n >= lo_px && n <= hi_px, ErrorKind::Mask, "could not realise a mask inside the ratio bounds");
    return m;
}

std::optional<Box> hole_bounding_box(const BinaryMask& mask) {
    int top = mask.height(), left = mask.width(), bottom = -1, right = -1;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(y, x) == 0) {
                top = std::min(top, y);
                bottom = std::max(bottom, y);
                left = std::min(left, x);
                right = std::max(right, x);
            }
    if (bottom < 0) return std::nullopt;
    return Box{top, left, bottom - top + 1, right - left + 1};
}

std::vector<BinaryMask> ThresholdSegmenter::segment(const Tensorf& frame) {
    require(frame.rank() == 3 && frame.dim(0) == kChannels, ErrorKind::Segmentation, "segmenter expects 3 x H x W");
    const int h = frame.dim(1), w = frame.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    cv::Mat fg = cv::Mat::zeros(h, w, CV_8U);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const float lum = (frame[i] + frame[plane + i] + frame[2 * plane + i]) / 3.0f;
            if (lum > threshold_) fg.at<std::uint8_t>(y, x) = 1;
        }
    cv::Mat labels, stats, centroids;
    const int n = cv::connectedComponentsWithStats(fg, labels, stats, centroids, 8, CV_32S);
    std::vector<BinaryMask> regions;
    for (int c = 1; c < n; ++c) {
        if (stats.at<int>(c, cv::CC_STAT_AREA) < min_pixels_) continue;
        BinaryMask region(h, w, 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (labels.at<int>(y, x) == c) region.at(y, x) = 1;
        regions.push_back(std::move(region));
    }
    return regions;
}

std::optional<BinaryMask> gen_object_mask(const Tensorf& frame, Segmenter& segmenter) {
    std::vector<BinaryMask> regions;
    try {
        regions = segmenter.segment(frame);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::Segmentation, e.what());
    }
    const BinaryMask* best = nullptr;
    std::size_t best_area = 0;
    for (const auto& r : regions) {
        require(r.height() == frame.dim(1) && r.width() == frame.dim(2), ErrorKind::Segmentation,
                "segmenter returned a region of the wrong shape");
        const std::size_t area = r.values().size() - r.hole_pixels();  // region pixels are 1
        if (area > best_area) {
            best_area = area;
            best = &r;
        }
    }
    if (!best) return std::nullopt;
    BinaryMask hole(frame.dim(1), frame.dim(2));
    for (std::size_t i = 0; i < hole.values().size(); ++i) hole.values()[i] = best->values()[i] ? 0 : 1;
    return hole;
}

const char* to_string(InpainterKind kind) {
    return kind == InpainterKind::ExternalDiffusion ? "external-diffusion" : "builtin-distorter";
}

Tensorf BuiltinDistorter::fill(const Tensorf& frame, const Tensorf& /*masked*/, const Tensorf& mask,
                               std::uint64_t seed) {
    const int h = frame.dim(1), w = frame.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    cv::Mat holes(h, w, CV_8U);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) holes.at<std::uint8_t>(y, x) = mask[static_cast<std::size_t>(y) * w + x] < 0.5f;
    cv::Mat grown;
    cv::dilate(holes, grown, cv::getStructuringElement(cv::MORPH_RECT, cv::Size(2 * ring_ + 1, 2 * ring_ + 1)));

    std::array<double, kChannels> sum{};
    std::size_t n_ring = 0, n_kept = 0;
    std::array<double, kChannels> kept_sum{};
    for (std::size_t i = 0; i < plane; ++i) {
        if (holes.data[i]) continue;
        for (int c = 0; c < kChannels; ++c) kept_sum[c] += frame[c * plane + i];
        ++n_kept;
        if (grown.data[i]) {
            for (int c = 0; c < kChannels; ++c) sum[c] += frame[c * plane + i];
            ++n_ring;
        }
    }
    std::array<float, kChannels> mean{};
    for (int c = 0; c < kChannels; ++c)
        mean[c] = n_ring ? static_cast<float>(sum[c] / n_ring) : (n_kept ? static_cast<float>(kept_sum[c] / n_kept) : 0.f);

    Tensorf out = frame;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> noise(-amplitude_, amplitude_);
    for (std::size_t i = 0; i < plane; ++i) {
        if (!holes.data[i]) continue;
        for (int c = 0; c < kChannels; ++c) out[c * plane + i] = std::clamp(mean[c] + noise(rng), -1.0f, 1.0f);
    }
    return out;
}

SubprocessInpainter::SubprocessInpainter(fs::path executable, int inference_steps, int timeout_s)
    : exe_(std::move(executable)), steps_(inference_steps), timeout_s_(timeout_s) {
    require(fs::exists(exe_), ErrorKind::Config, "inpainter executable not found: " + exe_.string());
    require(steps_ >= 1, ErrorKind::Config, "inference steps must be >= 1");
}

Tensorf SubprocessInpainter::fill(const Tensorf& frame, const Tensorf& masked, const Tensorf& mask,
                                  std::uint64_t seed) {
    static std::atomic<int> counter{0};
    const fs::path dir = fs::temp_directory_path() /
                         ("pavad_inpaint_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
    write_array(dir / "frame.bin", frame);
    write_array(dir / "masked.bin", masked);
    write_array(dir / "mask.bin", mask);
    std::ostringstream cmd;
    cmd << "timeout " << timeout_s_ << " '" << exe_.string() << "' '" << dir.string() << "' " << steps_ << ' ' << seed;
    const int rc = std::system(cmd.str().c_str());
    Tensorf out;
    try {
        require(rc == 0, ErrorKind::InpainterContract, "inpainter exited with status " + std::to_string(rc));
        require(fs::exists(dir / "out.bin"), ErrorKind::InpainterContract, "inpainter produced no out.bin");
        out = read_array(dir / "out.bin");
    } catch (...) {
        fs::remove_all(dir);
        throw;
    }
    fs::remove_all(dir);
    return out;
}

Tensorf inpaint_frame(const Tensorf& frame, const BinaryMask& mask, Inpainter& inpainter, std::uint64_t seed) {
    require(frame.rank() == 3 && frame.dim(0) == kChannels, ErrorKind::Shape, "frame must be 3 x H x W");
    require(mask.height() == frame.dim(1) && mask.width() == frame.dim(2), ErrorKind::Shape,
            "mask shape does not match frame");
    if (mask.is_identity()) return frame;

    const int h = frame.dim(1), w = frame.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensorf m({1, h, w});
    for (std::size_t i = 0; i < plane; ++i) m[i] = mask.values()[i];
    Tensorf masked = frame;
    for (int c = 0; c < kChannels; ++c)
        for (std::size_t i = 0; i < plane; ++i) masked[c * plane + i] *= m[i];

    Tensorf filled = inpainter.fill(frame, masked, m, seed);
    require(filled.shape() == frame.shape(), ErrorKind::InpainterContract,
            "backend returned " + shape_string(filled.shape()) + ", expected " + shape_string(frame.shape()));

    Tensorf out = frame;
    for (int c = 0; c < kChannels; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            if (!mask.values()[i]) out[c * plane + i] = std::clamp(filled[c * plane + i], -1.0f, 1.0f);
    return out;
}

const char* to_string(MaskSource source) { return source == MaskSource::Random ? "random" : "segmentation"; }

MaskSource parse_mask_source(const std::string& name) {
    if (name == "random") return MaskSource::Random;
    if (name == "segmentation") return MaskSource::Segmentation;
    fail(ErrorKind::Config, "unknown mask source '" + name + "'");
}

namespace {

BinaryMask mask_for_frame(const Tensorf& frame, std::uint64_t seed, const SpatialPAOptions& opt) {
    if (opt.mask_source == MaskSource::Segmentation) {
        require(opt.segmenter != nullptr, ErrorKind::Segmentation, "no segmenter registered");
        if (auto m = gen_object_mask(frame, *opt.segmenter)) return *m;
    }
    return gen_random_mask(frame.dim(1), frame.dim(2), seed, opt.mask_params);
}

}  // namespace

SpatialPA make_spatial_pa(const VideoClip& clip, std::uint64_t seed, Inpainter& inpainter,
                          const SpatialPAOptions& options) {
    std::vector<BinaryMask> masks;
    masks.reserve(clip.length());
    if (options.shared_mask) {
        const BinaryMask m = mask_for_frame(clip.frame(0), derive_seed(seed, 0), options);
        masks.assign(clip.length(), m);
    } else {
        for (int t = 0; t < clip.length(); ++t) masks.push_back(mask_for_frame(clip.frame(t), derive_seed(seed, t), options));
    }
    SpatialPA pa = make_spatial_pa(clip, std::move(masks), seed, inpainter);
    pa.mask_source = options.mask_source;
    return pa;
}

SpatialPA make_spatial_pa(const VideoClip& clip, std::vector<BinaryMask> masks, std::uint64_t seed,
                          Inpainter& inpainter) {
    require(static_cast<int>(masks.size()) == clip.length(), ErrorKind::Mask, "need one mask per frame");
    Tensorf frames = clip.frames();
    const std::size_t n = clip.frame_size();
    for (int t = 0; t < clip.length(); ++t) {
        const Tensorf out = inpaint_frame(clip.frame(t), masks[t], inpainter, derive_seed(seed, 1000003, t));
        std::copy(out.values().begin(), out.values().end(), frames.data() + t * n);
    }
    SpatialPA pa;
    pa.clip = VideoClip(std::move(frames), clip.video_id(), clip.fps());
    pa.masks = std::move(masks);
    pa.source_video_id = clip.video_id();
    pa.seed = seed;
    pa.backend = inpainter.kind();
    return pa;
}

}  // namespace pavad
