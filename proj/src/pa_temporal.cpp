#include "pavad/pa_temporal.hpp"

#include <algorithm>
#include <random>

#include "pavad/io.hpp"

namespace pavad {

double sample_lambda(std::uint64_t seed, double alpha) {
    std::mt19937_64 rng(mix_seed(seed));
    std::gamma_distribution<double> gamma(alpha, 1.0);
    // X / (X + Y) with X, Y ~ Gamma(alpha, 1) is Beta(alpha, alpha).
    for (;;) {
        const double x = gamma(rng), y = gamma(rng);
        if (x + y > 0.0) return x / (x + y);
    }
}

namespace {

void check_patch(const PatchSpec& p, int h, int w) {
    require(p.height >= 1 && p.width >= 1, ErrorKind::Patch, "patch must be non-empty");
    require(p.top >= 0 && p.left >= 0 && p.top + p.height <= h && p.left + p.width <= w, ErrorKind::Patch,
            "patch lies outside the flow field");
}

void mix_map(float* map, int w, const PatchSpec& src, const PatchSpec& rnd, double lambda) {
    // Read the rnd region before writing in case the two overlap.
    std::vector<float> rnd_copy(static_cast<std::size_t>(rnd.height) * rnd.width);
    for (int y = 0; y < rnd.height; ++y)
        for (int x = 0; x < rnd.width; ++x)
            rnd_copy[static_cast<std::size_t>(y) * rnd.width + x] =
                map[static_cast<std::size_t>(rnd.top + y) * w + rnd.left + x];
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            float& v = map[static_cast<std::size_t>(src.top + y) * w + src.left + x];
            if (lambda == 1.0) continue;
            const float r = rnd_copy[static_cast<std::size_t>(y) * rnd.width + x];
            if (lambda == 0.0) {
                v = r;
                continue;
            }
            // Clamping only strips rounding error; the exact combination lies in the interval.
            const double mixed = lambda * v + (1.0 - lambda) * r;
            v = static_cast<float>(std::clamp(mixed, static_cast<double>(std::min(v, r)), static_cast<double>(std::max(v, r))));
        }
}

void mix_single_map(FlowField& out, int t, const PatchSpec& src, const PatchSpec& rnd, double lambda) {
    const int h = out.height(), w = out.width();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < 2; ++c) mix_map(out.values.data() + (static_cast<std::size_t>(t) * 2 + c) * plane, w, src, rnd, lambda);
}

PatchSpec random_src(int h, int w, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> ph(std::max(1, h / 8), std::max(1, h / 2));
    std::uniform_int_distribution<int> pw(std::max(1, w / 8), std::max(1, w / 2));
    PatchSpec p;
    p.height = ph(rng);
    p.width = pw(rng);
    std::uniform_int_distribution<int> top(0, h - p.height), left(0, w - p.width);
    p.top = top(rng);
    p.left = left(rng);
    return p;
}

PatchSpec place_rnd(const PatchSpec& src, int h, int w, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> top(0, h - src.height), left(0, w - src.width);
    PatchSpec p = src;
    p.top = top(rng);
    p.left = left(rng);
    return p;
}

}  // namespace

FlowField mixup_patch(const FlowField& flow, const PatchSpec& src, const PatchSpec& rnd, double lambda) {
    require(flow.values.rank() == 4 && flow.values.dim(1) == 2, ErrorKind::Shape, "flow must be T x 2 x H x W");
    require(src.height == rnd.height && src.width == rnd.width, ErrorKind::Patch, "patch dimensions differ");
    require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::Patch, "lambda must lie in [0, 1]");
    check_patch(src, flow.height(), flow.width());
    check_patch(rnd, flow.height(), flow.width());
    FlowField out = flow;
    for (int t = 0; t < out.maps(); ++t) mix_single_map(out, t, src, rnd, lambda);
    return out;
}

TemporalPA make_temporal_pa(const FlowField& flow, const std::optional<BinaryMask>& mask, std::uint64_t seed,
                            const TemporalPAOptions& options) {
    const int h = flow.height(), w = flow.width();
    std::mt19937_64 rng(derive_seed(seed, 0x7e3));
    auto choose_src = [&]() {
        if (mask) {
            require(mask->height() == h && mask->width() == w, ErrorKind::Patch, "mask shape does not match flow");
            if (const auto box = hole_bounding_box(*mask)) return PatchSpec{box->top, box->left, box->height, box->width};
        }
        return random_src(h, w, rng);
    };

    TemporalPA pa;
    pa.seed = seed;
    pa.src_patch = choose_src();
    pa.rnd_patch = place_rnd(pa.src_patch, h, w, rng);
    pa.lambda = sample_lambda(derive_seed(seed, 0x1a));
    if (!options.per_map_resampling) {
        pa.flow = mixup_patch(flow, pa.src_patch, pa.rnd_patch, pa.lambda);
        return pa;
    }
    pa.flow = flow;
    for (int t = 0; t < flow.maps(); ++t) {
        PatchSpec src = t == 0 ? pa.src_patch : choose_src();
        PatchSpec rnd = t == 0 ? pa.rnd_patch : place_rnd(src, h, w, rng);
        const double lambda = t == 0 ? pa.lambda : sample_lambda(derive_seed(seed, 0x1a, t));
        mix_single_map(pa.flow, t, src, rnd, lambda);
    }
    return pa;
}

TemporalPA make_temporal_pa(const VideoClip& clip, const FlowBackend& backend, const std::optional<BinaryMask>& mask,
                            std::uint64_t seed, const TemporalPAOptions& options) {
    return make_temporal_pa(compute_flow(clip, backend), mask, seed, options);
}

}  // namespace pavad
