#pragma once

#include <cstdint>
#include <optional>

#include "pavad/flow.hpp"
#include "pavad/pa_spatial.hpp"

namespace pavad {

struct PatchSpec {
    int top = 0, left = 0, height = 0, width = 0;
    friend bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

inline constexpr double kMixupAlpha = 0.4;

// lambda ~ Beta(alpha, alpha), deterministic per seed.
double sample_lambda(std::uint64_t seed, double alpha = kMixupAlpha);

// Replaces the src region of every map by lambda * src + (1 - lambda) * rnd.
// The input is left untouched.
FlowField mixup_patch(const FlowField& flow, const PatchSpec& src, const PatchSpec& rnd, double lambda);

struct TemporalPA {
    FlowField flow;
    double lambda = 1.0;
    PatchSpec src_patch;
    PatchSpec rnd_patch;
    std::uint64_t seed = 0;
};

struct TemporalPAOptions {
    bool per_map_resampling = false;  // draw (src, rnd, lambda) afresh for each flow map
};

// Perturbs a precomputed flow field. The src patch is the bounding box of the
// mask's hole, or a seeded rectangle of side [H/8, H/2] x [W/8, W/2].
TemporalPA make_temporal_pa(const FlowField& flow, const std::optional<BinaryMask>& mask, std::uint64_t seed,
                            const TemporalPAOptions& options = {});

TemporalPA make_temporal_pa(const VideoClip& clip, const FlowBackend& backend, const std::optional<BinaryMask>& mask,
                            std::uint64_t seed, const TemporalPAOptions& options = {});

}  // namespace pavad
