#include "pavad/features.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pavad/io.hpp"

namespace pavad {

Tensorf FileFeatureAdapter::extract(const VideoClip& video) const {
    const auto file = file_for(video.video_id());
    require(std::filesystem::exists(file), ErrorKind::Config, "missing feature file " + file.string());
    Tensorf f = read_array(file);
    require(f.rank() == 2 && f.dim(1) == kFeatureDim, ErrorKind::Shape,
            "feature file " + file.string() + " must hold N x 512, got " + shape_string(f.shape()));
    require(f.dim(0) == video.length(), ErrorKind::Shape,
            "feature file " + file.string() + " has " + std::to_string(f.dim(0)) + " rows for " +
                std::to_string(video.length()) + " frames");
    return f;
}

BuiltinFeatureAdapter::BuiltinFeatureAdapter() : projection_(static_cast<std::size_t>(kFeatureDim) * kRawDim) {
    std::mt19937_64 rng(0x5eed'f00dULL);
    std::normal_distribution<float> normal(0.0f, 1.0f / std::sqrt(static_cast<float>(kRawDim)));
    for (float& v : projection_) v = normal(rng);
}

std::vector<float> BuiltinFeatureAdapter::describe(const VideoClip& video, int t, int neighbour) const {
    const int H = video.height(), W = video.width();
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const float* cur = video.frames().data() + static_cast<std::size_t>(t) * kChannels * plane;
    const float* nb = video.frames().data() + static_cast<std::size_t>(neighbour) * kChannels * plane;
    auto lum = [&](const float* f, int y, int x) {
        const std::size_t i = static_cast<std::size_t>(y) * W + x;
        return 0.299f * f[i] + 0.587f * f[plane + i] + 0.114f * f[2 * plane + i];
    };

    std::vector<float> d;
    d.reserve(kRawDim);
    // 4x4 grid: colour means (48), gradient energy (16), temporal change (16).
    std::vector<float> colour(48, 0.0f), grad(16, 0.0f), motion(16, 0.0f);
    // 8x8 grid luminance means (64); colour histogram 3 x 8 (24).
    std::vector<float> fine(64, 0.0f), hist(24, 0.0f);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int g4 = (y * 4 / H) * 4 + (x * 4 / W);
            const int g8 = (y * 8 / H) * 8 + (x * 8 / W);
            const std::size_t i = static_cast<std::size_t>(y) * W + x;
            for (int c = 0; c < kChannels; ++c) {
                const float v = cur[c * plane + i];
                colour[g4 * 3 + c] += v;
                const int bin = std::clamp(static_cast<int>((v + 1.0f) * 4.0f), 0, 7);
                hist[c * 8 + bin] += 1.0f;
            }
            const float l = lum(cur, y, x);
            fine[g8] += l;
            const float gx = lum(cur, y, std::min(x + 1, W - 1)) - lum(cur, y, std::max(x - 1, 0));
            const float gy = lum(cur, std::min(y + 1, H - 1), x) - lum(cur, std::max(y - 1, 0), x);
            grad[g4] += gx * gx + gy * gy;
            motion[g4] += std::abs(l - lum(nb, y, x));
        }
    }
    const float cell4 = static_cast<float>(plane) / 16.0f, cell8 = static_cast<float>(plane) / 64.0f;
    for (float& v : colour) v /= cell4;
    for (float& v : grad) v = std::sqrt(v / cell4);
    for (float& v : motion) v = 4.0f * v / cell4;
    for (float& v : fine) v /= cell8;
    for (float& v : hist) v = 4.0f * v / static_cast<float>(plane);
    for (auto* part : {&colour, &grad, &motion, &fine, &hist}) d.insert(d.end(), part->begin(), part->end());
    return d;
}

Tensorf BuiltinFeatureAdapter::extract(const VideoClip& video) const {
    const int n = video.length();
    Tensorf out({n, kFeatureDim});
    for (int begin = 0; begin < n; begin += kChunk) {
        const int end = std::min(n, begin + kChunk);
        for (int t = begin; t < end; ++t) {
            int neighbour = t > begin ? t - 1 : std::min(t + 1, end - 1);
            const std::vector<float> raw = describe(video, t, neighbour);
            float* row = out.data() + static_cast<std::size_t>(t) * kFeatureDim;
            for (int k = 0; k < kFeatureDim; ++k) {
                const float* p = projection_.data() + static_cast<std::size_t>(k) * kRawDim;
                float s = 0.0f;
                for (int j = 0; j < kRawDim; ++j) s += p[j] * raw[static_cast<std::size_t>(j)];
                row[k] = s;
            }
        }
    }
    return out;
}

}  // namespace pavad
