#pragma once

#include <filesystem>
#include <string>

#include "pavad/video.hpp"

namespace pavad {

inline constexpr int kFeatureDim = 512;

// Emits one 512-d semantic feature per frame (N x 512).
class FeatureAdapter {
public:
    virtual ~FeatureAdapter() = default;
    virtual std::string name() const = 0;
    virtual Tensorf extract(const VideoClip& video) const = 0;
};

// Precomputed features at <directory>/<video_id>.bin (array file, N x 512),
// produced offline by an external video-text model.
class FileFeatureAdapter : public FeatureAdapter {
public:
    explicit FileFeatureAdapter(std::filesystem::path directory) : dir_(std::move(directory)) {}
    std::string name() const override { return "file"; }
    Tensorf extract(const VideoClip& video) const override;
    std::filesystem::path file_for(const std::string& video_id) const { return dir_ / (video_id + ".bin"); }
    bool has(const std::string& video_id) const { return std::filesystem::exists(file_for(video_id)); }

private:
    std::filesystem::path dir_;
};

// Handcrafted appearance + motion descriptor per frame, computed over
// non-overlapping 16-frame chunks and lifted to 512-d by a fixed random
// projection. A stand-in when no external features are available.
class BuiltinFeatureAdapter : public FeatureAdapter {
public:
    static constexpr int kChunk = 16;
    static constexpr int kRawDim = 168;

    BuiltinFeatureAdapter();
    std::string name() const override { return "builtin"; }
    Tensorf extract(const VideoClip& video) const override;
    // Raw descriptor of frame t given a neighbouring frame for the motion terms.
    std::vector<float> describe(const VideoClip& video, int t, int neighbour) const;

private:
    std::vector<float> projection_;  // kFeatureDim x kRawDim
};

}  // namespace pavad
