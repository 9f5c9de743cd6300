#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pavad/video.hpp"

namespace pavad {

// H x W map, 1 = keep, 0 = hole to fill.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int height, int width, std::uint8_t fill = 1);

    static BinaryMask identity(int height, int width) { return BinaryMask(height, width, 1); }

    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    std::uint8_t& at(int y, int x) { return v_[static_cast<std::size_t>(y) * w_ + x]; }
    std::uint8_t at(int y, int x) const { return v_[static_cast<std::size_t>(y) * w_ + x]; }
    const std::vector<std::uint8_t>& values() const noexcept { return v_; }
    std::vector<std::uint8_t>& values() noexcept { return v_; }

    std::size_t hole_pixels() const;
    double area_ratio() const;
    bool is_identity() const { return hole_pixels() == 0; }
    bool has_both_values() const;

    // Carve a rectangular hole.
    void punch(int top, int left, int height, int width);

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int h_ = 0, w_ = 0;
    std::vector<std::uint8_t> v_;
};

struct MaskParams {
    double min_ratio = 0.05;
    double max_ratio = 0.35;
    int min_strokes = 0;
    int max_strokes = 3;
    int max_vertices = 6;
    int min_brush = 3;
    int max_brush = 9;
    int min_rects = 0;
    int max_rects = 2;
    double min_rect_frac = 0.1;  // rectangle side as a fraction of the frame side
    double max_rect_frac = 0.4;
    int max_attempts = 64;
};

// Free-form hole mask from thick polyline strokes and rectangles.
BinaryMask gen_random_mask(int height, int width, std::uint64_t seed, const MaskParams& params = {});

struct Box {
    int top = 0, left = 0, height = 0, width = 0;
    friend bool operator==(const Box&, const Box&) = default;
};

// Bounding box of the holes; nullopt for an identity mask.
std::optional<Box> hole_bounding_box(const BinaryMask& mask);

// Object segmentation adapter: returns one region mask per detected object
// (region pixels = 1), possibly none.
class Segmenter {
public:
    virtual ~Segmenter() = default;
    virtual std::vector<BinaryMask> segment(const Tensorf& frame) = 0;
};

// Connected components of pixels whose mean channel value exceeds threshold.
class ThresholdSegmenter : public Segmenter {
public:
    explicit ThresholdSegmenter(float threshold = 0.0f, int min_pixels = 4) : threshold_(threshold), min_pixels_(min_pixels) {}
    std::vector<BinaryMask> segment(const Tensorf& frame) override;

private:
    float threshold_;
    int min_pixels_;
};

// Largest detected object as a hole mask, nullopt when nothing was found.
std::optional<BinaryMask> gen_object_mask(const Tensorf& frame, Segmenter& segmenter);

enum class InpainterKind { ExternalDiffusion, BuiltinDistorter };

const char* to_string(InpainterKind kind);

// Backend answering (frame, masked frame, mask) with a full 3 x H x W frame.
class Inpainter {
public:
    virtual ~Inpainter() = default;
    virtual InpainterKind kind() const = 0;
    virtual Tensorf fill(const Tensorf& frame, const Tensorf& masked, const Tensorf& mask, std::uint64_t seed) = 0;
    virtual bool concurrent_safe() const { return true; }
};

// Hole-neighbourhood mean per channel plus seeded uniform noise.
class BuiltinDistorter : public Inpainter {
public:
    explicit BuiltinDistorter(float noise_amplitude = 0.5f, int ring = 3) : amplitude_(noise_amplitude), ring_(ring) {}
    InpainterKind kind() const override { return InpainterKind::BuiltinDistorter; }
    Tensorf fill(const Tensorf& frame, const Tensorf& masked, const Tensorf& mask, std::uint64_t seed) override;

private:
    float amplitude_;
    int ring_;
};

// Runs `<executable> <request_dir> <steps> <seed>`; the executable reads frame.bin,
// masked.bin and mask.bin and writes out.bin (array file format, see io.hpp).
class SubprocessInpainter : public Inpainter {
public:
    SubprocessInpainter(fs::path executable, int inference_steps = 50, int timeout_s = 600);
    InpainterKind kind() const override { return InpainterKind::ExternalDiffusion; }
    Tensorf fill(const Tensorf& frame, const Tensorf& masked, const Tensorf& mask, std::uint64_t seed) override;
    bool concurrent_safe() const override { return false; }
    int inference_steps() const noexcept { return steps_; }

private:
    fs::path exe_;
    int steps_;
    int timeout_s_;
};

// Fills the holes of one 3 x H x W frame and composites m*x + (1-m)*fill.
Tensorf inpaint_frame(const Tensorf& frame, const BinaryMask& mask, Inpainter& inpainter, std::uint64_t seed);

enum class MaskSource { Random, Segmentation };

const char* to_string(MaskSource source);
MaskSource parse_mask_source(const std::string& name);

struct SpatialPAOptions {
    MaskSource mask_source = MaskSource::Random;
    bool shared_mask = true;  // one mask per clip, else one per frame
    MaskParams mask_params{};
    Segmenter* segmenter = nullptr;  // required for MaskSource::Segmentation
};

struct SpatialPA {
    VideoClip clip;
    std::vector<BinaryMask> masks;  // one per frame
    std::string source_video_id;
    std::uint64_t seed = 0;
    MaskSource mask_source = MaskSource::Random;
    InpainterKind backend = InpainterKind::BuiltinDistorter;
};

SpatialPA make_spatial_pa(const VideoClip& clip, std::uint64_t seed, Inpainter& inpainter,
                          const SpatialPAOptions& options = {});

// Same, with caller-provided masks (one per frame).
SpatialPA make_spatial_pa(const VideoClip& clip, std::vector<BinaryMask> masks, std::uint64_t seed,
                          Inpainter& inpainter);

}  // namespace pavad
