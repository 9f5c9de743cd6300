#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pavad/tensor.hpp"

namespace pavad {

namespace fs = std::filesystem;

inline constexpr int kChannels = 3;
inline constexpr int kSpatialMultiple = 16;

// A T x 3 x H x W block of frames with values in [-1, 1]. Immutable once
// constructed; all transforms return new clips.
class VideoClip {
public:
    VideoClip() = default;
    VideoClip(Tensorf frames, std::string video_id, double fps = 25.0);

    const Tensorf& frames() const noexcept { return frames_; }
    const std::string& video_id() const noexcept { return video_id_; }
    double fps() const noexcept { return fps_; }

    int length() const { return frames_.dim(0); }
    int height() const { return frames_.dim(2); }
    int width() const { return frames_.dim(3); }
    std::size_t frame_size() const { return static_cast<std::size_t>(kChannels) * height() * width(); }

    // Copy of frame t as a 3 x H x W tensor.
    Tensorf frame(int t) const;
    // Frames [begin, begin + count) as a new clip sharing the id.
    VideoClip slice(int begin, int count) const;

private:
    Tensorf frames_;
    std::string video_id_;
    double fps_ = 25.0;
};

enum class Split { Train, Test };

const char* to_string(Split split);

struct DatasetEntry {
    std::string video_id;
    fs::path frame_directory;
    std::optional<fs::path> label_file;
};

struct DatasetIndex {
    Split split = Split::Train;
    fs::path root;
    std::vector<DatasetEntry> entries;  // sorted by video_id
};

struct LabelTrack {
    std::string video_id;
    std::vector<int> labels;  // one 0/1 per frame
};

// Reads every image of a frame directory in sorted filename order, resizes
// to target (H, W), converts to RGB and maps [0, 255] onto [-1, 1].
VideoClip load_clip(const fs::path& frame_directory, int height, int width, std::string video_id = {});

// Sliding windows; window k covers frames [k * stride, k * stride + length).
std::vector<VideoClip> windows(const VideoClip& clip, int length, int stride);
int window_count(int total, int length, int stride);

// Dataset layout: <root>/<split>/<video_id>/NNNN.<ext>, labels in
// <root>/labels/<video_id>.json.
DatasetIndex scan_dataset(const fs::path& root, Split split);
LabelTrack load_labels(const fs::path& file, std::string video_id = {});
void save_labels(const fs::path& file, const LabelTrack& track);

// Writes frames as NNNN.png (8-bit RGB), creating the directory.
void write_frames(const fs::path& directory, const VideoClip& clip);

// Inverse of the [0, 255] -> [-1, 1] mapping, rounded and clamped.
unsigned char to_byte(float v);
float from_byte(unsigned char b);

}  // namespace pavad
