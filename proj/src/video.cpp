#include "pavad/video.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace pavad {

std::string shape_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

VideoClip::VideoClip(Tensorf frames, std::string video_id, double fps)
    : frames_(std::move(frames)), video_id_(std::move(video_id)), fps_(fps) {
    require(frames_.rank() == 4, ErrorKind::Shape, "clip must be T x C x H x W");
    require(frames_.dim(0) >= 1, ErrorKind::Shape, "clip needs at least one frame");
    require(frames_.dim(1) == kChannels, ErrorKind::Shape, "clip must have 3 channels");
    require(frames_.dim(2) % kSpatialMultiple == 0 && frames_.dim(3) % kSpatialMultiple == 0 && frames_.dim(2) > 0 &&
                frames_.dim(3) > 0,
            ErrorKind::Shape, "clip height/width must be positive multiples of 16, got " + shape_string(frames_.shape()));
    require(fps_ > 0, ErrorKind::Shape, "fps must be positive");
    for (float v : frames_.values())
        require(v >= -1.0f && v <= 1.0f, ErrorKind::Shape, "clip values must lie in [-1, 1]");
}

Tensorf VideoClip::frame(int t) const {
    require(t >= 0 && t < length(), ErrorKind::Shape, "frame index out of range");
    const std::size_t n = frame_size();
    const auto begin = frames_.storage().begin() + static_cast<std::ptrdiff_t>(t * n);
    return Tensorf({kChannels, height(), width()}, std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(n)));
}

VideoClip VideoClip::slice(int begin, int count) const {
    require(begin >= 0 && count >= 1 && begin + count <= length(), ErrorKind::Windowing, "slice out of range");
    const std::size_t n = frame_size();
    const auto first = frames_.storage().begin() + static_cast<std::ptrdiff_t>(begin * n);
    Tensorf out({count, kChannels, height(), width()},
                std::vector<float>(first, first + static_cast<std::ptrdiff_t>(count * n)));
    return VideoClip(std::move(out), video_id_, fps_);
}

const char* to_string(Split split) { return split == Split::Train ? "train" : "test"; }

float from_byte(unsigned char b) { return static_cast<float>(b) / 127.5f - 1.0f; }

unsigned char to_byte(float v) {
    const float scaled = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f);
    return static_cast<unsigned char>(std::clamp(scaled, 0.0f, 255.0f));
}

namespace {

bool is_image(const fs::path& p) {
    static const std::set<std::string> exts = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm", ".pgm"};
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return exts.count(ext) > 0;
}

}  // namespace

VideoClip load_clip(const fs::path& frame_directory, int height, int width, std::string video_id) {
    require(fs::is_directory(frame_directory), ErrorKind::Ingestion,
            "not a directory: " + frame_directory.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(frame_directory))
        if (entry.is_regular_file() && is_image(entry.path())) files.push_back(entry.path());
    require(!files.empty(), ErrorKind::Ingestion, "no image frames in " + frame_directory.string());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

    const int t_count = static_cast<int>(files.size());
    Tensorf frames({t_count, kChannels, height, width});
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    for (int t = 0; t < t_count; ++t) {
        cv::Mat img = cv::imread(files[t].string(), cv::IMREAD_COLOR);
        require(!img.empty(), ErrorKind::Ingestion, "cannot read frame " + files[t].string());
        if (img.rows != height || img.cols != width) cv::resize(img, img, cv::Size(width, height), 0, 0, cv::INTER_AREA);
        cv::cvtColor(img, img, cv::COLOR_BGR2RGB);
        float* dst = frames.data() + static_cast<std::size_t>(t) * kChannels * plane;
        for (int y = 0; y < height; ++y) {
            const auto* row = img.ptr<cv::Vec3b>(y);
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < kChannels; ++c) dst[c * plane + y * width + x] = from_byte(row[x][c]);
        }
    }
    if (video_id.empty()) video_id = frame_directory.filename().string();
    return VideoClip(std::move(frames), std::move(video_id));
}

int window_count(int total, int length, int stride) {
    require(stride >= 1, ErrorKind::Windowing, "stride must be >= 1");
    require(length >= 1 && length <= total, ErrorKind::Windowing,
            "window length " + std::to_string(length) + " exceeds clip length " + std::to_string(total));
    return (total - length) / stride + 1;
}

std::vector<VideoClip> windows(const VideoClip& clip, int length, int stride) {
    const int n = window_count(clip.length(), length, stride);
    std::vector<VideoClip> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) out.push_back(clip.slice(k * stride, length));
    return out;
}

DatasetIndex scan_dataset(const fs::path& root, Split split) {
    const fs::path dir = root / to_string(split);
    require(fs::is_directory(dir), ErrorKind::Ingestion, "missing split directory " + dir.string());
    DatasetIndex index;
    index.split = split;
    index.root = root;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_directory()) continue;
        DatasetEntry e;
        e.video_id = entry.path().filename().string();
        e.frame_directory = entry.path();
        if (split == Split::Test) {
            const fs::path label = root / "labels" / (e.video_id + ".json");
            if (fs::exists(label)) e.label_file = label;
        }
        index.entries.push_back(std::move(e));
    }
    std::sort(index.entries.begin(), index.entries.end(),
              [](const DatasetEntry& a, const DatasetEntry& b) { return a.video_id < b.video_id; });
    return index;
}

LabelTrack load_labels(const fs::path& file, std::string video_id) {
    std::ifstream in(file);
    require(in.good(), ErrorKind::Ingestion, "cannot open label file " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Ingestion, "malformed label file " + file.string() + ": " + e.what());
    }
    require(j.is_array(), ErrorKind::Ingestion, "label file must hold an integer array: " + file.string());
    LabelTrack track;
    track.video_id = video_id.empty() ? file.stem().string() : std::move(video_id);
    for (const auto& v : j) {
        require(v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1), ErrorKind::Label,
                "labels must be 0/1 in " + file.string());
        track.labels.push_back(v.get<int>());
    }
    return track;
}

void save_labels(const fs::path& file, const LabelTrack& track) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file);
    out << nlohmann::json(track.labels).dump() << '\n';
}

void write_frames(const fs::path& directory, const VideoClip& clip) {
    fs::create_directories(directory);
    const int h = clip.height(), w = clip.width();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int t = 0; t < clip.length(); ++t) {
        cv::Mat img(h, w, CV_8UC3);
        const float* src = clip.frames().data() + static_cast<std::size_t>(t) * kChannels * plane;
        for (int y = 0; y < h; ++y) {
            auto* row = img.ptr<cv::Vec3b>(y);
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < kChannels; ++c) row[x][2 - c] = to_byte(src[c * plane + y * w + x]);
        }
        std::ostringstream name;
        name << std::setw(4) << std::setfill('0') << t << ".png";
        require(cv::imwrite((directory / name.str()).string(), img), ErrorKind::Ingestion,
                "cannot write frame into " + directory.string());
    }
}

}  // namespace pavad
