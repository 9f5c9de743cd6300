#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "pavad/video.hpp"

namespace testutil {

inline pavad::Tensorf random_tensor(std::vector<int> shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    pavad::Tensorf t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

inline pavad::VideoClip random_clip(int frames, int h, int w, std::uint64_t seed, std::string id = "clip") {
    return pavad::VideoClip(random_tensor({frames, pavad::kChannels, h, w}, seed), std::move(id));
}

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("pavad_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
