#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <string>
#include <vector>

#include "pavad/video.hpp"

namespace pavad {

enum class AnomalyRecipe { SpeedJump, ForeignTexture, ShapeSwap };

const char* to_string(AnomalyRecipe recipe);
AnomalyRecipe parse_recipe(const std::string& name);

// Synthetic surveillance-like corpus: static textured background with striped
// rectangles moving at constant integer speed and bouncing off the canvas
// edges, so they stay fully in view. Test videos get one
// labelled anomaly span each, cycling through `recipes`.
struct ToySpec {
    int n_train_videos = 8;
    int n_test_videos = 6;
    int frames_per_video = 32;
    int test_frames_per_video = 32;
    int height = 64;
    int width = 64;
    int min_objects = 1;
    int max_objects = 2;
    int min_speed = 1;  // px/frame, per moving axis
    int max_speed = 2;
    int object_size = 12;
    int speed_jump_factor = 3;
    int min_span = 8;
    int max_span = 12;
    std::optional<std::pair<int, int>> fixed_span;  // inclusive; overrides the random span
    int anomaly_free_test_videos = 0;  // trailing test videos left clean
    std::vector<AnomalyRecipe> recipes = {AnomalyRecipe::SpeedJump, AnomalyRecipe::ForeignTexture};
    std::uint64_t seed = 7;

    void validate() const;
};

struct ToyVideo {
    VideoClip clip;
    LabelTrack labels;  // all zeros for train videos
    std::optional<AnomalyRecipe> recipe;
    int span_begin = -1;  // inclusive frame range of the injected anomaly
    int span_end = -1;
};

struct ToyDataset {
    std::vector<ToyVideo> train;
    std::vector<ToyVideo> test;
};

ToyDataset generate_toy(const ToySpec& spec);

struct ToyIndex {
    DatasetIndex train;
    DatasetIndex test;
    std::vector<LabelTrack> labels;
};

// Generates and writes the corpus in the standard dataset layout under root.
ToyIndex make_toy_dataset(const ToySpec& spec, const fs::path& root);

}  // namespace pavad
