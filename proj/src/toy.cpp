#include "pavad/toy.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <tuple>

namespace pavad {

const char* to_string(AnomalyRecipe recipe) {
    switch (recipe) {
        case AnomalyRecipe::SpeedJump: return "speed-jump";
        case AnomalyRecipe::ForeignTexture: return "foreign-texture-insert";
        case AnomalyRecipe::ShapeSwap: return "shape-swap";
    }
    return "unknown";
}

AnomalyRecipe parse_recipe(const std::string& name) {
    if (name == "speed-jump") return AnomalyRecipe::SpeedJump;
    if (name == "foreign-texture-insert" || name == "foreign-texture") return AnomalyRecipe::ForeignTexture;
    if (name == "shape-swap") return AnomalyRecipe::ShapeSwap;
    fail(ErrorKind::Spec, "unknown anomaly recipe '" + name + "'");
}

void ToySpec::validate() const {
    require(height > 0 && width > 0 && height % kSpatialMultiple == 0 && width % kSpatialMultiple == 0,
            ErrorKind::Spec, "toy canvas must be a positive multiple of 16");
    require(n_train_videos >= 0 && n_test_videos >= 0, ErrorKind::Spec, "video counts must be non-negative");
    require(frames_per_video >= 1 && test_frames_per_video >= 1, ErrorKind::Spec, "videos need frames");
    require(min_objects >= 1 && max_objects >= min_objects, ErrorKind::Spec, "bad object count range");
    require(min_speed >= 1 && max_speed >= min_speed, ErrorKind::Spec, "bad speed range");
    require(object_size >= 4 && object_size < std::min(height, width) / 2, ErrorKind::Spec, "bad object size");
    require(speed_jump_factor >= 2, ErrorKind::Spec, "speed jump factor must be >= 2");
    require(min_span >= 1 && max_span >= min_span && max_span < test_frames_per_video, ErrorKind::Spec,
            "bad anomaly span range");
    require(anomaly_free_test_videos >= 0 && anomaly_free_test_videos <= n_test_videos, ErrorKind::Spec,
            "anomaly-free count exceeds test videos");
    if (fixed_span)
        require(fixed_span->first >= 0 && fixed_span->second >= fixed_span->first &&
                    fixed_span->second < test_frames_per_video,
                ErrorKind::Spec, "fixed anomaly span outside the test videos");
    require(!recipes.empty() || anomaly_free_test_videos == n_test_videos, ErrorKind::Spec,
            "anomalous test videos need at least one recipe");
}

namespace {

using Rgb = std::array<float, 3>;

// Muted palette for normal objects.
constexpr std::array<Rgb, 4> kPalette = {{
    {0.6f, -0.2f, -0.4f},
    {-0.4f, -0.1f, 0.6f},
    {0.5f, 0.4f, -0.5f},
    {-0.3f, 0.5f, 0.0f},
}};

struct Sprite {
    int x0 = 0, y0 = 0;  // position at frame 0
    int vx = 0, vy = 0;
    Rgb a{}, b{};
    bool vertical_stripes = true;
    int period = 3;
    bool disk = false;
    std::vector<Rgb> noise;  // non-empty for foreign textures
};

class Canvas {
public:
    Canvas(int h, int w) : h_(h), w_(w), data_(static_cast<std::size_t>(3) * h * w) {}

    void set(int y, int x, const Rgb& c) {
        if (y < 0 || y >= h_ || x < 0 || x >= w_) return;
        for (int ch = 0; ch < 3; ++ch) data_[(static_cast<std::size_t>(ch) * h_ + y) * w_ + x] = c[ch];
    }
    std::vector<float>& data() { return data_; }

private:
    int h_, w_;
    std::vector<float> data_;
};

void draw(Canvas& canvas, const Sprite& s, int x, int y, int size) {
    const float r = size / 2.0f;
    for (int v = 0; v < size; ++v) {
        for (int u = 0; u < size; ++u) {
            if (s.disk) {
                const float du = u + 0.5f - r, dv = v + 0.5f - r;
                if (du * du + dv * dv > r * r) continue;
            }
            Rgb c;
            if (!s.noise.empty()) {
                c = s.noise[static_cast<std::size_t>(v) * size + u];
            } else {
                const int coord = s.vertical_stripes ? u : v;
                c = (coord / s.period) % 2 == 0 ? s.a : s.b;
            }
            canvas.set(y + v, x + u, c);
        }
    }
}

std::vector<float> make_background(int h, int w, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> phase(0.0f, 6.2831853f);
    std::uniform_real_distribution<float> freq(0.08f, 0.3f);
    std::vector<float> bg(static_cast<std::size_t>(3) * h * w);
    const float p1 = phase(rng), p2 = phase(rng), f1 = freq(rng), f2 = freq(rng);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float base = -0.55f + 0.12f * std::sin(f1 * x + p1) * std::cos(f2 * y + p2);
            for (int c = 0; c < 3; ++c)
                bg[(static_cast<std::size_t>(c) * h + y) * w + x] = base + 0.04f * static_cast<float>(c);
        }
    return bg;
}

Sprite random_sprite(const ToySpec& spec, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> speed(spec.min_speed, spec.max_speed);
    std::uniform_int_distribution<int> axis(0, 2);
    std::uniform_int_distribution<int> sign(0, 1);
    std::uniform_int_distribution<int> palette(0, static_cast<int>(kPalette.size()) - 1);
    std::uniform_int_distribution<int> period(2, 4);
    std::uniform_int_distribution<int> cx(0, spec.width - spec.object_size);
    std::uniform_int_distribution<int> cy(0, spec.height - spec.object_size);

    Sprite s;
    const int sp = speed(rng);
    const int ax = axis(rng);
    s.vx = (ax != 1) ? sp * (sign(rng) ? 1 : -1) : 0;
    s.vy = (ax != 0) ? sp * (sign(rng) ? 1 : -1) : 0;
    s.a = kPalette[palette(rng)];
    s.b = kPalette[palette(rng)];
    for (auto& c : s.b) c = -c * 0.5f;
    s.vertical_stripes = sign(rng) == 1;
    s.period = period(rng);
    s.x0 = cx(rng);
    s.y0 = cy(rng);
    return s;
}

// Moves by v * k and reflects off [0, extent], flipping v on contact.
void bounce(int& pos, int& v, int k, int extent) {
    pos += v * k;
    if (pos < 0) {
        pos = -pos;
        v = -v;
    } else if (pos > extent) {
        pos = 2 * extent - pos;
        v = -v;
    }
}

std::string video_name(const char* prefix, int i) {
    std::ostringstream os;
    os << prefix << std::setw(3) << std::setfill('0') << i;
    return os.str();
}

ToyVideo render(const ToySpec& spec, const std::vector<float>& background, int frames, std::string id,
                std::mt19937_64& rng, std::optional<AnomalyRecipe> recipe) {
    std::uniform_int_distribution<int> n_obj(spec.min_objects, spec.max_objects);
    std::vector<Sprite> sprites;
    const int count = n_obj(rng);
    for (int i = 0; i < count; ++i) sprites.push_back(random_sprite(spec, rng));

    ToyVideo video;
    video.labels.video_id = id;
    video.labels.labels.assign(frames, 0);
    video.recipe = recipe;

    std::optional<Sprite> foreign;
    if (recipe) {
        std::uniform_int_distribution<int> span_len(spec.min_span, spec.max_span);
        const int len = span_len(rng);
        // Keep the span inside the directly scored region when possible.
        const int lo = std::min(frames - len, 8);
        const int hi = std::max(lo, frames - len - 7);
        std::uniform_int_distribution<int> start(lo, hi);
        video.span_begin = start(rng);
        video.span_end = video.span_begin + len - 1;
        if (spec.fixed_span) std::tie(video.span_begin, video.span_end) = *spec.fixed_span;
        for (int t = video.span_begin; t <= video.span_end; ++t) video.labels.labels[t] = 1;

        const int size = spec.object_size;
        if (*recipe == AnomalyRecipe::ForeignTexture) {
            std::uniform_real_distribution<float> u(-1.0f, 1.0f);
            std::uniform_int_distribution<int> px(size / 2, spec.width - size - size / 2);
            std::uniform_int_distribution<int> py(size / 2, spec.height - size - size / 2);
            Sprite f;
            f.noise.resize(static_cast<std::size_t>(size) * size);
            for (auto& c : f.noise) c = {u(rng), u(rng), u(rng)};
            f.x0 = px(rng);
            f.y0 = py(rng);
            foreign = f;
        }
    }

    Tensorf out({frames, kChannels, spec.height, spec.width});
    std::vector<int> xs(sprites.size()), ys(sprites.size());
    for (std::size_t i = 0; i < sprites.size(); ++i) {
        xs[i] = sprites[i].x0;
        ys[i] = sprites[i].y0;
    }
    const std::size_t frame_len = static_cast<std::size_t>(kChannels) * spec.height * spec.width;
    for (int t = 0; t < frames; ++t) {
        const bool in_span = recipe && t >= video.span_begin && t <= video.span_end;
        Canvas canvas(spec.height, spec.width);
        canvas.data() = background;
        for (std::size_t i = 0; i < sprites.size(); ++i) {
            Sprite s = sprites[i];
            if (i == 0 && in_span && *recipe == AnomalyRecipe::ShapeSwap) s.disk = true;
            draw(canvas, s, xs[i], ys[i], spec.object_size);
        }
        if (foreign && in_span) draw(canvas, *foreign, foreign->x0, foreign->y0, spec.object_size);
        std::copy(canvas.data().begin(), canvas.data().end(), out.data() + t * frame_len);

        for (std::size_t i = 0; i < sprites.size(); ++i) {
            // Velocity applied between t and t + 1; the jump covers transitions out of span frames.
            const int k = (i == 0 && in_span && *recipe == AnomalyRecipe::SpeedJump) ? spec.speed_jump_factor : 1;
            bounce(xs[i], sprites[i].vx, k, spec.width - spec.object_size);
            bounce(ys[i], sprites[i].vy, k, spec.height - spec.object_size);
        }
    }
    for (auto& v : out.values()) v = from_byte(to_byte(v));  // quantize like the stored PNGs
    video.clip = VideoClip(std::move(out), std::move(id));
    return video;
}

}  // namespace

ToyDataset generate_toy(const ToySpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const std::vector<float> background = make_background(spec.height, spec.width, rng);
    ToyDataset ds;
    for (int i = 0; i < spec.n_train_videos; ++i) {
        std::mt19937_64 vr(rng());
        ds.train.push_back(render(spec, background, spec.frames_per_video, video_name("train_", i), vr, std::nullopt));
    }
    const int anomalous = spec.n_test_videos - spec.anomaly_free_test_videos;
    for (int i = 0; i < spec.n_test_videos; ++i) {
        std::mt19937_64 vr(rng());
        std::optional<AnomalyRecipe> recipe;
        if (i < anomalous) recipe = spec.recipes[static_cast<std::size_t>(i) % spec.recipes.size()];
        ds.test.push_back(render(spec, background, spec.test_frames_per_video, video_name("test_", i), vr, recipe));
    }
    return ds;
}

ToyIndex make_toy_dataset(const ToySpec& spec, const fs::path& root) {
    const ToyDataset ds = generate_toy(spec);
    for (const auto& v : ds.train) write_frames(root / "train" / v.clip.video_id(), v.clip);
    for (const auto& v : ds.test) {
        write_frames(root / "test" / v.clip.video_id(), v.clip);
        save_labels(root / "labels" / (v.clip.video_id() + ".json"), v.labels);
    }
    ToyIndex index;
    index.train = scan_dataset(root, Split::Train);
    index.test = scan_dataset(root, Split::Test);
    for (const auto& v : ds.test) index.labels.push_back(v.labels);
    return index;
}

}  // namespace pavad
