#include "pavad/training.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "pavad/io.hpp"
#include "pavad/optim.hpp"

namespace pavad {

void TrainConfig::validate() const {
    auto prob = [](double p, const char* name) {
        require(p >= 0.0 && p <= 1.0, ErrorKind::Config, std::string(name) + " must lie in [0, 1]");
    };
    prob(p_s, "p_s");
    prob(p_t, "p_t");
    require(ae_lr > 0 && disc_lr > 0, ErrorKind::Config, "learning rates must be positive");
    require(ae_epochs >= 0 && disc_epochs >= 0, ErrorKind::Config, "epoch counts must be non-negative");
    require(ae_batch >= 1 && disc_batch >= 1, ErrorKind::Config, "batch sizes must be >= 1");
    require(ae_width_divisor >= 1, ErrorKind::Config, "ae_width_divisor must be >= 1");
    require(disc_momentum >= 0 && disc_momentum < 1, ErrorKind::Config, "disc_momentum must lie in [0, 1)");
    require(disc_weight_decay >= 0, ErrorKind::Config, "disc_weight_decay must be non-negative");
    require(clip_length >= 2, ErrorKind::Config, "clip_length must be >= 2");
    require(clip_stride >= 1, ErrorKind::Config, "clip_stride must be >= 1");
    require(flow_max_px > 0, ErrorKind::Config, "flow_max_px must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"p_s", c.p_s},
            {"p_t", c.p_t},
            {"ae_lr", c.ae_lr},
            {"ae_epochs", c.ae_epochs},
            {"ae_batch", c.ae_batch},
            {"ae_width_divisor", c.ae_width_divisor},
            {"disc_lr", c.disc_lr},
            {"disc_momentum", c.disc_momentum},
            {"disc_weight_decay", c.disc_weight_decay},
            {"disc_epochs", c.disc_epochs},
            {"disc_batch", c.disc_batch},
            {"disc_include_temporal", c.disc_include_temporal},
            {"clip_length", c.clip_length},
            {"clip_stride", c.clip_stride},
            {"shared_mask", c.shared_mask},
            {"temporal_pa_per_map", c.temporal_pa_per_map},
            {"flow_max_px", c.flow_max_px},
            {"flow_pad_to_three", c.flow_pad_to_three},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.p_s = j.value("p_s", c.p_s);
        c.p_t = j.value("p_t", c.p_t);
        c.ae_lr = j.value("ae_lr", c.ae_lr);
        c.ae_epochs = j.value("ae_epochs", c.ae_epochs);
        c.ae_batch = j.value("ae_batch", c.ae_batch);
        c.ae_width_divisor = j.value("ae_width_divisor", c.ae_width_divisor);
        c.disc_lr = j.value("disc_lr", c.disc_lr);
        c.disc_momentum = j.value("disc_momentum", c.disc_momentum);
        c.disc_weight_decay = j.value("disc_weight_decay", c.disc_weight_decay);
        c.disc_epochs = j.value("disc_epochs", c.disc_epochs);
        c.disc_batch = j.value("disc_batch", c.disc_batch);
        c.disc_include_temporal = j.value("disc_include_temporal", c.disc_include_temporal);
        c.clip_length = j.value("clip_length", c.clip_length);
        c.clip_stride = j.value("clip_stride", c.clip_stride);
        c.shared_mask = j.value("shared_mask", c.shared_mask);
        c.temporal_pa_per_map = j.value("temporal_pa_per_map", c.temporal_pa_per_map);
        c.flow_max_px = j.value("flow_max_px", c.flow_max_px);
        c.flow_pad_to_three = j.value("flow_pad_to_three", c.flow_pad_to_three);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("bad training config: ") + e.what());
    }
    return c;
}

int BatchPlan::pa_count() const {
    return static_cast<int>(std::count_if(samples.begin(), samples.end(),
                                          [](const PlannedSample& s) { return s.flag == SampleFlag::PseudoAnomaly; }));
}

std::vector<BatchPlan> plan_epoch(std::size_t n_samples, double p, std::uint64_t seed, int epoch, int batch) {
    require(p >= 0.0 && p <= 1.0, ErrorKind::Config, "PA probability must lie in [0, 1]");
    require(batch >= 1, ErrorKind::Config, "batch size must be >= 1");
    std::mt19937_64 rng(derive_seed(seed, 0x91a4, epoch));
    std::vector<std::size_t> order(n_samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::bernoulli_distribution coin(p);

    std::vector<BatchPlan> plans;
    for (std::size_t i = 0; i < n_samples; i += static_cast<std::size_t>(batch)) {
        BatchPlan plan;
        plan.epoch = epoch;
        plan.step = static_cast<int>(plans.size());
        const std::size_t end = std::min(n_samples, i + static_cast<std::size_t>(batch));
        for (std::size_t k = i; k < end; ++k) {
            PlannedSample s;
            s.source = order[k];
            s.flag = coin(rng) ? SampleFlag::PseudoAnomaly : SampleFlag::Normal;
            s.seed = derive_seed(seed, epoch, k);
            plan.samples.push_back(s);
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

std::vector<BatchPlan> plan_batches(std::size_t n_samples, double p, std::uint64_t seed, int epochs, int batch) {
    std::vector<BatchPlan> all;
    for (int e = 0; e < epochs; ++e) {
        auto plans = plan_epoch(n_samples, p, seed, e, batch);
        all.insert(all.end(), std::make_move_iterator(plans.begin()), std::make_move_iterator(plans.end()));
    }
    return all;
}

std::vector<WindowRef> index_windows(const std::vector<int>& lengths, int length, int stride) {
    std::vector<WindowRef> refs;
    for (std::size_t v = 0; v < lengths.size(); ++v) {
        const int n = window_count(lengths[v], length, stride);
        for (int k = 0; k < n; ++k) refs.push_back({v, k * stride});
    }
    return refs;
}

SpatialSampleSource::SpatialSampleSource(std::vector<VideoClip> videos, const TrainConfig& config,
                                         Inpainter& inpainter, SpatialPAOptions options)
    : videos_(std::move(videos)), length_(config.clip_length), inpainter_(&inpainter), options_(options) {
    options_.shared_mask = config.shared_mask;
    std::vector<int> lengths;
    for (const auto& v : videos_) lengths.push_back(v.length());
    windows_ = index_windows(lengths, length_, config.clip_stride);
}

AeSample SpatialSampleSource::normal(std::size_t i) const {
    const WindowRef& w = windows_.at(i);
    Tensorf frames = videos_[w.video].slice(w.start, length_).frames();
    return {frames, frames};
}

AeSample SpatialSampleSource::pseudo_anomaly(std::size_t i, std::uint64_t seed) const {
    const WindowRef& w = windows_.at(i);
    VideoClip clip = videos_[w.video].slice(w.start, length_);
    if (cache_) {
        if (auto hit = cache_(w, seed)) return {hit->frames(), clip.frames()};
    }
    SpatialPA pa = make_spatial_pa(clip, seed, *inpainter_, options_);
    return {pa.clip.frames(), clip.frames()};
}

TemporalSampleSource::TemporalSampleSource(std::vector<FlowField> flows, const TrainConfig& config)
    : length_(config.clip_length), codec_(config.codec()) {
    pa_options_.per_map_resampling = config.temporal_pa_per_map;
    std::vector<int> lengths;
    for (const auto& f : flows) {
        padded_.push_back(pad_flow_to_frames(f));
        ids_.push_back(f.source_video_id);
        lengths.push_back(padded_.back().dim(0));
    }
    windows_ = index_windows(lengths, length_, config.clip_stride);
}

FlowField TemporalSampleSource::window_flow(std::size_t i) const {
    const WindowRef& w = windows_.at(i);
    const Tensorf& all = padded_[w.video];
    const std::size_t per = all.size() / static_cast<std::size_t>(all.dim(0));
    const auto first = all.storage().begin() + static_cast<std::ptrdiff_t>(w.start * per);
    Tensorf values({length_, 2, all.dim(2), all.dim(3)},
                   std::vector<float>(first, first + static_cast<std::ptrdiff_t>(length_ * per)));
    return {std::move(values), ids_[w.video]};
}

TemporalPA TemporalSampleSource::make_pa(std::size_t i, std::uint64_t seed) const {
    return make_temporal_pa(window_flow(i), std::nullopt, seed, pa_options_);
}

AeSample TemporalSampleSource::normal(std::size_t i) const {
    Tensorf coded = codec_.encode(window_flow(i).values);
    return {coded, coded};
}

AeSample TemporalSampleSource::pseudo_anomaly(std::size_t i, std::uint64_t seed) const {
    const FlowField flow = window_flow(i);
    const TemporalPA pa = make_temporal_pa(flow, std::nullopt, seed, pa_options_);
    return {codec_.encode(pa.flow.values), codec_.encode(flow.values)};
}

nlohmann::json to_json(const StepRecord& r) {
    nlohmann::json j = {{"epoch", r.epoch}, {"step", r.step}, {"n_normal", r.n_normal}, {"n_pa", r.n_pa},
                        {"loss", r.loss}};
    j["normal_loss"] = r.normal_loss ? nlohmann::json(*r.normal_loss) : nlohmann::json(nullptr);
    return j;
}

Checkpoint export_autoencoder(Autoencoder<float>& model, const std::string& kind) {
    Checkpoint ckpt;
    ckpt.kind = kind;
    ckpt.meta["in_channels"] = model.config().in_channels;
    ckpt.meta["widths"] = model.config().widths;
    for (auto* p : model.parameters()) ckpt.arrays["param/" + p->name] = p->value;
    for (const auto& b : model.buffers()) ckpt.arrays["buffer/" + b.name] = *b.value;
    return ckpt;
}

Autoencoder<float> import_autoencoder(const Checkpoint& ckpt) {
    require(ckpt.kind == "spatial-ae" || ckpt.kind == "temporal-ae", ErrorKind::Checkpoint,
            "checkpoint kind '" + ckpt.kind + "' is not an autoencoder");
    AutoencoderConfig cfg;
    try {
        cfg.in_channels = ckpt.meta.at("in_channels").get<int>();
        cfg.widths = ckpt.meta.at("widths").get<std::array<int, 4>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Checkpoint, std::string("autoencoder checkpoint lacks its config: ") + e.what());
    }
    Autoencoder<float> model(cfg);
    for (auto* p : model.parameters()) ckpt.restore("param/" + p->name, p->value);
    for (const auto& b : model.buffers()) ckpt.restore("buffer/" + b.name, *b.value);
    return model;
}

Checkpoint export_discriminator(Discriminator<float>& model) {
    Checkpoint ckpt;
    ckpt.kind = "discriminator";
    for (auto* p : model.parameters()) ckpt.arrays["param/" + p->name] = p->value;
    return ckpt;
}

Discriminator<float> import_discriminator(const Checkpoint& ckpt) {
    require(ckpt.kind == "discriminator", ErrorKind::Checkpoint,
            "checkpoint kind '" + ckpt.kind + "' is not a discriminator");
    auto model = Discriminator<float>::zeros();
    for (auto* p : model.parameters()) ckpt.restore("param/" + p->name, p->value);
    return model;
}

namespace {

std::filesystem::path epoch_file(const std::filesystem::path& dir, int epoch) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch);
    return dir / name;
}

// Stacks T x C x H x W samples into N x C x T x H x W.
Tensorf stack_network(const std::vector<Tensorf>& clips) {
    const Tensorf first = to_network<float>(clips.front());
    std::vector<int> shape = first.shape();
    shape[0] = static_cast<int>(clips.size());
    Tensorf out(shape);
    const std::size_t per = first.size();
    std::copy(first.storage().begin(), first.storage().end(), out.data());
    for (std::size_t k = 1; k < clips.size(); ++k) {
        const Tensorf net = to_network<float>(clips[k]);
        require(net.size() == per, ErrorKind::Shape, "training samples differ in shape");
        std::copy(net.storage().begin(), net.storage().end(), out.data() + k * per);
    }
    return out;
}

}  // namespace

Checkpoint train_autoencoder(const TrainConfig& config, const AeSampleSource& source, const AeTrainOptions& options,
                             const TrainHooks& hooks) {
    config.validate();
    require(source.size() > 0, ErrorKind::Training, "no training windows for " + options.kind);

    Autoencoder<float> model(config.ae_config(source.channels()), derive_seed(config.seed, 0xae));
    Adam<float> adam(model.parameters(), config.ae_lr);
    int start_epoch = 0;
    if (options.resume) {
        const Checkpoint& ck = *options.resume;
        require(ck.kind == options.kind, ErrorKind::Checkpoint,
                "cannot resume " + options.kind + " from a " + ck.kind + " checkpoint");
        for (auto* p : model.parameters()) ck.restore("param/" + p->name, p->value);
        for (const auto& b : model.buffers()) ck.restore("buffer/" + b.name, *b.value);
        for (auto& [name, t] : adam.state()) ck.restore("optim/" + name, *t);
        adam.set_step_count(ck.meta.value("adam_step", 0L));
        start_epoch = ck.epoch;
    }

    auto snapshot = [&](int completed) {
        Checkpoint ck = export_autoencoder(model, options.kind);
        ck.epoch = completed;
        for (auto& [k, v] : options.meta.items()) ck.meta[k] = v;
        ck.meta["adam_step"] = adam.step_count();
        ck.meta["train_config"] = to_json(config);
        ck.meta["p"] = options.p;
        ck.put_all("optim/", adam.state());
        return ck;
    };

    Checkpoint last = snapshot(start_epoch);
    for (int epoch = start_epoch; epoch < options.epochs; ++epoch) {
        EpochSummary summary;
        summary.epoch = epoch;
        double loss_sum = 0.0, normal_sum = 0.0;
        int normal_count = 0;
        const auto plans = plan_epoch(source.size(), options.p, config.seed, epoch, config.ae_batch);
        for (const BatchPlan& plan : plans) {
            std::vector<Tensorf> inputs, targets;
            for (const PlannedSample& s : plan.samples) {
                AeSample sample = s.flag == SampleFlag::PseudoAnomaly ? source.pseudo_anomaly(s.source, s.seed)
                                                                      : source.normal(s.source);
                inputs.push_back(std::move(sample.input));
                targets.push_back(std::move(sample.target));
            }
            const Tensorf x = stack_network(inputs);
            const Tensorf target = stack_network(targets);
            if (hooks.on_loss_inputs) hooks.on_loss_inputs(plan, x, target);

            model.zero_grad();
            const Tensorf y = model.forward(x);
            Tensorf grad;
            const double loss = ae_loss_with_grad(y, target, grad);
            model.backward(grad);
            adam.step();

            StepRecord rec;
            rec.epoch = epoch;
            rec.step = plan.step;
            rec.n_pa = plan.pa_count();
            rec.n_normal = static_cast<int>(plan.samples.size()) - rec.n_pa;
            rec.loss = loss;
            const std::size_t per = y.size() / static_cast<std::size_t>(y.dim(0));
            double batch_normal = 0.0;
            for (std::size_t k = 0; k < plan.samples.size(); ++k) {
                if (plan.samples[k].flag != SampleFlag::Normal) continue;
                double s = 0.0;
                for (std::size_t i = k * per; i < (k + 1) * per; ++i) {
                    const double d = static_cast<double>(y[i]) - target[i];
                    s += d * d;
                }
                batch_normal += s / static_cast<double>(per);
            }
            if (rec.n_normal > 0) rec.normal_loss = batch_normal / rec.n_normal;
            if (hooks.on_step) hooks.on_step(rec);

            loss_sum += loss * static_cast<double>(plan.samples.size());
            normal_sum += batch_normal;
            normal_count += rec.n_normal;
            summary.pa_samples += rec.n_pa;
            summary.samples += static_cast<int>(plan.samples.size());
        }
        summary.mean_loss = loss_sum / std::max(1, summary.samples);
        if (normal_count > 0) summary.mean_normal_loss = normal_sum / normal_count;
        if (hooks.on_epoch) hooks.on_epoch(summary);

        last = snapshot(epoch + 1);
        if (hooks.checkpoint_dir) save_checkpoint(epoch_file(*hooks.checkpoint_dir, epoch + 1), last);
    }
    return last;
}

Checkpoint train_spatial_ae(const TrainConfig& config, const SpatialSampleSource& source, const TrainHooks& hooks,
                            const Checkpoint* resume) {
    AeTrainOptions opts;
    opts.kind = "spatial-ae";
    opts.p = config.p_s;
    opts.epochs = config.ae_epochs;
    opts.resume = resume;
    return train_autoencoder(config, source, opts, hooks);
}

Checkpoint train_temporal_ae(const TrainConfig& config, const TemporalSampleSource& source, const TrainHooks& hooks,
                             const Checkpoint* resume) {
    AeTrainOptions opts;
    opts.kind = "temporal-ae";
    opts.p = config.p_t;
    opts.epochs = config.ae_epochs;
    opts.resume = resume;
    opts.meta["flow_max_px"] = config.flow_max_px;
    opts.meta["flow_pad_to_three"] = config.flow_pad_to_three;
    return train_autoencoder(config, source, opts, hooks);
}

DiscTrainResult train_discriminator(const TrainConfig& config, const Tensorf& normal_features,
                                    const Tensorf& pa_features, const TrainHooks& hooks) {
    constexpr int D = Discriminator<float>::kFeatureDim;
    auto rows = [&](const Tensorf& f, const char* what) {
        if (f.empty()) return 0;
        require(f.rank() == 2 && f.dim(1) == D, ErrorKind::Shape,
                std::string(what) + " features must be N x 512, got " + shape_string(f.shape()));
        return f.dim(0);
    };
    const int n0 = rows(normal_features, "normal"), n1 = rows(pa_features, "pseudo-anomaly");
    require(n0 > 0, ErrorKind::Training, "discriminator training needs normal features");
    require(n1 > 0, ErrorKind::Training, "discriminator training needs pseudo-anomaly features");
    Tensorf all({n0 + n1, D});
    std::copy(normal_features.storage().begin(), normal_features.storage().end(), all.data());
    std::copy(pa_features.storage().begin(), pa_features.storage().end(), all.data() + normal_features.size());
    std::vector<int> labels(static_cast<std::size_t>(n0), 0);
    labels.resize(static_cast<std::size_t>(n0 + n1), 1);
    return train_discriminator(config, all, labels, hooks);
}

DiscTrainResult train_discriminator(const TrainConfig& config, const Tensorf& features, const std::vector<int>& labels,
                                    const TrainHooks& hooks) {
    config.validate();
    constexpr int D = Discriminator<float>::kFeatureDim;
    require(!features.empty() && !labels.empty(), ErrorKind::Training, "discriminator training set is empty");
    require(features.rank() == 2 && features.dim(1) == D, ErrorKind::Shape,
            "features must be N x 512, got " + shape_string(features.shape()));
    require(static_cast<std::size_t>(features.dim(0)) == labels.size(), ErrorKind::Label,
            "feature and label counts differ");
    for (int y : labels) require(y == 0 || y == 1, ErrorKind::Label, "labels must be 0 or 1");

    Discriminator<float> disc(derive_seed(config.seed, 0xd15c));
    Sgd<float> sgd(disc.parameters(), config.disc_lr, config.disc_momentum, config.disc_weight_decay);
    const std::size_t n = labels.size();
    DiscTrainResult result;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < config.disc_epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(config.seed, 0xd15c, epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        int step = 0;
        for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(config.disc_batch), ++step) {
            const std::size_t end = std::min(n, i + static_cast<std::size_t>(config.disc_batch));
            const int b = static_cast<int>(end - i);
            Tensorf x({b, D});
            std::vector<int> y(static_cast<std::size_t>(b));
            for (int k = 0; k < b; ++k) {
                const std::size_t src = order[i + static_cast<std::size_t>(k)];
                std::copy_n(features.data() + src * D, D, x.data() + static_cast<std::size_t>(k) * D);
                y[static_cast<std::size_t>(k)] = labels[src];
            }
            disc.zero_grad();
            const Tensorf logits = disc.forward(x);
            std::vector<double> z(logits.storage().begin(), logits.storage().end()), g;
            const double loss = disc_loss_with_grad(z, y, g);
            Tensorf dz({b, 1});
            for (int k = 0; k < b; ++k) dz[static_cast<std::size_t>(k)] = static_cast<float>(g[static_cast<std::size_t>(k)]);
            disc.backward(dz);
            sgd.step();
            sum += loss * b;
            if (hooks.on_step) {
                StepRecord rec;
                rec.epoch = epoch;
                rec.step = step;
                rec.n_pa = static_cast<int>(std::count(y.begin(), y.end(), 1));
                rec.n_normal = b - rec.n_pa;
                rec.loss = loss;
                hooks.on_step(rec);
            }
        }
        result.epoch_losses.push_back(sum / static_cast<double>(n));
        if (hooks.on_epoch) {
            EpochSummary s;
            s.epoch = epoch;
            s.mean_loss = result.epoch_losses.back();
            s.samples = static_cast<int>(n);
            hooks.on_epoch(s);
        }
    }
    const Tensorf logits = disc.infer(features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += ((logits[i] > 0.0f) == (labels[i] == 1)) ? 1 : 0;
    result.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    result.checkpoint = export_discriminator(disc);
    result.checkpoint.epoch = config.disc_epochs;
    result.checkpoint.meta["train_accuracy"] = result.train_accuracy;
    result.checkpoint.meta["train_config"] = to_json(config);
    if (hooks.checkpoint_dir) save_checkpoint(*hooks.checkpoint_dir / "discriminator.ckpt", result.checkpoint);
    return result;
}

}  // namespace pavad
