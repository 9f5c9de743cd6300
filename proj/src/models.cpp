#include "pavad/models.hpp"

#include <algorithm>
#include <cmath>

namespace pavad {

AutoencoderConfig AutoencoderConfig::scaled(int divisor, int in_channels) {
    require(divisor >= 1, ErrorKind::Config, "width divisor must be >= 1");
    AutoencoderConfig c;
    c.in_channels = in_channels;
    for (auto& w : c.widths) w = std::max(1, w / divisor);
    return c;
}

namespace {
constexpr std::array<std::array<int, 3>, 4> kEncStrides = {{{1, 2, 2}, {2, 2, 2}, {2, 2, 2}, {2, 2, 2}}};
}

template <typename S>
Autoencoder<S>::Autoencoder(const AutoencoderConfig& config, std::uint64_t seed) : cfg_(config) {
    require(cfg_.in_channels >= 1, ErrorKind::Config, "autoencoder needs at least one input channel");
    std::mt19937_64 rng(seed);
    int prev = cfg_.in_channels;
    for (int i = 0; i < 4; ++i) {
        const std::string name = "enc" + std::to_string(i + 1);
        enc_[i] = nn::Conv3d<S>(prev, cfg_.widths[i], kEncStrides[i], name + ".conv");
        enc_[i].init(rng);
        enc_bn_[i] = nn::BatchNorm3d<S>(cfg_.widths[i], name + ".bn");
        prev = cfg_.widths[i];
    }
    // Decoder j undoes encoder 3 - j.
    for (int j = 0; j < 4; ++j) {
        const int src = 3 - j;
        const int out = src == 0 ? cfg_.in_channels : cfg_.widths[src - 1];
        const std::string name = "dec" + std::to_string(j + 1);
        dec_[j] = nn::ConvTranspose3d<S>(cfg_.widths[src], out, kEncStrides[src], name + ".deconv");
        dec_[j].init(rng);
        if (j < 3) dec_bn_[j] = nn::BatchNorm3d<S>(out, name + ".bn");
    }
}

template <typename S>
void Autoencoder<S>::check_input_shape(const std::vector<int>& shape, int channels) {
    require(shape.size() == 5, ErrorKind::Shape, "autoencoder input must be N x C x T x H x W");
    require(shape[1] == channels, ErrorKind::Shape,
            "autoencoder expects " + std::to_string(channels) + " channels, got " + std::to_string(shape[1]));
    require(shape[0] >= 1 && shape[2] >= 1, ErrorKind::Shape, "empty autoencoder input");
    require(shape[3] > 0 && shape[4] > 0 && shape[3] % 16 == 0 && shape[4] % 16 == 0, ErrorKind::Shape,
            "height and width must be multiples of 16, got " + shape_string(shape));
}

template <typename S>
Tensor<S> Autoencoder<S>::forward(const Tensor<S>& x) {
    check_input_shape(x.shape(), cfg_.in_channels);
    Tensor<S> h = x;
    for (int i = 0; i < 4; ++i) {
        enc_in_dims_[i] = nn::spatial_dims(h.shape());
        h = enc_act_[i].forward(enc_bn_[i].forward(enc_[i].forward(h)));
    }
    for (int j = 0; j < 4; ++j) {
        h = dec_[j].forward(h, enc_in_dims_[3 - j]);
        if (j < 3) h = dec_act_[j].forward(dec_bn_[j].forward(h));
    }
    return out_act_.forward(h);
}

template <typename S>
void Autoencoder<S>::backward(const Tensor<S>& d_output) {
    Tensor<S> g = out_act_.backward(d_output);
    for (int j = 3; j >= 0; --j) {
        if (j < 3) g = dec_bn_[j].backward(dec_act_[j].backward(g));
        g = dec_[j].backward(g);
    }
    for (int i = 3; i >= 0; --i) g = enc_[i].backward(enc_bn_[i].backward(enc_act_[i].backward(g)));
}

template <typename S>
Tensor<S> Autoencoder<S>::infer(const Tensor<S>& x) const {
    check_input_shape(x.shape(), cfg_.in_channels);
    std::array<std::array<int, 3>, 4> dims{};
    Tensor<S> h = x;
    for (int i = 0; i < 4; ++i) {
        dims[i] = nn::spatial_dims(h.shape());
        h = enc_act_[i].infer(enc_bn_[i].infer(enc_[i].infer(h)));
    }
    for (int j = 0; j < 4; ++j) {
        h = dec_[j].infer(h, dims[3 - j]);
        if (j < 3) h = dec_act_[j].infer(dec_bn_[j].infer(h));
    }
    return out_act_.infer(h);
}

template <typename S>
std::vector<nn::Param<S>*> Autoencoder<S>::parameters() {
    std::vector<nn::Param<S>*> ps;
    for (int i = 0; i < 4; ++i) {
        ps.push_back(&enc_[i].weight);
        ps.push_back(&enc_[i].bias);
        ps.push_back(&enc_bn_[i].gamma);
        ps.push_back(&enc_bn_[i].beta);
    }
    for (int j = 0; j < 4; ++j) {
        ps.push_back(&dec_[j].weight);
        ps.push_back(&dec_[j].bias);
        if (j < 3) {
            ps.push_back(&dec_bn_[j].gamma);
            ps.push_back(&dec_bn_[j].beta);
        }
    }
    return ps;
}

template <typename S>
std::vector<nn::Buffer<S>> Autoencoder<S>::buffers() {
    std::vector<nn::Buffer<S>> bs;
    for (auto& bn : enc_bn_)
        for (auto& b : bn.buffers()) bs.push_back(b);
    for (auto& bn : dec_bn_)
        for (auto& b : bn.buffers()) bs.push_back(b);
    return bs;
}

template <typename S>
void Autoencoder<S>::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

template class Autoencoder<float>;
template class Autoencoder<double>;

template <typename S>
Discriminator<S>::Discriminator(std::uint64_t seed)
    : fc1_(kFeatureDim, kHidden, "fc1"), fc2_(kHidden, 1, "fc2") {
    std::mt19937_64 rng(seed);
    fc1_.init(rng);
    fc2_.init(rng);
}

template <typename S>
Discriminator<S> Discriminator<S>::zeros() {
    Discriminator d;
    for (auto* p : d.parameters()) p->value.fill(S(0));
    return d;
}

template <typename S>
Tensor<S> Discriminator<S>::forward(const Tensor<S>& features) {
    return fc2_.forward(act_.forward(fc1_.forward(features)));
}

template <typename S>
void Discriminator<S>::backward(const Tensor<S>& d_logits) {
    fc1_.backward(act_.backward(fc2_.backward(d_logits)));
}

template <typename S>
Tensor<S> Discriminator<S>::infer(const Tensor<S>& features) const {
    return fc2_.infer(act_.infer(fc1_.infer(features)));
}

template <typename S>
std::vector<nn::Param<S>*> Discriminator<S>::parameters() {
    return {&fc1_.weight, &fc1_.bias, &fc2_.weight, &fc2_.bias};
}

template <typename S>
void Discriminator<S>::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

template class Discriminator<float>;
template class Discriminator<double>;

double logistic(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

DiscOutput disc_forward(const Discriminator<float>& disc, std::span<const float> feature) {
    require(feature.size() == static_cast<std::size_t>(Discriminator<float>::kFeatureDim), ErrorKind::Shape,
            "discriminator feature must have length 512, got " + std::to_string(feature.size()));
    const Tensorf x({1, Discriminator<float>::kFeatureDim}, std::vector<float>(feature.begin(), feature.end()));
    const double logit = disc.infer(x)[0];
    return {logit, logistic(logit)};
}

std::size_t loss_normaliser(const std::vector<int>& sample_shape) { return Tensorf::count(sample_shape); }

template <typename S>
LossValue ae_loss(const Tensor<S>& reconstruction, const Tensor<S>& normal_target) {
    require(reconstruction.shape() == normal_target.shape(), ErrorKind::Loss,
            "reconstruction " + shape_string(reconstruction.shape()) + " vs target " +
                shape_string(normal_target.shape()));
    require(!reconstruction.empty(), ErrorKind::Loss, "empty loss input");
    double sum = 0.0;
    for (std::size_t i = 0; i < reconstruction.size(); ++i) {
        const double d = static_cast<double>(reconstruction[i]) - static_cast<double>(normal_target[i]);
        sum += d * d;
    }
    const std::size_t pi = loss_normaliser(reconstruction.shape());
    return {sum / static_cast<double>(pi), pi};
}

template <typename S>
double ae_loss_with_grad(const Tensor<S>& reconstruction, const Tensor<S>& normal_target, Tensor<S>& grad) {
    require(reconstruction.shape() == normal_target.shape(), ErrorKind::Loss, "reconstruction/target shape mismatch");
    require(reconstruction.rank() >= 2, ErrorKind::Loss, "batched loss needs a leading batch axis");
    const double n = reconstruction.dim(0);
    const double pi = static_cast<double>(reconstruction.size()) / n;
    grad = Tensor<S>(reconstruction.shape());
    double sum = 0.0;
    for (std::size_t i = 0; i < reconstruction.size(); ++i) {
        const double d = static_cast<double>(reconstruction[i]) - static_cast<double>(normal_target[i]);
        sum += d * d;
        grad[i] = static_cast<S>(2.0 * d / (n * pi));
    }
    return sum / (n * pi);
}

template LossValue ae_loss(const Tensor<float>&, const Tensor<float>&);
template LossValue ae_loss(const Tensor<double>&, const Tensor<double>&);
template double ae_loss_with_grad(const Tensor<float>&, const Tensor<float>&, Tensor<float>&);
template double ae_loss_with_grad(const Tensor<double>&, const Tensor<double>&, Tensor<double>&);

double disc_loss_with_grad(std::span<const double> logits, std::span<const int> labels, std::vector<double>& grad) {
    require(logits.size() == labels.size(), ErrorKind::Label, "logits and labels differ in length");
    require(!logits.empty(), ErrorKind::Label, "empty batch");
    grad.assign(logits.size(), 0.0);
    const double n = static_cast<double>(logits.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        require(labels[i] == 0 || labels[i] == 1, ErrorKind::Label,
                "labels must be 0 or 1, got " + std::to_string(labels[i]));
        const double z = logits[i], y = labels[i];
        loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        grad[i] = (logistic(z) - y) / n;
    }
    return loss / n;
}

double disc_loss(std::span<const double> logits, std::span<const int> labels) {
    std::vector<double> grad;
    return disc_loss_with_grad(logits, labels, grad);
}

template <typename S>
Tensor<S> to_network(const Tensorf& clip) {
    require(clip.rank() == 4, ErrorKind::Shape, "clip must be T x C x H x W");
    const int T = clip.dim(0), C = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor<S> out({1, C, T, H, W});
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c) {
            const float* src = clip.data() + (static_cast<std::size_t>(t) * C + c) * plane;
            S* dst = out.data() + (static_cast<std::size_t>(c) * T + t) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<S>(src[i]);
        }
    return out;
}

template Tensor<float> to_network<float>(const Tensorf&);
template Tensor<double> to_network<double>(const Tensorf&);

Tensorf from_network(const Tensor<float>& out, int index) {
    require(out.rank() == 5 && index >= 0 && index < out.dim(0), ErrorKind::Shape, "bad network output");
    const int C = out.dim(1), T = out.dim(2), H = out.dim(3), W = out.dim(4);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensorf clip({T, C, H, W});
    const float* base = out.data() + static_cast<std::size_t>(index) * C * T * plane;
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c) {
            const float* src = base + (static_cast<std::size_t>(c) * T + t) * plane;
            std::copy(src, src + plane, clip.data() + (static_cast<std::size_t>(t) * C + c) * plane);
        }
    return clip;
}

}  // namespace pavad
