#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pavad/nn.hpp"

namespace pavad {

struct AutoencoderConfig {
    int in_channels = 3;
    std::array<int, 4> widths = {96, 128, 256, 256};

    // Same topology with every hidden width divided by `divisor` (min 1).
    static AutoencoderConfig scaled(int divisor, int in_channels = 3);
    friend bool operator==(const AutoencoderConfig&, const AutoencoderConfig&) = default;
};

// Encoder: four [Conv3d 3x3x3, BatchNorm, LeakyReLU(0.2)] blocks with strides
// (1,2,2), (2,2,2), (2,2,2), (2,2,2). Decoder mirrors them with transposed
// convolutions and ends in tanh. Input and output are N x C x T x H x W.
template <typename S>
class Autoencoder {
public:
    explicit Autoencoder(const AutoencoderConfig& config = {}, std::uint64_t seed = 0);

    const AutoencoderConfig& config() const { return cfg_; }

    // Batch statistics in BN; caches activations for backward().
    Tensor<S> forward(const Tensor<S>& x);
    // Gradient of the loss w.r.t. the last forward() output; accumulates parameter grads.
    void backward(const Tensor<S>& d_output);
    // Running statistics in BN, no caching.
    Tensor<S> infer(const Tensor<S>& x) const;

    std::vector<nn::Param<S>*> parameters();
    std::vector<nn::Buffer<S>> buffers();
    void zero_grad();

    static void check_input_shape(const std::vector<int>& shape, int channels);

private:
    AutoencoderConfig cfg_;
    std::array<nn::Conv3d<S>, 4> enc_;
    std::array<nn::BatchNorm3d<S>, 4> enc_bn_;
    std::array<nn::LeakyReLU<S>, 4> enc_act_;
    std::array<nn::ConvTranspose3d<S>, 4> dec_;
    std::array<nn::BatchNorm3d<S>, 3> dec_bn_;
    std::array<nn::LeakyReLU<S>, 3> dec_act_;
    nn::Tanh<S> out_act_;
    std::array<std::array<int, 3>, 4> enc_in_dims_{};
};

// Linear(512, 128) -> ReLU -> Linear(128, 1); emits one logit per feature.
template <typename S>
class Discriminator {
public:
    static constexpr int kFeatureDim = 512;
    static constexpr int kHidden = 128;

    explicit Discriminator(std::uint64_t seed = 0);
    static Discriminator zeros();

    Tensor<S> forward(const Tensor<S>& features);  // N x 512 -> N x 1
    void backward(const Tensor<S>& d_logits);
    Tensor<S> infer(const Tensor<S>& features) const;

    std::vector<nn::Param<S>*> parameters();
    void zero_grad();

private:
    nn::Linear<S> fc1_, fc2_;
    nn::ReLU<S> act_;
};

struct DiscOutput {
    double logit = 0.0;
    double probability = 0.5;
};

DiscOutput disc_forward(const Discriminator<float>& disc, std::span<const float> feature);

// Per-sample normalisation constant T * C * H * W.
std::size_t loss_normaliser(const std::vector<int>& sample_shape);

struct LossValue {
    double value = 0.0;
    std::size_t normaliser = 0;
};

// (1 / Pi) * sum (recon - target)^2 for one sample (T x C x H x W or C x T x H x W).
template <typename S>
LossValue ae_loss(const Tensor<S>& reconstruction, const Tensor<S>& normal_target);

// Batch mean of per-sample losses and its gradient w.r.t. the reconstruction.
template <typename S>
double ae_loss_with_grad(const Tensor<S>& reconstruction, const Tensor<S>& normal_target, Tensor<S>& grad);

// Mean binary cross-entropy on logits; labels must be 0 or 1.
double disc_loss(std::span<const double> logits, std::span<const int> labels);
double disc_loss_with_grad(std::span<const double> logits, std::span<const int> labels, std::vector<double>& grad);

double logistic(double z);

// T x C x H x W clip <-> 1 x C x T x H x W network input.
template <typename S>
Tensor<S> to_network(const Tensorf& clip);
Tensorf from_network(const Tensor<float>& out, int index = 0);

}  // namespace pavad
