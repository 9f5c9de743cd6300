#pragma once

// Minimal reverse-mode layers for 3-D conv autoencoders and an MLP head.
// Activations are laid out N x C x D x H x W (row-major). Each layer caches
// what its backward pass needs during a training forward; infer() is const
// and cache-free, so concurrent inference on shared parameters is safe.

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pavad/tensor.hpp"

namespace pavad::nn {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapMat = Eigen::Map<RowMat<S>>;
template <typename S>
using CMapMat = Eigen::Map<const RowMat<S>>;

template <typename S>
struct Param {
    std::string name;
    Tensor<S> value;
    Tensor<S> grad;

    Param() = default;
    Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}
    void zero_grad() { grad.fill(S(0)); }
};

template <typename S>
struct Buffer {
    std::string name;
    Tensor<S>* value;
};

// Geometry of a 3x3x3, padding-1 convolution from `in` to `out` spatial dims.
struct ConvGeometry {
    int channels = 0;
    std::array<int, 3> in{};      // D, H, W
    std::array<int, 3> out{};     // OD, OH, OW
    std::array<int, 3> stride{};  // sd, sh, sw

    static constexpr int kKernel = 3;
    static constexpr int kTaps = 27;
    static constexpr int kPad = 1;

    std::size_t in_size() const { return static_cast<std::size_t>(in[0]) * in[1] * in[2]; }
    std::size_t out_size() const { return static_cast<std::size_t>(out[0]) * out[1] * out[2]; }
    std::size_t col_rows() const { return static_cast<std::size_t>(channels) * kTaps; }

    static int conv_out(int n, int s) { return (n + 2 * kPad - kKernel) / s + 1; }
};

// col[(c * 27 + tap), p] = x[c, od*sd - 1 + kd, oh*sh - 1 + kh, ow*sw - 1 + kw]
template <typename S>
void im2col(const S* x, const ConvGeometry& g, S* col) {
    const int D = g.in[0], H = g.in[1], W = g.in[2];
    const int OD = g.out[0], OH = g.out[1], OW = g.out[2];
    const std::size_t P = g.out_size();
    for (int c = 0; c < g.channels; ++c) {
        const S* xc = x + static_cast<std::size_t>(c) * g.in_size();
        for (int kd = 0; kd < 3; ++kd)
            for (int kh = 0; kh < 3; ++kh)
                for (int kw = 0; kw < 3; ++kw) {
                    S* row = col + (static_cast<std::size_t>(c) * 27 + kd * 9 + kh * 3 + kw) * P;
                    for (int od = 0; od < OD; ++od) {
                        const int id = od * g.stride[0] - 1 + kd;
                        for (int oh = 0; oh < OH; ++oh) {
                            const int ih = oh * g.stride[1] - 1 + kh;
                            S* dst = row + (static_cast<std::size_t>(od) * OH + oh) * OW;
                            if (id < 0 || id >= D || ih < 0 || ih >= H) {
                                std::fill(dst, dst + OW, S(0));
                                continue;
                            }
                            const S* src = xc + (static_cast<std::size_t>(id) * H + ih) * W;
                            for (int ow = 0; ow < OW; ++ow) {
                                const int iw = ow * g.stride[2] - 1 + kw;
                                dst[ow] = (iw >= 0 && iw < W) ? src[iw] : S(0);
                            }
                        }
                    }
                }
    }
}

// Adjoint of im2col: scatters-and-adds col back onto x (x is accumulated into).
template <typename S>
void col2im(const S* col, const ConvGeometry& g, S* x) {
    const int D = g.in[0], H = g.in[1], W = g.in[2];
    const int OD = g.out[0], OH = g.out[1], OW = g.out[2];
    const std::size_t P = g.out_size();
    for (int c = 0; c < g.channels; ++c) {
        S* xc = x + static_cast<std::size_t>(c) * g.in_size();
        for (int kd = 0; kd < 3; ++kd)
            for (int kh = 0; kh < 3; ++kh)
                for (int kw = 0; kw < 3; ++kw) {
                    const S* row = col + (static_cast<std::size_t>(c) * 27 + kd * 9 + kh * 3 + kw) * P;
                    for (int od = 0; od < OD; ++od) {
                        const int id = od * g.stride[0] - 1 + kd;
                        if (id < 0 || id >= D) continue;
                        for (int oh = 0; oh < OH; ++oh) {
                            const int ih = oh * g.stride[1] - 1 + kh;
                            if (ih < 0 || ih >= H) continue;
                            const S* src = row + (static_cast<std::size_t>(od) * OH + oh) * OW;
                            S* dst = xc + (static_cast<std::size_t>(id) * H + ih) * W;
                            for (int ow = 0; ow < OW; ++ow) {
                                const int iw = ow * g.stride[2] - 1 + kw;
                                if (iw >= 0 && iw < W) dst[iw] += src[ow];
                            }
                        }
                    }
                }
    }
}

template <typename S>
void uniform_init(Tensor<S>& t, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : t.values()) v = static_cast<S>(u(rng));
}

inline std::array<int, 3> spatial_dims(const std::vector<int>& shape) { return {shape[2], shape[3], shape[4]}; }

template <typename S>
class Conv3d {
public:
    Conv3d() = default;
    Conv3d(int in_ch, int out_ch, std::array<int, 3> stride, const std::string& name)
        : weight(name + ".weight", {out_ch, in_ch * 27}), bias(name + ".bias", {out_ch}), in_(in_ch), out_(out_ch),
          stride_(stride) {}

    void init(std::mt19937_64& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_) * 27);
        uniform_init(weight.value, bound, rng);
        uniform_init(bias.value, bound, rng);
    }

    ConvGeometry geometry(const std::vector<int>& x_shape) const {
        require(x_shape.size() == 5 && x_shape[1] == in_, ErrorKind::Shape,
                "conv input must be N x " + std::to_string(in_) + " x D x H x W, got " + shape_string(x_shape));
        ConvGeometry g{in_, spatial_dims(x_shape), {}, stride_};
        for (int i = 0; i < 3; ++i) {
            require(g.in[i] >= 1, ErrorKind::Shape, "empty conv input");
            g.out[i] = ConvGeometry::conv_out(g.in[i], stride_[i]);
        }
        return g;
    }

    Tensor<S> infer(const Tensor<S>& x) const {
        const ConvGeometry g = geometry(x.shape());
        const int N = x.dim(0);
        Tensor<S> y({N, out_, g.out[0], g.out[1], g.out[2]});
        std::vector<S> col(g.col_rows() * g.out_size());
        const CMapMat<S> W(weight.value.data(), out_, static_cast<Eigen::Index>(g.col_rows()));
        for (int n = 0; n < N; ++n) {
            im2col(x.data() + static_cast<std::size_t>(n) * in_ * g.in_size(), g, col.data());
            MapMat<S> Y(y.data() + static_cast<std::size_t>(n) * out_ * g.out_size(), out_,
                        static_cast<Eigen::Index>(g.out_size()));
            Y.noalias() = W * CMapMat<S>(col.data(), static_cast<Eigen::Index>(g.col_rows()),
                                         static_cast<Eigen::Index>(g.out_size()));
            for (int c = 0; c < out_; ++c) Y.row(c).array() += bias.value[c];
        }
        return y;
    }

    Tensor<S> forward(const Tensor<S>& x) {
        input_ = x;
        return infer(x);
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const ConvGeometry g = geometry(input_.shape());
        const int N = input_.dim(0);
        Tensor<S> dx(input_.shape());
        std::vector<S> col(g.col_rows() * g.out_size());
        const auto K = static_cast<Eigen::Index>(g.col_rows());
        const auto P = static_cast<Eigen::Index>(g.out_size());
        const CMapMat<S> W(weight.value.data(), out_, K);
        MapMat<S> dW(weight.grad.data(), out_, K);
        for (int n = 0; n < N; ++n) {
            const CMapMat<S> dY(dy.data() + static_cast<std::size_t>(n) * out_ * g.out_size(), out_, P);
            im2col(input_.data() + static_cast<std::size_t>(n) * in_ * g.in_size(), g, col.data());
            dW.noalias() += dY * CMapMat<S>(col.data(), K, P).transpose();
            for (int c = 0; c < out_; ++c) {
                // Plain loop: a vectorised sum's order depends on buffer alignment.
                const S* row = dy.data() + (static_cast<std::size_t>(n) * out_ + c) * g.out_size();
                S acc = 0;
                for (std::size_t i = 0; i < g.out_size(); ++i) acc += row[i];
                bias.grad[c] += acc;
            }
            MapMat<S> dcol(col.data(), K, P);
            dcol.noalias() = W.transpose() * dY;
            col2im(col.data(), g, dx.data() + static_cast<std::size_t>(n) * in_ * g.in_size());
        }
        return dx;
    }

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }

    Param<S> weight, bias;

private:
    int in_ = 0, out_ = 0;
    std::array<int, 3> stride_{1, 1, 1};
    Tensor<S> input_;
};

// Transposed 3x3x3 convolution, padding 1. The output size is given per call
// (via the target dims) so decoders can invert any encoder shape exactly.
template <typename S>
class ConvTranspose3d {
public:
    ConvTranspose3d() = default;
    ConvTranspose3d(int in_ch, int out_ch, std::array<int, 3> stride, const std::string& name)
        : weight(name + ".weight", {in_ch, out_ch * 27}), bias(name + ".bias", {out_ch}), in_(in_ch), out_(out_ch),
          stride_(stride) {}

    void init(std::mt19937_64& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(out_) * 27);
        uniform_init(weight.value, bound, rng);
        uniform_init(bias.value, bound, rng);
    }

    // Output dims must satisfy conv_out(target, stride) == input dims, i.e.
    // target = (in - 1) * stride - 2 + 3 + output_padding with padding in [0, stride).
    ConvGeometry geometry(const std::vector<int>& x_shape, std::array<int, 3> target) const {
        require(x_shape.size() == 5 && x_shape[1] == in_, ErrorKind::Shape,
                "transposed conv input must be N x " + std::to_string(in_) + " x D x H x W");
        ConvGeometry g{out_, target, spatial_dims(x_shape), stride_};
        for (int i = 0; i < 3; ++i) {
            const int op = target[i] - ((g.out[i] - 1) * stride_[i] + 1);
            require(op >= 0 && op < stride_[i], ErrorKind::Shape,
                    "transposed conv cannot map size " + std::to_string(g.out[i]) + " to " + std::to_string(target[i]));
        }
        return g;
    }

    Tensor<S> infer(const Tensor<S>& x, std::array<int, 3> target) const {
        const ConvGeometry g = geometry(x.shape(), target);
        const int N = x.dim(0);
        const auto K = static_cast<Eigen::Index>(g.col_rows());
        const auto P = static_cast<Eigen::Index>(g.out_size());
        Tensor<S> y({N, out_, target[0], target[1], target[2]});
        std::vector<S> col(g.col_rows() * g.out_size());
        const CMapMat<S> W(weight.value.data(), in_, K);
        for (int n = 0; n < N; ++n) {
            MapMat<S> C(col.data(), K, P);
            C.noalias() = W.transpose() * CMapMat<S>(x.data() + static_cast<std::size_t>(n) * in_ * g.out_size(), in_, P);
            S* yn = y.data() + static_cast<std::size_t>(n) * out_ * g.in_size();
            col2im(col.data(), g, yn);
            for (int c = 0; c < out_; ++c) {
                S* ch = yn + static_cast<std::size_t>(c) * g.in_size();
                for (std::size_t i = 0; i < g.in_size(); ++i) ch[i] += bias.value[c];
            }
        }
        return y;
    }

    Tensor<S> forward(const Tensor<S>& x, std::array<int, 3> target) {
        input_ = x;
        return infer(x, target);
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const std::array<int, 3> target = spatial_dims(dy.shape());
        const ConvGeometry g = geometry(input_.shape(), target);
        const int N = input_.dim(0);
        const auto K = static_cast<Eigen::Index>(g.col_rows());
        const auto P = static_cast<Eigen::Index>(g.out_size());
        Tensor<S> dx(input_.shape());
        std::vector<S> col(g.col_rows() * g.out_size());
        const CMapMat<S> W(weight.value.data(), in_, K);
        MapMat<S> dW(weight.grad.data(), in_, K);
        for (int n = 0; n < N; ++n) {
            const S* dyn = dy.data() + static_cast<std::size_t>(n) * out_ * g.in_size();
            for (int c = 0; c < out_; ++c) {
                const S* ch = dyn + static_cast<std::size_t>(c) * g.in_size();
                S acc = 0;
                for (std::size_t i = 0; i < g.in_size(); ++i) acc += ch[i];
                bias.grad[c] += acc;
            }
            im2col(dyn, g, col.data());
            const CMapMat<S> dcol(col.data(), K, P);
            const CMapMat<S> X(input_.data() + static_cast<std::size_t>(n) * in_ * g.out_size(), in_, P);
            dW.noalias() += X * dcol.transpose();
            MapMat<S>(dx.data() + static_cast<std::size_t>(n) * in_ * g.out_size(), in_, P).noalias() = W * dcol;
        }
        return dx;
    }

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }

    Param<S> weight, bias;

private:
    int in_ = 0, out_ = 0;
    std::array<int, 3> stride_{1, 1, 1};
    Tensor<S> input_;
};

// Per-channel normalisation over N, D, H, W. Training uses batch statistics
// and updates running estimates; inference uses the running estimates.
template <typename S>
class BatchNorm3d {
public:
    BatchNorm3d() = default;
    BatchNorm3d(int channels, const std::string& name, double momentum = 0.1, double eps = 1e-5)
        : gamma(name + ".weight", {channels}), beta(name + ".bias", {channels}), running_mean({channels}, S(0)),
          running_var({channels}, S(1)), c_(channels), momentum_(momentum), eps_(eps), name_(name) {
        gamma.value.fill(S(1));
    }

    Tensor<S> infer(const Tensor<S>& x) const {
        check(x);
        Tensor<S> y(x.shape());
        const std::size_t inner = inner_size(x);
        for (int n = 0; n < x.dim(0); ++n)
            for (int c = 0; c < c_; ++c) {
                const S scale = gamma.value[c] / std::sqrt(running_var[c] + static_cast<S>(eps_));
                const S shift = beta.value[c] - running_mean[c] * scale;
                const std::size_t off = (static_cast<std::size_t>(n) * c_ + c) * inner;
                for (std::size_t i = 0; i < inner; ++i) y[off + i] = x[off + i] * scale + shift;
            }
        return y;
    }

    Tensor<S> forward(const Tensor<S>& x) {
        check(x);
        const int N = x.dim(0);
        const std::size_t inner = inner_size(x);
        const double m = static_cast<double>(N) * inner;
        xhat_ = Tensor<S>(x.shape());
        inv_std_.assign(c_, S(0));
        Tensor<S> y(x.shape());
        for (int c = 0; c < c_; ++c) {
            double mean = 0.0;
            for (int n = 0; n < N; ++n) {
                const S* p = x.data() + (static_cast<std::size_t>(n) * c_ + c) * inner;
                for (std::size_t i = 0; i < inner; ++i) mean += p[i];
            }
            mean /= m;
            double var = 0.0;
            for (int n = 0; n < N; ++n) {
                const S* p = x.data() + (static_cast<std::size_t>(n) * c_ + c) * inner;
                for (std::size_t i = 0; i < inner; ++i) var += (p[i] - mean) * (p[i] - mean);
            }
            var /= m;
            const S inv = static_cast<S>(1.0 / std::sqrt(var + eps_));
            inv_std_[c] = inv;
            for (int n = 0; n < N; ++n) {
                const std::size_t off = (static_cast<std::size_t>(n) * c_ + c) * inner;
                for (std::size_t i = 0; i < inner; ++i) {
                    const S xh = (x[off + i] - static_cast<S>(mean)) * inv;
                    xhat_[off + i] = xh;
                    y[off + i] = xh * gamma.value[c] + beta.value[c];
                }
            }
            const double unbiased = m > 1 ? var * m / (m - 1) : var;
            running_mean[c] = static_cast<S>((1 - momentum_) * running_mean[c] + momentum_ * mean);
            running_var[c] = static_cast<S>((1 - momentum_) * running_var[c] + momentum_ * unbiased);
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const int N = dy.dim(0);
        const std::size_t inner = inner_size(dy);
        const double m = static_cast<double>(N) * inner;
        Tensor<S> dx(dy.shape());
        for (int c = 0; c < c_; ++c) {
            double sum_dy = 0.0, sum_dy_xh = 0.0;
            for (int n = 0; n < N; ++n) {
                const std::size_t off = (static_cast<std::size_t>(n) * c_ + c) * inner;
                for (std::size_t i = 0; i < inner; ++i) {
                    sum_dy += dy[off + i];
                    sum_dy_xh += dy[off + i] * xhat_[off + i];
                }
            }
            gamma.grad[c] += static_cast<S>(sum_dy_xh);
            beta.grad[c] += static_cast<S>(sum_dy);
            const double k = gamma.value[c] * inv_std_[c] / m;
            for (int n = 0; n < N; ++n) {
                const std::size_t off = (static_cast<std::size_t>(n) * c_ + c) * inner;
                for (std::size_t i = 0; i < inner; ++i)
                    dx[off + i] = static_cast<S>(k * (m * dy[off + i] - sum_dy - xhat_[off + i] * sum_dy_xh));
            }
        }
        return dx;
    }

    std::vector<Buffer<S>> buffers() {
        return {{name_ + ".running_mean", &running_mean}, {name_ + ".running_var", &running_var}};
    }

    Param<S> gamma, beta;
    Tensor<S> running_mean, running_var;

private:
    void check(const Tensor<S>& x) const {
        require(x.rank() >= 2 && x.dim(1) == c_, ErrorKind::Shape, "batch-norm channel mismatch");
    }
    static std::size_t inner_size(const Tensor<S>& x) {
        std::size_t inner = 1;
        for (std::size_t i = 2; i < x.rank(); ++i) inner *= static_cast<std::size_t>(x.dim(i));
        return inner;
    }

    int c_ = 0;
    double momentum_ = 0.1, eps_ = 1e-5;
    std::string name_;
    Tensor<S> xhat_;
    std::vector<S> inv_std_;
};

template <typename S>
class LeakyReLU {
public:
    explicit LeakyReLU(S slope = S(0.2)) : slope_(slope) {}
    Tensor<S> infer(const Tensor<S>& x) const {
        Tensor<S> y = x;
        for (auto& v : y.values()) v = v > 0 ? v : v * slope_;
        return y;
    }
    Tensor<S> forward(const Tensor<S>& x) {
        input_ = x;
        return infer(x);
    }
    Tensor<S> backward(const Tensor<S>& dy) const {
        Tensor<S> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (input_[i] <= 0) dx[i] *= slope_;
        return dx;
    }

private:
    S slope_;
    Tensor<S> input_;
};

template <typename S>
class Tanh {
public:
    Tensor<S> infer(const Tensor<S>& x) const {
        Tensor<S> y = x;
        for (auto& v : y.values()) v = std::tanh(v);
        return y;
    }
    Tensor<S> forward(const Tensor<S>& x) {
        output_ = infer(x);
        return output_;
    }
    Tensor<S> backward(const Tensor<S>& dy) const {
        Tensor<S> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= S(1) - output_[i] * output_[i];
        return dx;
    }

private:
    Tensor<S> output_;
};

// Fully connected layer on N x in inputs.
template <typename S>
class Linear {
public:
    Linear() = default;
    Linear(int in, int out, const std::string& name)
        : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}), in_(in), out_(out) {}

    void init(std::mt19937_64& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
        uniform_init(weight.value, bound, rng);
        uniform_init(bias.value, bound, rng);
    }

    Tensor<S> infer(const Tensor<S>& x) const {
        require(x.rank() == 2 && x.dim(1) == in_, ErrorKind::Shape,
                "linear layer expects N x " + std::to_string(in_) + ", got " + shape_string(x.shape()));
        const int N = x.dim(0);
        Tensor<S> y({N, out_});
        MapMat<S> Y(y.data(), N, out_);
        Y.noalias() = CMapMat<S>(x.data(), N, in_) * CMapMat<S>(weight.value.data(), out_, in_).transpose();
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < out_; ++o) Y(n, o) += bias.value[o];
        return y;
    }
    Tensor<S> forward(const Tensor<S>& x) {
        input_ = x;
        return infer(x);
    }
    Tensor<S> backward(const Tensor<S>& dy) {
        const int N = dy.dim(0);
        const CMapMat<S> dY(dy.data(), N, out_);
        const CMapMat<S> X(input_.data(), N, in_);
        MapMat<S>(weight.grad.data(), out_, in_).noalias() += dY.transpose() * X;
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < out_; ++o) bias.grad[o] += dY(n, o);
        Tensor<S> dx({N, in_});
        MapMat<S>(dx.data(), N, in_).noalias() = dY * CMapMat<S>(weight.value.data(), out_, in_);
        return dx;
    }

    Param<S> weight, bias;

private:
    int in_ = 0, out_ = 0;
    Tensor<S> input_;
};

template <typename S>
class ReLU {
public:
    Tensor<S> infer(const Tensor<S>& x) const {
        Tensor<S> y = x;
        for (auto& v : y.values()) v = v > 0 ? v : S(0);
        return y;
    }
    Tensor<S> forward(const Tensor<S>& x) {
        input_ = x;
        return infer(x);
    }
    Tensor<S> backward(const Tensor<S>& dy) const {
        Tensor<S> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (input_[i] <= 0) dx[i] = 0;
        return dx;
    }

private:
    Tensor<S> input_;
};

}  // namespace pavad::nn
