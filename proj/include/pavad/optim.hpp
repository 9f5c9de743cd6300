#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pavad/nn.hpp"

namespace pavad {

template <typename S>
class Adam {
public:
    Adam(std::vector<nn::Param<S>*> params, double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    void step() {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = *params_[k];
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double g = p.grad[i];
                m[i] = static_cast<S>(b1_ * m[i] + (1.0 - b1_) * g);
                v[i] = static_cast<S>(b2_ * v[i] + (1.0 - b2_) * g * g);
                const double mhat = m[i] / c1, vhat = v[i] / c2;
                p.value[i] = static_cast<S>(p.value[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    long step_count() const { return t_; }
    void set_step_count(long t) { t_ = t; }

    // Named state tensors ("<param>.exp_avg", "<param>.exp_avg_sq").
    std::map<std::string, Tensor<S>*> state() {
        std::map<std::string, Tensor<S>*> s;
        for (std::size_t k = 0; k < params_.size(); ++k) {
            s[params_[k]->name + ".exp_avg"] = &m_[k];
            s[params_[k]->name + ".exp_avg_sq"] = &v_[k];
        }
        return s;
    }

private:
    std::vector<nn::Param<S>*> params_;
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<Tensor<S>> m_, v_;
};

// Heavy-ball SGD with L2 weight decay added to the gradient.
template <typename S>
class Sgd {
public:
    Sgd(std::vector<nn::Param<S>*> params, double lr, double momentum = 0.0, double weight_decay = 0.0)
        : params_(std::move(params)), lr_(lr), momentum_(momentum), wd_(weight_decay) {
        for (auto* p : params_) buf_.emplace_back(p->value.shape());
    }

    void step() {
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = *params_[k];
            auto& b = buf_[k];
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double d = p.grad[i] + wd_ * p.value[i];
                b[i] = static_cast<S>(started_ ? momentum_ * b[i] + d : d);
                p.value[i] = static_cast<S>(p.value[i] - lr_ * b[i]);
            }
        }
        started_ = true;
    }

    bool started() const { return started_; }
    void set_started(bool s) { started_ = s; }

    std::map<std::string, Tensor<S>*> state() {
        std::map<std::string, Tensor<S>*> s;
        for (std::size_t k = 0; k < params_.size(); ++k) s[params_[k]->name + ".momentum_buffer"] = &buf_[k];
        return s;
    }

private:
    std::vector<nn::Param<S>*> params_;
    double lr_, momentum_, wd_;
    bool started_ = false;
    std::vector<Tensor<S>> buf_;
};

}  // namespace pavad
