#include "checks.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace pavad;

TEST_CASE("analytic gradients match central differences") {
    const auto o = checks::gradient_check(200);
    INFO(o.detail);
    CHECK(o.pass);
}

TEST_CASE("discriminator gradients match central differences") {
    Discriminator<double> d(3);
    Tensor<double> x({5, 512});
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : x.values()) v = u(rng);
    const std::vector<int> y = {0, 1, 1, 0, 1};
    auto loss = [&]() {
        const Tensor<double> z = d.forward(x);
        return disc_loss(std::vector<double>(z.values().begin(), z.values().end()), y);
    };
    d.zero_grad();
    const Tensor<double> z = d.forward(x);
    std::vector<double> g;
    disc_loss_with_grad(std::vector<double>(z.values().begin(), z.values().end()), y, g);
    d.backward(Tensor<double>({5, 1}, g));
    for (auto* p : d.parameters())
        for (std::size_t i = 0; i < p->value.size(); i += p->value.size() / 7 + 1) {
            const double saved = p->value[i];
            p->value[i] = saved + 1e-6;
            const double up = loss();
            p->value[i] = saved - 1e-6;
            const double down = loss();
            p->value[i] = saved;
            CHECK(p->grad[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-5));
        }
}

TEST_CASE("forward output is bit-stable for a fixed seed") {
    Autoencoder<float> a(AutoencoderConfig::scaled(16), 8), b(AutoencoderConfig::scaled(16), 8);
    const Tensorf x = testutil::random_tensor({1, 3, 4, 16, 16}, 9);
    CHECK(a.forward(x) == b.forward(x));
    CHECK(a.infer(x) == b.infer(x));
}
