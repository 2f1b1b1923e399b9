#include <doctest.h>

#include <cmath>

#include "trajod/optim.hpp"
#include "trajod/tensor.hpp"

using namespace trajod;

TEST_SUITE_BEGIN("optim");

TEST_CASE("learning-rate schedule") {
    CHECK(lr_at(0) == doctest::Approx(0.005).epsilon(1e-15));
    CHECK(lr_at(49) == doctest::Approx(0.005).epsilon(1e-15));
    CHECK(lr_at(50) == doctest::Approx(0.0045).epsilon(1e-12));
    CHECK(lr_at(149) == doctest::Approx(0.00405).epsilon(1e-12));
}

namespace {

void apply_gradient(Tensor& p, const std::vector<double>& g) {
    sum(mul(p, Tensor::from_values(p.shape(), g))).backward();
}

}  // namespace

TEST_CASE("adam first step matches the closed form") {
    Tensor p = Tensor::from_values({2}, {1.0, -2.0}, true);
    Adam opt({p});
    apply_gradient(p, {3.0, -4.0});
    opt.step(0.01);
    // after bias correction the first step is -lr * g / (|g| + eps)
    CHECK(p.values()[0] == doctest::Approx(1.0 - 0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
    CHECK(p.values()[1] == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
    // gradients cleared after the step
    for (double g : p.grad()) CHECK(g == 0.0);
}

TEST_CASE("adam second step uses decayed moments") {
    Tensor p = Tensor::from_values({1}, {0.0}, true);
    Adam opt({p});
    apply_gradient(p, {1.0});
    opt.step(0.1);
    const double x1 = p.values()[0];
    apply_gradient(p, {1.0});
    opt.step(0.1);
    // hand-rolled reference
    double m = 0.0, v = 0.0, x = 0.0;
    for (int t = 1; t <= 2; ++t) {
        m = 0.9 * m + 0.1 * 1.0;
        v = 0.999 * v + 0.001 * 1.0;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        x -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
        if (t == 1) CHECK(x1 == doctest::Approx(x).epsilon(1e-14));
    }
    CHECK(p.values()[0] == doctest::Approx(x).epsilon(1e-14));
}

TEST_CASE("zero gradient leaves parameters untouched") {
    Tensor p = Tensor::from_values({2}, {0.5, -0.5}, true);
    Adam opt({p});
    opt.step(0.1);
    CHECK(p.values()[0] == 0.5);
    CHECK(p.values()[1] == -0.5);
}

TEST_CASE("updates are bit-reproducible") {
    auto run = []() {
        Tensor p = Tensor::from_values({3}, {0.1, 0.2, 0.3}, true);
        Adam opt({p});
        for (int i = 0; i < 25; ++i) {
            sum(mul(p, p)).backward();
            opt.step(lr_at(i));
        }
        return p.values();
    };
    CHECK(run() == run());
}

TEST_SUITE_END();
