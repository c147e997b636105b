#include <doctest.h>

#include "qdt/nn.hpp"

using namespace qdt;
using namespace qdt::nn;

namespace {

// Central finite differences of the mean BCE loss w.r.t. every parameter.
double max_grad_rel_error(Network& net, const MatrixXd& x, const VectorXd& targets,
                          uint64_t forward_seed) {
    Rng rng(forward_seed);
    VectorXd dlogits;
    net.zero_grads();
    {
        Rng r(forward_seed);
        const VectorXd logits = net.forward(x, false, r);
        bce_with_logits(logits, targets, dlogits);
        net.backward(dlogits);
    }
    const VectorXd analytic = net.grads();

    const double h = 1e-6;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < net.params().size(); ++i) {
        const double saved = net.params()[i];
        VectorXd tmp;
        net.params()[i] = saved + h;
        Rng r1(forward_seed);
        const double lp = bce_with_logits(net.forward(x, false, r1), targets, tmp);
        net.params()[i] = saved - h;
        Rng r2(forward_seed);
        const double lm = bce_with_logits(net.forward(x, false, r2), targets, tmp);
        net.params()[i] = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("bce with logits matches the direct formula") {
    VectorXd logits(3), targets(3), dlogits;
    logits << 0.0, 2.0, -3.0;
    targets << 1.0, 0.0, 1.0;
    const double loss = bce_with_logits(logits, targets, dlogits);
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double p = sigmoid(logits[i]);
        expect += -(targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p));
    }
    CHECK(loss == doctest::Approx(expect / 3.0));
    for (int i = 0; i < 3; ++i) {
        CHECK(dlogits[i] == doctest::Approx((sigmoid(logits[i]) - targets[i]) / 3.0));
    }
}

TEST_CASE("dense network gradients match finite differences") {
    Network net;
    net.add_dense(6, 4);
    net.add_relu();
    net.add_dense(4, 1);
    Rng rng(1);
    net.init(false, rng);

    MatrixXd x(3, 6);
    Rng data_rng(2);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = normal(data_rng);
    VectorXd targets(3);
    targets << 1.0, 0.0, 1.0;

    CHECK(max_grad_rel_error(net, x, targets, 5) < 1e-4);
}

TEST_CASE("conv + pool network gradients match finite differences") {
    Network net;
    net.add_conv(1, 2, 3, 8, 8);  // 8x8 -> 6x6, 2 channels
    net.add_relu();
    net.add_maxpool2(2, 6, 6);    // -> 3x3
    net.add_dense(2 * 3 * 3, 1);
    Rng rng(3);
    net.init(false, rng);

    MatrixXd x(2, 64);
    Rng data_rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = normal(data_rng);
    VectorXd targets(2);
    targets << 0.0, 1.0;

    CHECK(max_grad_rel_error(net, x, targets, 6) < 1e-4);
}

TEST_CASE("bayesian gradients match finite differences with fixed noise") {
    Network net;
    net.add_dense(5, 3);
    net.add_relu();
    net.add_dense(3, 1);
    Rng rng(7);
    net.init(true, rng);
    CHECK(net.params().size() == 2 * net.weight_count());

    MatrixXd x(3, 5);
    Rng data_rng(8);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = normal(data_rng);
    VectorXd targets(3);
    targets << 1.0, 1.0, 0.0;

    // Same forward seed on every evaluation fixes the weight noise, so the
    // reparameterized gradient is checkable by finite differences too.
    CHECK(max_grad_rel_error(net, x, targets, 9) < 1e-4);
}

TEST_CASE("KL divergence value and gradient") {
    Network net;
    net.add_dense(2, 1);
    Rng rng(10);
    net.init(true, rng);
    const int n = net.weight_count();

    // Closed form per parameter: -log s + (s^2 + mu^2)/2 - 1/2.
    double expect = 0.0;
    for (int i = 0; i < n; ++i) {
        const double mu = net.params()[i];
        const double s = std::log1p(std::exp(net.params()[n + i]));
        expect += -std::log(s) + 0.5 * (s * s + mu * mu) - 0.5;
    }
    CHECK(net.kl_divergence() == doctest::Approx(expect).epsilon(1e-10));

    net.zero_grads();
    net.accumulate_kl_grad(1.0);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < net.params().size(); ++i) {
        const double saved = net.params()[i];
        net.params()[i] = saved + h;
        const double kp = net.kl_divergence();
        net.params()[i] = saved - h;
        const double km = net.kl_divergence();
        net.params()[i] = saved;
        CHECK(net.grads()[i] == doctest::Approx((kp - km) / (2.0 * h)).epsilon(1e-4));
    }
}

TEST_CASE("adam optimizes a toy objective") {
    // Minimize ||p - target||^2 over 4 parameters.
    VectorXd p = VectorXd::Zero(4), target(4);
    target << 1.0, -2.0, 0.5, 3.0;
    Adam opt(4, 0.05);
    for (int i = 0; i < 2000; ++i) {
        const VectorXd g = 2.0 * (p - target);
        opt.step(p, g);
    }
    CHECK((p - target).norm() < 1e-3);
}

TEST_CASE("dropout scales kept activations") {
    Network net;
    net.add_dropout(0.5);
    net.add_dense(4, 1);
    Rng rng(11);
    net.init(false, rng);
    MatrixXd x = MatrixXd::Ones(1, 4);
    Rng eval_rng(12);
    // Inference mode: dropout is the identity, repeated calls agree.
    const double a = net.forward(x, false, eval_rng)[0];
    const double b = net.forward(x, false, eval_rng)[0];
    CHECK(a == doctest::Approx(b));
}
