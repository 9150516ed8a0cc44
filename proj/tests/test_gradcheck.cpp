#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "nn/layers.hpp"
#include "nn/loss.hpp"
#include "nn/network.hpp"
#include "nn/rng.hpp"
#include "nn/tensor.hpp"

// Analytic gradients vs double-precision central differences. Every layer
// kind that appears in the training graph is covered, both through its
// parameters and through its input.

using namespace caeloc;
using nn::Mode;
using DTensor = nn::Tensor<double>;

namespace {

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-4;

// loss(out, dloss_or_null) -> scalar; fills the gradient when asked
using LossFn = std::function<double(const DTensor&, DTensor*)>;

DTensor random_dtensor(const std::vector<int>& shape, nn::Rng& rng, double lo = -1.0,
                       double hi = 1.0) {
    DTensor t(shape);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

double eval_loss(nn::Sequential<double>& net, const DTensor& in, const LossFn& loss) {
    DTensor out = net.forward(in, Mode::train);
    return loss(out, nullptr);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Check d loss / d theta for every parameter of the chain (sampled when a
// tensor is large) and d loss / d input for every input element.
void check_gradients(nn::Sequential<double>& net, DTensor in, const LossFn& loss,
                     uint64_t sample_seed, size_t max_per_tensor = 40) {
    DTensor out = net.forward(in, Mode::train);
    DTensor dout;
    loss(out, &dout);
    DTensor din = net.backward(dout);

    auto params = net.params();
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) {
        analytic.emplace_back(p.grad->data(), p.grad->data() + p.grad->size());
    }

    nn::Rng pick(sample_seed);
    for (size_t pi = 0; pi < params.size(); ++pi) {
        DTensor& theta = *params[pi].value;
        std::vector<size_t> idx;
        if (theta.size() <= max_per_tensor) {
            for (size_t i = 0; i < theta.size(); ++i) idx.push_back(i);
        } else {
            for (size_t s = 0; s < max_per_tensor; ++s) idx.push_back(pick.uniform_int(theta.size()));
        }
        for (size_t i : idx) {
            const double keep = theta[i];
            theta[i] = keep + kStep;
            double up = eval_loss(net, in, loss);
            theta[i] = keep - kStep;
            double dn = eval_loss(net, in, loss);
            theta[i] = keep;
            double fd = (up - dn) / (2.0 * kStep);
            INFO("param ", params[pi].name, " [", i, "] fd=", fd, " analytic=", analytic[pi][i]);
            CHECK(rel_err(fd, analytic[pi][i]) < kTol);
        }
    }

    nn::Rng ipick(sample_seed ^ 0xabcdef);
    size_t checks = std::min(in.size(), max_per_tensor);
    for (size_t s = 0; s < checks; ++s) {
        size_t i = in.size() <= max_per_tensor ? s : ipick.uniform_int(in.size());
        const double keep = in[i];
        in[i] = keep + kStep;
        double up = eval_loss(net, in, loss);
        in[i] = keep - kStep;
        double dn = eval_loss(net, in, loss);
        in[i] = keep;
        double fd = (up - dn) / (2.0 * kStep);
        INFO("input[", i, "] fd=", fd, " analytic=", din[i]);
        CHECK(rel_err(fd, din[i]) < kTol);
    }
}

LossFn cce_loss(std::vector<int> labels) {
    return [labels](const DTensor& out, DTensor* dout) {
        return nn::sparse_cce(out, labels, dout);
    };
}

LossFn mse_loss(DTensor target) {
    return [target](const DTensor& out, DTensor* dout) {
        double l = nn::mse(out, target);
        if (dout) *dout = nn::mse_backward(out, target);
        return l;
    };
}

} // namespace

TEST_CASE("classifier chain: conv, relu, maxpool, flatten, dense, cross entropy") {
    nn::Rng rng(101);
    nn::Sequential<double> net;
    net.add(std::make_shared<nn::Conv2D<double>>(1, 3, 3, 1, rng));
    net.add(std::make_shared<nn::ReLU<double>>());
    net.add(std::make_shared<nn::MaxPool<double>>(3, 3));
    net.add(std::make_shared<nn::Flatten<double>>());
    net.add(std::make_shared<nn::Dense<double>>(3 * 2 * 2, 5, rng));
    DTensor in = random_dtensor({3, 8, 8, 1}, rng);
    check_gradients(net, in, cce_loss({0, 4, 2}), 1);
}

TEST_CASE("strided conv chain") {
    nn::Rng rng(102);
    nn::Sequential<double> net;
    net.add(std::make_shared<nn::Conv2D<double>>(2, 4, 3, 2, rng));
    net.add(std::make_shared<nn::ReLU<double>>());
    net.add(std::make_shared<nn::Flatten<double>>());
    net.add(std::make_shared<nn::Dense<double>>(4 * 3 * 3, 4, rng));
    DTensor in = random_dtensor({2, 7, 7, 2}, rng);
    check_gradients(net, in, cce_loss({1, 3}), 2);
}

TEST_CASE("batchnorm in train mode, via batch statistics") {
    nn::Rng rng(103);
    nn::Sequential<double> net;
    net.add(std::make_shared<nn::Conv2D<double>>(1, 4, 3, 1, rng));
    auto bn = std::make_shared<nn::BatchNorm<double>>(4);
    // non-trivial gamma/beta so their gradients are exercised off 1 and 0
    for (int c = 0; c < 4; ++c) {
        bn->gamma()[size_t(c)] = 0.5 + 0.3 * c;
        bn->beta()[size_t(c)] = -0.2 + 0.1 * c;
    }
    net.add(bn);
    net.add(std::make_shared<nn::ReLU<double>>());
    net.add(std::make_shared<nn::Flatten<double>>());
    net.add(std::make_shared<nn::Dense<double>>(4 * 4 * 4, 3, rng));
    DTensor in = random_dtensor({4, 6, 6, 1}, rng);
    check_gradients(net, in, cce_loss({0, 1, 2, 1}), 3);
}

TEST_CASE("decoder chain: upsample, transposed conv, sigmoid, mse") {
    nn::Rng rng(104);
    nn::Sequential<double> net;
    net.add(std::make_shared<nn::Conv2D<double>>(1, 3, 3, 1, rng));
    net.add(std::make_shared<nn::ReLU<double>>());
    net.add(std::make_shared<nn::MaxPool<double>>(2, 2));
    net.add(std::make_shared<nn::Upsample<double>>(2));
    net.add(std::make_shared<nn::TransposedConv2D<double>>(3, 1, 3, rng));
    net.add(std::make_shared<nn::Sigmoid<double>>());
    DTensor in = random_dtensor({2, 8, 8, 1}, rng, 0.0, 1.0);
    nn::Rng trng(1040);
    DTensor target = random_dtensor({2, 8, 8, 1}, trng, 0.0, 1.0);
    check_gradients(net, in, mse_loss(target), 4);
}

TEST_CASE("dropout with a frozen mask") {
    nn::Rng rng(105);
    nn::Sequential<double> net;
    auto drop = std::make_shared<nn::Dropout<double>>(0.4, 99);
    net.add(std::make_shared<nn::Dense<double>>(6, 8, rng));
    net.add(std::make_shared<nn::ReLU<double>>());
    net.add(drop);
    net.add(std::make_shared<nn::Dense<double>>(8, 3, rng));
    DTensor in = random_dtensor({3, 6}, rng);
    // materialize a mask once, then freeze it so every finite-difference
    // evaluation sees the same subnetwork
    net.forward(in, Mode::train);
    drop->freeze_mask(true);
    check_gradients(net, in, cce_loss({2, 0, 1}), 5);
}

TEST_CASE("full classifier topology at reduced size") {
    // conv -> bn -> relu -> pool -> conv -> bn -> relu -> conv -> bn ->
    // relu -> flatten -> dense, the deployed graph shrunk to 11x11 input
    nn::Rng rng(106);
    nn::Sequential<double> net;
    net.add(std::make_shared<nn::Conv2D<double>>(1, 2, 3, 1, rng));
    net.add(std::make_shared<nn::BatchNorm<double>>(2));
    net.add(std::make_shared<nn::ReLU<double>>());
    net.add(std::make_shared<nn::MaxPool<double>>(3, 3));
    net.add(std::make_shared<nn::Conv2D<double>>(2, 3, 3, 1, rng));
    net.add(std::make_shared<nn::BatchNorm<double>>(3));
    net.add(std::make_shared<nn::ReLU<double>>());
    net.add(std::make_shared<nn::Flatten<double>>());
    net.add(std::make_shared<nn::Dense<double>>(3, 4, rng));
    DTensor in = random_dtensor({3, 11, 11, 1}, rng, 0.0, 1.0);
    check_gradients(net, in, cce_loss({0, 3, 1}), 6, 25);
}

TEST_CASE("full autoencoder topology at reduced size") {
    nn::Rng rng(107);
    nn::Sequential<double> net;
    net.add(std::make_shared<nn::Conv2D<double>>(1, 2, 3, 1, rng));
    net.add(std::make_shared<nn::BatchNorm<double>>(2));
    net.add(std::make_shared<nn::ReLU<double>>());
    net.add(std::make_shared<nn::MaxPool<double>>(3, 3));
    net.add(std::make_shared<nn::Upsample<double>>(3));
    net.add(std::make_shared<nn::TransposedConv2D<double>>(2, 1, 3, rng));
    net.add(std::make_shared<nn::Sigmoid<double>>());
    DTensor in = random_dtensor({2, 11, 11, 1}, rng, 0.0, 1.0);
    DTensor target = in;  // reconstruction target held fixed
    check_gradients(net, in, mse_loss(target), 7, 25);
}
