// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "densreach/error.hpp"
#include "densreach/liouville.hpp"
#include "densreach/net.hpp"
#include "densreach/rng.hpp"

using namespace densreach;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    int i = 0;
    for (double x : v) {
        out[i++] = x;
    }
    return out;
}

TrainingBatch small_batch(std::uint64_t seed) {
    const auto [train, val] = build_dataset(make_system(SystemId::Vdp), 6, 5, 0.05, seed, 0.5);
    return make_batch(train);
}

DensityNet random_net(int d, std::uint64_t seed) {
    auto net = make_net(d, {6, 5}, seed);
    Rng rng(seed + 100);
    for (auto& l : net.layers) {
        l.b = Vector::NullaryExpr(l.b.size(), [&] { return rng.uniform(-0.3, 0.3); });
    }
    net.norm_shift = Vector::NullaryExpr(d + 1, [&] { return rng.uniform(-0.5, 0.5); });
    net.norm_scale = Vector::NullaryExpr(d + 1, [&] { return rng.uniform(0.5, 2.0); });
    return net;
}

}  // namespace

TEST(Net, ZeroWeightNetOutputsBias) {
    auto net = make_net(2, {4}, 1);
    for (auto& l : net.layers) {
        l.w.setZero();
    }
    net.layers.back().b = vec({0.7, -1, 2});
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
        const auto out = forward(net, vec({rng.uniform(-3, 3), rng.uniform(-3, 3)}), rng.uniform(0, 5));
        EXPECT_EQ(out.z, 0.7);
        EXPECT_EQ(out.x_hat, vec({-1, 2}));
    }
}

TEST(Net, SingleNeuronHandComputed) {
    // One hidden neuron relu(x0 + 2t - 1); outputs z = 3 h + 0.5, x_hat = -h.
    auto net = make_net(1, {1}, 1);
    net.layers[0].w = Matrix{{1.0, 2.0}};
    net.layers[0].b = vec({-1.0});
    net.layers[1].w = Matrix{{3.0}, {-1.0}};
    net.layers[1].b = vec({0.5, 0.0});
    for (double x : {-1.0, 0.25, 2.0}) {
        for (double t : {0.0, 0.5, 1.5}) {
            const double h = std::max(0.0, x + 2 * t - 1);
            const auto out = forward(net, vec({x}), t);
            EXPECT_NEAR(out.z, 3 * h + 0.5, 1e-12);
            EXPECT_NEAR(out.x_hat[0], -h, 1e-12);
        }
    }
    EXPECT_THROW(forward(net, vec({1, 2}), 0.0), ArgumentError);
}

TEST(Net, GainExamples) {
    EXPECT_EQ(g_of(123.0, 0.0), 1.0);
    EXPECT_EQ(g_of(0.0, 17.0), 1.0);
    EXPECT_NEAR(g_of(std::log(2.0), 1.0), 2.0, 1e-15);
    const auto before = g_saturation_count();
    EXPECT_EQ(g_of(1e3, 1.0), std::exp(60.0));
    EXPECT_EQ(g_of(-1e3, 1.0), std::exp(-60.0));
    EXPECT_EQ(g_saturation_count(), before + 2);
}

// Property: G(., 0) = 1 makes the estimate equal rho0 at t = 0, exactly.
TEST(Net, DensityAtTimeZeroIsInitialDensity) {
    const auto rho0 = InitialDistribution::truncated_gaussian({vec({-1, -1}), vec({1, 1})}, vec({0.2, 0.1}),
                                                              vec({0.4, 0.6}));
    Rng rng(4);
    for (int k = 0; k < 5; ++k) {
        const auto net = random_net(2, 10 + k);
        for (int i = 0; i < 50; ++i) {
            const Vector x = vec({rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)});
            EXPECT_EQ(density_estimate(net, x, 0.0, rho0), rho0.density(x));
        }
    }
    EXPECT_EQ(density_estimate(random_net(2, 3), vec({5, 5}), 1.0, rho0), 0.0);
}

TEST(Net, LossVanishesForExactSolution) {
    // f = 0: constant trajectories, zero divergence; a net with zero last
    // layer weights except x_hat = x0 has both residuals zero.
    TrajectoryDataset data;
    data.system = "none";
    data.dt = 0.1;
    for (double x : {-1.0, 0.5, 2.0}) {
        Trajectory tr;
        tr.x0 = vec({x});
        for (int k = 0; k < 4; ++k) {
            tr.states.push_back(tr.x0);
            tr.times.push_back(0.1 * k);
            tr.divergences.push_back(0.0);
        }
        data.trajectories.push_back(tr);
    }
    auto net = make_net(1, {2}, 1);
    // hidden: relu(x0 + 10), relu(-x0 + 10) -> x_hat = (h1 - h2) / 2 = x0.
    net.layers[0].w = Matrix{{1.0, 0.0}, {-1.0, 0.0}};
    net.layers[0].b = vec({10.0, 10.0});
    net.layers[1].w = Matrix{{0.0, 0.0}, {0.5, -0.5}};
    net.layers[1].b = vec({0.0, 0.0});
    const auto batch = make_batch(data);
    EXPECT_NEAR(loss(net, batch, 1.0), 0.0, 1e-24);
}

TEST(Net, LambdaZeroIsPureLiouville) {
    const auto batch = small_batch(3);
    const auto net = random_net(2, 5);
    const auto terms = loss_terms(net, batch);
    EXPECT_DOUBLE_EQ(loss(net, batch, 0.0), terms.liouville);
    EXPECT_DOUBLE_EQ(loss(net, batch, 2.5), 2.5 * terms.flow + terms.liouville);
}

TEST(Net, LogGainResidualHandComputed) {
    // z = b constant: log G = t b, so the residual is b + div for either partner.
    const auto batch = small_batch(4);
    auto net = make_net(2, {3}, 1);
    for (auto& l : net.layers) {
        l.w.setZero();
        l.b.setZero();
    }
    net.layers.back().b[0] = 0.4;
    double expect = 0.0;
    for (int i = 0; i < batch.size(); ++i) {
        expect += (0.4 + batch.div[i]) * (0.4 + batch.div[i]);
    }
    EXPECT_NEAR(loss_terms(net, batch, LiouvilleForm::LogGain).liouville, expect / batch.size(), 1e-12);
}

TEST(Net, BatchPartnerTimes) {
    const auto batch = small_batch(1);
    for (int i = 0; i < batch.size(); ++i) {
        EXPECT_NEAR(std::abs(batch.partner_t[i] - batch.t[i]), batch.dt, 1e-12);
        EXPECT_NEAR(std::remainder(batch.t[i], batch.dt), 0.0, 1e-12);
    }
}

// Backprop against central differences, one parameter at a time.
TEST(Net, GradientMatchesFiniteDifferences) {
    const auto batch = small_batch(2);
    Rng rng(77);
    for (int k = 0; k < 6; ++k) {
        const auto form = k % 2 == 0 ? LiouvilleForm::Gain : LiouvilleForm::LogGain;
        auto net = random_net(2, 20 + k);
        Gradient grad;
        loss_and_gradient(net, batch, 1.3, 0.7, grad, nullptr, form);
        const auto g = flatten_gradient(grad);
        const auto p = flatten_parameters(net);
        ASSERT_EQ(g.size(), p.size());
        ASSERT_EQ(p.size(), net.parameter_count());
        for (int trial = 0; trial < 20; ++trial) {
            const auto idx = static_cast<std::size_t>(rng.below(p.size()));
            const double h = 1e-5;
            auto pp = p, pm = p;
            pp[idx] += h;
            pm[idx] -= h;
            DensityNet a = net, b = net;
            assign_parameters(a, pp);
            assign_parameters(b, pm);
            Gradient unused;
            const double fd = (loss_and_gradient(a, batch, 1.3, 0.7, unused, nullptr, form) -
                               loss_and_gradient(b, batch, 1.3, 0.7, unused, nullptr, form)) /
                              (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(g[idx]), 1e-6});
            EXPECT_LT(std::abs(fd - g[idx]) / scale, 1e-4) << "param " << idx;
        }
    }
}

TEST(Net, ParameterRoundTrip) {
    auto net = random_net(3, 9);
    const auto p = flatten_parameters(net);
    auto other = make_net(3, {6, 5}, 1);
    assign_parameters(other, p);
    EXPECT_EQ(flatten_parameters(other), p);
    EXPECT_THROW(assign_parameters(other, std::vector<double>(3)), ArgumentError);
}

TEST(Net, CheckpointRoundTripIsExact) {
    for (int k = 0; k < 10; ++k) {
        auto net = random_net(1 + k % 4, 30 + k);
        net.system = "vdp";
        net.dt = 0.05;
        const auto bytes = save_checkpoint(net);
        const auto back = load_checkpoint(bytes);
        EXPECT_EQ(flatten_parameters(back), flatten_parameters(net));
        EXPECT_EQ(back.norm_shift, net.norm_shift);
        EXPECT_EQ(back.norm_scale, net.norm_scale);
        EXPECT_EQ(back.system, "vdp");
        EXPECT_EQ(back.dt, 0.05);
        EXPECT_EQ(save_checkpoint(back), bytes);
    }
}

TEST(Net, TruncatedCheckpointIsParseError) {
    const auto bytes = save_checkpoint(random_net(2, 1));
    for (std::size_t cut : {std::size_t{0}, std::size_t{1}, bytes.size() / 3, bytes.size() - 2}) {
        EXPECT_THROW(load_checkpoint(bytes.substr(0, cut)), ParseError) << cut;
    }
}

TEST(Net, VersionMismatchIsReported) {
    auto bytes = save_checkpoint(random_net(2, 1));
    const auto pos = bytes.find("\"version\":1");
    ASSERT_NE(pos, std::string::npos);
    bytes.replace(pos, 11, "\"version\":7");
    try {
        load_checkpoint(bytes);
        FAIL() << "expected UnsupportedVersionError";
    } catch (const UnsupportedVersionError& e) {
        EXPECT_EQ(e.version(), 7);
    }
}

TEST(Net, NormalizationIsMeanAndRange) {
    const auto [train, val] = build_dataset(make_system(SystemId::Scalar1d), 20, 10, 0.01, 1, 0.5);
    auto net = make_net(1, {4}, 1);
    fit_normalization(net, train);
    const auto batch = make_batch(train);
    EXPECT_NEAR(net.norm_shift[0], batch.x0.col(0).mean(), 1e-12);
    EXPECT_NEAR(net.norm_shift[1], batch.t.mean(), 1e-12);
    EXPECT_NEAR(net.norm_scale[1], batch.t.maxCoeff() - batch.t.minCoeff(), 1e-12);
}

TEST(Net, TrainingIsDeterministicAndKeepsBest) {
    const auto [train_data, val_data] = build_dataset(make_system(SystemId::Vdp), 40, 10, 0.05, 5, 0.8);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.hidden = {16, 16};
    cfg.batch_size = 64;
    cfg.seed = 11;
    const auto a = train(train_data, val_data, cfg);
    const auto b = train(train_data, val_data, cfg);
    EXPECT_EQ(flatten_parameters(a.net), flatten_parameters(b.net));
    ASSERT_EQ(a.history.size(), 8u);
    for (std::size_t e = 1; e < a.history.size(); ++e) {
        EXPECT_LE(a.history[e].best_val_loss, a.history[e - 1].best_val_loss);
    }
    EXPECT_LT(a.history.back().best_val_loss, a.history.front().val_loss);
    const double best = loss(a.net, make_batch(val_data), cfg.lambda, cfg.liouville_form);
    EXPECT_NEAR(best, a.history[static_cast<std::size_t>(a.best_epoch - 1)].val_loss, 1e-9 * std::max(1.0, best));
}

TEST(Net, EmptyTrainingSetRejected) {
    TrajectoryDataset empty;
    TrainConfig cfg;
    EXPECT_THROW(train(empty, empty, cfg), ArgumentError);
}
