// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "densreach/distribution.hpp"
#include "densreach/error.hpp"
#include "densreach/rng.hpp"
#include "densreach/systems.hpp"

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

Vector random_in(const HyperRectangle& box, Rng& rng) {
    Vector x(box.dim());
    for (int i = 0; i < box.dim(); ++i) {
        x[i] = rng.uniform(box.lo[i], box.hi[i]);
    }
    return x;
}

// Hand-differentiated divergence of the robot: only d(u_w)/d(theta) and
// d(u_a)/d(v) contribute.
double robot_divergence(const Vector& x) {
    const double bearing = std::atan2(1.5 - x[1], 1.5 - x[0]);
    const double uw = std::tanh(2.0 * (bearing - x[2]));
    const double ua = std::tanh(1.0 * (1.0 - x[3]));
    return -2.0 * (1.0 - uw * uw) - 1.0 * (1.0 - ua * ua);
}

// Independent fixed-step RK4 used as a long-horizon oracle.
Vector rk4(const std::function<Vector(const Vector&)>& f, Vector x, double h, int n) {
    for (int i = 0; i < n; ++i) {
        const Vector k1 = f(x);
        const Vector k2 = f(x + 0.5 * h * k1);
        const Vector k3 = f(x + 0.5 * h * k2);
        const Vector k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return x;
}

}  // namespace

TEST(Systems, StateDimensions) {
    EXPECT_EQ(make_system("vdp").state_dim, 2);
    EXPECT_EQ(make_system("dint").state_dim, 2);
    EXPECT_EQ(make_system("kop").state_dim, 3);
    EXPECT_EQ(make_system("robot").state_dim, 4);
    EXPECT_EQ(make_system("car").state_dim, 4);
    EXPECT_EQ(make_system("scalar1d").state_dim, 1);
    EXPECT_THROW(make_system("f16"), ArgumentError);
}

TEST(Systems, InitialDomains) {
    const auto vdp = make_system(SystemId::Vdp);
    EXPECT_EQ(vdp.init_domain.lo, vec({-2.5, -2.5}));
    EXPECT_EQ(vdp.init_domain.hi, vec({2.5, 2.5}));
    EXPECT_DOUBLE_EQ(vdp.params.at("mu"), 1.0);
    const auto robot = make_system(SystemId::Robot);
    EXPECT_EQ(robot.init_domain.lo, vec({-1.8, -1.8, 0.0, 1.0}));
    EXPECT_EQ(robot.init_domain.hi, vec({-1.2, -1.2, std::numbers::pi / 2, 1.5}));
    const auto car = make_system(SystemId::Car);
    EXPECT_DOUBLE_EQ(car.params.at("k1"), 0.5);
    EXPECT_DOUBLE_EQ(car.params.at("k2"), 0.5);
    EXPECT_DOUBLE_EQ(car.params.at("k3"), 1.0);
    EXPECT_DOUBLE_EQ(car.params.at("v_ref"), 1.0);
    EXPECT_DOUBLE_EQ(make_system(SystemId::Dint).default_dt, 1.0);
}

TEST(Systems, DynamicsExamples) {
    const auto vdp = make_system(SystemId::Vdp);
    EXPECT_EQ(eval_dynamics(vdp, vec({0, 0})), vec({0, 0}));
    EXPECT_EQ(eval_dynamics(vdp, vec({1, 1})), vec({1, -1}));
    EXPECT_EQ(eval_dynamics(make_system(SystemId::Kop), vec({1, 0, 0})), vec({0, 0, -1}));
    EXPECT_THROW(eval_dynamics(vdp, vec({1, 2, 3})), ArgumentError);
}

TEST(Systems, DivergenceExamples) {
    const auto vdp = make_system(SystemId::Vdp);
    EXPECT_DOUBLE_EQ(eval_divergence(vdp, vec({1, 7.3})), 0.0);
    EXPECT_DOUBLE_EQ(eval_divergence(vdp, vec({0, -4.1})), 1.0);
    Rng rng(3);
    const auto kop = make_system(SystemId::Kop);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(eval_divergence(kop, random_in(kop.init_domain, rng)), 0.0);
    }
}

TEST(Systems, DivergenceFdOfLinearFieldIsTrace) {
    Matrix a(3, 3);
    a << 1.5, -2, 0.3, 0.7, -0.25, 4, 1, 1, 2;
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const Vector x = Vector::NullaryExpr(3, [&] { return rng.uniform(-5, 5); });
        EXPECT_NEAR(divergence_fd([&](const Vector& v) { return Vector(a * v); }, x), a.trace(), 1e-6);
    }
    EXPECT_THROW(divergence_fd([](const Vector& v) { return v; }, vec({1}), 0.0), ArgumentError);
    EXPECT_THROW(divergence_fd([](const Vector& v) { return Vector(v / 0.0); }, vec({0}), 1e-8), NumericError);
}

TEST(Systems, DivergenceFdMatchesVdpExample) {
    const auto vdp = make_system(SystemId::Vdp);
    const Vector x = vec({0.3, 0.7});
    EXPECT_NEAR(divergence_fd([&](const Vector& v) { return eval_dynamics(vdp, v); }, x),
                eval_divergence(vdp, x), 1e-5);
}

// Property: finite differences agree with the analytic divergence on every
// system (robot: against the hand-differentiated controller).
TEST(Systems, DivergenceFdMatchesAnalyticEverywhere) {
    Rng rng(11);
    for (const auto& name : system_names()) {
        const auto spec = make_system(name);
        const auto f = [&](const Vector& v) { return eval_dynamics(spec, v); };
        int checked = 0;
        for (int i = 0; i < 1000; ++i) {
            const Vector x = random_in(spec.init_domain, rng);
            if (spec.id == SystemId::Dint && std::abs(std::abs(-0.5 * x[0] - x[1]) - 1.0) < 1e-6) {
                continue;  // saturation kink
            }
            const double analytic = spec.id == SystemId::Robot ? robot_divergence(x) : eval_divergence(spec, x);
            EXPECT_NEAR(divergence_fd(f, x), analytic, 1e-5) << name;
            ++checked;
        }
        EXPECT_GT(checked, 990) << name;
    }
}

TEST(Systems, ZeroFieldKeepsState) {
    const Dynamics zero{2, [](const Vector& x) { return Vector(Vector::Zero(x.size())); },
                        [](const Vector&) { return 0.0; }};
    const auto tr = simulate(zero, vec({1, 2}), 0.1, 10);
    ASSERT_EQ(tr.states.size(), 11u);
    for (const auto& s : tr.states) {
        EXPECT_EQ(s, vec({1, 2}));
    }
}

TEST(Systems, TrajectoryInvariants) {
    const auto spec = make_system(SystemId::Vdp);
    const auto tr = simulate(spec, vec({0.5, -1}), 0.05, 40);
    EXPECT_EQ(tr.states.front(), tr.x0);
    EXPECT_EQ(tr.divergences.size(), tr.states.size());
    ASSERT_EQ(tr.times.size(), tr.states.size());
    for (std::size_t k = 1; k < tr.times.size(); ++k) {
        EXPECT_NEAR(tr.times[k] - tr.times[k - 1], 0.05, 1e-12);
        EXPECT_DOUBLE_EQ(tr.divergences[k], eval_divergence(spec, tr.states[k]));
    }
}

TEST(Systems, Scalar1dMatchesClosedForm) {
    const auto spec = make_system(SystemId::Scalar1d);
    const auto tr = simulate(spec, vec({1.0}), 0.01, 100);
    EXPECT_NEAR(tr.states.back()[0], 0.5, 1e-6);
}

TEST(Systems, Rk4Order) {
    const auto spec = make_system(SystemId::Scalar1d);
    const double exact = 1.0 / (1.0 + 1.0);
    const double e1 = std::abs(simulate(spec, vec({1.0}), 0.25, 4, 1).states.back()[0] - exact);
    const double e2 = std::abs(simulate(spec, vec({1.0}), 0.25, 4, 2).states.back()[0] - exact);
    EXPECT_GE(e1 / e2, 8.0);
}

TEST(Systems, VdpReachesLimitCycle) {
    const auto spec = make_system(SystemId::Vdp);
    const auto f = [&](const Vector& v) { return eval_dynamics(spec, v); };
    // Locus: fine-step orbit started on the outside and run past transients.
    Vector x = rk4(f, vec({3.0, 0.0}), 1e-3, 60000);
    std::vector<Vector> locus;
    for (int i = 0; i < 8000; ++i) {
        x = rk4(f, x, 1e-3, 1);
        locus.push_back(x);
    }
    const Vector end = simulate(spec, vec({0.1, 0.0}), 0.05, 1000).states.back();
    double best = 1e9;
    for (const auto& p : locus) {
        best = std::min(best, (p - end).norm());
    }
    EXPECT_LT(best, 0.05);
}

TEST(Systems, SimulateIsDeterministic) {
    const auto spec = make_system(SystemId::Robot);
    const Vector x0 = vec({-1.5, -1.5, 0.5, 1.2});
    const auto a = simulate(spec, x0, 0.05, 30);
    const auto b = simulate(spec, x0, 0.05, 30);
    for (std::size_t k = 0; k < a.states.size(); ++k) {
        EXPECT_EQ(a.states[k], b.states[k]);
        EXPECT_EQ(a.divergences[k], b.divergences[k]);
    }
}

TEST(Systems, NonFiniteStateReportsStep) {
    const Dynamics blowup{1, [](const Vector& x) { return Vector(x.cwiseAbs2() * 1e3); },
                          [](const Vector&) { return 0.0; }};
    try {
        simulate(blowup, vec({10.0}), 1.0, 50);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        EXPECT_GE(e.step(), 1);
    }
}

TEST(Distribution, UniformSampleMean) {
    const auto d = InitialDistribution::uniform({vec({0, 0}), vec({1, 1})});
    const auto xs = sample_initial(d, 10000, 5);
    Vector mean = Vector::Zero(2);
    for (const auto& x : xs) {
        mean += x;
    }
    mean /= 10000.0;
    EXPECT_NEAR(mean[0], 0.5, 0.02);
    EXPECT_NEAR(mean[1], 0.5, 0.02);
}

TEST(Distribution, NarrowGaussianConcentrates) {
    const auto d = InitialDistribution::truncated_gaussian({vec({0, 0}), vec({1, 1})}, vec({0.4, 0.6}),
                                                           vec({1e-4, 1e-4}));
    for (const auto& x : sample_initial(d, 1000, 9)) {
        EXPECT_LT((x - vec({0.4, 0.6})).norm(), 1e-3);
    }
}

TEST(Distribution, RobotBoxSamples) {
    const auto spec = make_system(SystemId::Robot);
    const auto d = InitialDistribution::uniform(spec.init_domain);
    for (const auto& x : sample_initial(d, 2000, 2)) {
        EXPECT_TRUE(spec.init_domain.contains(x));
    }
}

// Property: samples always lie in the support.
TEST(Distribution, SamplesInsideSupport) {
    const HyperRectangle box(vec({-1, 0, 2}), vec({1, 0.5, 3}));
    const auto g = InitialDistribution::truncated_gaussian(box, vec({0.9, 0.1, 2.2}), vec({0.5, 1.0, 0.1}));
    for (const auto& x : sample_initial(g, 5000, 4)) {
        EXPECT_TRUE(box.contains(x));
    }
}

TEST(Distribution, PathologicalTruncationThrows) {
    const auto g = InitialDistribution::truncated_gaussian({vec({0}), vec({1})}, vec({10}), vec({0.5}));
    EXPECT_THROW(sample_initial(g, 10, 1), TruncationError);
}

TEST(Distribution, DensityIntegratesToOne) {
    const auto g = InitialDistribution::truncated_gaussian({vec({-1, 0}), vec({2, 1})}, vec({0.3, 0.8}),
                                                           vec({0.7, 0.4}));
    const int n = 400;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            sum += g.density(vec({-1 + 3.0 * (i + 0.5) / n, (j + 0.5) / n}));
        }
    }
    EXPECT_NEAR(sum * 3.0 / (n * n), 1.0, 1e-4);
    EXPECT_EQ(g.density(vec({2.5, 0.5})), 0.0);
}

// Property: the density bounds over a polytope bracket sampled values.
TEST(Distribution, BoundsBracketSamples) {
    const HyperRectangle box(vec({-1, -1}), vec({1, 1}));
    const auto g = InitialDistribution::truncated_gaussian(box, vec({0.2, -0.3}), vec({0.3, 0.5}));
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const Vector c = Vector::NullaryExpr(2, [&] { return rng.uniform(-1.2, 1.2); });
        const HyperRectangle q(c.array() - 0.3, c.array() + 0.3);
        const auto [lo, hi] = g.bounds(Polyhedron::from_box(q));
        for (int i = 0; i < 200; ++i) {
            const Vector x = random_in(q, rng);
            if (!box.contains(x)) {
                continue;
            }
            const double v = g.density(x);
            EXPECT_GE(v, lo * (1 - 1e-12));
            EXPECT_LE(v, hi * (1 + 1e-12));
        }
    }
    const auto [lo, hi] = g.bounds(Polyhedron::from_box({vec({3, 3}), vec({4, 4})}));
    EXPECT_EQ(lo, 0.0);
    EXPECT_EQ(hi, 0.0);
}
