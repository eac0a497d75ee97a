// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "densreach/error.hpp"
#include "densreach/rng.hpp"
#include "densreach/rpm.hpp"

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

Polyhedron box_poly(const Vector& lo, const Vector& hi) { return Polyhedron::from_box({lo, hi}); }

// A sliced net with one hidden layer, given directly.
SlicedNet sliced(const Matrix& w1, const Vector& b1, const Matrix& w2, const Vector& b2) {
    SlicedNet s;
    s.state_dim = static_cast<int>(w1.cols());
    s.layers = {{w1, b1}, {w2, b2}};
    return s;
}

DensityNet random_net(int d, const std::vector<int>& hidden, std::uint64_t seed) {
    auto net = make_net(d, hidden, seed);
    Rng rng(seed * 31 + 7);
    for (auto& l : net.layers) {
        l.b = Vector::NullaryExpr(l.b.size(), [&] { return rng.uniform(-0.5, 0.5); });
    }
    return net;
}

const AffineCell* cell_containing(const std::vector<AffineCell>& cells, const Vector& x, int* count = nullptr) {
    const AffineCell* found = nullptr;
    int n = 0;
    for (const auto& c : cells) {
        if (c.H.contains(x, 1e-9)) {
            found = found ? found : &c;
            ++n;
        }
    }
    if (count) {
        *count = n;
    }
    return found;
}

}  // namespace

TEST(Slice, MatchesJointForwardExactly) {
    Rng rng(2);
    for (int k = 0; k < 5; ++k) {
        const auto net = random_net(2, {8, 8}, 40 + k);
        const double t = rng.uniform(0, 3);
        const auto s = slice_net(net, t);
        for (int i = 0; i < 1000; ++i) {
            const Vector x = vec({rng.uniform(-3, 3), rng.uniform(-3, 3)});
            const auto joint = forward(net, x, t);
            const Vector out = forward(s, x);
            EXPECT_EQ(out[0], joint.z);
            EXPECT_EQ(out.tail(2), joint.x_hat);
        }
    }
}

TEST(Slice, DifferentTimesDifferOnlyInFirstBias) {
    const auto net = random_net(3, {6, 5}, 3);
    const auto a = slice_net(net, 0.5);
    const auto b = slice_net(net, 2.0);
    EXPECT_EQ(a.layers[0].w, b.layers[0].w);
    EXPECT_NE(a.layers[0].b, b.layers[0].b);
    for (std::size_t l = 1; l < a.layers.size(); ++l) {
        EXPECT_EQ(a.layers[l].w, b.layers[l].w);
        EXPECT_EQ(a.layers[l].b, b.layers[l].b);
    }
}

TEST(Slice, TimeZeroHasNoTimeContribution) {
    auto net = random_net(2, {4}, 5);
    const auto folded = fold_input(net);
    const auto s = slice_net(net, 0.0);
    EXPECT_EQ(s.layers[0].b, folded.b);
}

TEST(Pattern, Examples) {
    const auto neg = sliced(Matrix::Ones(3, 2), vec({-1, -2, -0.5}), Matrix::Ones(3, 3), Vector::Zero(3));
    EXPECT_EQ(activation_pattern(neg, vec({0, 0})).to_string(), "000");
    const auto relu = sliced(Matrix{{1.0}}, vec({0}), Matrix{{1.0}, {1.0}}, vec({0, 0}));
    EXPECT_EQ(activation_pattern(relu, vec({1})).bits, std::vector<std::uint8_t>{1});
    EXPECT_EQ(activation_pattern(relu, vec({-1})).bits, std::vector<std::uint8_t>{0});
    EXPECT_EQ(activation_pattern(relu, vec({0})).bits, std::vector<std::uint8_t>{0});
    EXPECT_EQ(ActivationPattern::from_string("0110").to_string(), "0110");
    EXPECT_THROW(ActivationPattern::from_string("01x"), ArgumentError);
}

TEST(Pattern, StableAwayFromHyperplanes) {
    const auto s = slice_net(random_net(2, {8, 8}, 9), 1.0);
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
        const Vector x = vec({rng.uniform(-2, 2), rng.uniform(-2, 2)});
        const Vector dx = vec({rng.uniform(-1, 1), rng.uniform(-1, 1)}).normalized() * 1e-12;
        // Skip points within 1e-9 of a hyperplane of the first layer.
        const Vector pre = affine_apply(s.layers[0].w, x, s.layers[0].b);
        if (pre.cwiseAbs().minCoeff() < 1e-9) {
            continue;
        }
        EXPECT_EQ(activation_pattern(s, x), activation_pattern(s, x + dx));
    }
}

TEST(Cell, SingleReluNeuron) {
    // y = relu(x): output [z, x_hat] = [relu(x), relu(x)].
    const auto s = sliced(Matrix{{1.0}}, vec({0}), Matrix{{1.0}, {1.0}}, vec({0, 0}));
    const auto domain = box_poly(vec({-1}), vec({1}));
    const auto on = cell_of(s, ActivationPattern{{1}}, domain);
    ASSERT_TRUE(on);
    const auto hb = bounding_box(on->H);
    EXPECT_NEAR(hb.lo[0], 0.0, 1e-12);
    EXPECT_NEAR(hb.hi[0], 1.0, 1e-12);
    EXPECT_NEAR(on->C(1, 0), 1.0, 1e-15);
    EXPECT_NEAR(on->d[1], 0.0, 1e-15);
    const auto off = cell_of(s, ActivationPattern{{0}}, domain);
    ASSERT_TRUE(off);
    const auto hb0 = bounding_box(off->H);
    EXPECT_NEAR(hb0.lo[0], -1.0, 1e-12);
    EXPECT_NEAR(hb0.hi[0], 0.0, 1e-12);
    EXPECT_EQ(off->C.norm(), 0.0);
    EXPECT_EQ(off->d.norm(), 0.0);
    const auto cells = enumerate_cells(s, domain);
    ASSERT_EQ(cells.size(), 2u);
}

TEST(Cell, IdentityNetComposesToIdentity) {
    // x_hat = relu(x) - relu(-x) per coordinate, z = 0.5 constant.
    Matrix w1(4, 2);
    w1 << 1, 0, -1, 0, 0, 1, 0, -1;
    Matrix w2(3, 4);
    w2 << 0, 0, 0, 0, 1, -1, 0, 0, 0, 0, 1, -1;
    const auto s = sliced(w1, Vector::Zero(4), w2, vec({0.5, 0, 0}));
    const auto domain = box_poly(vec({-1, -1}), vec({1, 1}));
    const auto cells = enumerate_cells(s, domain);
    EXPECT_EQ(cells.size(), 4u);
    for (const auto& c : cells) {
        EXPECT_LT((c.Cx() - Matrix::Identity(2, 2)).norm(), 1e-15);
        EXPECT_LT(c.dx().norm(), 1e-15);
        EXPECT_NEAR(c.z_lo, 0.5, 1e-12);
        EXPECT_NEAR(c.z_hi, 0.5, 1e-12);
    }
}

TEST(Enumerate, NoCrossingGivesDomain) {
    const auto s = sliced(Matrix{{1.0, 1.0}}, vec({10}), Matrix{{1.0}, {1.0}, {-1.0}}, vec({0, 0, 0}));
    const auto domain = box_poly(vec({-1, -1}), vec({1, 1}));
    const auto cells = enumerate_cells(s, domain);
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_NEAR(cells[0].volume, 4.0, 1e-12);
    EXPECT_EQ(cells[0].pattern.to_string(), "1");
}

TEST(Enumerate, OneHyperplaneGivesTwoCells) {
    const auto s = sliced(Matrix{{1.0, -2.0}}, vec({0.3}), Matrix{{1.0}, {1.0}, {-1.0}}, vec({0, 0, 0}));
    const auto domain = box_poly(vec({-1, -1}), vec({1, 1}));
    const auto cells = enumerate_cells(s, domain);
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_NEAR(cells[0].volume + cells[1].volume, 4.0, 1e-12);
}

TEST(Enumerate, BudgetExceeded) {
    const auto s = slice_net(random_net(2, {8, 8}, 1), 0.5);
    EnumerationOptions opt;
    opt.budget = 3;
    EXPECT_THROW(enumerate_cells(s, box_poly(vec({-2, -2}), vec({2, 2})), opt), BudgetError);
}

TEST(Enumerate, RejectsHighDimension) {
    const auto s = slice_net(random_net(5, {4}, 1), 0.5);
    EXPECT_THROW(enumerate_cells(s, box_poly(-Vector::Ones(5), Vector::Ones(5))), ArgumentError);
}

// Properties over random 2-D nets: exactness, coverage, essential
// disjointness, volume partition and z-bound validity.
class RandomNetPartition : public ::testing::TestWithParam<int> {};

TEST_P(RandomNetPartition, Invariants) {
    const int seed = GetParam();
    const auto s = slice_net(random_net(2, {8, 8}, 100 + seed), 0.25 * seed);
    const Vector lo = vec({-2, -1.5}), hi = vec({2, 1.5});
    const auto domain = box_poly(lo, hi);
    const auto cells = enumerate_cells(s, domain);
    double total = 0.0;
    for (const auto& c : cells) {
        total += c.volume;
        EXPECT_LE(c.z_lo, c.z_hi);
        EXPECT_GT(c.volume, 0.0);
    }
    EXPECT_NEAR(total, 12.0, 1e-4 * 12.0);
    for (std::size_t i = 1; i < cells.size(); ++i) {
        EXPECT_LT(cells[i - 1].pattern, cells[i].pattern);
    }
    Rng rng(seed);
    int multi = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        const Vector x = vec({rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1])});
        int count = 0;
        const AffineCell* c = cell_containing(cells, x, &count);
        ASSERT_NE(c, nullptr);
        multi += count > 1 ? 1 : 0;
        const Vector direct = forward(s, x);
        // Exactness in the cell that owns the activation pattern.
        const auto pat = activation_pattern(s, x);
        for (const auto& cell : cells) {
            if (cell.pattern == pat) {
                EXPECT_LT((cell.map(x) - direct).cwiseAbs().maxCoeff(), 1e-9);
                EXPECT_GE(direct[0], cell.z_lo - 1e-9);
                EXPECT_LE(direct[0], cell.z_hi + 1e-9);
            }
        }
        EXPECT_LT((c->map(x) - direct).cwiseAbs().maxCoeff(), 1e-9);
    }
    EXPECT_LE(multi, n / 1000);
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomNetPartition, ::testing::Range(0, 6));

TEST(Enumerate, ThreeDimensionalVolumePartition) {
    const auto s = slice_net(random_net(3, {6, 4}, 17), 0.7);
    const auto domain = box_poly(vec({-1, -1, -1}), vec({1, 1, 1}));
    const auto cells = enumerate_cells(s, domain);
    double total = 0.0;
    for (const auto& c : cells) {
        total += c.volume;
    }
    EXPECT_NEAR(total, 8.0, 8e-4);
}

TEST(Enumerate, JobsDoNotChangeResult) {
    const auto s = slice_net(random_net(2, {8, 8}, 21), 1.0);
    const auto domain = box_poly(vec({-2, -2}), vec({2, 2}));
    EnumerationOptions one, four;
    four.jobs = 4;
    Partition a{"x", 1.0, domain, enumerate_cells(s, domain, one)};
    Partition b{"x", 1.0, domain, enumerate_cells(s, domain, four)};
    EXPECT_EQ(save_partition(a), save_partition(b));
}

TEST(Partition, RoundTrip) {
    const auto s = slice_net(random_net(2, {6, 6}, 8), 0.3);
    const auto domain = box_poly(vec({-1, -1}), vec({1, 1}));
    Partition p{"vdp", 0.3, domain, enumerate_cells(s, domain)};
    const auto bytes = save_partition(p);
    const auto back = load_partition(bytes);
    EXPECT_EQ(save_partition(back), bytes);
    ASSERT_EQ(back.cells.size(), p.cells.size());
    for (std::size_t i = 0; i < p.cells.size(); ++i) {
        EXPECT_EQ(back.cells[i].pattern, p.cells[i].pattern);
        EXPECT_EQ(back.cells[i].C, p.cells[i].C);
        EXPECT_EQ(back.cells[i].H.A(), p.cells[i].H.A());
        EXPECT_EQ(back.cells[i].z_hi, p.cells[i].z_hi);
    }
    EXPECT_THROW(load_partition(bytes.substr(0, bytes.size() / 2)), ParseError);
}
