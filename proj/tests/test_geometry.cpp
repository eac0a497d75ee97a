// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "densreach/error.hpp"
#include "densreach/geometry.hpp"
#include "densreach/rng.hpp"

using namespace densreach;

namespace {

Polyhedron unit_box(int d) { return Polyhedron::from_box({Vector::Zero(d), Vector::Ones(d)}); }

Polyhedron simplex(int d) {
    Polyhedron p(d);
    for (int i = 0; i < d; ++i) {
        Vector e = Vector::Zero(d);
        e[i] = -1.0;
        p.add_row(e, 0.0);
    }
    p.add_row(Vector::Ones(d), 1.0);
    return p;
}

// Box [-1,1]^d cut by random half-spaces that pass near the origin's
// surroundings, so the result is always a full-dimensional polytope.
Polyhedron random_polytope(Rng& rng, int d, int cuts) {
    Polyhedron p = Polyhedron::from_box({-Vector::Ones(d), Vector::Ones(d)});
    for (int k = 0; k < cuts; ++k) {
        Vector a(d);
        for (int i = 0; i < d; ++i) {
            a[i] = rng.normal();
        }
        a.normalize();
        p.add_row(a, rng.uniform(0.2, 1.2));
    }
    return p;
}

Matrix random_rotation(Rng& rng, int d) {
    Matrix m(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            m(i, j) = rng.normal();
        }
    }
    Eigen::HouseholderQR<Matrix> qr(m);
    return qr.householderQ();
}

// Brute-force oracle: every d-subset of raw rows, solved and filtered.
std::vector<Vector> oracle_vertices(const Polyhedron& p) {
    const int d = p.dim();
    const int m = p.rows();
    std::vector<Vector> out;
    std::vector<int> mask(m, 0);
    std::fill(mask.begin(), mask.begin() + d, 1);
    do {
        Matrix a(d, d);
        Vector b(d);
        int r = 0;
        for (int i = 0; i < m; ++i) {
            if (mask[i]) {
                a.row(r) = p.A().row(i);
                b[r] = p.b()[i];
                ++r;
            }
        }
        Eigen::FullPivLU<Matrix> lu(a);
        if (!lu.isInvertible()) {
            continue;
        }
        Vector x = lu.solve(b);
        if (p.max_violation(x) > 1e-9) {
            continue;
        }
        bool dup = false;
        for (const auto& v : out) {
            dup = dup || (v - x).norm() < 1e-8;
        }
        if (!dup) {
            out.push_back(x);
        }
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// lp_solve

TEST(LpSolve, MaxCoordinateOverUnitSquare) {
    Vector c(2);
    c << 1, 0;
    const auto r = lp_solve(c, unit_box(2), Sense::Maximize);
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.value, 1.0, 1e-12);
    EXPECT_NEAR(r.point[0], 1.0, 1e-12);
}

TEST(LpSolve, MaxSumOverSimplex) {
    const auto r = lp_solve(Vector::Ones(2), simplex(2), Sense::Maximize);
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.value, 1.0, 1e-12);
}

TEST(LpSolve, MinimizeReturnsLowerEnd) {
    Vector c(2);
    c << 1, 2;
    const auto r = lp_solve(c, unit_box(2), Sense::Minimize);
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.value, 0.0, 1e-12);
}

TEST(LpSolve, ContradictoryPairIsInfeasible) {
    Polyhedron p(1);
    p.add_row(Vector::Ones(1), 0.0);
    p.add_row(-Vector::Ones(1), -1.0);
    EXPECT_EQ(lp_solve(Vector::Ones(1), p, Sense::Maximize).status, LpStatus::Infeasible);
    EXPECT_FALSE(is_feasible(p));
}

TEST(LpSolve, HalfPlaneIsUnbounded) {
    Polyhedron p(2);
    Vector a(2);
    a << 1, 0;
    p.add_row(a, 1.0);
    Vector c(2);
    c << 0, 1;
    EXPECT_EQ(lp_solve(c, p, Sense::Maximize).status, LpStatus::Unbounded);
    EXPECT_EQ(lp_solve(a, p, Sense::Maximize).status, LpStatus::Optimal);
}

TEST(LpSolve, DimensionMismatchThrows) {
    EXPECT_THROW(lp_solve(Vector::Ones(3), unit_box(2), Sense::Maximize), ArgumentError);
}

TEST(LpSolve, RandomInstancesMatchVertexOracle) {
    Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const int d = 2 + trial % 3;
        const auto p = random_polytope(rng, d, 4);
        Vector c(d);
        for (int i = 0; i < d; ++i) {
            c[i] = rng.normal();
        }
        const auto verts = oracle_vertices(p);
        double best = -1e300;
        for (const auto& v : verts) {
            best = std::max(best, c.dot(v));
        }
        const auto r = lp_solve(c, p, Sense::Maximize);
        ASSERT_TRUE(r.optimal());
        EXPECT_NEAR(r.value, best, 1e-9);
        EXPECT_LE(p.max_violation(r.point), 1e-9);
        EXPECT_NEAR(c.dot(r.point), r.value, 1e-9);
    }
}

TEST(LpSolve, DegenerateVertexDoesNotCycle) {
    // Many constraints through the same vertex (0,0).
    Polyhedron p(2);
    for (int k = 0; k < 12; ++k) {
        const double th = std::numbers::pi * (0.05 + 0.9 * k / 11.0);
        Vector a(2);
        a << std::cos(th), std::sin(th);
        p.add_row(a, 0.0);
    }
    p.add_row(-Vector::Ones(2), 5.0);
    Vector c(2);
    c << 0.3, 1.0;
    const auto r = lp_solve(c, p, Sense::Maximize);
    ASSERT_TRUE(r.optimal());
    EXPECT_LE(p.max_violation(r.point), 1e-9);
}

// ---------------------------------------------------------------------------
// feasibility, intersection

TEST(Feasibility, BoxesAgreeWithIntervalOracle) {
    Rng rng(5);
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + trial % 4;
        Vector lo1(d), hi1(d), lo2(d), hi2(d);
        bool overlap = true;
        for (int i = 0; i < d; ++i) {
            lo1[i] = rng.uniform(-1, 1);
            hi1[i] = lo1[i] + rng.uniform(0, 0.8);
            lo2[i] = rng.uniform(-1, 1);
            hi2[i] = lo2[i] + rng.uniform(0, 0.8);
            overlap = overlap && std::max(lo1[i], lo2[i]) <= std::min(hi1[i], hi2[i]);
        }
        const auto p = intersect(Polyhedron::from_box({lo1, hi1}), Polyhedron::from_box({lo2, hi2}));
        agree += is_feasible(p) == overlap ? 1 : 0;
    }
    EXPECT_EQ(agree, 100);
}

TEST(Intersect, WholeSpaceIsNeutral) {
    const auto p = unit_box(2);
    const auto q = intersect(p, Polyhedron(2));
    EXPECT_EQ(q.A(), p.A());
    EXPECT_EQ(q.b(), p.b());
}

TEST(Intersect, OverlappingIntervals) {
    const auto p = Polyhedron::from_box({Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)});
    const auto q = Polyhedron::from_box({Vector::Constant(1, 0.5), Vector::Constant(1, 2.0)});
    const auto r = intersect(p, q);
    ASSERT_TRUE(is_feasible(r));
    const auto box = bounding_box(r);
    EXPECT_NEAR(box.lo[0], 0.5, 1e-12);
    EXPECT_NEAR(box.hi[0], 1.0, 1e-12);
}

TEST(Intersect, DisjointBoxesAreInfeasible) {
    const auto p = unit_box(2);
    const auto q = Polyhedron::from_box({Vector::Constant(2, 2.0), Vector::Constant(2, 3.0)});
    EXPECT_FALSE(is_feasible(intersect(p, q)));
}

TEST(Intersect, DimensionMismatchThrows) { EXPECT_THROW(intersect(unit_box(2), unit_box(3)), ArgumentError); }

// ---------------------------------------------------------------------------
// remove_redundant

TEST(RemoveRedundant, DuplicateFaceDropped) {
    auto p = unit_box(2);
    p.add_row(p.A().row(0).transpose(), p.b()[0]);
    EXPECT_EQ(remove_redundant(p).rows(), 4);
}

TEST(RemoveRedundant, SlackHalfspaceDropped) {
    auto p = simplex(2);
    Vector a(2);
    a << 1, 0;
    p.add_row(a, 10.0);
    std::vector<int> kept;
    const auto q = remove_redundant(p, kept);
    EXPECT_EQ(q.rows(), 3);
    EXPECT_EQ(kept, (std::vector<int>{0, 1, 2}));
}

TEST(RemoveRedundant, MembershipUnchangedOnRandomPolytopes) {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 2 + trial % 3;
        const auto p = random_polytope(rng, d, 8);
        const auto q = remove_redundant(p);
        EXPECT_LE(q.rows(), p.rows());
        for (int s = 0; s < 1000; ++s) {
            Vector x(d);
            for (int i = 0; i < d; ++i) {
                x[i] = rng.uniform(-1.1, 1.1);
            }
            // Points within 1e-7 of a boundary may legitimately flip.
            const double mp = p.max_violation(x);
            if (std::abs(mp) < 1e-7) {
                continue;
            }
            ASSERT_EQ(mp <= 0, q.max_violation(x) <= 0);
        }
    }
}

// ---------------------------------------------------------------------------
// vertices, bounding box

TEST(Vertices, UnitSquare) { EXPECT_EQ(vertices(unit_box(2)).size(), 4U); }

TEST(Vertices, StandardSimplex) { EXPECT_EQ(vertices(simplex(2)).size(), 3U); }

TEST(Vertices, RotatedBoxMatchesRotatedCorners) {
    Rng rng(23);
    for (int d = 2; d <= 4; ++d) {
        const Matrix q = random_rotation(rng, d);
        const auto box = unit_box(d);
        // {x | A q^T x <= b} is the box rotated by q.
        const Polyhedron rotated(box.A() * q.transpose(), box.b());
        const auto verts = vertices(rotated);
        ASSERT_EQ(static_cast<int>(verts.size()), 1 << d);
        for (int mask = 0; mask < (1 << d); ++mask) {
            Vector corner(d);
            for (int i = 0; i < d; ++i) {
                corner[i] = (mask >> i) & 1;
            }
            const Vector expect = q * corner;
            double best = 1e300;
            for (const auto& v : verts) {
                best = std::min(best, (v - expect).cwiseAbs().maxCoeff());
            }
            EXPECT_LT(best, 1e-8);
        }
    }
}

TEST(Vertices, UnboundedThrows) {
    Polyhedron p(2);
    p.add_row(-Vector::Ones(2), 0.0);
    EXPECT_THROW(vertices(p), UnboundedError);
}

TEST(Vertices, MatchBruteForceOracle) {
    Rng rng(29);
    for (int trial = 0; trial < 30; ++trial) {
        const int d = 2 + trial % 2;
        const auto p = random_polytope(rng, d, 5);
        EXPECT_EQ(vertices(p).size(), oracle_vertices(p).size());
    }
}

TEST(BoundingBox, Triangle) {
    const auto box = bounding_box(simplex(2));
    EXPECT_NEAR(box.lo[0], 0, 1e-12);
    EXPECT_NEAR(box.lo[1], 0, 1e-12);
    EXPECT_NEAR(box.hi[0], 1, 1e-12);
    EXPECT_NEAR(box.hi[1], 1, 1e-12);
}

TEST(BoundingBox, BoxRoundTrip) {
    Vector lo(3), hi(3);
    lo << -1, 0.5, 2;
    hi << 3, 0.75, 2.5;
    const auto box = bounding_box(Polyhedron::from_box({lo, hi}));
    EXPECT_LT((box.lo - lo).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((box.hi - hi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BoundingBox, ContainsAllVertices) {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_polytope(rng, 3, 6);
        const auto box = bounding_box(p);
        for (const auto& v : vertices(p)) {
            EXPECT_TRUE(box.contains(v, 1e-9));
        }
    }
}

TEST(BoxesIntersect, ClosedConvention) {
    const HyperRectangle a(Vector::Zero(2), Vector::Ones(2));
    Vector lo(2), hi(2);
    lo << 1, 0;
    hi << 2, 1;
    EXPECT_TRUE(boxes_intersect(a, {lo, hi}));
    EXPECT_FALSE(boxes_intersect(a, {Vector::Constant(2, 1.5), Vector::Constant(2, 2.0)}));
    EXPECT_TRUE(boxes_intersect(a, {Vector::Constant(2, 0.25), Vector::Constant(2, 0.5)}));
}

TEST(BoxesIntersect, NeverPrunesIntersectingPolytopes) {
    Rng rng(37);
    for (int trial = 0; trial < 1000; ++trial) {
        auto p = random_polytope(rng, 2, 3);
        auto q = random_polytope(rng, 2, 3);
        Vector shift(2);
        shift << rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5);
        q = affine_preimage(q, Matrix::Identity(2, 2), -shift);
        if (!boxes_intersect(bounding_box(p), bounding_box(q))) {
            EXPECT_FALSE(is_feasible(intersect(p, q)));
        }
    }
}

// ---------------------------------------------------------------------------
// volume

TEST(Volume, UnitHypercube) {
    for (int d = 1; d <= 6; ++d) {
        EXPECT_NEAR(volume(unit_box(d)), 1.0, 1e-9) << "d=" << d;
    }
}

TEST(Volume, StandardSimplex) {
    double fact = 1.0;
    for (int d = 1; d <= 6; ++d) {
        fact *= d;
        EXPECT_NEAR(volume(simplex(d)), 1.0 / fact, 1e-9) << "d=" << d;
    }
}

TEST(Volume, LowerDimensionalIsZero) {
    auto p = unit_box(2);
    Vector e(2);
    e << 0, 1;
    p.add_equality(e, 0.5);
    EXPECT_EQ(volume(p), 0.0);
}

TEST(Volume, EmptyIsZero) {
    auto p = unit_box(2);
    p.add_row(Vector::Ones(2), -1.0);
    EXPECT_EQ(volume(p), 0.0);
}

TEST(Volume, RandomPolytopesMatchMonteCarlo) {
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 2 + trial % 3;
        const auto p = random_polytope(rng, d, 4);
        const double exact = volume(p);
        const int n = 1'000'000;
        int hits = 0;
        Vector x(d);
        for (int s = 0; s < n; ++s) {
            for (int i = 0; i < d; ++i) {
                x[i] = rng.uniform(-1, 1);
            }
            hits += p.max_violation(x) <= 0 ? 1 : 0;
        }
        const double mc = std::pow(2.0, d) * hits / n;
        EXPECT_NEAR(exact / mc, 1.0, 0.01) << "trial " << trial;
    }
}

TEST(Volume, ScalesWithDeterminant) {
    Rng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 2 + trial % 3;
        const auto p = random_polytope(rng, d, 4);
        Matrix c = Matrix::Identity(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                c(i, j) += 0.4 * rng.normal();
            }
        }
        const double det = std::abs(c.determinant());
        if (det < 0.05) {
            continue;
        }
        const Vector shift = Vector::Random(d);
        EXPECT_NEAR(volume(affine_image(p, c, shift)) / (det * volume(p)), 1.0, 1e-6);
    }
}

// ---------------------------------------------------------------------------
// elimination and affine maps

TEST(Eliminate, UnitSquareDropY) {
    const auto q = eliminate(unit_box(2), 1);
    ASSERT_EQ(q.dim(), 1);
    const auto box = bounding_box(q);
    EXPECT_NEAR(box.lo[0], 0.0, 1e-12);
    EXPECT_NEAR(box.hi[0], 1.0, 1e-12);
}

TEST(Eliminate, EqualityPairSubstitution) {
    // z = x with 0 <= x <= 1; coordinates (x, z).
    Polyhedron p = Polyhedron::from_box({Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)});
    Polyhedron lifted(Matrix::Zero(0, 2), Vector(0));
    Vector ex(2), ez(2);
    ex << 1, 0;
    ez << 0, 1;
    lifted.add_row(ex, 1.0);
    lifted.add_row(-ex, 0.0);
    lifted.add_row(ez - ex, 0.0);
    lifted.add_row(ex - ez, 0.0);
    const auto q = eliminate(lifted, 1);
    const auto box = bounding_box(q);
    EXPECT_NEAR(box.lo[0], 0.0, 1e-12);
    EXPECT_NEAR(box.hi[0], 1.0, 1e-12);
    (void)p;
}

TEST(Eliminate, EmptyStaysEmpty) {
    auto p = unit_box(2);
    p.add_row(Vector::Ones(2), -1.0);
    EXPECT_FALSE(is_feasible(eliminate(p, 0)));
}

TEST(Eliminate, ProjectionMembershipMatchesLiftingLp) {
    Rng rng(47);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = random_polytope(rng, 3, 5);
        const auto q = eliminate(p, 2);
        for (int s = 0; s < 1000; ++s) {
            Vector y(2);
            y << rng.uniform(-1.1, 1.1), rng.uniform(-1.1, 1.1);
            // Oracle: the fibre {z | (y, z) in P} is nonempty.
            Polyhedron fibre(1);
            for (int i = 0; i < p.rows(); ++i) {
                fibre.add_row(Vector::Constant(1, p.A()(i, 2)), p.b()[i] - p.A().row(i).head(2).dot(y));
            }
            const double margin = q.max_violation(y);
            if (std::abs(margin) < 1e-7) {
                continue;
            }
            ASSERT_EQ(margin <= 0, is_feasible(fibre)) << "trial " << trial;
        }
    }
}

TEST(AffineImage, IdentityKeepsSet) {
    const auto p = simplex(2);
    const auto q = affine_image(p, Matrix::Identity(2, 2), Vector::Zero(2));
    EXPECT_NEAR(volume(q), 0.5, 1e-12);
    for (const auto& v : vertices(p)) {
        EXPECT_TRUE(q.contains(v));
    }
}

TEST(AffineImage, ScalingUnitBox) {
    for (int d = 1; d <= 4; ++d) {
        const auto q = affine_image(unit_box(d), 2.0 * Matrix::Identity(d, d), Vector::Zero(d));
        const auto box = bounding_box(q);
        EXPECT_LT(box.lo.cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((box.hi - Vector::Constant(d, 2.0)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(volume(q), std::pow(2.0, d), 1e-9);
    }
}

TEST(AffineImage, SingularMapGivesSegment) {
    Matrix c(2, 2);
    c << 1, 0, 0, 0;
    const auto q = affine_image(unit_box(2), c, Vector::Zero(2));
    const auto box = bounding_box(q);
    EXPECT_NEAR(box.lo[0], 0.0, 1e-12);
    EXPECT_NEAR(box.hi[0], 1.0, 1e-12);
    EXPECT_NEAR(box.lo[1], 0.0, 1e-12);
    EXPECT_NEAR(box.hi[1], 0.0, 1e-12);
    EXPECT_EQ(volume(q), 0.0);
    // Direct projection of the square onto x agrees with the first coordinate.
    const auto proj = eliminate(unit_box(2), 1);
    const auto pbox = bounding_box(proj);
    EXPECT_NEAR(pbox.lo[0], box.lo[0], 1e-12);
    EXPECT_NEAR(pbox.hi[0], box.hi[0], 1e-12);
}

TEST(AffineImage, SingularMatchesSampledImage) {
    Rng rng(53);
    Matrix c(3, 3);
    c << 1, 2, 0, 0, 1, 1, 1, 3, 1;  // rank 2
    const auto p = random_polytope(rng, 3, 3);
    const auto q = affine_image(p, c, Vector::Ones(3));
    for (int s = 0; s < 2000; ++s) {
        Vector x(3);
        for (int i = 0; i < 3; ++i) {
            x[i] = rng.uniform(-1, 1);
        }
        if (p.max_violation(x) <= 0) {
            EXPECT_TRUE(q.contains(c * x + Vector::Ones(3), 1e-8));
        }
    }
}

TEST(AffineImage, NonSquareMap) {
    Matrix c(1, 2);
    c << 1, 1;
    const auto q = affine_image(unit_box(2), c, Vector::Zero(1));
    const auto box = bounding_box(q);
    EXPECT_NEAR(box.lo[0], 0.0, 1e-12);
    EXPECT_NEAR(box.hi[0], 2.0, 1e-12);
}

TEST(AffinePreimage, InvertsImage) {
    Matrix c(2, 2);
    c << 2, 1, 0, 1;
    Vector d(2);
    d << 0.5, -1;
    const auto p = simplex(2);
    const auto back = affine_preimage(affine_image(p, c, d), c, d);
    EXPECT_NEAR(volume(back), volume(p), 1e-12);
}
