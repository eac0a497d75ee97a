// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "densreach/types.hpp"

namespace densreach {

/// Tolerances used throughout the polyhedral kernel.
namespace tol {
inline constexpr double kFeasibility = 1e-9;
inline constexpr double kRedundancy = 1e-8;
inline constexpr double kVertexDedupe = 1e-9;
inline constexpr double kSingular = 1e-10;
}  // namespace tol

/// Axis-aligned box [lo, hi]. Entries may be infinite.
struct HyperRectangle {
    Vector lo;
    Vector hi;

    HyperRectangle() = default;
    HyperRectangle(Vector lo_, Vector hi_);

    [[nodiscard]] int dim() const { return static_cast<int>(lo.size()); }
    [[nodiscard]] bool contains(const Vector& x, double slack = 0.0) const;
    [[nodiscard]] double volume() const;
    [[nodiscard]] Vector center() const { return 0.5 * (lo + hi); }
    [[nodiscard]] bool bounded() const;
};

/// Closed-interval overlap test; touching boxes intersect.
bool boxes_intersect(const HyperRectangle& r1, const HyperRectangle& r2);

/// Componentwise intersection; nullopt when empty.
std::optional<HyperRectangle> box_intersection(const HyperRectangle& r1, const HyperRectangle& r2);

/// Half-space system {v | A v <= b}. Zero rows means the whole space.
class Polyhedron {
  public:
    Polyhedron() = default;
    /// The whole space R^dim.
    explicit Polyhedron(int dim);
    Polyhedron(Matrix a, Vector b);

    static Polyhedron from_box(const HyperRectangle& box);

    [[nodiscard]] int dim() const { return static_cast<int>(a_.cols()); }
    [[nodiscard]] int rows() const { return static_cast<int>(a_.rows()); }
    [[nodiscard]] const Matrix& A() const { return a_; }
    [[nodiscard]] const Vector& b() const { return b_; }

    /// Max violation of A x <= b (negative when strictly inside).
    [[nodiscard]] double max_violation(const Vector& x) const;
    [[nodiscard]] bool contains(const Vector& x, double slack = tol::kFeasibility) const;

    void add_row(const Vector& a, double b);
    /// Adds a <= row and a >= row for a^T x = b.
    void add_equality(const Vector& a, double b);
    /// Keeps only the listed rows, in the given order.
    [[nodiscard]] Polyhedron select_rows(const std::vector<int>& keep) const;

  private:
    Matrix a_;
    Vector b_;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };
enum class Sense { Maximize, Minimize };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    double value = 0.0;
    Vector point;

    [[nodiscard]] bool optimal() const { return status == LpStatus::Optimal; }
};

/// Optimizes c^T x over P with a Bland-rule simplex. The solver works on
/// the dual standard form (rows = dimension of P), which keeps the tableau
/// tiny for the low-dimensional, many-row systems the cell machinery
/// produces. The optimal primal point is read off the simplex multipliers.
LpResult lp_solve(const Vector& c, const Polyhedron& p, Sense sense);

/// Number of LPs solved by this thread since start (diagnostics only).
std::size_t lp_solve_count() noexcept;

struct ChebyshevBall {
    Vector center;
    double radius = 0.0;  ///< negative when P is empty
};

/// Center and radius of the largest ball inscribed in P. The radius is
/// capped at `cap` so that unbounded polyhedra still yield a point.
ChebyshevBall chebyshev_center(const Polyhedron& p, double cap = 1e6);

bool is_feasible(const Polyhedron& p);

/// Row-stacked constraint system, no simplification.
Polyhedron intersect(const Polyhedron& p, const Polyhedron& q);

/// Drops constraints that do not change the set. A row is kept iff
/// maximizing it over the remaining rows exceeds its bound by more than
/// tol::kRedundancy. Precondition: P feasible. Row order is preserved.
Polyhedron remove_redundant(const Polyhedron& p);
/// Same, but reports which original row indices survived.
Polyhedron remove_redundant(const Polyhedron& p, std::vector<int>& kept);

/// Enumerates vertices of a bounded polyhedron (d <= 6) by solving every
/// d-subset of its irredundant rows. Throws UnboundedError when unbounded.
std::vector<Vector> vertices(const Polyhedron& p);

/// Exact volume via vertex enumeration and a simplicial fan from face
/// centroids. Lower-dimensional sets have volume 0. Requires d <= 6.
double volume(const Polyhedron& p);

/// Tight box by 2d LPs. Throws UnboundedError / InfeasibleError.
HyperRectangle bounding_box(const Polyhedron& p);

/// Fourier-Motzkin elimination of one coordinate followed by
/// remove_redundant. The result lives in d-1 dimensions.
Polyhedron eliminate(const Polyhedron& p, int idx);

/// Projects out several coordinates. Equality pairs present in P are used
/// for exact substitution before falling back to Fourier-Motzkin.
Polyhedron project_out(const Polyhedron& p, std::vector<int> coords);

/// Image {C x + d | x in P}. For square nonsingular C this is the direct
/// inverse formula; otherwise the graph of the map is lifted and x is
/// eliminated. Non-square C is accepted and always takes the lift path.
Polyhedron affine_image(const Polyhedron& p, const Matrix& c, const Vector& d);

/// Pre-image {x | C x + d in Q}.
Polyhedron affine_preimage(const Polyhedron& q, const Matrix& c, const Vector& d);

}  // namespace densreach
