// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <vector>

#include "densreach/error.hpp"
#include "densreach/geometry.hpp"
#include "geometry_internal.hpp"

namespace densreach {

namespace {

thread_local std::size_t g_lp_count = 0;

constexpr double kReducedCostEps = 1e-11;
constexpr double kPivotEps = 1e-11;
constexpr int kMaxIterations = 20000;

enum class StdStatus { Optimal, Infeasible, Unbounded };

struct StdResult {
    StdStatus status = StdStatus::Infeasible;
    Vector multipliers;
};

// Dense tableau for  min g^T y  s.t.  M y = h, y >= 0  with artificial
// columns appended. Columns [0, n) are structural, [n, n + r) artificial,
// the last one is the right-hand side.
class Tableau {
  public:
    Tableau(const Matrix& m, const Vector& h)
        : rows_(static_cast<int>(m.rows())), cols_(static_cast<int>(m.cols())),
          t_(Matrix::Zero(rows_, cols_ + rows_ + 1)), basis_(rows_), sign_(rows_) {
        for (int r = 0; r < rows_; ++r) {
            sign_[r] = h[r] < 0 ? -1.0 : 1.0;
            t_.row(r).head(cols_) = sign_[r] * m.row(r);
            t_(r, cols_ + r) = 1.0;
            t_(r, rhs()) = sign_[r] * h[r];
            basis_[r] = cols_ + r;
        }
    }

    [[nodiscard]] int rhs() const { return cols_ + rows_; }

    // Returns false when the objective is unbounded below.
    bool optimize(const Vector& cost, int allowed_cols) {
        std::vector<char> is_basic(cols_ + rows_, 0);
        for (int iter = 0; iter < kMaxIterations; ++iter) {
            std::fill(is_basic.begin(), is_basic.end(), 0);
            for (int b : basis_) {
                is_basic[b] = 1;
            }
            int entering = -1;
            for (int j = 0; j < allowed_cols; ++j) {
                if (is_basic[j]) {
                    continue;
                }
                double reduced = cost[j];
                for (int r = 0; r < rows_; ++r) {
                    reduced -= cost[basis_[r]] * t_(r, j);
                }
                if (reduced < -kReducedCostEps) {
                    entering = j;
                    break;
                }
            }
            if (entering < 0) {
                return true;
            }
            int leaving = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int r = 0; r < rows_; ++r) {
                const double coef = t_(r, entering);
                if (coef <= kPivotEps) {
                    continue;
                }
                const double ratio = std::max(t_(r, rhs()), 0.0) / coef;
                if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && leaving >= 0 &&
                                             basis_[r] < basis_[leaving])) {
                    best = ratio;
                    leaving = r;
                }
            }
            if (leaving < 0) {
                return false;
            }
            pivot(leaving, entering);
        }
        throw NumericError("simplex iteration limit reached");
    }

    void pivot(int row, int col) {
        const double p = t_(row, col);
        t_.row(row) /= p;
        for (int r = 0; r < rows_; ++r) {
            if (r != row) {
                const double f = t_(r, col);
                if (f != 0.0) {
                    t_.row(r) -= f * t_.row(row);
                }
            }
        }
        basis_[row] = col;
    }

    [[nodiscard]] double artificial_sum() const {
        double s = 0.0;
        for (int r = 0; r < rows_; ++r) {
            if (basis_[r] >= cols_) {
                s += std::abs(t_(r, rhs()));
            }
        }
        return s;
    }

    void drive_out_artificials() {
        for (int r = 0; r < rows_; ++r) {
            if (basis_[r] < cols_) {
                continue;
            }
            int best = -1;
            double best_abs = 1e-9;
            for (int j = 0; j < cols_; ++j) {
                const double v = std::abs(t_(r, j));
                if (v > best_abs && !basic(j)) {
                    best_abs = v;
                    best = j;
                }
            }
            if (best >= 0) {
                t_(r, rhs()) = 0.0;
                pivot(r, best);
            }
        }
    }

    [[nodiscard]] bool basic(int col) const {
        for (int b : basis_) {
            if (b == col) {
                return true;
            }
        }
        return false;
    }

    // Simplex multipliers of the original (unflipped) equality rows.
    [[nodiscard]] Vector multipliers(const Vector& cost) const {
        Vector pi(rows_);
        for (int s = 0; s < rows_; ++s) {
            double acc = 0.0;
            for (int r = 0; r < rows_; ++r) {
                acc += cost[basis_[r]] * t_(r, cols_ + s);
            }
            pi[s] = sign_[s] * acc;
        }
        return pi;
    }

    [[nodiscard]] int cols() const { return cols_; }

  private:
    int rows_;
    int cols_;
    Matrix t_;
    std::vector<int> basis_;
    std::vector<double> sign_;
};

StdResult solve_standard(const Matrix& m, const Vector& h, const Vector& g) {
    Tableau tab(m, h);
    const int n = static_cast<int>(m.cols());
    const int r = static_cast<int>(m.rows());

    Vector phase1 = Vector::Zero(n + r);
    phase1.tail(r).setOnes();
    tab.optimize(phase1, n + r);
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if (tab.artificial_sum() > 1e-9 * scale) {
        return {StdStatus::Infeasible, {}};
    }
    tab.drive_out_artificials();

    Vector phase2 = Vector::Zero(n + r);
    phase2.head(n) = g;
    if (!tab.optimize(phase2, n)) {
        return {StdStatus::Unbounded, {}};
    }
    return {StdStatus::Optimal, tab.multipliers(phase2)};
}

// max c^T x over {A x <= b} with unit-norm rows, via the dual
//   min b^T y  s.t.  A^T y = c,  y >= 0.
StdResult solve_normalized(const Matrix& a, const Vector& b, const Vector& c) {
    ++g_lp_count;
    return solve_standard(a.transpose(), c, b);
}

}  // namespace

std::size_t lp_solve_count() noexcept { return g_lp_count; }

namespace detail {

NormalizedSystem normalize_rows(const Polyhedron& p) {
    NormalizedSystem out;
    const int m = p.rows();
    const int d = p.dim();
    out.a.resize(m, d);
    out.b.resize(m);
    int k = 0;
    for (int i = 0; i < m; ++i) {
        const double norm = p.A().row(i).norm();
        if (norm < 1e-14) {
            if (p.b()[i] < -tol::kFeasibility) {
                out.empty = true;
            }
            continue;
        }
        out.a.row(k) = p.A().row(i) / norm;
        out.b[k] = p.b()[i] / norm;
        out.source.push_back(i);
        ++k;
    }
    out.a.conservativeResize(k, d);
    out.b.conservativeResize(k);
    return out;
}

}  // namespace detail

ChebyshevBall chebyshev_center(const Polyhedron& p, double cap) {
    const int d = p.dim();
    const auto sys = detail::normalize_rows(p);
    if (sys.empty) {
        return {Vector::Zero(d), -std::numeric_limits<double>::infinity()};
    }
    const int m = static_cast<int>(sys.a.rows());
    Matrix a(m + 1, d + 1);
    Vector b(m + 1);
    a.topLeftCorner(m, d) = sys.a;
    a.topRightCorner(m, 1).setOnes();
    b.head(m) = sys.b;
    a.row(m).setZero();
    a(m, d) = 1.0;
    b[m] = cap;
    Vector c = Vector::Zero(d + 1);
    c[d] = 1.0;
    const auto res = solve_normalized(a, b, c);
    if (res.status != StdStatus::Optimal) {
        throw NumericError("Chebyshev LP failed to reach an optimum");
    }
    return {res.multipliers.head(d), res.multipliers[d]};
}

bool is_feasible(const Polyhedron& p) { return chebyshev_center(p).radius >= -tol::kFeasibility; }

LpResult lp_solve(const Vector& c, const Polyhedron& p, Sense sense) {
    const int d = p.dim();
    if (c.size() != d) {
        throw ArgumentError("lp_solve: objective has dimension " + std::to_string(c.size()) +
                            ", polyhedron has " + std::to_string(d));
    }
    const auto sys = detail::normalize_rows(p);
    if (sys.empty) {
        return {LpStatus::Infeasible, 0.0, {}};
    }
    Vector obj = sense == Sense::Maximize ? Vector(c) : Vector(-c);
    const double norm = obj.norm();
    if (norm == 0.0 || sys.a.rows() == 0) {
        const auto ball = chebyshev_center(p);
        if (ball.radius < -tol::kFeasibility) {
            return {LpStatus::Infeasible, 0.0, {}};
        }
        if (norm != 0.0) {
            return {LpStatus::Unbounded, 0.0, {}};
        }
        return {LpStatus::Optimal, 0.0, ball.center};
    }
    obj /= norm;
    const auto res = solve_normalized(sys.a, sys.b, obj);
    switch (res.status) {
        case StdStatus::Optimal: {
            LpResult out{LpStatus::Optimal, c.dot(res.multipliers), res.multipliers};
            return out;
        }
        case StdStatus::Unbounded:
            return {LpStatus::Infeasible, 0.0, {}};
        case StdStatus::Infeasible:
            break;
    }
    // Dual infeasible: the primal is either empty or unbounded.
    if (is_feasible(p)) {
        return {LpStatus::Unbounded, 0.0, {}};
    }
    return {LpStatus::Infeasible, 0.0, {}};
}

}  // namespace densreach
