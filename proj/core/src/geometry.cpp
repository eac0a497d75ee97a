// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "densreach/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "densreach/error.hpp"
#include "geometry_internal.hpp"

namespace densreach {

// ---------------------------------------------------------------------------
// HyperRectangle

HyperRectangle::HyperRectangle(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) {
        throw ArgumentError("HyperRectangle: lo/hi dimension mismatch");
    }
    for (int i = 0; i < lo.size(); ++i) {
        if (!(lo[i] <= hi[i])) {
            throw ArgumentError("HyperRectangle: lo > hi in coordinate " + std::to_string(i));
        }
    }
}

bool HyperRectangle::contains(const Vector& x, double slack) const {
    for (int i = 0; i < lo.size(); ++i) {
        if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) {
            return false;
        }
    }
    return true;
}

double HyperRectangle::volume() const { return (hi - lo).prod(); }

bool HyperRectangle::bounded() const { return lo.allFinite() && hi.allFinite(); }

bool boxes_intersect(const HyperRectangle& r1, const HyperRectangle& r2) {
    if (r1.dim() != r2.dim()) {
        throw ArgumentError("boxes_intersect: dimension mismatch");
    }
    for (int i = 0; i < r1.dim(); ++i) {
        if (r1.hi[i] < r2.lo[i] || r2.hi[i] < r1.lo[i]) {
            return false;
        }
    }
    return true;
}

std::optional<HyperRectangle> box_intersection(const HyperRectangle& r1, const HyperRectangle& r2) {
    if (!boxes_intersect(r1, r2)) {
        return std::nullopt;
    }
    return HyperRectangle(r1.lo.cwiseMax(r2.lo), r1.hi.cwiseMin(r2.hi));
}

// ---------------------------------------------------------------------------
// Polyhedron

Polyhedron::Polyhedron(int dim) : a_(0, dim), b_(0) {}

Polyhedron::Polyhedron(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() != b_.size()) {
        throw ArgumentError("Polyhedron: A has " + std::to_string(a_.rows()) + " rows, b has " +
                            std::to_string(b_.size()));
    }
    if (!a_.allFinite() || !b_.allFinite()) {
        throw ArgumentError("Polyhedron: non-finite constraint data");
    }
}

Polyhedron Polyhedron::from_box(const HyperRectangle& box) {
    const int d = box.dim();
    Polyhedron p(d);
    for (int i = 0; i < d; ++i) {
        Vector e = Vector::Zero(d);
        e[i] = 1.0;
        if (std::isfinite(box.hi[i])) {
            p.add_row(e, box.hi[i]);
        }
        if (std::isfinite(box.lo[i])) {
            p.add_row(-e, -box.lo[i]);
        }
    }
    return p;
}

double Polyhedron::max_violation(const Vector& x) const {
    if (rows() == 0) {
        return -std::numeric_limits<double>::infinity();
    }
    return (a_ * x - b_).maxCoeff();
}

bool Polyhedron::contains(const Vector& x, double slack) const { return max_violation(x) <= slack; }

void Polyhedron::add_row(const Vector& a, double b) {
    if (a.size() != dim()) {
        throw ArgumentError("Polyhedron::add_row: dimension mismatch");
    }
    if (!a.allFinite() || !std::isfinite(b)) {
        throw ArgumentError("Polyhedron::add_row: non-finite constraint");
    }
    const auto m = a_.rows();
    a_.conservativeResize(m + 1, Eigen::NoChange);
    b_.conservativeResize(m + 1);
    a_.row(m) = a.transpose();
    b_[m] = b;
}

void Polyhedron::add_equality(const Vector& a, double b) {
    add_row(a, b);
    add_row(-a, -b);
}

Polyhedron Polyhedron::select_rows(const std::vector<int>& keep) const {
    Matrix a(static_cast<int>(keep.size()), dim());
    Vector b(static_cast<int>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        a.row(static_cast<int>(k)) = a_.row(keep[k]);
        b[static_cast<int>(k)] = b_[keep[k]];
    }
    return {std::move(a), std::move(b)};
}

Polyhedron intersect(const Polyhedron& p, const Polyhedron& q) {
    if (p.dim() != q.dim()) {
        throw ArgumentError("intersect: dimension mismatch (" + std::to_string(p.dim()) + " vs " +
                            std::to_string(q.dim()) + ")");
    }
    Matrix a(p.rows() + q.rows(), p.dim());
    Vector b(p.rows() + q.rows());
    a << p.A(), q.A();
    b << p.b(), q.b();
    return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Bounding box

HyperRectangle bounding_box(const Polyhedron& p) {
    const int d = p.dim();
    Vector lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        Vector e = Vector::Zero(d);
        e[i] = 1.0;
        for (const auto sense : {Sense::Maximize, Sense::Minimize}) {
            const auto res = lp_solve(e, p, sense);
            if (res.status == LpStatus::Infeasible) {
                throw InfeasibleError("bounding_box: polyhedron is empty");
            }
            if (res.status == LpStatus::Unbounded) {
                throw UnboundedError("bounding_box: polyhedron is unbounded in coordinate " +
                                     std::to_string(i));
            }
            (sense == Sense::Maximize ? hi : lo)[i] = res.value;
        }
    }
    return {lo, hi};
}

// ---------------------------------------------------------------------------
// Redundancy removal

Polyhedron remove_redundant(const Polyhedron& p, std::vector<int>& kept) {
    const int d = p.dim();
    const auto sys = detail::normalize_rows(p);
    const int m = static_cast<int>(sys.a.rows());
    std::vector<char> alive(m, 1);

    // Rows whose half-space strictly contains the bounding box cannot be
    // active anywhere on P.
    if (m > 4 * d) {
        try {
            const auto box = bounding_box(p);
            for (int i = 0; i < m; ++i) {
                double reach = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double aij = sys.a(i, j);
                    reach += aij > 0 ? aij * box.hi[j] : aij * box.lo[j];
                }
                if (reach < sys.b[i] - 1e-7) {
                    alive[i] = 0;
                }
            }
        } catch (const UnboundedError&) {
        }
    }

    for (int i = 0; i < m; ++i) {
        if (!alive[i]) {
            continue;
        }
        int others = 0;
        for (int j = 0; j < m; ++j) {
            others += (j != i && alive[j]) ? 1 : 0;
        }
        Matrix a(others + 1, d);
        Vector b(others + 1);
        int k = 0;
        for (int j = 0; j < m; ++j) {
            if (j != i && alive[j]) {
                a.row(k) = sys.a.row(j);
                b[k] = sys.b[j];
                ++k;
            }
        }
        a.row(k) = sys.a.row(i);
        b[k] = sys.b[i] + 1.0;
        const auto res = lp_solve(sys.a.row(i).transpose(), Polyhedron(std::move(a), std::move(b)),
                                  Sense::Maximize);
        if (res.status == LpStatus::Optimal && res.value <= sys.b[i] + tol::kRedundancy) {
            alive[i] = 0;
        }
    }

    kept.clear();
    for (int i = 0; i < m; ++i) {
        if (alive[i]) {
            kept.push_back(sys.source[i]);
        }
    }
    return p.select_rows(kept);
}

Polyhedron remove_redundant(const Polyhedron& p) {
    std::vector<int> kept;
    return remove_redundant(p, kept);
}

// ---------------------------------------------------------------------------
// Vertex enumeration

namespace detail {

namespace {

void collect_vertices(VertexSet& out) {
    const Matrix& a = out.system.a;
    const Vector& b = out.system.b;
    const int d = static_cast<int>(a.cols());
    const int m = static_cast<int>(a.rows());
    if (m < d) {
        return;
    }

    std::vector<int> idx(d);
    for (int i = 0; i < d; ++i) {
        idx[i] = i;
    }
    Matrix sub(d, d);
    Vector rhs(d);
    for (;;) {
        for (int r = 0; r < d; ++r) {
            sub.row(r) = a.row(idx[r]);
            rhs[r] = b[idx[r]];
        }
        Eigen::FullPivLU<Matrix> lu(sub);
        lu.setThreshold(1e-10);
        if (lu.isInvertible()) {
            const Vector x = lu.solve(rhs);
            if (x.allFinite() && (a * x - b).maxCoeff() <= tol::kFeasibility * (1.0 + x.cwiseAbs().maxCoeff())) {
                bool duplicate = false;
                for (const auto& v : out.points) {
                    if ((v - x).cwiseAbs().maxCoeff() <= tol::kVertexDedupe * (1.0 + x.cwiseAbs().maxCoeff())) {
                        duplicate = true;
                        break;
                    }
                }
                if (!duplicate) {
                    out.points.push_back(x);
                }
            }
        }
        // next combination
        int k = d - 1;
        while (k >= 0 && idx[k] == m - d + k) {
            --k;
        }
        if (k < 0) {
            break;
        }
        ++idx[k];
        for (int j = k + 1; j < d; ++j) {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

}  // namespace

VertexSet enumerate_vertices(const Polyhedron& p) {
    const int d = p.dim();
    if (d > 6) {
        throw ArgumentError("vertices: dimension " + std::to_string(d) + " exceeds the supported maximum of 6");
    }
    VertexSet out;
    if (!is_feasible(p)) {
        return out;
    }
    (void)bounding_box(p);  // throws when unbounded
    out.system = normalize_rows(remove_redundant(p));
    collect_vertices(out);
    return out;
}

VertexSet enumerate_vertices_irredundant(const Polyhedron& p) {
    VertexSet out;
    out.system = normalize_rows(p);
    collect_vertices(out);
    return out;
}

}  // namespace detail

std::vector<Vector> vertices(const Polyhedron& p) { return detail::enumerate_vertices(p).points; }

// ---------------------------------------------------------------------------
// Projection

namespace {

struct RowSystem {
    std::vector<Vector> ineq_a;
    std::vector<double> ineq_b;
    std::vector<Vector> eq_a;
    std::vector<double> eq_b;
    int dim = 0;

    [[nodiscard]] Polyhedron to_polyhedron() const {
        Polyhedron p(dim);
        for (std::size_t i = 0; i < ineq_a.size(); ++i) {
            p.add_row(ineq_a[i], ineq_b[i]);
        }
        for (std::size_t i = 0; i < eq_a.size(); ++i) {
            p.add_equality(eq_a[i], eq_b[i]);
        }
        return p;
    }
};

void scale_row(Vector& a, double& b) {
    const double n = a.cwiseAbs().maxCoeff();
    if (n > 0) {
        a /= n;
        b /= n;
    }
}

RowSystem split_equalities(const Polyhedron& p) {
    RowSystem sys;
    sys.dim = p.dim();
    const int m = p.rows();
    std::vector<char> used(m, 0);
    for (int i = 0; i < m; ++i) {
        if (used[i]) {
            continue;
        }
        const double ni = p.A().row(i).norm();
        for (int j = i + 1; j < m && ni > 0; ++j) {
            if (used[j]) {
                continue;
            }
            const double nj = p.A().row(j).norm();
            if (nj == 0) {
                continue;
            }
            const double row_gap = (p.A().row(i) / ni + p.A().row(j) / nj).cwiseAbs().maxCoeff();
            const double rhs_gap = std::abs(p.b()[i] / ni + p.b()[j] / nj);
            if (row_gap <= 1e-12 && rhs_gap <= 1e-12 * (1.0 + std::abs(p.b()[i] / ni))) {
                used[i] = used[j] = 1;
                sys.eq_a.emplace_back(p.A().row(i).transpose());
                sys.eq_b.push_back(p.b()[i]);
                break;
            }
        }
        if (!used[i]) {
            sys.ineq_a.emplace_back(p.A().row(i).transpose());
            sys.ineq_b.push_back(p.b()[i]);
        }
    }
    return sys;
}

// Eliminates coordinate k in place (the column is zeroed, not removed).
void eliminate_in_place(RowSystem& sys, int k) {
    // Exact substitution through an equality when one involves x_k.
    int pivot = -1;
    double best = 1e-12;
    for (std::size_t e = 0; e < sys.eq_a.size(); ++e) {
        const double v = std::abs(sys.eq_a[e][k]);
        if (v > best) {
            best = v;
            pivot = static_cast<int>(e);
        }
    }
    if (pivot >= 0) {
        const Vector pa = sys.eq_a[pivot];
        const double pb = sys.eq_b[pivot];
        auto substitute = [&](Vector& a, double& b) {
            const double f = a[k] / pa[k];
            if (f != 0.0) {
                a -= f * pa;
                b -= f * pb;
            }
            a[k] = 0.0;
        };
        sys.eq_a.erase(sys.eq_a.begin() + pivot);
        sys.eq_b.erase(sys.eq_b.begin() + pivot);
        for (std::size_t e = 0; e < sys.eq_a.size(); ++e) {
            substitute(sys.eq_a[e], sys.eq_b[e]);
        }
        for (std::size_t i = 0; i < sys.ineq_a.size(); ++i) {
            substitute(sys.ineq_a[i], sys.ineq_b[i]);
        }
        return;
    }

    // Fourier-Motzkin on the inequalities.
    std::vector<int> pos, neg;
    std::vector<Vector> next_a;
    std::vector<double> next_b;
    for (std::size_t i = 0; i < sys.ineq_a.size(); ++i) {
        const double v = sys.ineq_a[i][k];
        const double scale = sys.ineq_a[i].cwiseAbs().maxCoeff();
        if (v > 1e-12 * scale) {
            pos.push_back(static_cast<int>(i));
        } else if (v < -1e-12 * scale) {
            neg.push_back(static_cast<int>(i));
        } else {
            Vector a = sys.ineq_a[i];
            a[k] = 0.0;
            next_a.push_back(std::move(a));
            next_b.push_back(sys.ineq_b[i]);
        }
    }
    for (int i : pos) {
        for (int j : neg) {
            const double ci = sys.ineq_a[i][k];
            const double cj = -sys.ineq_a[j][k];
            Vector a = sys.ineq_a[i] / ci + sys.ineq_a[j] / cj;
            double b = sys.ineq_b[i] / ci + sys.ineq_b[j] / cj;
            a[k] = 0.0;
            scale_row(a, b);
            next_a.push_back(std::move(a));
            next_b.push_back(b);
        }
    }
    for (auto& e : sys.eq_a) {
        e[k] = 0.0;
    }
    sys.ineq_a = std::move(next_a);
    sys.ineq_b = std::move(next_b);

    // Keep the system small between steps.
    if (!pos.empty() && !neg.empty() && sys.ineq_a.size() > 2 * static_cast<std::size_t>(sys.dim) + 4) {
        Polyhedron ineqs(sys.dim);
        for (std::size_t i = 0; i < sys.ineq_a.size(); ++i) {
            ineqs.add_row(sys.ineq_a[i], sys.ineq_b[i]);
        }
        Polyhedron whole = ineqs;
        for (std::size_t e = 0; e < sys.eq_a.size(); ++e) {
            whole.add_equality(sys.eq_a[e], sys.eq_b[e]);
        }
        if (is_feasible(whole)) {
            std::vector<int> kept;
            (void)remove_redundant(whole, kept);
            std::vector<Vector> ka;
            std::vector<double> kb;
            for (int r : kept) {
                if (r < ineqs.rows()) {
                    ka.push_back(sys.ineq_a[r]);
                    kb.push_back(sys.ineq_b[r]);
                }
            }
            sys.ineq_a = std::move(ka);
            sys.ineq_b = std::move(kb);
        }
    }
}

Polyhedron drop_columns(const RowSystem& sys, const std::vector<int>& coords) {
    std::vector<int> keep_cols;
    for (int j = 0; j < sys.dim; ++j) {
        if (std::find(coords.begin(), coords.end(), j) == coords.end()) {
            keep_cols.push_back(j);
        }
    }
    const int nd = static_cast<int>(keep_cols.size());
    Polyhedron out(nd);
    bool contradiction = false;
    auto push = [&](const Vector& a, double b) {
        Vector r(nd);
        for (int j = 0; j < nd; ++j) {
            r[j] = a[keep_cols[j]];
        }
        if (r.cwiseAbs().maxCoeff() <= 1e-14) {
            if (b < -tol::kFeasibility) {
                contradiction = true;
            }
            return;
        }
        out.add_row(r, b);
    };
    for (std::size_t i = 0; i < sys.ineq_a.size(); ++i) {
        push(sys.ineq_a[i], sys.ineq_b[i]);
    }
    for (std::size_t e = 0; e < sys.eq_a.size(); ++e) {
        push(sys.eq_a[e], sys.eq_b[e]);
        push(-sys.eq_a[e], -sys.eq_b[e]);
    }
    if (contradiction) {
        Vector zero = Vector::Zero(nd);
        if (nd > 0) {
            zero[0] = 1.0;
            out.add_row(zero, -1.0);
            out.add_row(-zero, -1.0);
        }
    }
    return out;
}

Polyhedron project_system(RowSystem sys, std::vector<int> coords) {
    for (int k : coords) {
        if (k < 0 || k >= sys.dim) {
            throw ArgumentError("project_out: coordinate " + std::to_string(k) + " out of range");
        }
    }
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    // Substitutions first: they are exact and never grow the system.
    std::vector<int> order;
    for (int k : coords) {
        bool has_eq = false;
        for (const auto& e : sys.eq_a) {
            has_eq = has_eq || std::abs(e[k]) > 1e-12;
        }
        if (has_eq) {
            order.insert(order.begin(), k);
        } else {
            order.push_back(k);
        }
    }
    for (int k : order) {
        eliminate_in_place(sys, k);
    }
    return drop_columns(sys, coords);
}

}  // namespace

Polyhedron project_out(const Polyhedron& p, std::vector<int> coords) {
    return project_system(split_equalities(p), std::move(coords));
}

Polyhedron eliminate(const Polyhedron& p, int idx) {
    if (p.dim() < 2) {
        throw ArgumentError("eliminate: need at least 2 dimensions");
    }
    Polyhedron out = project_out(p, {idx});
    if (is_feasible(out)) {
        return remove_redundant(out);
    }
    return out;
}

Polyhedron affine_image(const Polyhedron& p, const Matrix& c, const Vector& d) {
    if (c.cols() != p.dim() || c.rows() != d.size()) {
        throw ArgumentError("affine_image: map shape does not match polyhedron");
    }
    if (c.rows() == c.cols()) {
        Eigen::FullPivLU<Matrix> lu(c);
        if (std::abs(lu.determinant()) > tol::kSingular) {
            const Matrix cinv = lu.inverse();
            const Matrix a = p.A() * cinv;
            const Vector b = p.b() + a * d;
            return {a, b};
        }
    }
    // Lift to (x, y), tie y = C x + d with equalities, project out x.
    const int n_in = static_cast<int>(c.cols());
    const int n_out = static_cast<int>(c.rows());
    RowSystem sys;
    sys.dim = n_in + n_out;
    for (int i = 0; i < p.rows(); ++i) {
        Vector a = Vector::Zero(sys.dim);
        a.head(n_in) = p.A().row(i).transpose();
        sys.ineq_a.push_back(std::move(a));
        sys.ineq_b.push_back(p.b()[i]);
    }
    for (int i = 0; i < n_out; ++i) {
        Vector a = Vector::Zero(sys.dim);
        a.head(n_in) = -c.row(i).transpose();
        a[n_in + i] = 1.0;
        sys.eq_a.push_back(std::move(a));
        sys.eq_b.push_back(d[i]);
    }
    std::vector<int> coords(n_in);
    for (int i = 0; i < n_in; ++i) {
        coords[i] = i;
    }
    return project_system(std::move(sys), coords);
}

Polyhedron affine_preimage(const Polyhedron& q, const Matrix& c, const Vector& d) {
    if (c.rows() != q.dim() || c.rows() != d.size()) {
        throw ArgumentError("affine_preimage: map shape does not match polyhedron");
    }
    return {q.A() * c, q.b() - q.A() * d};
}

}  // namespace densreach
