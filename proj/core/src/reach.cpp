// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "densreach/reach.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "densreach/error.hpp"
#include "densreach/net.hpp"
#include "densreach/parallel.hpp"

namespace densreach {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void add_z_rows(Polyhedron& p, const Vector& cz, double dz, const ZRange& z) {
    if (z.empty()) {
        p.add_row(Vector::Zero(p.dim()), -1.0);
        return;
    }
    if (std::isfinite(z.hi)) {
        p.add_row(cz, z.hi - dz);
    }
    if (std::isfinite(z.lo)) {
        p.add_row(-cz, dz - z.lo);
    }
}

bool z_overlaps(const AffineCell& cell, const ZRange& z) {
    return !z.empty() && cell.z_hi >= z.lo && cell.z_lo <= z.hi;
}

HyperRectangle state_box(const AffineCell& cell) {
    const int d = cell.state_dim();
    return {cell.m_box.lo.tail(d), cell.m_box.hi.tail(d)};
}

double rho_at_center(const AffineCell& cell, const InitialDistribution& rho0) {
    return rho0.density(chebyshev_center(cell.H).center);
}

constexpr double kRefineAbsTol = 1e-7;
constexpr double kRefineFlatRatio = 1.25;

struct RegionMass {
    double p_lo = 0.0;
    double p_hi = 0.0;
    bool full_dimensional = false;
};

// Bracket of P(piece) from density bounds over the piece, tightened by
// bisecting along the axis where rho0 varies most. Pieces are disjoint, so
// the sums over halves never exceed the parent's bounds.
std::pair<double, double> split_mass(const Polyhedron& piece, const InitialDistribution& rho0, int depth) {
    if (!is_feasible(piece)) {
        return {0.0, 0.0};
    }
    const double vol = volume(piece);
    if (!(vol > 0.0)) {
        return {0.0, 0.0};
    }
    const auto [dlo, dhi] = rho0.bounds(piece);
    const auto box = bounding_box(piece);
    const double lo = vol * dlo;
    const double hi = std::min(vol * dhi, rho0.mass(box));
    if (depth <= 0 || hi - lo <= kRefineAbsTol || dhi <= kRefineFlatRatio * dlo) {
        return {lo, hi};
    }
    int axis = 0;
    double widest = -1.0;
    for (int i = 0; i < box.dim(); ++i) {
        const double w = (box.hi[i] - box.lo[i]) / rho0.sigma()[i];
        if (w > widest) {
            widest = w;
            axis = i;
        }
    }
    const double mid = 0.5 * (box.lo[axis] + box.hi[axis]);
    Vector e = Vector::Zero(box.dim());
    e[axis] = 1.0;
    Polyhedron left = piece, right = piece;
    left.add_row(e, mid);
    right.add_row(-e, -mid);
    const auto [l1, h1] = split_mass(left, rho0, depth - 1);
    const auto [l2, h2] = split_mass(right, rho0, depth - 1);
    return {std::max(lo, l1 + l2), std::min(hi, h1 + h2)};
}

// Probability bracket of region R ⊆ H: Vol(R ∩ S) times the lower density
// bound over the whole cell and the upper bound over R. Both factors grow
// with R, so the bracket is monotone in the query.
RegionMass region_mass(const AffineCell& cell, const Polyhedron& region, const InitialDistribution& rho0,
                       int refine_depth) {
    RegionMass m;
    const Polyhedron clipped = intersect(region, Polyhedron::from_box(rho0.support()));
    if (!is_feasible(clipped)) {
        return m;
    }
    const double vol = volume(clipped);
    if (!(vol > 0.0)) {
        return m;
    }
    m.full_dimensional = true;
    m.p_lo = vol * rho0.bounds(cell.H).first;
    m.p_hi = vol * rho0.bounds(clipped).second;
    if (rho0.kind() != InitialDistribution::Kind::Uniform) {
        // The region cannot hold more than its bounding box.
        m.p_hi = std::min(m.p_hi, rho0.mass(bounding_box(clipped)));
        if (refine_depth > 0) {
            const auto [lo, hi] = split_mass(clipped, rho0, refine_depth);
            m.p_lo = std::max(m.p_lo, lo);
            m.p_hi = std::min(m.p_hi, hi);
        }
    }
    return m;
}

}  // namespace

ZRange z_range_from_log_gain(double log_lo, double log_hi, double t) {
    if (t < 0.0) {
        throw ArgumentError("z_range_from_log_gain: t must be >= 0");
    }
    if (t == 0.0) {
        if (log_lo <= 0.0 && 0.0 <= log_hi) {
            return {};
        }
        return {kInf, -kInf};
    }
    return {log_lo / t, log_hi / t};
}

std::pair<double, double> cell_probability(const AffineCell& cell, const InitialDistribution& rho0) {
    const auto& s = rho0.support();
    double vol = 0.0;
    if (s.contains(cell.h_box.lo, 0.0) && s.contains(cell.h_box.hi, 0.0)) {
        vol = cell.volume;
    } else {
        const Polyhedron clipped = intersect(cell.H, Polyhedron::from_box(s));
        if (!is_feasible(clipped)) {
            return {0.0, 0.0};
        }
        vol = volume(clipped);
    }
    if (!(vol > 0.0)) {
        return {0.0, 0.0};
    }
    const auto [lo, hi] = rho0.bounds(cell.H);
    return {vol * lo, std::min(vol * hi, rho0.mass(cell.h_box))};
}

std::vector<ReachCell> forward_reach(const std::vector<AffineCell>& cells, const InitialDistribution& rho0, int jobs) {
    std::vector<ReachCell> out(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
        const auto& c = cells[i];
        ReachCell r;
        r.source = static_cast<int>(i);
        r.t = c.t;
        r.state_set = affine_image(c.H, c.Cx(), c.dx());
        r.volume = volume(r.state_set);
        const double r0 = rho_at_center(c, rho0);
        r.rho_lo = r0 * g_of(c.z_lo, c.t);
        r.rho_hi = r0 * g_of(c.z_hi, c.t);
        std::tie(r.p_lo, r.p_hi) = cell_probability(c, rho0);
        out[i] = std::move(r);
    });
    return out;
}

Polyhedron pullback(const AffineCell& cell, const Polyhedron& query, const ZRange& z) {
    if (query.dim() != cell.state_dim()) {
        throw ArgumentError("pullback: query dimension mismatch");
    }
    Polyhedron p = intersect(cell.H, affine_preimage(query, cell.Cx(), cell.dx()));
    add_z_rows(p, cell.C.row(0).transpose(), cell.d[0], z);
    return p;
}

Polyhedron pullback_inverse(const AffineCell& cell, const Polyhedron& query, const ZRange& z) {
    if (query.dim() != cell.state_dim()) {
        throw ArgumentError("pullback_inverse: query dimension mismatch");
    }
    const Matrix cx = cell.Cx();
    Eigen::FullPivLU<Matrix> lu(cx);
    if (!(std::abs(lu.determinant()) > tol::kSingular)) {
        throw ArgumentError("pullback_inverse: cell map is singular");
    }
    const Matrix inv = lu.inverse();
    const Vector dx = cell.dx();
    // Intersection in output space, written over y = Cx x + dx.
    Polyhedron mq = intersect(affine_image(cell.H, cx, dx), query);
    const Vector cz = inv.transpose() * cell.C.row(0).transpose();
    add_z_rows(mq, cz, cell.d[0] - cz.dot(dx), z);
    return intersect(affine_image(mq, inv, -inv * dx), cell.H);
}

Polyhedron clip_to_reach(const Polyhedron& query, const std::vector<AffineCell>& cells) {
    if (cells.empty()) {
        return query;
    }
    HyperRectangle box = state_box(cells.front());
    for (const auto& c : cells) {
        const auto b = state_box(c);
        box.lo = box.lo.cwiseMin(b.lo);
        box.hi = box.hi.cwiseMax(b.hi);
    }
    return intersect(query, Polyhedron::from_box(box));
}

HyperRectangle outer_box(const Polyhedron& p) {
    const int d = p.dim();
    Vector lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        Vector e = Vector::Zero(d);
        e[i] = 1.0;
        const auto mx = lp_solve(e, p, Sense::Maximize);
        const auto mn = lp_solve(e, p, Sense::Minimize);
        if (mx.status == LpStatus::Infeasible) {
            throw InfeasibleError("outer_box: empty set");
        }
        hi[i] = mx.optimal() ? mx.value : kInf;
        lo[i] = mn.optimal() ? mn.value : -kInf;
    }
    return {lo, hi};
}

QueryResult query_probability(const std::vector<AffineCell>& cells, const Polyhedron& query, const ZRange& z,
                              const InitialDistribution& rho0, int jobs, int refine_depth) {
    QueryResult res;
    if (cells.empty()) {
        return res;
    }
    if (query.dim() != cells.front().state_dim()) {
        throw ArgumentError("query_probability: query dimension mismatch");
    }
    HyperRectangle qbox;
    try {
        qbox = bounding_box(query);
    } catch (const UnboundedError&) {
        throw ArgumentError("query_probability: query set is unbounded; intersect it with the reach box first");
    } catch (const InfeasibleError&) {
        return res;
    }

    struct Hit {
        bool hit = false;
        RegionMass mass;
        double rho_lo = 0.0, rho_hi = 0.0;
    };
    std::vector<Hit> hits(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
        const auto& c = cells[i];
        if (!z_overlaps(c, z) || !boxes_intersect(state_box(c), qbox)) {
            return;
        }
        const Polyhedron region = pullback(c, query, z);
        if (!is_feasible(region)) {
            return;
        }
        Hit h;
        h.hit = true;
        h.mass = region_mass(c, region, rho0, refine_depth);
        const Vector cz = c.C.row(0).transpose();
        const auto zmax = lp_solve(cz, region, Sense::Maximize);
        const auto zmin = lp_solve(cz, region, Sense::Minimize);
        const double r0 = rho_at_center(c, rho0);
        if (zmax.optimal() && zmin.optimal()) {
            h.rho_lo = r0 * g_of(zmin.value + c.d[0], c.t);
            h.rho_hi = r0 * g_of(zmax.value + c.d[0], c.t);
        }
        hits[i] = h;
    });
    bool first = true;
    for (const auto& h : hits) {
        if (!h.hit) {
            continue;
        }
        ++res.cells_hit;
        res.p_lo += h.mass.p_lo;
        res.p_hi += h.mass.p_hi;
        res.rho_lo = first ? h.rho_lo : std::min(res.rho_lo, h.rho_lo);
        res.rho_hi = first ? h.rho_hi : std::max(res.rho_hi, h.rho_hi);
        first = false;
    }
    // Regions are disjoint in the initial space.
    res.p_lo = std::min(res.p_lo, 1.0);
    res.p_hi = std::min(res.p_hi, 1.0);
    return res;
}

std::vector<BackwardRegion> backward_reach(const std::vector<AffineCell>& cells, const Polyhedron& query,
                                           const ZRange& z, const InitialDistribution& rho0, int jobs) {
    std::vector<std::optional<BackwardRegion>> found(cells.size());
    HyperRectangle qbox;
    try {
        qbox = outer_box(query);
    } catch (const InfeasibleError&) {
        return {};
    }
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
        const auto& c = cells[i];
        if (!z_overlaps(c, z) || !boxes_intersect(state_box(c), qbox)) {
            return;
        }
        const Matrix cx = c.Cx();
        const bool invertible = std::abs(cx.fullPivLu().determinant()) > tol::kSingular;
        Polyhedron region = invertible ? pullback_inverse(c, query, z) : pullback(c, query, z);
        if (!is_feasible(region)) {
            return;
        }
        region = remove_redundant(region);
        BackwardRegion b;
        b.source = static_cast<int>(i);
        const Polyhedron clipped = intersect(region, Polyhedron::from_box(rho0.support()));
        if (is_feasible(clipped)) {
            const double vol = volume(clipped);
            const auto [lo, hi] = rho0.bounds(clipped);
            b.p_lo = vol * lo;
            b.p_hi = vol * hi;
        }
        b.region = std::move(region);
        found[i] = std::move(b);
    });
    std::vector<BackwardRegion> out;
    for (auto& f : found) {
        if (f) {
            out.push_back(std::move(*f));
        }
    }
    return out;
}

Verdict verify_safety(const std::map<double, std::vector<AffineCell>>& cells_by_time, const Polyhedron& unsafe,
                      const ZRangeOfTime& z_of_t, const InitialDistribution& rho0, bool use_heuristic, int jobs) {
    if (cells_by_time.empty()) {
        throw ArgumentError("verify_safety: need at least one time slice");
    }
    const auto started = std::chrono::steady_clock::now();
    Verdict v;
    HyperRectangle ubox;
    try {
        ubox = outer_box(unsafe);
    } catch (const InfeasibleError&) {
        for (const auto& [t, cells] : cells_by_time) {
            v.slices.push_back({t, z_of_t(t), 0, 0.0, 0.0});
        }
        return v;
    }

    struct PairResult {
        bool rejected = false;
        bool checked = false;
        bool hit = false;
        RegionMass mass;
        long lps = 0;
    };
    for (const auto& [t, cells] : cells_by_time) {
        SliceVerdict sv;
        sv.t = t;
        sv.z = z_of_t(t);
        if (sv.z.empty() || cells.empty()) {
            v.slices.push_back(sv);
            continue;
        }
        const int d = cells.front().state_dim();
        if (unsafe.dim() != d) {
            throw ArgumentError("verify_safety: unsafe set dimension mismatch");
        }
        Vector lo(d + 1), hi(d + 1);
        lo << sv.z.lo, ubox.lo;
        hi << sv.z.hi, ubox.hi;
        const HyperRectangle mq_box(lo, hi);

        std::vector<PairResult> pairs(cells.size());
        parallel_for(cells.size(), jobs, [&](std::size_t i) {
            const auto& c = cells[i];
            PairResult& r = pairs[i];
            if (use_heuristic && !boxes_intersect(c.m_box, mq_box)) {
                r.rejected = true;
                return;
            }
            const std::size_t before = lp_solve_count();
            r.checked = true;
            const Polyhedron region = pullback(c, unsafe, sv.z);
            r.hit = is_feasible(region);
            if (r.hit) {
                r.mass = region_mass(c, region, rho0, 0);
            }
            r.lps = static_cast<long>(lp_solve_count() - before);
        });
        for (const auto& r : pairs) {
            v.stats.box_rejections += r.rejected ? 1 : 0;
            v.stats.poly_checks += r.checked ? 1 : 0;
            v.stats.lp_calls += r.lps;
            if (r.hit) {
                ++sv.hits;
                sv.p_lo += r.mass.p_lo;
                sv.p_hi += r.mass.p_hi;
            }
        }
        sv.p_lo = std::min(sv.p_lo, 1.0);
        sv.p_hi = std::min(sv.p_hi, 1.0);
        if (sv.hits > 0) {
            v.safe = false;
        }
        v.p_lo = std::max(v.p_lo, sv.p_lo);
        v.p_hi = std::max(v.p_hi, sv.p_hi);
        v.slices.push_back(sv);
    }
    v.stats.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return v;
}

}  // namespace densreach
