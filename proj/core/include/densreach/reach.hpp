// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "densreach/distribution.hpp"
#include "densreach/rpm.hpp"

namespace densreach {

/// Image of one cell in state space with its density and probability bounds.
struct ReachCell {
    Polyhedron state_set;
    double rho_lo = 0.0;
    double rho_hi = 0.0;
    double p_lo = 0.0;
    double p_hi = 0.0;
    int source = 0;
    double t = 0.0;
    double volume = 0.0;  ///< volume of state_set
};

/// Closed interval on the network's z output. Infinite ends mean no bound.
struct ZRange {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    [[nodiscard]] bool empty() const { return lo > hi; }
    [[nodiscard]] bool unbounded() const { return !std::isfinite(lo) && !std::isfinite(hi); }
};

/// Density-gain bounds [log_lo, log_hi] on log G = t z, turned into a z
/// interval at time t. At t = 0, G is 1 and the range is either everything
/// or empty.
ZRange z_range_from_log_gain(double log_lo, double log_hi, double t);

/// Density bound at the Chebyshev center times exp(t z) over the cell; the
/// state set is the cell's image; probabilities come from cell_probability.
std::vector<ReachCell> forward_reach(const std::vector<AffineCell>& cells, const InitialDistribution& rho0,
                                     int jobs = 1);

/// [Vol(H ∩ S) * min rho0, Vol(H ∩ S) * max rho0] over H ∩ S, S the support.
std::pair<double, double> cell_probability(const AffineCell& cell, const InitialDistribution& rho0);

/// Input-space region of a cell whose image lies in `query` with z in
/// `z`: H ∩ {x | Cx x + dx ∈ query, z_lo <= Cz x + dz <= z_hi}.
Polyhedron pullback(const AffineCell& cell, const Polyhedron& query, const ZRange& z = {});

/// Same region computed through the inverse of the state part of the map
/// (nonsingular cells only); used to cross-check pullback.
Polyhedron pullback_inverse(const AffineCell& cell, const Polyhedron& query, const ZRange& z = {});

struct QueryResult {
    double p_lo = 0.0;
    double p_hi = 0.0;
    /// Density bounds rho0(center) * exp(t z) over the intersecting parts;
    /// (0, 0) when nothing intersects.
    double rho_lo = 0.0;
    double rho_hi = 0.0;
    int cells_hit = 0;
};

/// Probability that the network-flowed state lies in `query` (with z in
/// `z`). The query must be bounded; see clip_to_reach. For a non-uniform
/// rho0, `refine_depth` > 0 bisects each intersected region up to that many
/// times where rho0 varies, which can only tighten the bracket.
QueryResult query_probability(const std::vector<AffineCell>& cells, const Polyhedron& query, const ZRange& z,
                              const InitialDistribution& rho0, int jobs = 1, int refine_depth = 0);

/// Intersects a set with the bounding box of all output cells.
Polyhedron clip_to_reach(const Polyhedron& query, const std::vector<AffineCell>& cells);

struct BackwardRegion {
    Polyhedron region;
    double p_lo = 0.0;
    double p_hi = 0.0;
    int source = 0;
};

/// Initial-state regions that reach `query`. Uses the inverse of the cell
/// map when it is nonsingular and the direct pre-image otherwise.
std::vector<BackwardRegion> backward_reach(const std::vector<AffineCell>& cells, const Polyhedron& query,
                                           const ZRange& z, const InitialDistribution& rho0, int jobs = 1);

struct VerifyStats {
    long lp_calls = 0;        ///< all LPs solved
    long box_rejections = 0;  ///< pairs discarded by the box test
    long poly_checks = 0;     ///< LP feasibility tests of cell / unsafe-set pairs
    double elapsed = 0.0;     ///< seconds
};

struct SliceVerdict {
    double t = 0.0;
    ZRange z;
    int hits = 0;
    double p_lo = 0.0;
    double p_hi = 0.0;
};

struct Verdict {
    bool safe = true;
    double p_lo = 0.0;  ///< max over slices
    double p_hi = 0.0;
    std::vector<SliceVerdict> slices;
    VerifyStats stats;
};

using ZRangeOfTime = std::function<ZRange(double t)>;

/// Checks whether any cell of any slice maps into `unsafe` with z inside
/// the slice's range. With the heuristic, a pair is only sent to the LP when
/// the cell's output box meets the unsafe set's box.
Verdict verify_safety(const std::map<double, std::vector<AffineCell>>& cells_by_time, const Polyhedron& unsafe,
                      const ZRangeOfTime& z_of_t, const InitialDistribution& rho0, bool use_heuristic,
                      int jobs = 1);

/// Box with infinite ends for unbounded coordinates.
HyperRectangle outer_box(const Polyhedron& p);

}  // namespace densreach
