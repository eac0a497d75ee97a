// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "densreach/geometry.hpp"

namespace densreach::detail {

/// Rows scaled to unit norm. Zero rows are dropped; `empty` is set when a
/// zero row has a negative right-hand side.
struct NormalizedSystem {
    Matrix a;
    Vector b;
    std::vector<int> source;  ///< original row index of each kept row
    bool empty = false;
};

NormalizedSystem normalize_rows(const Polyhedron& p);

struct VertexSet {
    NormalizedSystem system;  ///< irredundant, normalized
    std::vector<Vector> points;
};

/// Vertices together with the irredundant system used to find them.
/// Requires a feasible, bounded polyhedron.
VertexSet enumerate_vertices(const Polyhedron& p);

/// Same, skipping the feasibility, boundedness and redundancy LPs. The
/// caller guarantees a bounded, full-dimensional, irredundant system.
VertexSet enumerate_vertices_irredundant(const Polyhedron& p);

/// Exact volume from a vertex set (0 when lower-dimensional).
double volume_from_vertices(const VertexSet& vs);

}  // namespace densreach::detail
