// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "densreach/geometry.hpp"
#include "densreach/net.hpp"

namespace densreach {

/// ReLU network over the state only, obtained by fixing t.
struct SlicedNet {
    int state_dim = 0;
    double t = 0.0;
    std::vector<Layer> layers;  ///< layers[0] takes the state directly

    [[nodiscard]] int hidden_count() const;
    [[nodiscard]] int output_dim() const { return static_cast<int>(layers.back().b.size()); }
};

/// Folds the normalization and the t column into the first layer.
SlicedNet slice_net(const DensityNet& net, double t);

/// Raw network output [z, x_hat] of a sliced net.
Vector forward(const SlicedNet& net, const Vector& x);

/// One bit per hidden neuron, layer by layer; 1 iff pre-activation > 0.
struct ActivationPattern {
    std::vector<std::uint8_t> bits;

    auto operator<=>(const ActivationPattern&) const = default;
    [[nodiscard]] std::string to_string() const;
    static ActivationPattern from_string(const std::string& s);
};

ActivationPattern activation_pattern(const SlicedNet& net, const Vector& x);

/// A region of the input domain where the network is one affine map.
struct AffineCell {
    ActivationPattern pattern;
    Polyhedron H;  ///< input cell, irredundant
    Matrix C;      ///< (d+1) x d, rows: z, then x_hat
    Vector d;
    Polyhedron M;  ///< output cell in (z, x_hat) coordinates
    double z_lo = 0.0;
    double z_hi = 0.0;
    double t = 0.0;
    HyperRectangle h_box;  ///< bounding box of H
    HyperRectangle m_box;  ///< bounding box of M
    double volume = 0.0;   ///< volume of H

    /// Network output on this cell.
    [[nodiscard]] Vector map(const Vector& x) const { return C * x + d; }
    [[nodiscard]] int state_dim() const { return static_cast<int>(C.cols()); }
    [[nodiscard]] Matrix Cx() const { return C.bottomRows(C.rows() - 1); }
    [[nodiscard]] Vector dx() const { return d.tail(d.size() - 1); }
};

/// Cell of `pattern` inside `domain`; nullopt if empty or lower-dimensional.
std::optional<AffineCell> cell_of(const SlicedNet& net, const ActivationPattern& pattern, const Polyhedron& domain);

struct EnumerationOptions {
    std::size_t budget = 200000;
    int jobs = 1;
    double crossing_step = 1e-7;
};

/// All full-dimensional cells of the net over a bounded domain, sorted by
/// pattern. Breadth-first over facet neighbours; throws BudgetError when
/// more than options.budget patterns are visited.
std::vector<AffineCell> enumerate_cells(const SlicedNet& net, const Polyhedron& domain,
                                        const EnumerationOptions& options = {});

inline constexpr int kPartitionVersion = 1;

struct Partition {
    std::string system;
    double t = 0.0;
    Polyhedron domain;
    std::vector<AffineCell> cells;
};

/// JSON {version, system, t, domain, cells:[{pattern, A, b, C, d, E, f,
/// z_lo, z_hi, ...}]} with row-major matrices.
std::string save_partition(const Partition& p);
Partition load_partition(const std::string& bytes);
void save_partition_file(const Partition& p, const std::string& path);
Partition load_partition_file(const std::string& path);

}  // namespace densreach
