// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "densreach/geometry.hpp"

namespace densreach {

/// Bounded-support initial density: uniform on a box, or a product
/// Gaussian truncated to a box and renormalized.
class InitialDistribution {
  public:
    enum class Kind { Uniform, TruncatedGaussian };

    static InitialDistribution uniform(const HyperRectangle& support);
    static InitialDistribution truncated_gaussian(const HyperRectangle& support, const Vector& mu,
                                                  const Vector& sigma);

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] const HyperRectangle& support() const { return support_; }
    [[nodiscard]] const Vector& mu() const { return mu_; }
    [[nodiscard]] const Vector& sigma() const { return sigma_; }
    /// Probability mass of the untruncated Gaussian inside the support
    /// (1 for the uniform case).
    [[nodiscard]] double normalizer() const { return normalizer_; }
    [[nodiscard]] int dim() const { return support_.dim(); }

    /// Density at x; 0 outside the support.
    [[nodiscard]] double density(const Vector& x) const;

    /// Lower and upper bound of the density over P intersected with the
    /// support. The lower bound is exact (log-concavity puts the minimum at a
    /// vertex); the upper bound evaluates at the box point closest to mu.
    /// Returns (0, 0) when the intersection is empty.
    [[nodiscard]] std::pair<double, double> bounds(const Polyhedron& p) const;

    /// Exact probability of an axis-aligned box (clipped to the support).
    [[nodiscard]] double mass(const HyperRectangle& box) const;

    [[nodiscard]] std::string describe() const;

  private:
    Kind kind_ = Kind::Uniform;
    HyperRectangle support_;
    Vector mu_;
    Vector sigma_;
    double normalizer_ = 1.0;
};

/// i.i.d. samples; the truncated Gaussian uses rejection inside the support.
/// Throws TruncationError when the acceptance rate would be below 1e-4.
std::vector<Vector> sample_initial(const InitialDistribution& dist, int n, std::uint64_t seed);

}  // namespace densreach
