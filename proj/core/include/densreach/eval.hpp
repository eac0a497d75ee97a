// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "densreach/distribution.hpp"
#include "densreach/net.hpp"
#include "densreach/reach.hpp"

namespace densreach {

/// One ground-truth point: the state reached from x0 at time t and the
/// density carried along by the augmented ODE.
struct TruthSample {
    Vector x0;
    double t = 0.0;
    Vector state;
    double rho = 0.0;
};

/// Samples at time index `step` of every trajectory in a truth dataset
/// (trajectories must carry rho).
std::vector<TruthSample> truth_samples_at(const TrajectoryDataset& truth, int step);

/// Density estimate over the state at a fixed time.
///
/// Histogram and KDE estimators are Eulerian: they see only the state. The
/// learned estimator is Lagrangian: it evaluates rho0(x0) G(x0, t) along
/// the sample's own initial condition.
class DensityEstimator {
  public:
    enum class Kind { Histogram, Kde, Learned, Function };

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] int dim() const { return dim_; }

    /// Estimate at the truth sample.
    [[nodiscard]] double evaluate(const TruthSample& s) const;
    /// State-only estimate; throws ArgumentError for the learned kind.
    [[nodiscard]] double density(const Vector& x) const;

    // Histogram payload.
    [[nodiscard]] const HyperRectangle& grid_box() const { return box_; }
    [[nodiscard]] int bins_per_dim() const { return bins_; }
    // KDE payload.
    [[nodiscard]] const Vector& bandwidth() const { return bandwidth_; }

    friend DensityEstimator histogram_density(const std::vector<Vector>& samples, int bins_per_dim);
    friend DensityEstimator kde_density(const std::vector<Vector>& samples, const Vector& bandwidth);
    friend DensityEstimator learned_density(std::shared_ptr<const DensityNet> net, InitialDistribution rho0);
    friend DensityEstimator function_density(int dim, std::function<double(const TruthSample&)> fn);

  private:
    Kind kind_ = Kind::Histogram;
    int dim_ = 0;
    // histogram
    HyperRectangle box_;
    int bins_ = 0;
    Vector width_;
    std::vector<double> cells_;  ///< density per bin, row-major
    // kde, samples sorted by the first coordinate
    std::vector<Vector> samples_;
    std::vector<double> first_;
    Vector bandwidth_;
    // learned
    std::shared_ptr<const DensityNet> net_;
    std::optional<InitialDistribution> rho0_;
    // function
    std::function<double(const TruthSample&)> fn_;
};

inline constexpr int kMaxHistogramDim = 4;

/// Equal-width bins over the sample bounding box; count / (n * bin volume).
/// bins_per_dim <= 0 picks ceil(n^(1/(d+2))). Throws DimensionalityError
/// when d > 4.
DensityEstimator histogram_density(const std::vector<Vector>& samples, int bins_per_dim = 0);

/// Product Epanechnikov kernel (3/4)(1 - u^2) per coordinate.
DensityEstimator kde_density(const std::vector<Vector>& samples, const Vector& bandwidth);
DensityEstimator kde_density(const std::vector<Vector>& samples, double bandwidth);
/// Bandwidth 1.06 * sigma_hat * n^(-1/(d+4)) per coordinate.
DensityEstimator kde_density(const std::vector<Vector>& samples);
Vector default_kde_bandwidth(const std::vector<Vector>& samples);

DensityEstimator learned_density(std::shared_ptr<const DensityNet> net, InitialDistribution rho0);
/// Wraps an arbitrary function, e.g. a closed-form oracle.
DensityEstimator function_density(int dim, std::function<double(const TruthSample&)> fn);

inline constexpr double kDefaultKlFloor = 1e-12;

/// Mean over samples of log(rho_true / max(est, floor)).
double kl_divergence(const std::vector<TruthSample>& truth, const DensityEstimator& est,
                     double floor = kDefaultKlFloor, int jobs = 1);

struct VolumeAtProbability {
    double volume = 0.0;
    double achieved_p = 0.0;
    int cells_used = 0;
};

/// Greedy: cells by rho_hi descending, accumulating p_lo until it reaches
/// the threshold; returns the summed state-set volume.
VolumeAtProbability volume_at_probability(const std::vector<ReachCell>& reach, double threshold);

/// Monotone-chain hull and shoelace area. Fewer than three points or a
/// collinear set give 0.
double convex_hull_area_2d(const std::vector<Vector>& points);

/// Volume of the sample bounding box.
double bounding_box_volume(const std::vector<Vector>& points);

}  // namespace densreach
