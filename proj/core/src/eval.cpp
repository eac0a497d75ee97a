// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "densreach/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "densreach/error.hpp"
#include "densreach/parallel.hpp"

namespace densreach {

namespace {

void check_samples(const std::vector<Vector>& samples, const char* who) {
    if (samples.empty()) {
        throw ArgumentError(std::string(who) + ": no samples");
    }
    const auto d = samples.front().size();
    for (const auto& s : samples) {
        if (s.size() != d) {
            throw ArgumentError(std::string(who) + ": samples of mixed dimension");
        }
    }
}

double epanechnikov(double u) {
    return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

double cross(const Vector& o, const Vector& a, const Vector& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

}  // namespace

std::vector<TruthSample> truth_samples_at(const TrajectoryDataset& truth, int step) {
    std::vector<TruthSample> out;
    out.reserve(truth.size());
    for (const auto& tr : truth.trajectories) {
        if (tr.rho.empty()) {
            throw ArgumentError("truth_samples_at: trajectory has no rho");
        }
        if (step < 0 || step >= static_cast<int>(tr.states.size())) {
            throw ArgumentError("truth_samples_at: step out of range");
        }
        TruthSample s;
        s.x0 = tr.x0;
        s.t = tr.times.empty() ? step * truth.dt : tr.times[step];
        s.state = tr.states[step];
        s.rho = tr.rho[step];
        out.push_back(std::move(s));
    }
    return out;
}

double DensityEstimator::density(const Vector& x) const {
    if (x.size() != dim_) {
        throw ArgumentError("DensityEstimator: dimension mismatch");
    }
    switch (kind_) {
        case Kind::Histogram: {
            std::size_t idx = 0;
            for (int i = 0; i < dim_; ++i) {
                if (!(x[i] >= box_.lo[i] && x[i] <= box_.hi[i])) {
                    return 0.0;
                }
                int k = static_cast<int>(std::floor((x[i] - box_.lo[i]) / width_[i]));
                k = std::clamp(k, 0, bins_ - 1);
                idx = idx * static_cast<std::size_t>(bins_) + static_cast<std::size_t>(k);
            }
            return cells_[idx];
        }
        case Kind::Kde: {
            const double h0 = bandwidth_[0];
            const auto begin = std::lower_bound(first_.begin(), first_.end(), x[0] - h0);
            const auto end = std::upper_bound(first_.begin(), first_.end(), x[0] + h0);
            double norm = static_cast<double>(samples_.size());
            for (int i = 0; i < dim_; ++i) {
                norm *= bandwidth_[i];
            }
            double sum = 0.0;
            for (auto it = begin; it != end; ++it) {
                const Vector& s = samples_[static_cast<std::size_t>(it - first_.begin())];
                double k = 1.0;
                for (int i = 0; i < dim_ && k > 0.0; ++i) {
                    k *= epanechnikov((x[i] - s[i]) / bandwidth_[i]);
                }
                sum += k;
            }
            return sum / norm;
        }
        case Kind::Function: {
            TruthSample s;
            s.state = x;
            return fn_(s);
        }
        case Kind::Learned:
            break;
    }
    throw ArgumentError("DensityEstimator: the learned estimator needs the initial state");
}

double DensityEstimator::evaluate(const TruthSample& s) const {
    switch (kind_) {
        case Kind::Learned:
            return density_estimate(*net_, s.x0, s.t, *rho0_);
        case Kind::Function:
            return fn_(s);
        default:
            return density(s.state);
    }
}

DensityEstimator histogram_density(const std::vector<Vector>& samples, int bins_per_dim) {
    check_samples(samples, "histogram_density");
    const int d = static_cast<int>(samples.front().size());
    if (d > kMaxHistogramDim) {
        throw DimensionalityError("histogram_density: " + std::to_string(d) +
                                  "-dimensional samples; bin count grows as bins^d and the estimate is unusable "
                                  "beyond d = " +
                                  std::to_string(kMaxHistogramDim));
    }
    const double n = static_cast<double>(samples.size());
    if (bins_per_dim <= 0) {
        bins_per_dim = static_cast<int>(std::ceil(std::pow(n, 1.0 / (d + 2))));
    }
    DensityEstimator e;
    e.kind_ = DensityEstimator::Kind::Histogram;
    e.dim_ = d;
    e.bins_ = bins_per_dim;
    Vector lo = samples.front(), hi = samples.front();
    for (const auto& s : samples) {
        lo = lo.cwiseMin(s);
        hi = hi.cwiseMax(s);
    }
    for (int i = 0; i < d; ++i) {
        if (!(hi[i] > lo[i])) {
            // Degenerate coordinate: give the single bin unit width.
            lo[i] -= 0.5;
            hi[i] += 0.5;
        }
    }
    e.box_ = HyperRectangle(lo, hi);
    e.width_ = (hi - lo) / bins_per_dim;
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) {
        total *= static_cast<std::size_t>(bins_per_dim);
    }
    e.cells_.assign(total, 0.0);
    for (const auto& s : samples) {
        std::size_t idx = 0;
        for (int i = 0; i < d; ++i) {
            int k = static_cast<int>(std::floor((s[i] - lo[i]) / e.width_[i]));
            k = std::clamp(k, 0, bins_per_dim - 1);
            idx = idx * static_cast<std::size_t>(bins_per_dim) + static_cast<std::size_t>(k);
        }
        e.cells_[idx] += 1.0;
    }
    const double scale = 1.0 / (n * e.width_.prod());
    for (auto& c : e.cells_) {
        c *= scale;
    }
    return e;
}

Vector default_kde_bandwidth(const std::vector<Vector>& samples) {
    check_samples(samples, "kde_density");
    const int d = static_cast<int>(samples.front().size());
    const double n = static_cast<double>(samples.size());
    Vector mean = Vector::Zero(d);
    for (const auto& s : samples) {
        mean += s;
    }
    mean /= n;
    Vector var = Vector::Zero(d);
    for (const auto& s : samples) {
        var += (s - mean).cwiseAbs2();
    }
    var /= std::max(n - 1.0, 1.0);
    Vector h = 1.06 * var.cwiseSqrt() * std::pow(n, -1.0 / (d + 4));
    for (int i = 0; i < d; ++i) {
        if (!(h[i] > 0.0)) {
            h[i] = 1e-3;
        }
    }
    return h;
}

DensityEstimator kde_density(const std::vector<Vector>& samples, const Vector& bandwidth) {
    check_samples(samples, "kde_density");
    const int d = static_cast<int>(samples.front().size());
    if (bandwidth.size() != d || !(bandwidth.array() > 0.0).all()) {
        throw ArgumentError("kde_density: bandwidth must be positive, one entry per coordinate");
    }
    DensityEstimator e;
    e.kind_ = DensityEstimator::Kind::Kde;
    e.dim_ = d;
    e.bandwidth_ = bandwidth;
    e.samples_ = samples;
    std::stable_sort(e.samples_.begin(), e.samples_.end(),
                     [](const Vector& a, const Vector& b) { return a[0] < b[0]; });
    e.first_.reserve(e.samples_.size());
    for (const auto& s : e.samples_) {
        e.first_.push_back(s[0]);
    }
    return e;
}

DensityEstimator kde_density(const std::vector<Vector>& samples, double bandwidth) {
    check_samples(samples, "kde_density");
    return kde_density(samples, Vector::Constant(samples.front().size(), bandwidth));
}

DensityEstimator kde_density(const std::vector<Vector>& samples) {
    return kde_density(samples, default_kde_bandwidth(samples));
}

DensityEstimator learned_density(std::shared_ptr<const DensityNet> net, InitialDistribution rho0) {
    if (!net) {
        throw ArgumentError("learned_density: null network");
    }
    if (rho0.dim() != net->state_dim) {
        throw ArgumentError("learned_density: initial distribution dimension mismatch");
    }
    DensityEstimator e;
    e.kind_ = DensityEstimator::Kind::Learned;
    e.dim_ = net->state_dim;
    e.net_ = std::move(net);
    e.rho0_ = std::move(rho0);
    return e;
}

DensityEstimator function_density(int dim, std::function<double(const TruthSample&)> fn) {
    DensityEstimator e;
    e.kind_ = DensityEstimator::Kind::Function;
    e.dim_ = dim;
    e.fn_ = std::move(fn);
    return e;
}

double kl_divergence(const std::vector<TruthSample>& truth, const DensityEstimator& est, double floor, int jobs) {
    if (!(floor > 0.0)) {
        throw ArgumentError("kl_divergence: floor must be positive");
    }
    if (truth.empty()) {
        throw ArgumentError("kl_divergence: no truth samples");
    }
    std::vector<double> terms(truth.size());
    parallel_for(truth.size(), jobs, [&](std::size_t i) {
        const auto& s = truth[i];
        if (!(s.rho > 0.0)) {
            throw ArgumentError("kl_divergence: truth density must be positive");
        }
        terms[i] = std::log(s.rho / std::max(est.evaluate(s), floor));
    });
    return std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(terms.size());
}

VolumeAtProbability volume_at_probability(const std::vector<ReachCell>& reach, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ArgumentError("volume_at_probability: threshold must be in (0, 1]");
    }
    std::vector<std::size_t> order(reach.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return reach[a].rho_hi > reach[b].rho_hi; });
    VolumeAtProbability out;
    for (const auto i : order) {
        if (out.achieved_p >= threshold) {
            break;
        }
        out.volume += reach[i].volume;
        out.achieved_p += reach[i].p_lo;
        ++out.cells_used;
    }
    return out;
}

double convex_hull_area_2d(const std::vector<Vector>& points) {
    for (const auto& p : points) {
        if (p.size() != 2) {
            throw ArgumentError("convex_hull_area_2d: points must be 2-D");
        }
    }
    if (points.size() < 3) {
        return 0.0;
    }
    std::vector<Vector> pts = points;
    std::sort(pts.begin(), pts.end(),
              [](const Vector& a, const Vector& b) { return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]); });
    std::vector<Vector> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) {
            --k;
        }
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) {
            --k;
        }
        hull[k++] = pts[i];
    }
    hull.resize(k > 0 ? k - 1 : 0);
    double area = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        area += a[0] * b[1] - a[1] * b[0];
    }
    return 0.5 * std::abs(area);
}

double bounding_box_volume(const std::vector<Vector>& points) {
    if (points.empty()) {
        return 0.0;
    }
    Vector lo = points.front(), hi = points.front();
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).prod();
}

}  // namespace densreach
