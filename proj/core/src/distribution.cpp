// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "densreach/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "densreach/error.hpp"
#include "densreach/rng.hpp"

namespace densreach {

namespace {

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Phi(b) - Phi(a) without cancellation in the upper tail.
double normal_interval(double a, double b) {
    return a > 0.0 ? std_normal_cdf(-a) - std_normal_cdf(-b) : std_normal_cdf(b) - std_normal_cdf(a);
}

}  // namespace

InitialDistribution InitialDistribution::uniform(const HyperRectangle& support) {
    if (!support.bounded() || !(support.volume() > 0.0)) {
        throw ArgumentError("uniform distribution needs a bounded support with positive volume");
    }
    InitialDistribution d;
    d.kind_ = Kind::Uniform;
    d.support_ = support;
    d.normalizer_ = 1.0;
    return d;
}

InitialDistribution InitialDistribution::truncated_gaussian(const HyperRectangle& support, const Vector& mu,
                                                            const Vector& sigma) {
    if (!support.bounded() || !(support.volume() > 0.0)) {
        throw ArgumentError("truncated Gaussian needs a bounded support with positive volume");
    }
    if (mu.size() != support.dim() || sigma.size() != support.dim()) {
        throw ArgumentError("truncated Gaussian: mu/sigma dimension mismatch");
    }
    if ((sigma.array() <= 0.0).any()) {
        throw ArgumentError("truncated Gaussian: sigma must be positive");
    }
    InitialDistribution d;
    d.kind_ = Kind::TruncatedGaussian;
    d.support_ = support;
    d.mu_ = mu;
    d.sigma_ = sigma;
    double z = 1.0;
    for (int i = 0; i < mu.size(); ++i) {
        z *= std_normal_cdf((support.hi[i] - mu[i]) / sigma[i]) - std_normal_cdf((support.lo[i] - mu[i]) / sigma[i]);
    }
    if (!(z > 0.0)) {
        throw TruncationError("truncated Gaussian has no mass inside its support");
    }
    d.normalizer_ = z;
    return d;
}

double InitialDistribution::density(const Vector& x) const {
    if (x.size() != dim()) {
        throw ArgumentError("density: dimension mismatch");
    }
    if (!support_.contains(x)) {
        return 0.0;
    }
    if (kind_ == Kind::Uniform) {
        return 1.0 / support_.volume();
    }
    double log_p = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        const double u = (x[i] - mu_[i]) / sigma_[i];
        log_p += -0.5 * u * u - std::log(sigma_[i] * std::sqrt(2.0 * std::numbers::pi));
    }
    return std::exp(log_p) / normalizer_;
}

std::pair<double, double> InitialDistribution::bounds(const Polyhedron& p) const {
    const Polyhedron clipped = intersect(p, Polyhedron::from_box(support_));
    if (!is_feasible(clipped)) {
        return {0.0, 0.0};
    }
    if (kind_ == Kind::Uniform) {
        const double v = 1.0 / support_.volume();
        return {v, v};
    }
    const auto box = bounding_box(clipped);
    const Vector nearest = mu_.cwiseMax(box.lo).cwiseMin(box.hi);
    const double hi = density(nearest);
    double lo = hi;
    for (const auto& v : vertices(clipped)) {
        // Vertices may sit a rounding error outside the support.
        lo = std::min(lo, density(v.cwiseMax(support_.lo).cwiseMin(support_.hi)));
    }
    return {lo, hi};
}

double InitialDistribution::mass(const HyperRectangle& box) const {
    if (box.dim() != dim()) {
        throw ArgumentError("mass: dimension mismatch");
    }
    double m = 1.0;
    for (int i = 0; i < dim(); ++i) {
        const double lo = std::max(box.lo[i], support_.lo[i]);
        const double hi = std::min(box.hi[i], support_.hi[i]);
        if (!(hi > lo)) {
            return 0.0;
        }
        m *= kind_ == Kind::Uniform ? (hi - lo) / (support_.hi[i] - support_.lo[i])
                                    : normal_interval((lo - mu_[i]) / sigma_[i], (hi - mu_[i]) / sigma_[i]);
    }
    return kind_ == Kind::Uniform ? m : std::min(1.0, m / normalizer_);
}

std::string InitialDistribution::describe() const {
    std::ostringstream os;
    os.precision(17);
    if (kind_ == Kind::Uniform) {
        os << "uniform";
    } else {
        os << "gauss:mu=[";
        for (int i = 0; i < mu_.size(); ++i) {
            os << (i ? "," : "") << mu_[i];
        }
        os << "],sigma=[";
        for (int i = 0; i < sigma_.size(); ++i) {
            os << (i ? "," : "") << sigma_[i];
        }
        os << "]";
    }
    return os.str();
}

std::vector<Vector> sample_initial(const InitialDistribution& dist, int n, std::uint64_t seed) {
    if (n < 1) {
        throw ArgumentError("sample_initial: n must be >= 1");
    }
    const int d = dist.dim();
    const auto& box = dist.support();
    Rng rng(seed);
    std::vector<Vector> out;
    out.reserve(n);
    if (dist.kind() == InitialDistribution::Kind::Uniform) {
        for (int s = 0; s < n; ++s) {
            Vector x(d);
            for (int i = 0; i < d; ++i) {
                x[i] = rng.uniform(box.lo[i], box.hi[i]);
            }
            out.push_back(std::move(x));
        }
        return out;
    }
    if (dist.normalizer() < 1e-4) {
        throw TruncationError("truncated Gaussian: acceptance rate " + std::to_string(dist.normalizer()) +
                              " below 1e-4");
    }
    Vector x(d);
    while (static_cast<int>(out.size()) < n) {
        for (int i = 0; i < d; ++i) {
            x[i] = dist.mu()[i] + dist.sigma()[i] * rng.normal();
        }
        if (box.contains(x)) {
            out.push_back(x);
        }
    }
    return out;
}

}  // namespace densreach
