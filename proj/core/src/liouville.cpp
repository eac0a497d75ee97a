// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "densreach/liouville.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "densreach/error.hpp"
#include "densreach/parallel.hpp"
#include "densreach/rng.hpp"

namespace densreach {

AugmentedState augmented_flow(const Dynamics& dyn, const Vector& x0, double rho0, double t, double dt_internal) {
    if (!(rho0 >= 0.0) || !(t >= 0.0) || !(dt_internal > 0.0)) {
        throw ArgumentError("augmented_flow: need rho0 >= 0, t >= 0, dt_internal > 0");
    }
    if (t == 0.0) {
        return {x0, rho0};
    }
    const int n = static_cast<int>(std::ceil(t / dt_internal - 1e-12));
    const auto tr = simulate_augmented(dyn, x0, rho0, t, 1, n);
    const double rho = tr.rho.back();
    if (!std::isfinite(rho)) {
        throw DivergenceError("augmented_flow: non-finite density", 1);
    }
    return {tr.states.back(), rho};
}

AugmentedState augmented_flow(const SystemSpec& spec, const Vector& x0, double rho0, double t,
                              double dt_internal) {
    return augmented_flow(dynamics_of(spec), x0, rho0, t, dt_internal);
}

double closed_form_1d(double x, double t) {
    if (x * t >= 1.0) {
        throw DomainError("closed_form_1d: x*t must be < 1");
    }
    const double s = 1.0 - x * t;
    return 1.0 / (s * s);
}

double closed_form_flow_1d(double x0, double t) { return x0 / (1.0 + x0 * t); }

namespace {

std::vector<Trajectory> simulate_many(const SystemSpec& spec, const std::vector<Vector>& starts, int steps,
                                      double dt, const InitialDistribution* rho0, int jobs) {
    const auto dyn = dynamics_of(spec);
    std::vector<Trajectory> out(starts.size());
    parallel_for(starts.size(), jobs, [&](std::size_t i) {
        try {
            out[i] = rho0 ? simulate_augmented(dyn, starts[i], rho0->density(starts[i]), dt, steps)
                          : simulate(dyn, starts[i], dt, steps);
        } catch (const DivergenceError& e) {
            throw DivergenceError("trajectory " + std::to_string(i) + ": " + e.what(), e.step());
        }
    });
    return out;
}

}  // namespace

std::pair<TrajectoryDataset, TrajectoryDataset> build_dataset(const SystemSpec& spec, int n_traj, int steps,
                                                              double dt, std::uint64_t seed, double split,
                                                              int jobs) {
    if (!(split > 0.0 && split < 1.0)) {
        throw ArgumentError("build_dataset: split must lie in (0, 1)");
    }
    if (n_traj < 1) {
        throw ArgumentError("build_dataset: n_traj must be >= 1");
    }
    const auto starts = sample_initial(InitialDistribution::uniform(spec.init_domain), n_traj, seed);
    auto trajs = simulate_many(spec, starts, steps, dt, nullptr, jobs);

    std::vector<int> order(n_traj);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(seed, 1);
    for (int i = n_traj - 1; i > 0; --i) {
        std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    const int n_train = static_cast<int>(std::lround(split * n_traj));
    TrajectoryDataset train{spec.name, dt, {}}, val{spec.name, dt, {}};
    for (int k = 0; k < n_traj; ++k) {
        (k < n_train ? train : val).trajectories.push_back(std::move(trajs[order[k]]));
    }
    return {std::move(train), std::move(val)};
}

TrajectoryDataset build_truth(const SystemSpec& spec, const InitialDistribution& rho0, int n_traj, int steps,
                              double dt, std::uint64_t seed, int jobs) {
    const auto starts = sample_initial(rho0, n_traj, seed);
    return {spec.name, dt, simulate_many(spec, starts, steps, dt, &rho0, jobs)};
}

}  // namespace densreach
