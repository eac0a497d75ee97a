// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>

#include "densreach/dataset.hpp"
#include "densreach/distribution.hpp"
#include "densreach/systems.hpp"

namespace densreach {

struct AugmentedState {
    Vector x;
    double rho = 0.0;
};

/// Integrates x' = f(x), rho' = -(div f) rho from (x0, rho0) up to time t
/// with RK4 steps no longer than dt_internal. The density is carried in
/// log space.
AugmentedState augmented_flow(const Dynamics& dyn, const Vector& x0, double rho0, double t, double dt_internal);
AugmentedState augmented_flow(const SystemSpec& spec, const Vector& x0, double rho0, double t,
                              double dt_internal);

/// Exact density of x' = -x^2 at (x, t) for x0 uniform on [0, 1]:
/// 1 / (1 - x t)^2. Throws DomainError when x t >= 1.
double closed_form_1d(double x, double t);

/// Exact flow of x' = -x^2: x0 / (1 + x0 t).
double closed_form_flow_1d(double x0, double t);

/// Simulates n_traj trajectories from initial states drawn uniformly from
/// the system's initial box and splits them by a seeded shuffle; the first
/// round(split * n_traj) shuffled trajectories form the training set.
std::pair<TrajectoryDataset, TrajectoryDataset> build_dataset(const SystemSpec& spec, int n_traj, int steps,
                                                              double dt, std::uint64_t seed, double split,
                                                              int jobs = 1);

/// Same sampling, no split, x0 drawn from `rho0`; each trajectory carries
/// its ground-truth density along the path.
TrajectoryDataset build_truth(const SystemSpec& spec, const InitialDistribution& rho0, int n_traj, int steps,
                              double dt, std::uint64_t seed, int jobs = 1);

}  // namespace densreach
