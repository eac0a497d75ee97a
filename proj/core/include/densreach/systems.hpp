// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "densreach/geometry.hpp"
#include "densreach/types.hpp"

namespace densreach {

enum class SystemId { Vdp, Dint, Kop, Robot, Car, Scalar1d };

struct SystemSpec {
    SystemId id = SystemId::Vdp;
    std::string name;
    int state_dim = 0;
    std::map<std::string, double> params;
    HyperRectangle init_domain;
    double default_dt = 0.0;
    int default_steps = 0;
    std::vector<std::string> state_names;
};

/// Benchmark definition with its default parameters.
SystemSpec make_system(SystemId id);
/// Looks a system up by its short name ("vdp", "dint", ...).
SystemSpec make_system(const std::string& name);
const std::vector<std::string>& system_names();

using VectorField = std::function<Vector(const Vector&)>;
using ScalarField = std::function<double(const Vector&)>;

/// A vector field together with its divergence.
struct Dynamics {
    int dim = 0;
    VectorField f;
    ScalarField div;
};

Dynamics dynamics_of(const SystemSpec& spec);

Vector eval_dynamics(const SystemSpec& spec, const Vector& x);

/// Analytic divergence; the robot has none and uses divergence_fd.
double eval_divergence(const SystemSpec& spec, const Vector& x);

/// Central-difference divergence sum_i (f_i(x+eps e_i) - f_i(x-eps e_i)) / (2 eps).
double divergence_fd(const VectorField& f, const Vector& x, double eps = 1e-8);

struct Trajectory {
    Vector x0;
    std::vector<Vector> states;  ///< states[k] at time k*dt, k = 0..steps
    std::vector<double> times;
    std::vector<double> divergences;
    std::vector<double> rho;  ///< optional ground-truth density, empty if absent
};

/// Internal RK4 substeps per recorded step.
inline constexpr int kDefaultSubsteps = 10;

/// Records steps+1 states (including x0) spaced dt apart, integrated with
/// classical RK4 using `substeps` internal steps per dt.
Trajectory simulate(const Dynamics& dyn, const Vector& x0, double dt, int steps, int substeps = kDefaultSubsteps);
Trajectory simulate(const SystemSpec& spec, const Vector& x0, double dt, int steps,
                    int substeps = kDefaultSubsteps);

/// Same, also integrating log rho' = -div f so that rho[k] is the density
/// carried along the trajectory from rho0 at x0.
Trajectory simulate_augmented(const Dynamics& dyn, const Vector& x0, double rho0, double dt, int steps,
                              int substeps = kDefaultSubsteps);

}  // namespace densreach
