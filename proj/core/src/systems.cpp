// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "densreach/systems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "densreach/error.hpp"
#include "densreach/log.hpp"

namespace densreach {

namespace {

HyperRectangle box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
    Vector l(static_cast<int>(lo.size())), h(static_cast<int>(hi.size()));
    int i = 0;
    for (double v : lo) {
        l[i++] = v;
    }
    i = 0;
    for (double v : hi) {
        h[i++] = v;
    }
    return {l, h};
}

void check_dim(const SystemSpec& spec, const Vector& x) {
    if (x.size() != spec.state_dim) {
        throw ArgumentError(spec.name + ": state has dimension " + std::to_string(x.size()) + ", expected " +
                            std::to_string(spec.state_dim));
    }
}

double param(const SystemSpec& spec, const char* key) { return spec.params.at(key); }

// Robot heading/speed controller; smooth saturation keeps the partials defined.
struct RobotControl {
    double uw;
    double ua;
};

RobotControl robot_control(const SystemSpec& s, const Vector& x) {
    const double bearing = std::atan2(param(s, "y_goal") - x[1], param(s, "x_goal") - x[0]);
    return {std::tanh(param(s, "k_h") * (bearing - x[2])), std::tanh(param(s, "k_v") * (param(s, "v_des") - x[3]))};
}

double dint_control(const Vector& x) { return std::clamp(-0.5 * x[0] - 1.0 * x[1], -1.0, 1.0); }

}  // namespace

const std::vector<std::string>& system_names() {
    static const std::vector<std::string> names = {"vdp", "dint", "kop", "robot", "car", "scalar1d"};
    return names;
}

SystemSpec make_system(SystemId id) {
    SystemSpec s;
    s.id = id;
    switch (id) {
        case SystemId::Vdp:
            s.name = "vdp";
            s.state_dim = 2;
            s.params = {{"mu", 1.0}};
            s.init_domain = box({-2.5, -2.5}, {2.5, 2.5});
            s.default_dt = 0.05;
            s.default_steps = 50;
            s.state_names = {"x", "y"};
            break;
        case SystemId::Dint:
            s.name = "dint";
            s.state_dim = 2;
            s.init_domain = box({-0.5, -1.0}, {4.0, 1.0});
            s.default_dt = 1.0;
            s.default_steps = 10;
            s.state_names = {"x", "y"};
            break;
        case SystemId::Kop:
            s.name = "kop";
            s.state_dim = 3;
            s.init_domain = box({0.0, -2.0, -2.0}, {2.0, 2.0, 2.0});
            s.default_dt = 0.125;
            s.default_steps = 80;
            s.state_names = {"x1", "x2", "x3"};
            break;
        case SystemId::Robot:
            s.name = "robot";
            s.state_dim = 4;
            s.params = {{"k_h", 2.0}, {"k_v", 1.0}, {"v_des", 1.0}, {"x_goal", 1.5}, {"y_goal", 1.5}};
            s.init_domain = box({-1.8, -1.8, 0.0, 1.0}, {-1.2, -1.2, std::numbers::pi / 2, 1.5});
            s.default_dt = 0.05;
            s.default_steps = 50;
            s.state_names = {"x", "y", "theta", "v"};
            break;
        case SystemId::Car:
            s.name = "car";
            s.state_dim = 4;
            s.params = {{"k1", 0.5}, {"k2", 0.5}, {"k3", 1.0}, {"v_ref", 1.0}, {"w_ref", 0.0}};
            s.init_domain = box({-2.1, -2.1, 0.0, 0.0}, {2.1, 2.1, 0.1, 1.0});
            s.default_dt = 0.1;
            s.default_steps = 50;
            s.state_names = {"ex", "ey", "etheta", "a"};
            break;
        case SystemId::Scalar1d:
            s.name = "scalar1d";
            s.state_dim = 1;
            s.init_domain = box({0.0}, {1.0});
            s.default_dt = 0.005;
            s.default_steps = 200;
            s.state_names = {"x"};
            break;
    }
    return s;
}

SystemSpec make_system(const std::string& name) {
    const auto& names = system_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) {
            return make_system(static_cast<SystemId>(i));
        }
    }
    throw ArgumentError("unknown system '" + name + "'");
}

Vector eval_dynamics(const SystemSpec& s, const Vector& x) {
    check_dim(s, x);
    Vector f(s.state_dim);
    switch (s.id) {
        case SystemId::Vdp: {
            const double mu = param(s, "mu");
            f << x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
            break;
        }
        case SystemId::Dint: {
            const double u = dint_control(x);
            f << x[1] + 0.5 * u, u;
            break;
        }
        case SystemId::Kop:
            f << x[0] * x[2], -x[1] * x[2], -x[0] * x[0] + x[1] * x[1];
            break;
        case SystemId::Robot: {
            const auto u = robot_control(s, x);
            f << x[3] * std::cos(x[2]), x[3] * std::sin(x[2]), u.uw, u.ua;
            break;
        }
        case SystemId::Car: {
            const double k1 = param(s, "k1"), k2 = param(s, "k2"), k3 = param(s, "k3");
            const double vr = param(s, "v_ref"), wr = param(s, "w_ref");
            const double ex = x[0], ey = x[1], et = x[2], a = x[3];
            const double w = wr + vr * (k2 * ey + k3 * std::sin(et));
            f << w * ey - k1 * ex + a * ex, -w * ex + vr * std::sin(et) + a * ey, -vr * (k2 * ey + k3 * std::sin(et)),
                0.0;
            break;
        }
        case SystemId::Scalar1d:
            f << -x[0] * x[0];
            break;
    }
    return f;
}

double eval_divergence(const SystemSpec& s, const Vector& x) {
    check_dim(s, x);
    switch (s.id) {
        case SystemId::Vdp:
            return param(s, "mu") * (1.0 - x[0] * x[0]);
        case SystemId::Dint: {
            const double raw = -0.5 * x[0] - 1.0 * x[1];
            // du/dx = -0.5, du/dy = -1 inside the linear band, 0 when saturated.
            return std::abs(raw) < 1.0 ? 0.5 * -0.5 + -1.0 : 0.0;
        }
        case SystemId::Kop:
            return 0.0;
        case SystemId::Robot:
            return divergence_fd([&s](const Vector& v) { return eval_dynamics(s, v); }, x);
        case SystemId::Car: {
            const double k1 = param(s, "k1"), k2 = param(s, "k2"), k3 = param(s, "k3");
            const double vr = param(s, "v_ref");
            return 2.0 * x[3] - k1 - k2 * vr * x[0] - vr * k3 * std::cos(x[2]);
        }
        case SystemId::Scalar1d:
            return -2.0 * x[0];
    }
    return 0.0;
}

double divergence_fd(const VectorField& f, const Vector& x, double eps) {
    if (!(eps > 0.0)) {
        throw ArgumentError("divergence_fd: eps must be positive");
    }
    double sum = 0.0;
    Vector xp = x, xm = x;
    for (int i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + eps;
        xm[i] = x[i] - eps;
        const double fp = f(xp)[i];
        const double fm = f(xm)[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("divergence_fd: non-finite dynamics output");
        }
        sum += (fp - fm) / (2.0 * eps);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    return sum;
}

Dynamics dynamics_of(const SystemSpec& spec) {
    return {spec.state_dim, [spec](const Vector& x) { return eval_dynamics(spec, x); },
            [spec](const Vector& x) { return eval_divergence(spec, x); }};
}

namespace {

// RK4 on (x, log_gain). The density component does not feed back into x,
// so the x part is bit-identical with or without it.
Trajectory integrate(const Dynamics& dyn, const Vector& x0, double dt, int steps, int substeps, bool with_density,
                     double rho0) {
    if (!(dt > 0.0) || steps < 1 || substeps < 1) {
        throw ArgumentError("simulate: need dt > 0, steps >= 1, substeps >= 1");
    }
    if (x0.size() != dyn.dim) {
        throw ArgumentError("simulate: x0 has dimension " + std::to_string(x0.size()) + ", expected " +
                            std::to_string(dyn.dim));
    }
    Trajectory tr;
    tr.x0 = x0;
    tr.states.reserve(steps + 1);
    tr.times.reserve(steps + 1);
    tr.divergences.reserve(steps + 1);
    const double h = dt / substeps;
    Vector x = x0;
    double log_gain = 0.0;

    auto record = [&](int k) {
        tr.states.push_back(x);
        tr.times.push_back(k * dt);
        tr.divergences.push_back(dyn.div(x));
        if (with_density) {
            tr.rho.push_back(rho0 * std::exp(log_gain));
        }
    };
    record(0);
    for (int k = 1; k <= steps; ++k) {
        for (int s = 0; s < substeps; ++s) {
            const Vector k1 = dyn.f(x);
            const Vector x2 = x + 0.5 * h * k1;
            const Vector k2 = dyn.f(x2);
            const Vector x3 = x + 0.5 * h * k2;
            const Vector k3 = dyn.f(x3);
            const Vector x4 = x + h * k3;
            const Vector k4 = dyn.f(x4);
            if (with_density) {
                const double l1 = -dyn.div(x), l2 = -dyn.div(x2), l3 = -dyn.div(x3), l4 = -dyn.div(x4);
                log_gain += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
            }
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (!x.allFinite() || !std::isfinite(log_gain)) {
            throw DivergenceError("simulate: non-finite state at step " + std::to_string(k), k);
        }
        record(k);
    }
    return tr;
}

}  // namespace

Trajectory simulate(const Dynamics& dyn, const Vector& x0, double dt, int steps, int substeps) {
    return integrate(dyn, x0, dt, steps, substeps, false, 0.0);
}

Trajectory simulate(const SystemSpec& spec, const Vector& x0, double dt, int steps, int substeps) {
    check_dim(spec, x0);
    if (!spec.init_domain.contains(x0, 1e-12)) {
        std::ostringstream msg;
        msg << spec.name << ": initial state outside the declared domain";
        log_message(LogLevel::Warning, msg.str());
    }
    return simulate(dynamics_of(spec), x0, dt, steps, substeps);
}

Trajectory simulate_augmented(const Dynamics& dyn, const Vector& x0, double rho0, double dt, int steps,
                              int substeps) {
    if (!(rho0 >= 0.0) || !std::isfinite(rho0)) {
        throw ArgumentError("simulate_augmented: rho0 must be finite and >= 0");
    }
    return integrate(dyn, x0, dt, steps, substeps, true, rho0);
}

}  // namespace densreach
