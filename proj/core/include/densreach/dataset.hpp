// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "densreach/systems.hpp"

namespace densreach {

/// Trajectories of one system sampled at a common dt.
struct TrajectoryDataset {
    std::string system;
    double dt = 0.0;
    std::vector<Trajectory> trajectories;

    [[nodiscard]] bool empty() const { return trajectories.empty(); }
    [[nodiscard]] std::size_t size() const { return trajectories.size(); }
    [[nodiscard]] int state_dim() const;
};

/// JSON-lines: one object per trajectory with fields
/// {system, x0, dt, states, divergences[, rho]}.
void write_jsonl(const TrajectoryDataset& data, std::ostream& out);
TrajectoryDataset read_jsonl(std::istream& in);

void save_jsonl(const TrajectoryDataset& data, const std::string& path);
TrajectoryDataset load_jsonl(const std::string& path);

}  // namespace densreach
