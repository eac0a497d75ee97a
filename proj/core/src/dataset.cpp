// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "densreach/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "densreach/error.hpp"
#include "json.hpp"

namespace densreach {

using nlohmann::json;

namespace {

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
    const auto raw = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

}  // namespace

int TrajectoryDataset::state_dim() const {
    return trajectories.empty() ? 0 : static_cast<int>(trajectories.front().x0.size());
}

void write_jsonl(const TrajectoryDataset& data, std::ostream& out) {
    for (const auto& tr : data.trajectories) {
        json rec;
        rec["system"] = data.system;
        rec["x0"] = to_json(tr.x0);
        rec["dt"] = data.dt;
        json states = json::array();
        for (const auto& s : tr.states) {
            states.push_back(to_json(s));
        }
        rec["states"] = std::move(states);
        rec["divergences"] = tr.divergences;
        if (!tr.rho.empty()) {
            rec["rho"] = tr.rho;
        }
        out << rec.dump() << '\n';
    }
}

TrajectoryDataset read_jsonl(std::istream& in) {
    TrajectoryDataset data;
    std::string line;
    std::size_t offset = 0;
    bool first = true;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("dataset: ") + e.what(), line_start + e.byte);
        }
        try {
            Trajectory tr;
            tr.x0 = vector_from(rec.at("x0"));
            const double dt = rec.at("dt").get<double>();
            const auto system = rec.at("system").get<std::string>();
            if (first) {
                data.system = system;
                data.dt = dt;
                first = false;
            } else if (system != data.system || dt != data.dt) {
                throw ParseError("dataset: mixed systems or time steps", line_start);
            }
            for (const auto& s : rec.at("states")) {
                tr.states.push_back(vector_from(s));
            }
            tr.divergences = rec.at("divergences").get<std::vector<double>>();
            if (rec.contains("rho")) {
                tr.rho = rec.at("rho").get<std::vector<double>>();
            }
            if (tr.states.empty() || tr.divergences.size() != tr.states.size() ||
                (!tr.rho.empty() && tr.rho.size() != tr.states.size())) {
                throw ParseError("dataset: inconsistent array lengths", line_start);
            }
            for (std::size_t k = 0; k < tr.states.size(); ++k) {
                if (tr.states[k].size() != tr.x0.size()) {
                    throw ParseError("dataset: state dimension mismatch", line_start);
                }
                tr.times.push_back(static_cast<double>(k) * dt);
            }
            data.trajectories.push_back(std::move(tr));
        } catch (const json::exception& e) {
            throw ParseError(std::string("dataset: ") + e.what(), line_start);
        }
    }
    return data;
}

void save_jsonl(const TrajectoryDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ArgumentError("cannot write " + path);
    }
    write_jsonl(data, out);
}

TrajectoryDataset load_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArgumentError("cannot read " + path);
    }
    return read_jsonl(in);
}

}  // namespace densreach
