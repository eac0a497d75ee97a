// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "densreach/rpm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

#include "densreach/error.hpp"
#include "densreach/parallel.hpp"
#include "densreach/rng.hpp"
#include "geometry_internal.hpp"
#include "json.hpp"

namespace densreach {

using nlohmann::json;

int SlicedNet::hidden_count() const {
    int n = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        n += static_cast<int>(layers[l].b.size());
    }
    return n;
}

SlicedNet slice_net(const DensityNet& net, double t) {
    const auto fold = fold_input(net);
    SlicedNet s;
    s.state_dim = net.state_dim;
    s.t = t;
    Vector bias(fold.b.size());
    for (int i = 0; i < bias.size(); ++i) {
        bias[i] = fold.wt[i] * t + fold.b[i];
    }
    s.layers.push_back({fold.wx, bias});
    for (std::size_t l = 1; l < net.layers.size(); ++l) {
        s.layers.push_back(net.layers[l]);
    }
    return s;
}

Vector forward(const SlicedNet& net, const Vector& x) {
    if (x.size() != net.state_dim) {
        throw ArgumentError("forward: state dimension mismatch");
    }
    Vector h = affine_apply(net.layers[0].w, x, net.layers[0].b);
    for (std::size_t l = 1; l < net.layers.size(); ++l) {
        h = h.cwiseMax(0.0);
        h = affine_apply(net.layers[l].w, h, net.layers[l].b);
    }
    return h;
}

std::string ActivationPattern::to_string() const {
    std::string s(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i) {
        s[i] = bits[i] ? '1' : '0';
    }
    return s;
}

ActivationPattern ActivationPattern::from_string(const std::string& s) {
    ActivationPattern p;
    p.bits.reserve(s.size());
    for (char c : s) {
        if (c != '0' && c != '1') {
            throw ArgumentError("activation pattern: expected only '0'/'1'");
        }
        p.bits.push_back(c == '1' ? 1 : 0);
    }
    return p;
}

ActivationPattern activation_pattern(const SlicedNet& net, const Vector& x) {
    if (x.size() != net.state_dim) {
        throw ArgumentError("activation_pattern: state dimension mismatch");
    }
    ActivationPattern p;
    p.bits.reserve(net.hidden_count());
    Vector h = x;
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
        h = affine_apply(net.layers[l].w, h, net.layers[l].b);
        for (int i = 0; i < h.size(); ++i) {
            p.bits.push_back(h[i] > 0.0 ? 1 : 0);
        }
        h = h.cwiseMax(0.0);
    }
    return p;
}

std::optional<AffineCell> cell_of(const SlicedNet& net, const ActivationPattern& pattern, const Polyhedron& domain) {
    const int d = net.state_dim;
    if (domain.dim() != d) {
        throw ArgumentError("cell_of: domain dimension mismatch");
    }
    if (static_cast<int>(pattern.bits.size()) != net.hidden_count()) {
        throw ArgumentError("cell_of: pattern length does not match the hidden neuron count");
    }
    Polyhedron h = domain;
    Matrix m = Matrix::Identity(d, d);
    Vector off = Vector::Zero(d);
    std::size_t bit = 0;
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
        const Matrix p = net.layers[l].w * m;
        const Vector q = net.layers[l].w * off + net.layers[l].b;
        Matrix masked_m(p.rows(), d);
        Vector masked_off(p.rows());
        for (int j = 0; j < p.rows(); ++j, ++bit) {
            if (pattern.bits[bit]) {
                h.add_row(-p.row(j).transpose(), q[j]);
                masked_m.row(j) = p.row(j);
                masked_off[j] = q[j];
            } else {
                h.add_row(p.row(j).transpose(), -q[j]);
                masked_m.row(j).setZero();
                masked_off[j] = 0.0;
            }
        }
        m = std::move(masked_m);
        off = std::move(masked_off);
    }
    const auto ball = chebyshev_center(h);
    if (!(ball.radius > 1e-12)) {
        return std::nullopt;
    }

    AffineCell cell;
    cell.pattern = pattern;
    cell.t = net.t;
    cell.H = remove_redundant(h);
    // H is bounded and full-dimensional here, so the vertices give its
    // volume and the exact boxes of H and of its image.
    const auto vs = detail::enumerate_vertices_irredundant(cell.H);
    cell.volume = detail::volume_from_vertices(vs);
    if (!(cell.volume > 0.0)) {
        return std::nullopt;
    }
    const auto& last = net.layers.back();
    cell.C = last.w * m;
    cell.d = last.w * off + last.b;
    cell.M = affine_image(cell.H, cell.C, cell.d);

    const int out = static_cast<int>(cell.C.rows());
    Vector hlo = Vector::Constant(d, std::numeric_limits<double>::infinity());
    Vector hhi = -hlo;
    Vector lo = Vector::Constant(out, std::numeric_limits<double>::infinity());
    Vector hi = -lo;
    for (const auto& v : vs.points) {
        hlo = hlo.cwiseMin(v);
        hhi = hhi.cwiseMax(v);
        const Vector y = cell.C * v + cell.d;
        lo = lo.cwiseMin(y);
        hi = hi.cwiseMax(y);
    }
    cell.h_box = HyperRectangle(hlo, hhi);
    cell.m_box = HyperRectangle(lo, hi);
    cell.z_lo = lo[0];
    cell.z_hi = hi[0];
    return cell;
}

namespace {

// Point in the relative interior of facet `row` of H: Chebyshev center
// within the facet hyperplane.
std::optional<Vector> facet_center(const Polyhedron& h, int row) {
    const int d = h.dim();
    const Vector a = h.A().row(row).transpose();
    const double norm = a.norm();
    if (norm == 0.0) {
        return std::nullopt;
    }
    const Vector base = a * (h.b()[row] / (norm * norm));
    if (d == 1) {
        return base;
    }
    Eigen::FullPivLU<Matrix> lu(a.transpose());
    const Matrix basis = lu.kernel();  // d x (d-1)
    Polyhedron f(d - 1);
    for (int i = 0; i < h.rows(); ++i) {
        if (i == row) {
            continue;
        }
        f.add_row(basis.transpose() * h.A().row(i).transpose(), h.b()[i] - h.A().row(i).dot(base));
    }
    const auto ball = chebyshev_center(f);
    if (!(ball.radius > 0.0)) {
        return std::nullopt;
    }
    return Vector(base + basis * ball.center);
}

struct Expansion {
    std::optional<AffineCell> cell;
    std::vector<ActivationPattern> neighbours;
};

Expansion expand(const SlicedNet& net, const ActivationPattern& pattern, const Polyhedron& domain, double step) {
    Expansion e;
    e.cell = cell_of(net, pattern, domain);
    if (!e.cell) {
        return e;
    }
    const Polyhedron& h = e.cell->H;
    for (int r = 0; r < h.rows(); ++r) {
        const auto center = facet_center(h, r);
        if (!center) {
            continue;
        }
        const Vector a = h.A().row(r).transpose();
        const Vector across = *center + step * a / a.norm();
        if (domain.max_violation(across) > 0.0) {
            continue;  // domain facet
        }
        auto next = activation_pattern(net, across);
        if (next != pattern) {
            e.neighbours.push_back(std::move(next));
        }
    }
    return e;
}

}  // namespace

std::vector<AffineCell> enumerate_cells(const SlicedNet& net, const Polyhedron& domain,
                                        const EnumerationOptions& options) {
    if (domain.dim() != net.state_dim) {
        throw ArgumentError("enumerate_cells: domain dimension mismatch");
    }
    if (net.state_dim > 4) {
        throw ArgumentError("enumerate_cells: state dimension above 4 is not supported");
    }
    const auto start = chebyshev_center(domain);
    if (!(start.radius > 0.0)) {
        throw InfeasibleError("enumerate_cells: domain is empty or lower-dimensional");
    }
    (void)bounding_box(domain);  // throws when unbounded

    std::set<ActivationPattern> visited;
    std::vector<AffineCell> cells;
    double covered = 0.0;
    const double domain_volume = volume(domain);

    auto march = [&](const ActivationPattern& seed) {
        std::vector<ActivationPattern> frontier{seed};
        visited.insert(seed);
        while (!frontier.empty()) {
            std::vector<Expansion> results(frontier.size());
            parallel_for(frontier.size(), options.jobs, [&](std::size_t i) {
                results[i] = expand(net, frontier[i], domain, options.crossing_step);
            });
            std::set<ActivationPattern> next;
            for (auto& r : results) {
                if (r.cell) {
                    covered += r.cell->volume;
                    cells.push_back(std::move(*r.cell));
                }
                for (auto& p : r.neighbours) {
                    if (!visited.count(p)) {
                        next.insert(std::move(p));
                    }
                }
            }
            visited.insert(next.begin(), next.end());
            if (visited.size() > options.budget) {
                throw BudgetError("enumerate_cells: more than " + std::to_string(options.budget) + " cells");
            }
            frontier.assign(next.begin(), next.end());
        }
    };

    march(activation_pattern(net, start.center));
    // A seed or crossing point that lands exactly on another neuron's
    // hyperplane yields a degenerate pattern and the march stops early.
    // Restart from uncovered points until the volumes add up.
    const HyperRectangle box = bounding_box(domain);
    Rng rng(0x5eedULL);
    for (int tries = 0; tries < 20000 && covered < domain_volume * (1.0 - 1e-8); ++tries) {
        Vector x(box.dim());
        for (int i = 0; i < box.dim(); ++i) {
            x[i] = rng.uniform(box.lo[i], box.hi[i]);
        }
        if (!domain.contains(x, 0.0)) {
            continue;
        }
        const bool inside = std::any_of(cells.begin(), cells.end(),
                                        [&](const AffineCell& c) { return c.H.contains(x, 1e-12); });
        if (inside) {
            continue;
        }
        const auto pattern = activation_pattern(net, x);
        if (!visited.count(pattern)) {
            march(pattern);
        }
    }
    std::sort(cells.begin(), cells.end(),
              [](const AffineCell& a, const AffineCell& b) { return a.pattern < b.pattern; });
    return cells;
}

// ---------------------------------------------------------------------------
// Partition cache

namespace {

json mat_json(const Matrix& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            flat.push_back(m(r, c));
        }
    }
    return flat;
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const json& j) {
    const auto raw = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

Matrix json_mat(const json& j, int rows, int cols) {
    const auto raw = j.get<std::vector<double>>();
    if (raw.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw ParseError("partition: matrix size mismatch", 0);
    }
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            m(r, c) = raw[static_cast<std::size_t>(r) * cols + c];
        }
    }
    return m;
}

json poly_json(const Polyhedron& p) { return {{"A", mat_json(p.A())}, {"b", vec_json(p.b())}}; }

Polyhedron json_poly(const json& a, const json& b, int dim) {
    const Vector bv = json_vec(b);
    return {json_mat(a, static_cast<int>(bv.size()), dim), bv};
}

}  // namespace

std::string save_partition(const Partition& p) {
    json j;
    j["version"] = kPartitionVersion;
    j["system"] = p.system;
    j["t"] = p.t;
    j["dim"] = p.domain.dim();
    j["domain"] = poly_json(p.domain);
    json cells = json::array();
    for (const auto& c : p.cells) {
        cells.push_back({{"pattern", c.pattern.to_string()},
                         {"A", mat_json(c.H.A())},
                         {"b", vec_json(c.H.b())},
                         {"C", mat_json(c.C)},
                         {"d", vec_json(c.d)},
                         {"E", mat_json(c.M.A())},
                         {"f", vec_json(c.M.b())},
                         {"z_lo", c.z_lo},
                         {"z_hi", c.z_hi},
                         {"volume", c.volume},
                         {"h_lo", vec_json(c.h_box.lo)},
                         {"h_hi", vec_json(c.h_box.hi)},
                         {"m_lo", vec_json(c.m_box.lo)},
                         {"m_hi", vec_json(c.m_box.hi)}});
    }
    j["cells"] = std::move(cells);
    return j.dump() + "\n";
}

Partition load_partition(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("partition: ") + e.what(), e.byte);
    }
    try {
        const int version = j.at("version").get<int>();
        if (version != kPartitionVersion) {
            throw UnsupportedVersionError("partition: unsupported version " + std::to_string(version), version);
        }
        Partition p;
        p.system = j.at("system").get<std::string>();
        p.t = j.at("t").get<double>();
        const int d = j.at("dim").get<int>();
        p.domain = json_poly(j.at("domain").at("A"), j.at("domain").at("b"), d);
        for (const auto& c : j.at("cells")) {
            AffineCell cell;
            cell.pattern = ActivationPattern::from_string(c.at("pattern").get<std::string>());
            cell.t = p.t;
            cell.H = json_poly(c.at("A"), c.at("b"), d);
            cell.d = json_vec(c.at("d"));
            cell.C = json_mat(c.at("C"), static_cast<int>(cell.d.size()), d);
            cell.M = json_poly(c.at("E"), c.at("f"), static_cast<int>(cell.d.size()));
            cell.z_lo = c.at("z_lo").get<double>();
            cell.z_hi = c.at("z_hi").get<double>();
            cell.volume = c.at("volume").get<double>();
            cell.h_box = HyperRectangle(json_vec(c.at("h_lo")), json_vec(c.at("h_hi")));
            cell.m_box = HyperRectangle(json_vec(c.at("m_lo")), json_vec(c.at("m_hi")));
            p.cells.push_back(std::move(cell));
        }
        return p;
    } catch (const json::exception& e) {
        throw ParseError(std::string("partition: ") + e.what(), 0);
    }
}

void save_partition_file(const Partition& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ArgumentError("cannot write " + path);
    }
    out << save_partition(p);
}

Partition load_partition_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArgumentError("cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_partition(ss.str());
}

}  // namespace densreach
