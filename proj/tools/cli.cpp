// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "densreach/dataset.hpp"
#include "densreach/error.hpp"
#include "densreach/eval.hpp"
#include "densreach/liouville.hpp"
#include "densreach/net.hpp"
#include "densreach/reach.hpp"
#include "densreach/rng.hpp"
#include "densreach/rpm.hpp"
#include "json.hpp"
#include "parse.hpp"

#ifndef DENSREACH_VERSION
#define DENSREACH_VERSION "0.0.0"
#endif

namespace densreach::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw std::runtime_error("sha256: digest failed");
    }
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) {
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return os.str();
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Files, numbers, manifest

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UsageError("cannot open input file '" + path + "'");
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    const fs::path p(path);
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw UsageError("cannot write output file '" + path + "'");
    }
    out << bytes;
}

// Shortest round-trip decimal form.
std::string num(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

// "reach.json" -> "reach" + suffix
std::string sibling(const std::string& out, const std::string& suffix) {
    fs::path p(out);
    if (p.extension() == ".json" || p.extension() == ".jsonl" || p.extension() == ".csv") {
        p.replace_extension("");
    }
    return p.string() + suffix;
}

class Stopwatch {
  public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

  private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::vector<std::pair<std::string, std::string>> inputs;
    std::vector<std::pair<std::string, std::string>> outputs;
    std::vector<std::pair<std::string, double>> timings;
    Stopwatch clock;

    std::string read_input(const std::string& path) {
        auto bytes = read_file(path);
        inputs.emplace_back(path, sha256_hex(bytes));
        return bytes;
    }

    void note_input(const std::string& path) { inputs.emplace_back(path, sha256_hex(read_file(path))); }

    void write_output(const std::string& path, const std::string& bytes) {
        write_file(path, bytes);
        outputs.emplace_back(path, sha256_hex(bytes));
    }

    void stage(const std::string& name) { timings.emplace_back(name, clock.lap()); }

    void save(const std::string& primary) const {
        json j;
        j["tool"] = "densreach";
        j["version"] = DENSREACH_VERSION;
        j["command"] = command;
        j["argv"] = argv;
        j["seed"] = seed ? json(*seed) : json(nullptr);
        j["jobs"] = jobs;
        json in = json::object(), out = json::object(), tm = json::object();
        for (const auto& [p, h] : inputs) {
            in[p] = "sha256:" + h;
        }
        for (const auto& [p, h] : outputs) {
            out[p] = "sha256:" + h;
        }
        for (const auto& [s, t] : timings) {
            tm[s] = t;
        }
        j["inputs"] = in;
        j["outputs"] = out;
        j["timings_seconds"] = tm;
        write_file(primary + ".manifest.json", j.dump(2) + "\n");
    }
};

// ---------------------------------------------------------------------------
// JSON helpers

json poly_to_json(const Polyhedron& p) {
    json a = json::array();
    for (int i = 0; i < p.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < p.dim(); ++j) {
            row.push_back(p.A()(i, j));
        }
        a.push_back(std::move(row));
    }
    return {{"A", a}, {"b", std::vector<double>(p.b().data(), p.b().data() + p.b().size())}};
}

std::vector<std::string> state_names_for(const std::string& system, int dim) {
    try {
        const auto spec = make_system(system);
        if (spec.state_dim == dim && static_cast<int>(spec.state_names.size()) == dim) {
            return spec.state_names;
        }
    } catch (const Error&) {
    }
    std::vector<std::string> names;
    for (int i = 0; i < dim; ++i) {
        names.push_back("x" + std::to_string(i + 1));
    }
    return names;
}

Partition load_partition_input(Manifest& m, const std::string& path) {
    try {
        return load_partition(m.read_input(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.offset());
    }
}

HyperRectangle support_of(const std::string& text, const Polyhedron& domain) {
    return text.empty() ? bounding_box(domain) : parse_box(text);
}

ZRange z_range_at(double zmin, double zmax, double t) {
    if (!std::isfinite(zmin) && !std::isfinite(zmax)) {
        return {};
    }
    return z_range_from_log_gain(zmin, zmax, t);
}

// ---------------------------------------------------------------------------
// Subcommand options

struct SimulateOpts {
    std::string system;
    int n = 1000;
    int steps = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::string rho0 = "uniform";
    std::string out;
    int jobs = 1;
};

struct TrainOpts {
    std::string data;
    std::string hidden = "64,64,64";
    double lambda = 1.0;
    int epochs = 200;
    double lr = 1e-3;
    double lr_final = 1e-4;
    int batch_size = 256;
    int batches_per_epoch = 0;
    double val_fraction = 0.2;
    std::string normalize = "on";
    std::string residual = "log";
    std::uint64_t seed = 0;
    std::string out;
};

struct PartitionOpts {
    std::string net;
    double t = 0.0;
    std::string domain;
    std::size_t budget = 200000;
    int jobs = 1;
    std::string out;
};

struct ReachOpts {
    std::vector<std::string> cells;
    std::string cells_dir;
    std::string set;
    double zmin = -kInf;
    double zmax = kInf;
    std::string rho0 = "uniform";
    std::string support;
    std::string heuristic = "on";
    int refine = 0;
    int jobs = 1;
    std::string out;
};

struct EvalDensityOpts {
    std::string net;
    std::string truth;
    std::string samples;
    std::string baselines = "hist,kde";
    std::string steps;
    std::string rho0 = "uniform";
    double floor = kDefaultKlFloor;
    int jobs = 1;
    std::string out;
};

struct EvalVolumeOpts {
    std::string reach;
    std::string thresholds = "0.5,0.7,0.8,0.9,0.99";
    std::string truth;
    int step = -1;
    std::string out;
};

bool on_off(const std::string& v, const char* flag) {
    if (v == "on" || v == "true" || v == "1") {
        return true;
    }
    if (v == "off" || v == "false" || v == "0") {
        return false;
    }
    throw UsageError(std::string(flag) + " expects on or off, got '" + v + "'");
}

void require_positive_jobs(int jobs) {
    if (jobs < 1) {
        throw UsageError("--jobs must be >= 1");
    }
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const SimulateOpts& o, Manifest& m, std::ostream& out) {
    require_positive_jobs(o.jobs);
    SystemSpec spec;
    try {
        spec = make_system(o.system);
    } catch (const ArgumentError&) {
        std::string known;
        for (const auto& n : system_names()) {
            known += (known.empty() ? "" : ", ") + n;
        }
        throw UsageError("unknown system '" + o.system + "' (known: " + known + ")");
    }
    const int steps = o.steps > 0 ? o.steps : spec.default_steps;
    const double dt = o.dt > 0.0 ? o.dt : spec.default_dt;
    if (o.n < 1) {
        throw UsageError("--n must be >= 1");
    }
    const auto rho0 = parse_rho0(o.rho0, spec.init_domain);
    const auto data = build_truth(spec, rho0, o.n, steps, dt, o.seed, o.jobs);
    m.stage("simulate");
    std::ostringstream os;
    write_jsonl(data, os);
    m.write_output(o.out, os.str());
    m.stage("write");
    out << "simulated " << data.size() << " trajectories of " << spec.name << " (" << steps << " steps, dt " << num(dt)
        << ") -> " << o.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const TrainOpts& o, Manifest& m, std::ostream& out) {
    std::istringstream in(m.read_input(o.data));
    const auto data = read_jsonl(in);
    if (data.empty()) {
        throw UsageError("training data '" + o.data + "' holds no trajectories");
    }
    if (!(o.val_fraction > 0.0 && o.val_fraction < 1.0)) {
        throw UsageError("--val-fraction must be in (0, 1)");
    }
    // Seeded shuffle split.
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    Rng rng = Rng::derive(o.seed, 0x5b11);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[rng.below(i + 1)]);
    }
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(o.val_fraction * static_cast<double>(data.size()))));
    if (n_val >= data.size()) {
        throw UsageError("training data needs at least two trajectories for a validation split");
    }
    TrajectoryDataset tr{data.system, data.dt, {}}, va{data.system, data.dt, {}};
    for (std::size_t k = 0; k < order.size(); ++k) {
        (k < n_val ? va : tr).trajectories.push_back(data.trajectories[order[k]]);
    }

    TrainConfig cfg;
    cfg.hidden = parse_int_list(o.hidden);
    cfg.lambda = o.lambda;
    cfg.epochs = o.epochs;
    cfg.lr = o.lr;
    cfg.lr_final = o.lr_final;
    cfg.batch_size = o.batch_size;
    cfg.batches_per_epoch = o.batches_per_epoch;
    cfg.seed = o.seed;
    cfg.normalize_terms = on_off(o.normalize, "--normalize");
    if (o.residual == "log") {
        cfg.liouville_form = LiouvilleForm::LogGain;
    } else if (o.residual == "gain") {
        cfg.liouville_form = LiouvilleForm::Gain;
    } else {
        throw UsageError("--residual expects log or gain, got '" + o.residual + "'");
    }
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.batches_per_epoch < 0 || !(cfg.lr > 0.0) ||
        !(cfg.lr_final > 0.0) || !(cfg.lambda >= 0.0)) {
        throw UsageError("train: epochs, batch size and learning rates must be positive, lambda >= 0");
    }
    m.stage("load");
    const auto res = train(tr, va, cfg);
    m.stage("train");
    m.write_output(o.out, save_checkpoint(res.net));
    std::ostringstream csv;
    csv << "epoch,train_loss,val_loss,best_val_loss\n";
    for (const auto& e : res.history) {
        csv << e.epoch << "," << num(e.train_loss) << "," << num(e.val_loss) << "," << num(e.best_val_loss) << "\n";
    }
    m.write_output(sibling(o.out, ".history.csv"), csv.str());
    m.stage("write");
    out << "trained " << res.net.parameter_count() << " parameters on " << tr.size() << " trajectories; best epoch "
        << res.best_epoch << " validation loss " << num(res.history[static_cast<std::size_t>(res.best_epoch - 1)].val_loss)
        << " -> " << o.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// partition

int cmd_partition(const PartitionOpts& o, Manifest& m, std::ostream& out) {
    require_positive_jobs(o.jobs);
    const auto net = load_checkpoint(m.read_input(o.net));
    HyperRectangle box;
    if (!o.domain.empty()) {
        box = parse_box(o.domain);
    } else {
        try {
            box = make_system(net.system).init_domain;
        } catch (const ArgumentError&) {
            throw UsageError("net system '" + net.system + "' is not built in; pass --domain");
        }
    }
    if (box.dim() != net.state_dim) {
        throw UsageError("--domain has " + std::to_string(box.dim()) + " coordinates, the net expects " +
                         std::to_string(net.state_dim));
    }
    if (o.t < 0.0) {
        throw UsageError("--t must be >= 0");
    }
    Partition p;
    p.system = net.system;
    p.t = o.t;
    p.domain = Polyhedron::from_box(box);
    m.stage("load");
    EnumerationOptions eo;
    eo.budget = o.budget;
    eo.jobs = o.jobs;
    p.cells = enumerate_cells(slice_net(net, o.t), p.domain, eo);
    m.stage("enumerate");
    m.write_output(o.out, save_partition(p));
    m.stage("write");
    double vol = 0.0;
    for (const auto& c : p.cells) {
        vol += c.volume;
    }
    out << "partitioned " << net.system << " net at t=" << num(o.t) << " into " << p.cells.size()
        << " cells (volume " << num(vol) << " of " << num(box.volume()) << ") -> " << o.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// reach / query / backward / verify

int cmd_reach(const ReachOpts& o, Manifest& m, std::ostream& out) {
    require_positive_jobs(o.jobs);
    if (o.cells.size() != 1) {
        throw UsageError("reach takes exactly one --cells file");
    }
    const auto part = load_partition_input(m, o.cells.front());
    const auto rho0 = parse_rho0(o.rho0, support_of(o.support, part.domain));
    m.stage("load");
    const auto reach = forward_reach(part.cells, rho0, o.jobs);
    m.stage("reach");
    json j;
    j["system"] = part.system;
    j["t"] = part.t;
    j["rho0"] = rho0.describe();
    j["state_names"] = state_names_for(part.system, rho0.dim());
    json cells = json::array();
    std::ostringstream csv;
    csv << "cell,source,t,volume,rho_lo,rho_hi,p_lo,p_hi\n";
    double plo = 0.0, phi = 0.0;
    for (std::size_t i = 0; i < reach.size(); ++i) {
        const auto& r = reach[i];
        cells.push_back({{"source", r.source},
                         {"t", r.t},
                         {"volume", r.volume},
                         {"rho_lo", r.rho_lo},
                         {"rho_hi", r.rho_hi},
                         {"p_lo", r.p_lo},
                         {"p_hi", r.p_hi},
                         {"state_set", poly_to_json(r.state_set)}});
        csv << i << "," << r.source << "," << num(r.t) << "," << num(r.volume) << "," << num(r.rho_lo) << ","
            << num(r.rho_hi) << "," << num(r.p_lo) << "," << num(r.p_hi) << "\n";
        plo += r.p_lo;
        phi += r.p_hi;
    }
    j["cells"] = std::move(cells);
    m.write_output(o.out, j.dump() + "\n");
    m.write_output(sibling(o.out, ".csv"), csv.str());
    m.stage("write");
    out << reach.size() << " reach cells at t=" << num(part.t) << "; total probability in [" << num(plo) << ", "
        << num(phi) << "] -> " << o.out << "\n";
    return kExitOk;
}

int cmd_query(const ReachOpts& o, Manifest& m, std::ostream& out) {
    require_positive_jobs(o.jobs);
    if (o.cells.empty()) {
        throw UsageError("query needs --cells");
    }
    if (o.refine < 0 || o.refine > 30) {
        throw UsageError("--refine must be in [0, 30]");
    }
    std::ostringstream csv;
    csv << "t,z_lo,z_hi,cells_hit,p_lo,p_hi,rho_lo,rho_hi\n";
    json rows = json::array();
    for (const auto& path : o.cells) {
        const auto part = load_partition_input(m, path);
        const int d = part.domain.dim();
        const auto query = parse_set(o.set, state_names_for(part.system, d));
        const auto rho0 = parse_rho0(o.rho0, support_of(o.support, part.domain));
        const auto z = z_range_at(o.zmin, o.zmax, part.t);
        QueryResult q;
        if (!part.cells.empty() && !z.empty()) {
            q = query_probability(part.cells, clip_to_reach(query, part.cells), z, rho0, o.jobs, o.refine);
        }
        rows.push_back({{"cells", fs::path(path).filename().string()},
                        {"t", part.t},
                        {"z_lo", z.lo},
                        {"z_hi", z.hi},
                        {"cells_hit", q.cells_hit},
                        {"p_lo", q.p_lo},
                        {"p_hi", q.p_hi},
                        {"rho_lo", q.rho_lo},
                        {"rho_hi", q.rho_hi}});
        csv << num(part.t) << "," << num(z.lo) << "," << num(z.hi) << "," << q.cells_hit << "," << num(q.p_lo) << ","
            << num(q.p_hi) << "," << num(q.rho_lo) << "," << num(q.rho_hi) << "\n";
        out << "t=" << num(part.t) << ": P(query) in [" << num(q.p_lo) << ", " << num(q.p_hi) << "] over "
            << q.cells_hit << " cells\n";
    }
    m.stage("query");
    json j{{"set", o.set}, {"rho0", o.rho0}, {"refine", o.refine}, {"results", rows}};
    m.write_output(o.out, j.dump(1) + "\n");
    m.write_output(sibling(o.out, ".csv"), csv.str());
    m.stage("write");
    return kExitOk;
}

int cmd_backward(const ReachOpts& o, Manifest& m, std::ostream& out) {
    require_positive_jobs(o.jobs);
    if (o.cells.size() != 1) {
        throw UsageError("backward takes exactly one --cells file");
    }
    const auto part = load_partition_input(m, o.cells.front());
    const int d = part.domain.dim();
    const auto query = parse_set(o.set, state_names_for(part.system, d));
    const auto rho0 = parse_rho0(o.rho0, support_of(o.support, part.domain));
    const auto z = z_range_at(o.zmin, o.zmax, part.t);
    m.stage("load");
    std::vector<BackwardRegion> regions;
    if (!part.cells.empty() && !z.empty()) {
        regions = backward_reach(part.cells, clip_to_reach(query, part.cells), z, rho0, o.jobs);
    }
    m.stage("backward");
    json arr = json::array();
    std::ostringstream csv;
    csv << "region,source,p_lo,p_hi\n";
    double plo = 0.0, phi = 0.0;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& r = regions[i];
        arr.push_back({{"source", r.source}, {"p_lo", r.p_lo}, {"p_hi", r.p_hi}, {"region", poly_to_json(r.region)}});
        csv << i << "," << r.source << "," << num(r.p_lo) << "," << num(r.p_hi) << "\n";
        plo += r.p_lo;
        phi += r.p_hi;
    }
    json j{{"system", part.system}, {"t", part.t}, {"set", o.set}, {"rho0", rho0.describe()},
           {"z_lo", z.lo},          {"z_hi", z.hi}, {"regions", arr}};
    m.write_output(o.out, j.dump() + "\n");
    m.write_output(sibling(o.out, ".csv"), csv.str());
    m.stage("write");
    out << regions.size() << " initial regions reach the set at t=" << num(part.t) << "; probability in ["
        << num(plo) << ", " << num(phi) << "] -> " << o.out << "\n";
    return kExitOk;
}

int cmd_verify(const ReachOpts& o, Manifest& m, std::ostream& out) {
    require_positive_jobs(o.jobs);
    std::vector<std::string> files = o.cells;
    if (!o.cells_dir.empty()) {
        if (!fs::is_directory(o.cells_dir)) {
            throw UsageError("--cells-dir '" + o.cells_dir + "' is not a directory");
        }
        std::vector<std::string> found;
        for (const auto& e : fs::directory_iterator(o.cells_dir)) {
            const std::string name = e.path().filename().string();
            if (e.is_regular_file() && e.path().extension() == ".json" &&
                name.find(".manifest.json") == std::string::npos) {
                found.push_back(e.path().string());
            }
        }
        std::sort(found.begin(), found.end());
        files.insert(files.end(), found.begin(), found.end());
    }
    if (files.empty()) {
        throw UsageError("verify needs --cells or --cells-dir with partition files");
    }
    std::map<double, std::vector<AffineCell>> by_t;
    Polyhedron domain;
    std::string system;
    for (const auto& f : files) {
        auto part = load_partition_input(m, f);
        if (by_t.count(part.t)) {
            throw UsageError("two partitions share t=" + num(part.t));
        }
        domain = part.domain;
        system = part.system;
        by_t.emplace(part.t, std::move(part.cells));
    }
    const int d = domain.dim();
    const auto unsafe = parse_set(o.set, state_names_for(system, d));
    const auto rho0 = parse_rho0(o.rho0, support_of(o.support, domain));
    const bool heuristic = on_off(o.heuristic, "--heuristic");
    m.stage("load");
    const auto zmin = o.zmin, zmax = o.zmax;
    const auto v = verify_safety(
        by_t, unsafe, [&](double t) { return z_range_at(zmin, zmax, t); }, rho0, heuristic, o.jobs);
    m.stage("verify");
    json slices = json::array();
    std::ostringstream csv;
    csv << "t,z_lo,z_hi,hits,p_lo,p_hi\n";
    for (const auto& s : v.slices) {
        slices.push_back(
            {{"t", s.t}, {"z_lo", s.z.lo}, {"z_hi", s.z.hi}, {"hits", s.hits}, {"p_lo", s.p_lo}, {"p_hi", s.p_hi}});
        csv << num(s.t) << "," << num(s.z.lo) << "," << num(s.z.hi) << "," << s.hits << "," << num(s.p_lo) << ","
            << num(s.p_hi) << "\n";
    }
    json j{{"system", system},
           {"unsafe", o.set},
           {"log_gain_min", o.zmin},
           {"log_gain_max", o.zmax},
           {"heuristic", heuristic},
           {"safe", v.safe},
           {"p_lo", v.p_lo},
           {"p_hi", v.p_hi},
           {"stats",
            {{"lp_calls", v.stats.lp_calls},
             {"box_rejections", v.stats.box_rejections},
             {"poly_checks", v.stats.poly_checks}}},
           {"slices", slices}};
    m.write_output(o.out, j.dump(1) + "\n");
    m.write_output(sibling(o.out, ".csv"), csv.str());
    m.timings.emplace_back("verify_internal", v.stats.elapsed);
    m.stage("write");
    out << (v.safe ? "SAFE" : "UNSAFE") << ": " << by_t.size() << " slices, probability in [" << num(v.p_lo) << ", "
        << num(v.p_hi) << "], " << v.stats.poly_checks << " polyhedral checks, " << v.stats.box_rejections
        << " box rejections -> " << o.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-density / eval-volume

std::vector<Vector> states_at(const TrajectoryDataset& d, int step, std::size_t stride, std::size_t offset) {
    std::vector<Vector> xs;
    for (std::size_t i = offset; i < d.trajectories.size(); i += stride) {
        const auto& s = d.trajectories[i].states;
        if (step < static_cast<int>(s.size())) {
            xs.push_back(s[static_cast<std::size_t>(step)]);
        }
    }
    return xs;
}

int cmd_eval_density(const EvalDensityOpts& o, Manifest& m, std::ostream& out) {
    require_positive_jobs(o.jobs);
    auto net = std::make_shared<const DensityNet>(load_checkpoint(m.read_input(o.net)));
    std::istringstream tin(m.read_input(o.truth));
    const auto truth = read_jsonl(tin);
    if (truth.empty()) {
        throw UsageError("truth file holds no trajectories");
    }
    for (const auto& tr : truth.trajectories) {
        if (tr.rho.size() != tr.states.size()) {
            throw UsageError("truth file lacks per-step rho; generate it with simulate");
        }
    }
    std::optional<TrajectoryDataset> fit;
    if (!o.samples.empty()) {
        std::istringstream sin(m.read_input(o.samples));
        fit = read_jsonl(sin);
    }
    // Without --samples, even trajectories fit the baselines and odd ones
    // are scored.
    TrajectoryDataset scored{truth.system, truth.dt, {}};
    for (std::size_t i = fit ? 0 : 1; i < truth.trajectories.size(); i += fit ? 1 : 2) {
        scored.trajectories.push_back(truth.trajectories[i]);
    }
    if (scored.empty()) {
        throw UsageError("truth file needs at least two trajectories when --samples is not given");
    }
    const int steps = static_cast<int>(truth.trajectories.front().states.size()) - 1;
    std::vector<int> chosen;
    if (!o.steps.empty()) {
        chosen = parse_int_list(o.steps);
    } else {
        for (int q = 1; q <= 4; ++q) {
            chosen.push_back(static_cast<int>(std::lround(q * steps / 4.0)));
        }
        chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
    }
    for (int s : chosen) {
        if (s < 1 || s > steps) {
            throw UsageError("--steps entries must lie in [1, " + std::to_string(steps) + "]");
        }
    }
    std::vector<std::string> baselines;
    {
        std::stringstream ss(o.baselines);
        std::string b;
        while (std::getline(ss, b, ',')) {
            if (b.empty()) {
                continue;
            }
            if (b != "hist" && b != "kde") {
                throw UsageError("--baselines accepts hist and kde, got '" + b + "'");
            }
            baselines.push_back(b);
        }
    }
    HyperRectangle support;
    try {
        support = make_system(truth.system).init_domain;
    } catch (const ArgumentError&) {
        throw UsageError("truth system '" + truth.system + "' is not built in");
    }
    const auto rho0 = parse_rho0(o.rho0, support);
    const auto learned = learned_density(net, rho0);
    m.stage("load");

    std::ostringstream csv;
    csv << "step,t,estimator,kl,n_eval,n_fit,status\n";
    for (int step : chosen) {
        const auto samples = truth_samples_at(scored, step);
        const double t = samples.front().t;
        csv << step << "," << num(t) << ",learned," << num(kl_divergence(samples, learned, o.floor, o.jobs)) << ","
            << samples.size() << ",0,ok\n";
        const auto xs = fit ? states_at(*fit, step, 1, 0) : states_at(truth, step, 2, 0);
        for (const auto& b : baselines) {
            try {
                const auto est = b == "hist" ? histogram_density(xs) : kde_density(xs);
                csv << step << "," << num(t) << "," << b << "," << num(kl_divergence(samples, est, o.floor, o.jobs))
                    << "," << samples.size() << "," << xs.size() << ",ok\n";
            } catch (const DimensionalityError&) {
                csv << step << "," << num(t) << "," << b << ",," << samples.size() << "," << xs.size()
                    << ",dimension_too_high\n";
            }
        }
    }
    m.stage("evaluate");
    m.write_output(o.out, csv.str());
    m.stage("write");
    out << "KL table for " << chosen.size() << " time steps -> " << o.out << "\n";
    return kExitOk;
}

int cmd_eval_volume(const EvalVolumeOpts& o, Manifest& m, std::ostream& out) {
    const auto j = json::parse(m.read_input(o.reach), nullptr, false);
    if (j.is_discarded() || !j.contains("cells")) {
        throw ParseError("eval-volume: '" + o.reach + "' is not a reach file", 0);
    }
    std::vector<ReachCell> cells;
    for (const auto& c : j.at("cells")) {
        ReachCell r;
        r.rho_lo = c.at("rho_lo").get<double>();
        r.rho_hi = c.at("rho_hi").get<double>();
        r.p_lo = c.at("p_lo").get<double>();
        r.p_hi = c.at("p_hi").get<double>();
        r.volume = c.at("volume").get<double>();
        cells.push_back(r);
    }
    const double t = j.value("t", 0.0);
    const auto thresholds = parse_list(o.thresholds);

    // Optional reference volume from sampled states.
    std::string ref_kind;
    double ref = 0.0;
    if (!o.truth.empty()) {
        std::istringstream tin(m.read_input(o.truth));
        const auto truth = read_jsonl(tin);
        if (truth.empty()) {
            throw UsageError("truth file holds no trajectories");
        }
        const int step = o.step >= 0 ? o.step : static_cast<int>(std::lround(t / truth.dt));
        const auto xs = states_at(truth, step, 1, 0);
        if (xs.empty()) {
            throw UsageError("truth file has no states at step " + std::to_string(step));
        }
        if (xs.front().size() == 2) {
            ref_kind = "convex_hull";
            ref = convex_hull_area_2d(xs);
        } else {
            ref_kind = "bounding_box";
            ref = bounding_box_volume(xs);
        }
    }
    m.stage("load");
    double total = 0.0;
    for (const auto& c : cells) {
        total += c.volume;
    }
    std::ostringstream csv;
    csv << "threshold,volume,achieved_p,cells_used,volume_total,fraction_of_total,reference_kind,reference_volume,"
           "fraction_of_reference\n";
    double prev = 0.0;
    bool monotone = true;
    for (double th : thresholds) {
        const auto v = volume_at_probability(cells, th);
        monotone = monotone && v.volume >= prev;
        prev = v.volume;
        csv << num(th) << "," << num(v.volume) << "," << num(v.achieved_p) << "," << v.cells_used << "," << num(total)
            << "," << num(total > 0 ? v.volume / total : 0.0) << "," << ref_kind << ","
            << (ref_kind.empty() ? "" : num(ref)) << "," << (ref > 0 ? num(v.volume / ref) : "") << "\n";
    }
    m.stage("evaluate");
    m.write_output(o.out, csv.str());
    m.stage("write");
    out << "volume at " << thresholds.size() << " probability levels (t=" << num(t) << ", total " << num(total)
        << ") -> " << o.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument plumbing

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"simulate", "train",    "partition",    "reach",      "query",
                                                   "backward", "verify",   "eval-density", "eval-volume"};
    return names;
}

std::string closest(const std::string& word, const std::vector<std::string>& options) {
    std::string best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& c : options) {
        const auto d = levenshtein(word, c);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best_d <= std::max<std::size_t>(2, word.size() / 3) ? best : "";
}

// Appends `--key value` for config entries not given on the command line.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
    std::vector<std::string> merged;
    std::string config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) {
                throw UsageError("--config needs a file");
            }
            config = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config = args[i].substr(9);
        } else {
            merged.push_back(args[i]);
        }
    }
    if (config.empty()) {
        return merged;
    }
    const auto j = json::parse(read_file(config), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw UsageError("config '" + config + "' is not a JSON object");
    }
    auto given = [&](const std::string& flag) {
        return std::any_of(merged.begin(), merged.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
    };
    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        if (given(flag)) {
            continue;
        }
        auto scalar = [](const json& v) {
            if (v.is_string()) {
                return v.get<std::string>();
            }
            if (v.is_number_float()) {
                return num(v.get<double>());
            }
            return v.dump();
        };
        if (value.is_array()) {
            if (key == "cells") {
                for (const auto& v : value) {
                    merged.push_back(flag);
                    merged.push_back(scalar(v));
                }
                continue;
            }
            std::string joined;
            for (const auto& v : value) {
                joined += (joined.empty() ? "" : ",") + scalar(v);
            }
            merged.push_back(flag);
            merged.push_back(joined);
        } else if (value.is_boolean()) {
            merged.push_back(flag);
            merged.push_back(value.get<bool>() ? "on" : "off");
        } else {
            merged.push_back(flag);
            merged.push_back(scalar(value));
        }
    }
    return merged;
}

void check_flags(const CLI::App& sub, const std::vector<std::string>& args) {
    std::vector<std::string> known = {"help"};
    for (const auto* opt : sub.get_options()) {
        for (const auto& n : opt->get_lnames()) {
            known.push_back(n);
        }
    }
    for (std::size_t i = 1; i < args.size(); ++i) {
        const auto& a = args[i];
        if (a.rfind("--", 0) != 0 || a.size() == 2) {
            continue;
        }
        const std::string name = a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2);
        if (std::find(known.begin(), known.end(), name) != known.end()) {
            continue;
        }
        const auto hint = closest(name, known);
        throw UsageError("unknown flag --" + name + " for " + sub.get_name() +
                         (hint.empty() ? "" : "; did you mean --" + hint + "?"));
    }
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"densreach: learned reachability with state density", "densreach"};
    app.require_subcommand(1);
    app.set_version_flag("--version", DENSREACH_VERSION);

    SimulateOpts sim;
    auto* s_sim = app.add_subcommand("simulate", "Simulate trajectories with ground-truth density (JSON lines)");
    s_sim->add_option("--system", sim.system, "vdp, dint, kop, robot, car or scalar1d")->required();
    s_sim->add_option("--n", sim.n, "number of trajectories")->capture_default_str();
    s_sim->add_option("--steps", sim.steps, "recorded steps (default: system default)");
    s_sim->add_option("--dt", sim.dt, "step length in seconds (default: system default)");
    s_sim->add_option("--seed", sim.seed, "random seed")->required();
    s_sim->add_option("--rho0", sim.rho0, "initial distribution on the system's initial box")->capture_default_str();
    s_sim->add_option("--jobs", sim.jobs, "worker threads")->capture_default_str();
    s_sim->add_option("--out", sim.out, "output .jsonl")->required();

    TrainOpts tr;
    auto* s_tr = app.add_subcommand("train", "Train the density/flow network");
    s_tr->add_option("--data", tr.data, "trajectory .jsonl")->required();
    s_tr->add_option("--hidden", tr.hidden, "hidden widths, comma separated")->capture_default_str();
    s_tr->add_option("--lambda", tr.lambda, "flow-loss weight")->capture_default_str();
    s_tr->add_option("--epochs", tr.epochs)->capture_default_str();
    s_tr->add_option("--lr", tr.lr, "initial learning rate")->capture_default_str();
    s_tr->add_option("--lr-final", tr.lr_final, "learning rate at the last epoch")->capture_default_str();
    s_tr->add_option("--batch-size", tr.batch_size)->capture_default_str();
    s_tr->add_option("--batches-per-epoch", tr.batches_per_epoch, "0 = one pass")->capture_default_str();
    s_tr->add_option("--val-fraction", tr.val_fraction)->capture_default_str();
    s_tr->add_option("--normalize", tr.normalize, "running-mean loss term balancing (on|off)")->capture_default_str();
    s_tr->add_option("--residual", tr.residual, "Liouville residual on log G (log) or G (gain)")
        ->capture_default_str();
    s_tr->add_option("--seed", tr.seed, "random seed")->required();
    s_tr->add_option("--out", tr.out, "output checkpoint .json")->required();

    PartitionOpts pa;
    auto* s_pa = app.add_subcommand("partition", "Enumerate affine cells of the net at a fixed time");
    s_pa->add_option("--net", pa.net, "checkpoint .json")->required();
    s_pa->add_option("--t", pa.t, "time slice")->required();
    s_pa->add_option("--domain", pa.domain, "lo,hi;lo,hi;... (default: system initial box)");
    s_pa->add_option("--budget", pa.budget, "maximum visited patterns")->capture_default_str();
    s_pa->add_option("--jobs", pa.jobs, "worker threads")->capture_default_str();
    s_pa->add_option("--out", pa.out, "partition .json")->required();

    ReachOpts re, qu, bw, ve;
    auto common = [](CLI::App* s, ReachOpts& o) {
        s->add_option("--rho0", o.rho0, "uniform | gauss:mu=[...],sigma=...")->capture_default_str();
        s->add_option("--support", o.support, "initial support lo,hi;... (default: partition domain)");
        s->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
        s->add_option("--out", o.out, "output .json (a .csv summary is written next to it)")->required();
    };
    auto* s_re = app.add_subcommand("reach", "Forward reachable cells with density and probability bounds");
    s_re->add_option("--cells", re.cells, "partition .json")->required();
    common(s_re, re);
    auto* s_qu = app.add_subcommand("query", "Probability that the flowed state lies in a set");
    s_qu->add_option("--cells", qu.cells, "partition .json (repeatable)")->required();
    s_qu->add_option("--set", qu.set, "linear constraints, e.g. \"x>=-0.5,x<=0\"")->required();
    s_qu->add_option("--zmin", qu.zmin, "lower bound on log G");
    s_qu->add_option("--zmax", qu.zmax, "upper bound on log G");
    s_qu->add_option("--refine", qu.refine, "bisection depth for non-uniform rho0 (0 = off)");
    common(s_qu, qu);
    auto* s_bw = app.add_subcommand("backward", "Initial regions that reach a set");
    s_bw->add_option("--cells", bw.cells, "partition .json")->required();
    s_bw->add_option("--set", bw.set, "linear constraints")->required();
    s_bw->add_option("--zmin", bw.zmin, "lower bound on log G");
    s_bw->add_option("--zmax", bw.zmax, "upper bound on log G");
    common(s_bw, bw);
    auto* s_ve = app.add_subcommand("verify", "Check that no slice reaches the unsafe set within a density range");
    s_ve->add_option("--cells", ve.cells, "partition .json (repeatable)");
    s_ve->add_option("--cells-dir", ve.cells_dir, "directory of partition .json files");
    s_ve->add_option("--unsafe", ve.set, "linear constraints")->required();
    s_ve->add_option("--zmin", ve.zmin, "lower bound on log G");
    s_ve->add_option("--zmax", ve.zmax, "upper bound on log G");
    s_ve->add_option("--heuristic", ve.heuristic, "bounding-box pruning (on|off)")->capture_default_str();
    common(s_ve, ve);

    EvalDensityOpts ed;
    auto* s_ed = app.add_subcommand("eval-density", "KL divergence of learned and baseline densities");
    s_ed->add_option("--net", ed.net, "checkpoint .json")->required();
    s_ed->add_option("--truth", ed.truth, "simulate output with rho")->required();
    s_ed->add_option("--samples", ed.samples, "trajectories for the baselines (default: half of --truth)");
    s_ed->add_option("--baselines", ed.baselines, "hist,kde")->capture_default_str();
    s_ed->add_option("--steps", ed.steps, "time steps to score (default: quarters of the horizon)");
    s_ed->add_option("--rho0", ed.rho0, "initial distribution of the truth file")->capture_default_str();
    s_ed->add_option("--floor", ed.floor, "density floor inside the log")->capture_default_str();
    s_ed->add_option("--jobs", ed.jobs, "worker threads")->capture_default_str();
    s_ed->add_option("--out", ed.out, "output .csv")->required();

    EvalVolumeOpts ev;
    auto* s_ev = app.add_subcommand("eval-volume", "Reach-set volume needed for each probability level");
    s_ev->add_option("--reach", ev.reach, "reach .json")->required();
    s_ev->add_option("--thresholds", ev.thresholds, "probability levels")->capture_default_str();
    s_ev->add_option("--truth", ev.truth, "sampled states for the reference volume");
    s_ev->add_option("--step", ev.step, "truth step (default: reach t / dt)");
    s_ev->add_option("--out", ev.out, "output .csv")->required();

    std::vector<std::string> args;
    try {
        args = merge_config(raw_args);
        if (!args.empty() && args.front().rfind("-", 0) != 0) {
            const auto& names = subcommands();
            if (std::find(names.begin(), names.end(), args.front()) == names.end()) {
                const auto hint = closest(args.front(), names);
                throw UsageError("unknown subcommand '" + args.front() + "'" +
                                 (hint.empty() ? "" : "; did you mean '" + hint + "'?"));
            }
            check_flags(*app.get_subcommand(args.front()), args);
        }
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    Manifest m;
    m.argv = raw_args;
    try {
        int rc = kExitOk;
        std::string primary;
        if (s_sim->parsed()) {
            m.command = "simulate";
            m.seed = sim.seed;
            m.jobs = sim.jobs;
            rc = cmd_simulate(sim, m, out);
            primary = sim.out;
        } else if (s_tr->parsed()) {
            m.command = "train";
            m.seed = tr.seed;
            rc = cmd_train(tr, m, out);
            primary = tr.out;
        } else if (s_pa->parsed()) {
            m.command = "partition";
            m.jobs = pa.jobs;
            rc = cmd_partition(pa, m, out);
            primary = pa.out;
        } else if (s_re->parsed()) {
            m.command = "reach";
            m.jobs = re.jobs;
            rc = cmd_reach(re, m, out);
            primary = re.out;
        } else if (s_qu->parsed()) {
            m.command = "query";
            m.jobs = qu.jobs;
            rc = cmd_query(qu, m, out);
            primary = qu.out;
        } else if (s_bw->parsed()) {
            m.command = "backward";
            m.jobs = bw.jobs;
            rc = cmd_backward(bw, m, out);
            primary = bw.out;
        } else if (s_ve->parsed()) {
            m.command = "verify";
            m.jobs = ve.jobs;
            rc = cmd_verify(ve, m, out);
            primary = ve.out;
        } else if (s_ed->parsed()) {
            m.command = "eval-density";
            m.jobs = ed.jobs;
            rc = cmd_eval_density(ed, m, out);
            primary = ed.out;
        } else if (s_ev->parsed()) {
            m.command = "eval-volume";
            rc = cmd_eval_volume(ev, m, out);
            primary = ev.out;
        }
        m.save(primary);
        return rc;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }
}

}  // namespace densreach::cli
