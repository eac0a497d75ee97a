// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "densreach/net.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "densreach/error.hpp"
#include "densreach/log.hpp"
#include "densreach/rng.hpp"
#include "json.hpp"

namespace densreach {

using nlohmann::json;

namespace {

constexpr double kExpClip = 60.0;
std::atomic<std::size_t> g_saturations{0};

}  // namespace

int DensityNet::hidden_count() const {
    int n = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        n += static_cast<int>(layers[l].b.size());
    }
    return n;
}

std::size_t DensityNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += static_cast<std::size_t>(l.w.size() + l.b.size());
    }
    return n;
}

DensityNet make_net(int state_dim, const std::vector<int>& hidden, std::uint64_t seed) {
    if (state_dim < 1) {
        throw ArgumentError("make_net: state_dim must be >= 1");
    }
    for (int h : hidden) {
        if (h < 1) {
            throw ArgumentError("make_net: hidden layer sizes must be >= 1");
        }
    }
    DensityNet net;
    net.state_dim = state_dim;
    net.norm_shift = Vector::Zero(state_dim + 1);
    net.norm_scale = Vector::Ones(state_dim + 1);
    Rng rng(seed);
    int fan_in = state_dim + 1;
    std::vector<int> sizes = hidden;
    sizes.push_back(state_dim + 1);
    for (int out : sizes) {
        Layer layer{Matrix(out, fan_in), Vector::Zero(out)};
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (int i = 0; i < out; ++i) {
            for (int j = 0; j < fan_in; ++j) {
                layer.w(i, j) = std_dev * rng.normal();
            }
        }
        net.layers.push_back(std::move(layer));
        fan_in = out;
    }
    return net;
}

FoldedInput fold_input(const DensityNet& net) {
    const auto& first = net.layers.front();
    const int d = net.state_dim;
    FoldedInput f;
    Matrix w = first.w;
    for (int j = 0; j < d + 1; ++j) {
        w.col(j) /= net.norm_scale[j];
    }
    f.wx = w.leftCols(d);
    f.wt = w.col(d);
    f.b = first.b - w * net.norm_shift;
    return f;
}

Vector affine_apply(const Matrix& w, const Vector& x, const Vector& b) {
    Vector out(w.rows());
    for (int i = 0; i < w.rows(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < w.cols(); ++j) {
            acc += w(i, j) * x[j];
        }
        out[i] = acc + b[i];
    }
    return out;
}

NetOutput forward(const DensityNet& net, const Vector& x0, double t) {
    if (x0.size() != net.state_dim) {
        throw ArgumentError("forward: x0 has dimension " + std::to_string(x0.size()) + ", net expects " +
                            std::to_string(net.state_dim));
    }
    const auto fold = fold_input(net);
    Vector bias(fold.b.size());
    for (int i = 0; i < bias.size(); ++i) {
        bias[i] = fold.wt[i] * t + fold.b[i];
    }
    Vector h = affine_apply(fold.wx, x0, bias);
    for (std::size_t l = 1; l < net.layers.size(); ++l) {
        h = h.cwiseMax(0.0);
        h = affine_apply(net.layers[l].w, h, net.layers[l].b);
    }
    return {h[0], h.tail(net.state_dim)};
}

double g_of(double z, double t) {
    double tz = t * z;
    if (tz > kExpClip || tz < -kExpClip) {
        if (g_saturations.fetch_add(1) == 0) {
            log_message(LogLevel::Warning, "g_of: t*z outside [-60, 60], clipping");
        }
        tz = std::clamp(tz, -kExpClip, kExpClip);
    }
    return std::exp(tz);
}

std::size_t g_saturation_count() noexcept { return g_saturations.load(); }

double density_estimate(const DensityNet& net, const Vector& x0, double t, const InitialDistribution& rho0) {
    const double r0 = rho0.density(x0);
    if (r0 == 0.0) {
        return 0.0;
    }
    return r0 * g_of(forward(net, x0, t).z, t);
}

// ---------------------------------------------------------------------------
// Batches and loss

TrainingBatch make_batch(const TrajectoryDataset& data) {
    if (data.empty()) {
        throw ArgumentError("make_batch: empty dataset");
    }
    const int d = data.state_dim();
    int n = 0;
    for (const auto& tr : data.trajectories) {
        if (tr.states.size() < 2) {
            throw ArgumentError("make_batch: trajectories need at least two states");
        }
        n += static_cast<int>(tr.states.size());
    }
    TrainingBatch b;
    b.dt = data.dt;
    b.x0.resize(n, d);
    b.t.resize(n);
    b.partner_t.resize(n);
    b.target.resize(n, d);
    b.div.resize(n);
    int r = 0;
    for (const auto& tr : data.trajectories) {
        const int len = static_cast<int>(tr.states.size());
        for (int k = 0; k < len; ++k, ++r) {
            b.x0.row(r) = tr.x0.transpose();
            b.t[r] = tr.times[k];
            b.partner_t[r] = k + 1 < len ? tr.times[k + 1] : tr.times[k - 1];
            b.target.row(r) = tr.states[k].transpose();
            b.div[r] = tr.divergences[k];
        }
    }
    return b;
}

TrainingBatch select(const TrainingBatch& batch, const std::vector<int>& idx) {
    const int n = static_cast<int>(idx.size());
    const int d = static_cast<int>(batch.x0.cols());
    TrainingBatch b;
    b.dt = batch.dt;
    b.x0.resize(n, d);
    b.t.resize(n);
    b.partner_t.resize(n);
    b.target.resize(n, d);
    b.div.resize(n);
    for (int i = 0; i < n; ++i) {
        b.x0.row(i) = batch.x0.row(idx[i]);
        b.t[i] = batch.t[idx[i]];
        b.partner_t[i] = batch.partner_t[idx[i]];
        b.target.row(i) = batch.target.row(idx[i]);
        b.div[i] = batch.div[idx[i]];
    }
    return b;
}

namespace {

// Network inputs for the 2n evaluation points: columns [0, n) at t,
// [n, 2n) at the partner time.
Matrix stacked_inputs(const DensityNet& net, const TrainingBatch& batch) {
    const int n = batch.size();
    const int d = net.state_dim;
    Matrix v(d + 1, 2 * n);
    v.topLeftCorner(d, n) = batch.x0.transpose();
    v.topRightCorner(d, n) = batch.x0.transpose();
    v.block(d, 0, 1, n) = batch.t.transpose();
    v.block(d, n, 1, n) = batch.partner_t.transpose();
    for (int j = 0; j < d + 1; ++j) {
        v.row(j) = (v.row(j).array() - net.norm_shift[j]) / net.norm_scale[j];
    }
    return v;
}

struct ForwardCache {
    std::vector<Matrix> activations;  ///< input, then post-ReLU of each hidden layer
    Matrix output;
};

ForwardCache batched_forward(const DensityNet& net, Matrix input) {
    ForwardCache c;
    c.activations.push_back(std::move(input));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Matrix z = net.layers[l].w * c.activations.back();
        z.colwise() += net.layers[l].b;
        if (l + 1 < net.layers.size()) {
            c.activations.push_back(z.cwiseMax(0.0));
        } else {
            c.output = std::move(z);
        }
    }
    return c;
}

// Clipped exp(t z) and its derivative w.r.t. z.
void g_and_slope(double z, double t, double& g, double& slope) {
    const double tz = t * z;
    if (tz > kExpClip || tz < -kExpClip) {
        g = std::exp(std::clamp(tz, -kExpClip, kExpClip));
        slope = 0.0;
        return;
    }
    g = std::exp(tz);
    slope = t * g;
}

// Liouville residual of one sample and its derivatives w.r.t. the two z
// outputs (at t and at the partner time).
struct Residual {
    double r = 0.0;
    double dza = 0.0;
    double dzb = 0.0;
};

Residual liouville_residual(double za, double ta, double zb, double tb, double div, LiouvilleForm form) {
    const double h = tb - ta;
    Residual res;
    if (form == LiouvilleForm::Gain) {
        double ga, sa, gb, sb;
        g_and_slope(za, ta, ga, sa);
        g_and_slope(zb, tb, gb, sb);
        res.r = (gb - ga) / h + ga * div;
        res.dza = (-1.0 / h + div) * sa;
        res.dzb = sb / h;
        return res;
    }
    const double la = std::clamp(ta * za, -kExpClip, kExpClip);
    const double lb = std::clamp(tb * zb, -kExpClip, kExpClip);
    res.r = (lb - la) / h + div;
    res.dza = std::abs(ta * za) > kExpClip ? 0.0 : -ta / h;
    res.dzb = std::abs(tb * zb) > kExpClip ? 0.0 : tb / h;
    return res;
}

}  // namespace

double loss_and_gradient(const DensityNet& net, const TrainingBatch& batch, double w_flow, double w_liouville,
                         Gradient& grad, LossTerms* terms, LiouvilleForm form) {
    const int n = batch.size();
    const int d = net.state_dim;
    if (n == 0) {
        throw ArgumentError("loss: empty batch");
    }
    const auto cache = batched_forward(net, stacked_inputs(net, batch));
    const Matrix& out = cache.output;

    Matrix delta = Matrix::Zero(out.rows(), out.cols());
    double flow = 0.0, liou = 0.0;
    const double inv_n = 1.0 / n;
    for (int i = 0; i < n; ++i) {
        const auto res =
            liouville_residual(out(0, i), batch.t[i], out(0, n + i), batch.partner_t[i], batch.div[i], form);
        liou += res.r * res.r;
        const double dr = 2.0 * res.r * w_liouville * inv_n;
        delta(0, i) = dr * res.dza;
        delta(0, n + i) = dr * res.dzb;
        for (int j = 0; j < d; ++j) {
            const double e = out(1 + j, i) - batch.target(i, j);
            flow += e * e;
            delta(1 + j, i) = 2.0 * e * w_flow * inv_n;
        }
    }
    flow *= inv_n;
    liou *= inv_n;
    if (terms) {
        *terms = {flow, liou};
    }

    grad.layers.resize(net.layers.size());
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const Matrix& a_prev = cache.activations[l];
        grad.layers[l].w = delta * a_prev.transpose();
        grad.layers[l].b = delta.rowwise().sum();
        if (l > 0) {
            Matrix back = net.layers[l].w.transpose() * delta;
            delta = (a_prev.array() > 0.0).select(back, 0.0);
        }
    }
    return w_flow * flow + w_liouville * liou;
}

LossTerms loss_terms(const DensityNet& net, const TrainingBatch& batch, LiouvilleForm form) {
    const int n = batch.size();
    if (n == 0) {
        throw ArgumentError("loss: empty batch");
    }
    const auto cache = batched_forward(net, stacked_inputs(net, batch));
    const Matrix& out = cache.output;
    LossTerms t;
    for (int i = 0; i < n; ++i) {
        const double r =
            liouville_residual(out(0, i), batch.t[i], out(0, n + i), batch.partner_t[i], batch.div[i], form).r;
        t.liouville += r * r;
        t.flow += (out.col(i).tail(net.state_dim) - batch.target.row(i).transpose()).squaredNorm();
    }
    t.flow /= n;
    t.liouville /= n;
    return t;
}

double loss(const DensityNet& net, const TrainingBatch& batch, double lambda, LiouvilleForm form) {
    const auto t = loss_terms(net, batch, form);
    return lambda * t.flow + t.liouville;
}

std::vector<double> flatten_parameters(const DensityNet& net) {
    std::vector<double> p;
    p.reserve(net.parameter_count());
    for (const auto& l : net.layers) {
        p.insert(p.end(), l.w.data(), l.w.data() + l.w.size());
        p.insert(p.end(), l.b.data(), l.b.data() + l.b.size());
    }
    return p;
}

void assign_parameters(DensityNet& net, const std::vector<double>& params) {
    if (params.size() != net.parameter_count()) {
        throw ArgumentError("assign_parameters: size mismatch");
    }
    std::size_t k = 0;
    for (auto& l : net.layers) {
        std::copy_n(params.data() + k, l.w.size(), l.w.data());
        k += static_cast<std::size_t>(l.w.size());
        std::copy_n(params.data() + k, l.b.size(), l.b.data());
        k += static_cast<std::size_t>(l.b.size());
    }
}

std::vector<double> flatten_gradient(const Gradient& grad) {
    std::vector<double> p;
    for (const auto& l : grad.layers) {
        p.insert(p.end(), l.w.data(), l.w.data() + l.w.size());
        p.insert(p.end(), l.b.data(), l.b.data() + l.b.size());
    }
    return p;
}

// ---------------------------------------------------------------------------
// Training

void fit_normalization(DensityNet& net, const TrajectoryDataset& data) {
    const int d = net.state_dim;
    Vector lo = Vector::Constant(d + 1, std::numeric_limits<double>::infinity());
    Vector hi = -lo;
    Vector sum = Vector::Zero(d + 1);
    double count = 0.0;
    for (const auto& tr : data.trajectories) {
        Vector v(d + 1);
        v.head(d) = tr.x0;
        for (double t : tr.times) {
            v[d] = t;
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
            sum += v;
            count += 1.0;
        }
    }
    if (count == 0.0) {
        throw ArgumentError("fit_normalization: empty dataset");
    }
    net.norm_shift = sum / count;
    net.norm_scale = hi - lo;
    for (int j = 0; j < d + 1; ++j) {
        if (!(net.norm_scale[j] > 0.0)) {
            net.norm_scale[j] = 1.0;
        }
    }
}

TrainResult train(const TrajectoryDataset& train_data, const TrajectoryDataset& val_data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    if (train_data.empty()) {
        throw ArgumentError("train: empty training set");
    }
    DensityNet net = make_net(train_data.state_dim(), cfg.hidden, cfg.seed);
    fit_normalization(net, train_data);
    net.system = train_data.system;
    net.dt = train_data.dt;
    return train(std::move(net), train_data, val_data, cfg, on_epoch);
}

TrainResult train(DensityNet net, const TrajectoryDataset& train_data, const TrajectoryDataset& val_data,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (train_data.empty()) {
        throw ArgumentError("train: empty training set");
    }
    if (!(cfg.lr > 0.0) || !(cfg.lambda >= 0.0) || cfg.epochs < 1 || cfg.batch_size < 1) {
        throw ArgumentError("train: need lr > 0, lambda >= 0, epochs >= 1, batch_size >= 1");
    }
    const TrainingBatch all = make_batch(train_data);
    const int n = all.size();

    Rng rng = Rng::derive(cfg.seed, 7);
    TrainingBatch val = make_batch(val_data.empty() ? train_data : val_data);
    if (cfg.val_samples > 0 && val.size() > cfg.val_samples) {
        std::vector<int> idx(val.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 0; i < cfg.val_samples; ++i) {
            std::swap(idx[i], idx[i + rng.below(static_cast<std::uint64_t>(val.size() - i))]);
        }
        idx.resize(cfg.val_samples);
        std::sort(idx.begin(), idx.end());
        val = select(val, idx);
    }

    std::vector<double> params = flatten_parameters(net);
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    const int per_epoch = cfg.batches_per_epoch > 0 ? cfg.batches_per_epoch : std::max(1, n / cfg.batch_size);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = n;

    double ema_flow = -1.0, ema_liou = -1.0;
    TrainResult result;
    result.net = net;
    double best = std::numeric_limits<double>::infinity();
    Gradient grad;
    std::vector<int> idx(std::min(cfg.batch_size, n));

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double frac = cfg.epochs > 1 ? static_cast<double>(epoch - 1) / (cfg.epochs - 1) : 0.0;
        const double lr = cfg.lr * std::pow(cfg.lr_final / cfg.lr, frac);
        double train_sum = 0.0;
        for (int b = 0; b < per_epoch; ++b) {
            for (auto& k : idx) {
                if (cursor >= order.size()) {
                    for (int i = n - 1; i > 0; --i) {
                        std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
                    }
                    cursor = 0;
                }
                k = order[cursor++];
            }
            const TrainingBatch mb = select(all, idx);
            double wf = cfg.lambda, wl = 1.0;
            if (cfg.normalize_terms) {
                if (ema_flow < 0.0) {
                    const auto t0 = loss_terms(net, mb, cfg.liouville_form);
                    ema_flow = t0.flow;
                    ema_liou = t0.liouville;
                }
                wf = cfg.lambda / std::max(ema_flow, 1e-12);
                wl = 1.0 / std::max(ema_liou, 1e-12);
            }
            LossTerms terms;
            loss_and_gradient(net, mb, wf, wl, grad, &terms, cfg.liouville_form);
            const double plain = cfg.lambda * terms.flow + terms.liouville;
            if (!std::isfinite(plain)) {
                throw TrainingDivergedError("train: non-finite loss in epoch " + std::to_string(epoch), epoch);
            }
            train_sum += plain;
            if (cfg.normalize_terms) {
                ema_flow = 0.99 * ema_flow + 0.01 * terms.flow;
                ema_liou = 0.99 * ema_liou + 0.01 * terms.liouville;
            }
            const auto g = flatten_gradient(grad);
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < params.size(); ++k) {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                params[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
            }
            assign_parameters(net, params);
        }
        const double val_loss = loss(net, val, cfg.lambda, cfg.liouville_form);
        if (!std::isfinite(val_loss)) {
            throw TrainingDivergedError("train: non-finite validation loss in epoch " + std::to_string(epoch), epoch);
        }
        if (val_loss < best) {
            best = val_loss;
            result.net = net;
            result.best_epoch = epoch;
        }
        EpochLog log{epoch, train_sum / per_epoch, val_loss, best};
        result.history.push_back(log);
        if (on_epoch) {
            on_epoch(log);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const json& j, std::size_t expect) {
    const auto raw = j.get<std::vector<double>>();
    if (raw.size() != expect) {
        throw ParseError("checkpoint: array has " + std::to_string(raw.size()) + " entries, expected " +
                             std::to_string(expect),
                         0);
    }
    return Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

}  // namespace

std::string save_checkpoint(const DensityNet& net) {
    json j;
    j["version"] = kCheckpointVersion;
    j["system"] = net.system;
    j["dt"] = net.dt;
    j["state_dim"] = net.state_dim;
    std::vector<int> dims{net.input_dim()};
    json layers = json::array();
    for (const auto& l : net.layers) {
        dims.push_back(static_cast<int>(l.w.rows()));
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.w.size()));
        for (int r = 0; r < l.w.rows(); ++r) {
            for (int c = 0; c < l.w.cols(); ++c) {
                w.push_back(l.w(r, c));
            }
        }
        layers.push_back({{"w", w}, {"b", vec_json(l.b)}});
    }
    j["dims"] = dims;
    j["layers"] = std::move(layers);
    j["norm"] = {{"shift", vec_json(net.norm_shift)}, {"scale", vec_json(net.norm_scale)}};
    return j.dump() + "\n";
}

DensityNet load_checkpoint(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("checkpoint: ") + e.what(), e.byte);
    }
    try {
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw UnsupportedVersionError("checkpoint: unsupported version " + std::to_string(version), version);
        }
        DensityNet net;
        net.system = j.at("system").get<std::string>();
        net.dt = j.at("dt").get<double>();
        net.state_dim = j.at("state_dim").get<int>();
        const auto dims = j.at("dims").get<std::vector<int>>();
        const auto& layers = j.at("layers");
        if (dims.size() != layers.size() + 1 || dims.front() != net.state_dim + 1 ||
            dims.back() != net.state_dim + 1) {
            throw ParseError("checkpoint: layer dimensions inconsistent", 0);
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const int rows = dims[l + 1], cols = dims[l];
            if (rows < 1 || cols < 1) {
                throw ParseError("checkpoint: non-positive layer size", 0);
            }
            const Vector flat = json_vec(layers[l].at("w"), static_cast<std::size_t>(rows) * cols);
            Layer layer{Matrix(rows, cols), json_vec(layers[l].at("b"), rows)};
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) {
                    layer.w(r, c) = flat[r * cols + c];
                }
            }
            net.layers.push_back(std::move(layer));
        }
        net.norm_shift = json_vec(j.at("norm").at("shift"), net.state_dim + 1);
        net.norm_scale = json_vec(j.at("norm").at("scale"), net.state_dim + 1);
        if ((net.norm_scale.array() <= 0.0).any()) {
            throw ParseError("checkpoint: normalization scale must be positive", 0);
        }
        return net;
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what(), 0);
    }
}

void save_checkpoint_file(const DensityNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ArgumentError("cannot write " + path);
    }
    out << save_checkpoint(net);
}

DensityNet load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArgumentError("cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_checkpoint(ss.str());
}

}  // namespace densreach
