// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "densreach/dataset.hpp"
#include "densreach/distribution.hpp"
#include "densreach/types.hpp"

namespace densreach {

struct Layer {
    Matrix w;  ///< out x in
    Vector b;
};

/// Feed-forward ReLU network on [x0, t] -> [z, x_hat]. Inputs are shifted
/// and scaled per coordinate before the first layer; the last layer is
/// affine.
struct DensityNet {
    int state_dim = 0;
    std::vector<Layer> layers;
    Vector norm_shift;  ///< size state_dim + 1
    Vector norm_scale;  ///< size state_dim + 1, strictly positive
    std::string system;
    double dt = 0.0;

    [[nodiscard]] int input_dim() const { return state_dim + 1; }
    [[nodiscard]] int output_dim() const { return state_dim + 1; }
    [[nodiscard]] int hidden_count() const;
    [[nodiscard]] std::size_t parameter_count() const;
};

/// He-initialized network with zero biases and identity normalization.
DensityNet make_net(int state_dim, const std::vector<int>& hidden, std::uint64_t seed);

/// First layer with the normalization folded in, split into the x0
/// columns, the t column and the bias. Shared by forward() and slicing so
/// that a sliced net reproduces forward() bit for bit.
struct FoldedInput {
    Matrix wx;
    Vector wt;
    Vector b;
};
FoldedInput fold_input(const DensityNet& net);

/// Row-by-row w x + b with a fixed summation order.
Vector affine_apply(const Matrix& w, const Vector& x, const Vector& b);

struct NetOutput {
    double z = 0.0;
    Vector x_hat;
};

NetOutput forward(const DensityNet& net, const Vector& x0, double t);

/// exp(t z) with t z clipped to [-60, 60].
double g_of(double z, double t);
/// Number of g_of calls that hit the clip since start.
std::size_t g_saturation_count() noexcept;

/// rho0(x0) * G(x0, t); 0 when x0 is outside the support.
double density_estimate(const DensityNet& net, const Vector& x0, double t, const InitialDistribution& rho0);

/// One element per (trajectory, step) sample. `partner_t` is the neighbouring
/// time used for the finite difference of G: t + dt normally, t - dt at the
/// last recorded step.
struct TrainingBatch {
    Matrix x0;      ///< n x d
    Vector t;       ///< n
    Vector partner_t;
    Matrix target;  ///< n x d, state at time t
    Vector div;     ///< divergence at the target state
    double dt = 0.0;

    [[nodiscard]] int size() const { return static_cast<int>(t.size()); }
};

/// Every (trajectory, step) pair of a dataset.
TrainingBatch make_batch(const TrajectoryDataset& data);
/// Rows `idx` of a batch.
TrainingBatch select(const TrainingBatch& batch, const std::vector<int>& idx);

/// How the Liouville residual is formed from the two G evaluations.
/// Gain: (G(t') - G(t)) / (t' - t) + G(t) div, the residual as written.
/// LogGain: the same forward difference applied to log G = t z, i.e.
/// (t' z' - t z) / (t' - t) + div; zero exactly when the Gain residual's
/// continuous-time counterpart is zero, but not scaled by G.
enum class LiouvilleForm { Gain, LogGain };

struct LossTerms {
    double flow = 0.0;       ///< mean squared state error
    double liouville = 0.0;  ///< mean squared residual of G' + G div
};

/// Mean over the batch of lambda * |x_hat - x|^2 + (G' + G div)^2.
double loss(const DensityNet& net, const TrainingBatch& batch, double lambda,
            LiouvilleForm form = LiouvilleForm::Gain);
LossTerms loss_terms(const DensityNet& net, const TrainingBatch& batch, LiouvilleForm form = LiouvilleForm::Gain);

/// Gradient with the same layout as net.layers.
struct Gradient {
    std::vector<Layer> layers;
};

/// Loss w_flow * flow + w_liouville * liouville and its gradient w.r.t. all
/// weights and biases (normalization is fixed).
double loss_and_gradient(const DensityNet& net, const TrainingBatch& batch, double w_flow, double w_liouville,
                         Gradient& grad, LossTerms* terms = nullptr, LiouvilleForm form = LiouvilleForm::Gain);

std::vector<double> flatten_parameters(const DensityNet& net);
void assign_parameters(DensityNet& net, const std::vector<double>& params);
std::vector<double> flatten_gradient(const Gradient& grad);

struct TrainConfig {
    double lambda = 1.0;
    double lr = 1e-3;
    /// Learning rate at the last epoch; the rate decays geometrically.
    double lr_final = 1e-4;
    int epochs = 200;
    int batch_size = 256;
    /// Mini-batches per epoch; 0 means one pass over all training pairs.
    int batches_per_epoch = 0;
    std::uint64_t seed = 0;
    std::vector<int> hidden = {64, 64, 64};
    /// Divide each loss term by its running mean so neither dominates.
    bool normalize_terms = true;
    /// Validation pairs scored per epoch (0 = all).
    int val_samples = 4096;
    LiouvilleForm liouville_form = LiouvilleForm::LogGain;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double best_val_loss = 0.0;
};

struct TrainResult {
    DensityNet net;
    std::vector<EpochLog> history;
    int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam training from a fresh He-initialized net; returns the checkpoint
/// with the lowest validation loss. Deterministic given cfg.seed.
TrainResult train(const TrajectoryDataset& train_data, const TrajectoryDataset& val_data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Continues from `init` (its normalization is kept).
TrainResult train(DensityNet init, const TrajectoryDataset& train_data, const TrajectoryDataset& val_data,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Per-coordinate mean and range of the (x0, t) training inputs.
void fit_normalization(DensityNet& net, const TrajectoryDataset& data);

inline constexpr int kCheckpointVersion = 1;

std::string save_checkpoint(const DensityNet& net);
DensityNet load_checkpoint(const std::string& bytes);
void save_checkpoint_file(const DensityNet& net, const std::string& path);
DensityNet load_checkpoint_file(const std::string& path);

}  // namespace densreach
