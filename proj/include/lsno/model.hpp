#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lsno/data.hpp"
#include "lsno/epsnet.hpp"
#include "lsno/leray.hpp"
#include "lsno/nn.hpp"

namespace lsno {

enum class ProjectionMode { fixed_mu, learned_mu };

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 32;
  int epochs = 500;
  std::uint64_t seed = 0;
  double val_fraction = 0.0;  // carve from the training set when > 0
  int early_stop_patience = 0;  // 0 disables
  bool use_sgd = false;        // plain gradient descent instead of Adam
  bool mask_alternate_times = false;  // interpolation task: supervise even
                                      // time indices only
  int threads = 1;
};

struct ModelConfig {
  int n_basis = 16;
  ProjectionMode mode = ProjectionMode::learned_mu;
  MlpSpec g_spec;       // input width = domain dim, output width = channels
  MlpSpec f_spec;       // n -> n
  MuNetSpec mu_spec;    // reads the interpolated input function
  NormSpec norm;        // fixed mode distances
  double eps = 0.0;     // fixed mode radius; <= 0 selects suggest_eps
  double denom_guard = 1e-8;
  GridDesc domain;
  TrainConfig training;

  void validate() const;
};

/// Defaults for a dataset grid: g = [dim, 64, 64, M] tanh, f = [n, 128,
/// 128, n] tanh with linear final layer, mu = two convs (16, 32 channels,
/// width 5, stride 2) with softplus output.
ModelConfig default_config(const GridDesc& grid, int n_basis);

/// y(x, t) = (1 - t') y(x, 0) + t' y(x, 1) with t' rescaled to [0, 1];
/// time nodes of t_grid must lie inside [t0, t1].
GridFunction interpolate_init(const Sample& sample, const GridDesc& t_grid);

/// The trained state: parameters plus, in fixed mode, the eps-net.
struct ModelState {
  ModelConfig config;
  ParamStore params;
  std::optional<EpsNet> net;  // fixed mode only

  int basis_count() const {
    return net.has_value() ? net->size() : config.n_basis;
  }
};

/// Fresh deterministic initialization (Glorot weights, zero biases). Fixed
/// mode needs the training data to build its net (the second overload);
/// the net then decides n_basis.
ModelState init_model(const ModelConfig& config);
ModelState init_model(const ModelConfig& config, const Dataset& train_data);

/// Forward pass for a batch of samples on one tape: interpolate, project,
/// apply f, reconstruct against the shared basis evaluation. Returns
/// [batch, nodes*channels] predictions in grid storage order.
Tensor forward_batch(Tape& tape, const ModelState& state,
                     const std::vector<const Sample*>& batch, const GridDesc& grid);

/// Single-sample forward (row 0 of the batch path).
GridFunction forward(const ModelState& state, const Sample& sample);

/// Mean squared error over all grid nodes and channels; mask (0/1 per
/// value) restricts which entries are supervised.
Tensor loss_mse(Tape& tape, const Tensor& psi, const Tensor& target,
                const std::optional<Tensor>& mask = std::nullopt);

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

struct TrainResult {
  ModelState state;
  std::vector<EpochStats> history;
};

/// Algorithm: minibatch loop of forward / loss / backward / Adam step.
/// Deterministic bit-for-bit given (config, dataset) when threads == 1.
/// train_mse is the post-epoch loss over the train split, so evaluating
/// the final checkpoint on its own training data reproduces the last row.
TrainResult train(const ModelConfig& config, const Dataset& dataset);

struct EvalResult {
  std::vector<double> per_sample_mse;
  double mean = 0.0;
  double stddev = 0.0;  // population std (divide by N)
};

EvalResult evaluate(const ModelState& state, const Dataset& test, int threads = 1);

/// Prediction evaluated on a finer grid; coefficients still come from the
/// training-resolution input.
GridFunction predict_upsampled(const ModelState& state, const Sample& sample,
                               const GridDesc& finer_grid);

/// F-times finer grid: time nodes F*(nt-1)+1; for dim 2 also F*nx spatial
/// nodes (the periodic axis refines to F*nx).
GridDesc refine_grid(const GridDesc& grid, int factor);

}  // namespace lsno
