#include "lsno/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace lsno {

void ModelConfig::validate() const {
  if (n_basis < 1) throw ParameterError("model: n_basis must be >= 1");
  g_spec.validate();
  f_spec.validate();
  if (mode == ProjectionMode::learned_mu) mu_spec.validate();
  if (domain.nt < 2) throw ParameterError("model: domain needs at least 2 time nodes");
  if (g_spec.input_width() != domain.dim)
    throw ParameterError("model: g input width must equal domain dim");
  if (g_spec.output_width() != domain.channels)
    throw ParameterError("model: g output width must equal channel count");
  if (training.batch_size < 1 || training.epochs < 0)
    throw ParameterError("model: bad training settings");
  if (training.val_fraction < 0.0 || training.val_fraction >= 1.0)
    throw ParameterError("model: val_fraction must lie in [0, 1)");
}

ModelConfig default_config(const GridDesc& grid, int n_basis) {
  ModelConfig cfg;
  cfg.n_basis = n_basis;
  cfg.mode = ProjectionMode::learned_mu;
  cfg.domain = grid;

  cfg.g_spec.layer_widths = {grid.dim, 64, 64, grid.channels};
  cfg.g_spec.activation = Activation::tanh;

  cfg.f_spec.layer_widths = {n_basis, 128, 128, n_basis};
  cfg.f_spec.activation = Activation::tanh;

  cfg.mu_spec.channels = {16, 32};
  cfg.mu_spec.kernel_widths = {5, 5};
  cfg.mu_spec.strides = {2, 2};
  cfg.mu_spec.hidden_layers = 1;
  cfg.mu_spec.dense_width = 64;
  cfg.mu_spec.activation = Activation::relu;
  cfg.mu_spec.final_nonlinearity = FinalNonlin::softplus;
  cfg.mu_spec.in_channels = grid.channels;
  cfg.mu_spec.in_length = grid.nodes();

  cfg.norm = NormSpec{2.0, QuadKind::trapezoid};
  return cfg;
}

GridFunction interpolate_init(const Sample& sample, const GridDesc& grid) {
  const GridDesc& sg = sample.target.grid;
  if (grid.nx != sg.nx || grid.channels != sg.channels)
    throw DimensionError("interpolate_init: grid incompatible with the snapshots");
  const double span = sg.t1 - sg.t0;
  GridFunction y = GridFunction::zeros(grid);
  for (int j = 0; j < grid.nt; ++j) {
    const double t = grid.node_t(j);
    const double tau = (t - sg.t0) / span;
    if (tau < -1e-12 || tau > 1.0 + 1e-12)
      throw ParameterError("interpolate_init: time node outside the snapshot interval");
    for (int ix = 0; ix < grid.nx; ++ix)
      for (int c = 0; c < grid.channels; ++c) {
        const std::int64_t k = static_cast<std::int64_t>(ix) * grid.channels + c;
        y.at(ix, j, c) = (1.0 - tau) * sample.init0[k] + tau * sample.init1[k];
      }
  }
  return y;
}

namespace {

void init_network_params(ModelState& state, Rng& rng) {
  const ModelConfig& cfg = state.config;
  const int n = state.basis_count();
  for (int i = 0; i < n; ++i)
    init_mlp_params(state.params, "g/" + std::to_string(i) + "/", cfg.g_spec, rng);
  init_mlp_params(state.params, "f/", cfg.f_spec, rng);
  if (cfg.mode == ProjectionMode::learned_mu)
    for (int i = 0; i < n; ++i)
      init_mu_params(state.params, "mu/" + std::to_string(i) + "/", cfg.mu_spec, rng);
}

ModelState init_model_impl(const ModelConfig& config, const Dataset* train_data) {
  config.validate();
  ModelState state;
  state.config = config;

  if (config.mode == ProjectionMode::fixed_mu) {
    if (train_data == nullptr)
      throw ContractError("fixed-mu initialization needs the training data for its net");
    std::vector<GridFunction> inputs;
    inputs.reserve(train_data->samples.size());
    for (const Sample& s : train_data->samples)
      inputs.push_back(interpolate_init(s, config.domain));
    double eps = config.eps;
    if (eps <= 0.0) eps = suggest_eps(inputs, config.norm);
    state.net = build_greedy(inputs, eps, config.norm);
    state.config.eps = eps;
    // The net decides n; keep the configured f hidden widths.
    const int n = state.net->size();
    state.config.n_basis = n;
    state.config.f_spec.layer_widths.front() = n;
    state.config.f_spec.layer_widths.back() = n;
  }

  Rng rng(config.training.seed);
  init_network_params(state, rng);
  return state;
}

// Run fn(worker, begin, end) over [0, total) split into contiguous chunks.
template <typename Fn>
void parallel_chunks(int threads, int total, Fn&& fn) {
  const int t = std::max(1, std::min(threads, total));
  if (t == 1) {
    fn(0, 0, total);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(t);
  const int base = total / t, rem = total % t;
  int begin = 0;
  for (int w = 0; w < t; ++w) {
    const int len = base + (w < rem ? 1 : 0);
    pool.emplace_back([&fn, w, begin, len]() { fn(w, begin, begin + len); });
    begin += len;
  }
  for (auto& th : pool) th.join();
}

}  // namespace

ModelState init_model(const ModelConfig& config) { return init_model_impl(config, nullptr); }

ModelState init_model(const ModelConfig& config, const Dataset& train_data) {
  return init_model_impl(config, &train_data);
}

Tensor forward_batch(Tape& tape, const ModelState& state,
                     const std::vector<const Sample*>& batch, const GridDesc& grid) {
  if (batch.empty()) throw ParameterError("forward_batch: empty batch");
  const ModelConfig& cfg = state.config;
  const int n = state.basis_count();

  std::vector<Tensor> qrows;
  qrows.reserve(batch.size());
  for (const Sample* s : batch) {
    GridFunction y = interpolate_init(*s, cfg.domain);  // training resolution
    if (cfg.mode == ProjectionMode::learned_mu) {
      Tensor yin = grid_to_mu_input(y, cfg.mu_spec.space_as_channels);
      Tensor q = project_learned(tape, yin, state.params, cfg.mu_spec, n, cfg.denom_guard);
      qrows.push_back(reshape(tape, q, {1, n}));
    } else {
      LerayCoefficients lc = project_fixed(y, *state.net);
      qrows.push_back(Tensor::from_array({1, n}, lc.q.array()));
    }
  }
  Tensor q_batch = concat(tape, qrows);                                   // [batch, n]
  Tensor b_batch = mlp_forward(tape, state.params, "f/", cfg.f_spec, q_batch);
  Tensor points = grid_points(grid);
  Tensor basis = basis_matrix(tape, state.params, cfg.g_spec, n, points);  // [n, nodes*M]
  return matmul(tape, b_batch, basis);                                     // [batch, nodes*M]
}

GridFunction forward(const ModelState& state, const Sample& sample) {
  Tape tape;
  tape.set_recording(false);
  Tensor psi = forward_batch(tape, state, {&sample}, state.config.domain);
  return GridFunction(state.config.domain, psi.values());
}

Tensor loss_mse(Tape& tape, const Tensor& psi, const Tensor& target,
                const std::optional<Tensor>& mask) {
  if (psi.shape() != target.shape()) throw DimensionError("loss: prediction/target shapes differ");
  Tensor diff = sub(tape, psi, target);
  Tensor sq = mul(tape, diff, diff);
  double denom = static_cast<double>(sq.size());
  if (mask.has_value()) {
    sq = mul(tape, sq, *mask);
    denom = mask->values().sum();
    if (denom <= 0.0) throw ContractError("loss: mask keeps no entries");
  }
  return mul(tape, sum(tape, sq), Tensor::scalar(1.0 / denom));
}

namespace {

Tensor targets_of(const std::vector<const Sample*>& batch) {
  const Index width = batch.front()->target.values.size();
  Eigen::ArrayXd flat(static_cast<Index>(batch.size()) * width);
  for (std::size_t s = 0; s < batch.size(); ++s)
    flat.segment(static_cast<Index>(s) * width, width) = batch[s]->target.values;
  return Tensor::from_array({static_cast<Index>(batch.size()), width}, std::move(flat));
}

// 0/1 mask keeping even time indices, tiled over a batch.
Tensor alternate_time_mask(const GridDesc& grid, Index batch) {
  const Index width = grid.value_count();
  Eigen::ArrayXd row(width);
  for (int ix = 0; ix < grid.nx; ++ix)
    for (int it = 0; it < grid.nt; ++it)
      for (int c = 0; c < grid.channels; ++c)
        row[(static_cast<Index>(ix) * grid.nt + it) * grid.channels + c] =
            (it % 2 == 0) ? 1.0 : 0.0;
  Eigen::ArrayXd flat(batch * width);
  for (Index s = 0; s < batch; ++s) flat.segment(s * width, width) = row;
  return Tensor::from_array({batch, width}, std::move(flat));
}

// Per-sample MSE of the listed samples. Evaluation shares the basis matrix
// across a sub-batch; each row is bit-identical to a single-sample forward
// because every contraction is a fixed-order dot per output element.
void mse_into(const ModelState& state, const Dataset& ds, const std::vector<int>& idx,
              int threads, std::vector<double>& out) {
  constexpr int kEvalBatch = 64;
  out.resize(idx.size());
  parallel_chunks(threads, static_cast<int>(idx.size()), [&](int, int begin, int end) {
    for (int start = begin; start < end; start += kEvalBatch) {
      const int stop = std::min(end, start + kEvalBatch);
      std::vector<const Sample*> batch;
      batch.reserve(stop - start);
      for (int i = start; i < stop; ++i) batch.push_back(&ds.samples[idx[i]]);
      Tape tape;
      tape.set_recording(false);
      Tensor psi = forward_batch(tape, state, batch, state.config.domain);
      const Index width = state.config.domain.value_count();
      for (int i = start; i < stop; ++i) {
        const auto row = psi.values().segment(static_cast<Index>(i - start) * width, width);
        out[i] = (row - batch[i - start]->target.values).square().mean();
      }
    }
  });
}

}  // namespace

EvalResult evaluate(const ModelState& state, const Dataset& test, int threads) {
  if (test.samples.empty()) throw ParameterError("evaluate: empty test set");
  std::vector<int> idx(test.samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  EvalResult result;
  mse_into(state, test, idx, threads, result.per_sample_mse);
  double mean = 0.0;
  for (double v : result.per_sample_mse) mean += v;
  mean /= static_cast<double>(result.per_sample_mse.size());
  double var = 0.0;
  for (double v : result.per_sample_mse) var += (v - mean) * (v - mean);
  var /= static_cast<double>(result.per_sample_mse.size());
  result.mean = mean;
  result.stddev = std::sqrt(var);
  return result;
}

namespace {

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
};

SplitIndices split_dataset(int count, double val_fraction, Rng& rng) {
  std::vector<int> perm(count);
  for (int i = 0; i < count; ++i) perm[i] = i;
  // Fisher-Yates, bounded by rejection-free modulo (bias is irrelevant here
  // but determinism is not: no <random> distributions).
  for (int i = count - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  SplitIndices split;
  const int n_val = static_cast<int>(val_fraction * count);
  split.val.assign(perm.begin(), perm.begin() + n_val);
  split.train.assign(perm.begin() + n_val, perm.end());
  return split;
}

double mean_mse_over(const ModelState& state, const Dataset& ds, const std::vector<int>& idx,
                     int threads) {
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> mse;
  mse_into(state, ds, idx, threads, mse);
  double mean = 0.0;
  for (double v : mse) mean += v;
  return mean / static_cast<double>(mse.size());
}

}  // namespace

TrainResult train(const ModelConfig& config, const Dataset& dataset) {
  config.validate();
  if (!(dataset.grid == config.domain))
    throw DimensionError("train: dataset grid does not match the model domain");
  if (dataset.samples.empty()) throw ParameterError("train: empty dataset");

  TrainResult result;
  result.state = init_model_impl(config, &dataset);
  ModelState& state = result.state;
  const TrainConfig& tc = config.training;

  Rng shuffle_rng(Rng::derive(tc.seed, 0x51ULL));
  SplitIndices split = split_dataset(dataset.count(), tc.val_fraction, shuffle_rng);

  const auto started = std::chrono::steady_clock::now();
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    // Reshuffle the training order every epoch.
    for (int i = static_cast<int>(split.train.size()) - 1; i > 0; --i) {
      const auto j =
          static_cast<int>(shuffle_rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(split.train[i], split.train[j]);
    }

    for (std::size_t start = 0; start < split.train.size(); start += tc.batch_size) {
      const std::size_t stop = std::min(split.train.size(), start + tc.batch_size);
      std::vector<const Sample*> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&dataset.samples[split.train[i]]);

      const Index batch_n = static_cast<Index>(batch.size());
      const Index width = config.domain.value_count();
      double denom = static_cast<double>(batch_n * width);
      if (tc.mask_alternate_times)
        denom = alternate_time_mask(config.domain, batch_n).values().sum();

      state.params.zero_grad();
      double batch_loss = 0.0;

      const int workers = std::max(1, tc.threads);
      if (workers == 1) {
        Tape tape;
        Tensor psi = forward_batch(tape, state, batch, config.domain);
        std::optional<Tensor> mask;
        if (tc.mask_alternate_times) mask = alternate_time_mask(config.domain, batch_n);
        Tensor loss = loss_mse(tape, psi, targets_of(batch), mask);
        batch_loss = loss.item();
        tape.backward(loss);
      } else {
        // Each worker owns a private parameter copy; gradients are reduced
        // in worker order so a fixed thread count reproduces exactly.
        std::vector<ParamStore> stores(workers);
        std::vector<double> losses(workers, 0.0);
        std::vector<ModelState> views(workers);
        for (int w = 0; w < workers; ++w) {
          stores[w] = state.params.clone_values();
          views[w].config = state.config;
          views[w].net = state.net;
        }
        parallel_chunks(workers, static_cast<int>(batch.size()),
                        [&](int w, int begin, int end) {
                          if (begin == end) return;
                          views[w].params = std::move(stores[w]);
                          std::vector<const Sample*> chunk(batch.begin() + begin,
                                                           batch.begin() + end);
                          Tape tape;
                          Tensor psi = forward_batch(tape, views[w], chunk, config.domain);
                          std::optional<Tensor> mask;
                          if (tc.mask_alternate_times)
                            mask = alternate_time_mask(config.domain,
                                                       static_cast<Index>(chunk.size()));
                          // Chunk sum over the batch denominator; the worker
                          // losses add up to the batch-mean loss.
                          Tensor diff = sub(tape, psi, targets_of(chunk));
                          Tensor sq = mul(tape, diff, diff);
                          if (mask.has_value()) sq = mul(tape, sq, *mask);
                          Tensor loss = mul(tape, sum(tape, sq), Tensor::scalar(1.0 / denom));
                          losses[w] = loss.item();
                          tape.backward(loss);
                        });
        for (int w = 0; w < workers; ++w) {
          batch_loss += losses[w];
          state.params.add_grads_from(views[w].params);
        }
      }

      if (!std::isfinite(batch_loss))
        throw StabilityError("train: non-finite loss (learning rate too high?)");
      if (tc.use_sgd)
        state.params.sgd_step(tc.lr);
      else
        state.params.adam_step(AdamConfig{.lr = tc.lr});
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mse = mean_mse_over(state, dataset, split.train, tc.threads);
    stats.val_mse = mean_mse_over(state, dataset, split.val, tc.threads);
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(stats);

    if (tc.early_stop_patience > 0 && !split.val.empty()) {
      if (stats.val_mse < best_val) {
        best_val = stats.val_mse;
        since_best = 0;
      } else if (++since_best >= tc.early_stop_patience) {
        break;
      }
    }
  }
  return result;
}

GridDesc refine_grid(const GridDesc& grid, int factor) {
  if (factor < 1) throw ParameterError("refine_grid: factor must be >= 1");
  GridDesc fine = grid;
  fine.nt = factor * (grid.nt - 1) + 1;
  if (grid.dim == 2) fine.nx = factor * grid.nx;
  return fine;
}

GridFunction predict_upsampled(const ModelState& state, const Sample& sample,
                               const GridDesc& finer_grid) {
  const GridDesc& dom = state.config.domain;
  if (finer_grid.dim != dom.dim || finer_grid.channels != dom.channels)
    throw DomainError("predict_upsampled: grid shape incompatible with the domain");
  if (finer_grid.t0 < dom.t0 - 1e-12 || finer_grid.t1 > dom.t1 + 1e-12 ||
      finer_grid.x0 < dom.x0 - 1e-12 || finer_grid.x1 > dom.x1 + 1e-12)
    throw DomainError("predict_upsampled: requested points leave the domain");

  const ModelConfig& cfg = state.config;
  const int n = state.basis_count();
  Tape tape;
  tape.set_recording(false);

  // Coefficients from the training-resolution input.
  GridFunction y = interpolate_init(sample, dom);
  Tensor q;
  if (cfg.mode == ProjectionMode::learned_mu) {
    q = reshape(tape,
                project_learned(tape, grid_to_mu_input(y, cfg.mu_spec.space_as_channels),
                                state.params, cfg.mu_spec, n, cfg.denom_guard),
                {1, n});
  } else {
    q = Tensor::from_array({1, n}, project_fixed(y, *state.net).q.array());
  }
  Tensor b = mlp_forward(tape, state.params, "f/", cfg.f_spec, q);
  Tensor basis = basis_matrix(tape, state.params, cfg.g_spec, n, grid_points(finer_grid));
  Tensor psi = matmul(tape, b, basis);
  return GridFunction(finer_grid, psi.values());
}

}  // namespace lsno
