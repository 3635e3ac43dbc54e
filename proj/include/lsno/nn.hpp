#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsno/grid.hpp"
#include "lsno/rng.hpp"
#include "lsno/tensor.hpp"

namespace lsno {

enum class Activation { tanh, relu, softplus };
enum class FinalNonlin { softplus, sigmoid_scaled };

/// Feed-forward network: affine layers alternating with `activation`,
/// final layer linear unless `final_activation` is set.
struct MlpSpec {
  std::vector<int> layer_widths;  // input, hidden..., output
  Activation activation = Activation::tanh;
  bool has_final_activation = false;
  Activation final_activation = Activation::tanh;

  void validate() const;
  int input_width() const { return layer_widths.front(); }
  int output_width() const { return layer_widths.back(); }
};

/// Scalar-output network over a discretized input function. The default
/// form is a conv stack (valid padding) followed by global average pooling
/// and a dense head; an empty `channels` list selects the single-hidden-
/// layer feed-forward variant acting on the flattened discretization.
/// Both final nonlinearities have range in [0, inf).
struct MuNetSpec {
  std::vector<int> channels;       // conv output channels per layer
  std::vector<int> kernel_widths;  // one per conv layer
  std::vector<int> strides;        // one per conv layer
  int hidden_layers = 1;           // dense layers in the head
  int dense_width = 64;
  Activation activation = Activation::relu;
  FinalNonlin final_nonlinearity = FinalNonlin::softplus;
  double sigmoid_scale = 1.0;
  // 2-D grids only: read [nx*M channels x nt] (conv along time, spatial
  // profiles as channels) instead of the flattened [M x nx*nt] sequence.
  bool space_as_channels = false;

  int in_channels = 1;   // channels of the grid function it reads
  std::int64_t in_length = 0;  // flattened node count of that grid

  void validate() const;
  bool is_feedforward() const { return channels.empty(); }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Flat, insertion-ordered collection of trainable tensors with per-array
/// Adam moment buffers. Names are unique; iteration order is insertion
/// order everywhere (updates, serialization, gradient reduction), which is
/// what makes training deterministic.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Shape shape);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t count() const { return entries_.size(); }
  const std::string& name_at(std::size_t i) const { return entries_[i].name; }
  Tensor& tensor_at(std::size_t i) { return entries_[i].value; }
  const Tensor& tensor_at(std::size_t i) const { return entries_[i].value; }

  void zero_grad();
  /// Bias-corrected adaptive-moment update. Gradients must be populated on
  /// every parameter (zero counts); they are left untouched.
  void adam_step(const AdamConfig& cfg);
  /// Plain gradient descent, same contract.
  void sgd_step(double lr);
  long step_count() const { return step_; }

  /// Fresh store with copied values (same names/shapes, zero moments).
  /// Used by worker threads that need private gradient buffers.
  ParamStore clone_values() const;
  /// Accumulate other's gradients into ours, by insertion order.
  void add_grads_from(const ParamStore& other);

 private:
  struct Entry {
    std::string name;
    Tensor value;
    Eigen::ArrayXd m, v;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  long step_ = 0;
};

/// Glorot-uniform weights, zero biases; deterministic in `rng`. Parameters
/// are registered as <prefix>W0, <prefix>b0, <prefix>W1, ...
void init_mlp_params(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng);

/// Conv kernels <prefix>K0..., conv biases <prefix>kb0..., then the dense
/// head as in init_mlp_params with prefix <prefix>head/.
void init_mu_params(ParamStore& store, const std::string& prefix, const MuNetSpec& spec, Rng& rng);

Tensor apply_activation(Tape& tape, const Tensor& x, Activation act);

/// x is [batch, d_in]; returns [batch, d_out].
Tensor mlp_forward(Tape& tape, const ParamStore& store, const std::string& prefix,
                   const MlpSpec& spec, const Tensor& x);

/// y is [c_in, L] (a grid function flattened over its nodes); returns a
/// nonnegative scalar tensor.
Tensor mu_forward(Tape& tape, const ParamStore& store, const std::string& prefix,
                  const MuNetSpec& spec, const Tensor& y);

/// Grid function -> [channels, nodes] tensor (no gradient). With
/// space_as_channels, 2-D grids map to [nx*channels, nt] instead.
Tensor grid_to_mu_input(const GridFunction& f, bool space_as_channels = false);

}  // namespace lsno
