#include "lsno/nn.hpp"

#include <cmath>

namespace lsno {

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw ParameterError("mlp spec needs at least two layer widths");
  for (int w : layer_widths)
    if (w <= 0) throw ParameterError("mlp spec widths must be positive");
}

void MuNetSpec::validate() const {
  if (!channels.empty()) {
    if (kernel_widths.size() != channels.size() || strides.size() != channels.size())
      throw ParameterError("mu spec: channels, kernel_widths, strides must align");
    for (std::size_t i = 0; i < channels.size(); ++i)
      if (channels[i] <= 0 || kernel_widths[i] <= 0 || strides[i] <= 0)
        throw ParameterError("mu spec: conv parameters must be positive");
  }
  if (hidden_layers < 1) throw ParameterError("mu spec: needs at least one dense hidden layer");
  if (dense_width <= 0) throw ParameterError("mu spec: dense width must be positive");
  if (in_channels <= 0 || in_length <= 0)
    throw ParameterError("mu spec: input geometry not set");
}

Tensor& ParamStore::add(const std::string& name, Shape shape) {
  if (has(name)) throw ParameterError("parameter already registered: " + name);
  Entry e;
  e.name = name;
  e.value = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  e.m = Eigen::ArrayXd::Zero(e.value.size());
  e.v = Eigen::ArrayXd::Zero(e.value.size());
  entries_.push_back(std::move(e));
  index_[name] = entries_.size() - 1;
  return entries_.back().value;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("unknown parameter: " + name);
  return entries_[it->second].value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ParameterError("unknown parameter: " + name);
  return entries_[it->second].value;
}

void ParamStore::zero_grad() {
  for (Entry& e : entries_) {
    e.value.ensure_grad();
    e.value.zero_grad();
  }
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  for (Entry& e : entries_)
    if (!e.value.has_grad())
      throw ContractError("adam_step: gradient missing for " + e.name);
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (Entry& e : entries_) {
    const Eigen::ArrayXd& g = e.value.grad();
    e.m = cfg.beta1 * e.m + (1.0 - cfg.beta1) * g;
    e.v = cfg.beta2 * e.v + (1.0 - cfg.beta2) * g.square();
    e.value.mutable_values() -=
        cfg.lr * (e.m / bc1) / ((e.v / bc2).sqrt() + cfg.eps);
  }
}

void ParamStore::sgd_step(double lr) {
  for (Entry& e : entries_)
    if (!e.value.has_grad())
      throw ContractError("sgd_step: gradient missing for " + e.name);
  ++step_;
  for (Entry& e : entries_) e.value.mutable_values() -= lr * e.value.grad();
}

ParamStore ParamStore::clone_values() const {
  ParamStore out;
  for (const Entry& e : entries_) {
    Tensor& t = out.add(e.name, e.value.shape());
    t.mutable_values() = e.value.values();
  }
  return out;
}

void ParamStore::add_grads_from(const ParamStore& other) {
  if (other.count() != count()) throw ContractError("gradient reduction: store layouts differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!other.entries_[i].value.has_grad()) continue;
    entries_[i].value.ensure_grad() += other.entries_[i].value.grad();
  }
}

namespace {

void glorot_fill(Tensor& w, Index fan_in, Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Eigen::ArrayXd& v = w.mutable_values();
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
}

}  // namespace

void init_mlp_params(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng) {
  spec.validate();
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    const Index in = spec.layer_widths[l], out = spec.layer_widths[l + 1];
    Tensor& w = store.add(prefix + "W" + std::to_string(l), {in, out});
    glorot_fill(w, in, out, rng);
    store.add(prefix + "b" + std::to_string(l), {1, out});  // zero bias
  }
}

void init_mu_params(ParamStore& store, const std::string& prefix, const MuNetSpec& spec, Rng& rng) {
  spec.validate();
  int head_in;
  if (spec.is_feedforward()) {
    head_in = static_cast<int>(spec.in_channels * spec.in_length);
  } else {
    int c_in = spec.in_channels;
    std::int64_t len = spec.in_length;
    for (std::size_t l = 0; l < spec.channels.size(); ++l) {
      const Index c_out = spec.channels[l], w = spec.kernel_widths[l];
      if (w > len)
        throw ParameterError("mu spec: conv kernel wider than remaining length");
      Tensor& k = store.add(prefix + "K" + std::to_string(l), {c_out, c_in, w});
      glorot_fill(k, c_in * w, c_out * w, rng);
      store.add(prefix + "kb" + std::to_string(l), {c_out, 1});
      len = (len - w) / spec.strides[l] + 1;
      c_in = static_cast<int>(c_out);
    }
    head_in = c_in;
  }
  MlpSpec head;
  head.layer_widths.push_back(head_in);
  for (int i = 0; i < spec.hidden_layers; ++i) head.layer_widths.push_back(spec.dense_width);
  head.layer_widths.push_back(1);
  head.activation = spec.activation;
  init_mlp_params(store, prefix + "head/", head, rng);
}

Tensor apply_activation(Tape& tape, const Tensor& x, Activation act) {
  switch (act) {
    case Activation::tanh: return tanh(tape, x);
    case Activation::relu: return relu(tape, x);
    case Activation::softplus: return softplus(tape, x);
  }
  throw ParameterError("unknown activation");
}

namespace {

// Row-broadcast bias through the primitive set: ones[batch,1] * b[1,out].
Tensor add_row_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
  const Index batch = x.shape()[0];
  Tensor ones = Tensor::full({batch, 1}, 1.0);
  return add(tape, x, matmul(tape, ones, bias));
}

// Column-broadcast conv bias: b[c,1] * ones[1,len].
Tensor add_col_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
  const Index len = x.shape()[1];
  Tensor ones = Tensor::full({1, len}, 1.0);
  return add(tape, x, matmul(tape, bias, ones));
}

}  // namespace

Tensor mlp_forward(Tape& tape, const ParamStore& store, const std::string& prefix,
                   const MlpSpec& spec, const Tensor& x) {
  if (x.rank() != 2 || x.shape()[1] != spec.input_width())
    throw DimensionError("mlp_forward: input width does not match spec");
  Tensor h = x;
  const std::size_t layers = spec.layer_widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = store.get(prefix + "W" + std::to_string(l));
    const Tensor& b = store.get(prefix + "b" + std::to_string(l));
    h = add_row_bias(tape, matmul(tape, h, w), b);
    const bool last = (l + 1 == layers);
    if (!last)
      h = apply_activation(tape, h, spec.activation);
    else if (spec.has_final_activation)
      h = apply_activation(tape, h, spec.final_activation);
  }
  return h;
}

Tensor grid_to_mu_input(const GridFunction& f, bool space_as_channels) {
  const int ch = f.grid.channels;
  if (space_as_channels && f.grid.dim == 2) {
    const int nx = f.grid.nx, nt = f.grid.nt;
    Eigen::ArrayXd v(static_cast<std::int64_t>(nx) * ch * nt);
    for (int ix = 0; ix < nx; ++ix)
      for (int c = 0; c < ch; ++c)
        for (int j = 0; j < nt; ++j)
          v[(static_cast<std::int64_t>(ix) * ch + c) * nt + j] = f.at(ix, j, c);
    return Tensor::from_array({static_cast<Index>(nx) * ch, nt}, std::move(v));
  }
  const std::int64_t n = f.grid.nodes();
  Eigen::ArrayXd v(ch * n);
  for (int c = 0; c < ch; ++c)
    for (std::int64_t i = 0; i < n; ++i) v[c * n + i] = f.values[i * ch + c];
  return Tensor::from_array({ch, n}, std::move(v));
}

Tensor mu_forward(Tape& tape, const ParamStore& store, const std::string& prefix,
                  const MuNetSpec& spec, const Tensor& y) {
  if (y.rank() != 2 || y.shape()[0] != spec.in_channels || y.shape()[1] != spec.in_length)
    throw DimensionError("mu_forward: input grid does not match spec");

  Tensor h;
  if (spec.is_feedforward()) {
    h = reshape(tape, y, {1, y.size()});
  } else {
    h = y;
    for (std::size_t l = 0; l < spec.channels.size(); ++l) {
      const Tensor& k = store.get(prefix + "K" + std::to_string(l));
      const Tensor& kb = store.get(prefix + "kb" + std::to_string(l));
      h = add_col_bias(tape, conv1d(tape, h, k, spec.strides[l]), kb);
      h = apply_activation(tape, h, spec.activation);
    }
    // Global average pool over the remaining length.
    h = reshape(tape, mean(tape, h, 1), {1, h.shape()[0]});
  }

  MlpSpec head;
  head.layer_widths.push_back(static_cast<int>(h.shape()[1]));
  for (int i = 0; i < spec.hidden_layers; ++i) head.layer_widths.push_back(spec.dense_width);
  head.layer_widths.push_back(1);
  head.activation = spec.activation;
  Tensor z = mlp_forward(tape, store, prefix + "head/", head, h);

  Tensor out;
  switch (spec.final_nonlinearity) {
    case FinalNonlin::softplus: out = softplus(tape, z); break;
    case FinalNonlin::sigmoid_scaled:
      out = mul(tape, sigmoid(tape, z), Tensor::scalar(spec.sigmoid_scale));
      break;
  }
  return reshape(tape, out, {1});
}

}  // namespace lsno
