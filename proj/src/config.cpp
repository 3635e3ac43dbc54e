#include "lsno/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace lsno {

KvMap parse_kv_text(const std::string& text) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(line.substr(0, eq));
    if (!key.empty()) kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KvMap parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_kv_text(ss.str());
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v, std::size_t from = 0, std::size_t drop = 0) {
  std::string out;
  for (std::size_t i = from; i + drop < v.size(); ++i) {
    if (!out.empty()) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> parse_ints(const std::string& s, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ParameterError("config: bad integer list for " + key);
    }
  }
  return out;
}

const char* act_name(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::softplus: return "softplus";
  }
  return "tanh";
}

Activation parse_act(const std::string& s, const std::string& key) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "softplus") return Activation::softplus;
  throw ParameterError("config: unknown activation for " + key + ": " + s);
}

const char* kind_name(QuadKind k) {
  switch (k) {
    case QuadKind::rectangle_forward: return "rectangle_forward";
    case QuadKind::trapezoid: return "trapezoid";
    case QuadKind::simpson: return "simpson";
  }
  return "trapezoid";
}

}  // namespace

std::string config_to_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "mode = " << (cfg.mode == ProjectionMode::learned_mu ? "learned_mu" : "fixed_mu") << "\n";
  os << "n_basis = " << cfg.n_basis << "\n";
  os << "g_hidden = " << join_ints(cfg.g_spec.layer_widths, 1, 1) << "\n";
  os << "activation = " << act_name(cfg.g_spec.activation) << "\n";
  os << "f_hidden = " << join_ints(cfg.f_spec.layer_widths, 1, 1) << "\n";
  os << "mu_channels = " << join_ints(cfg.mu_spec.channels) << "\n";
  os << "mu_widths = " << join_ints(cfg.mu_spec.kernel_widths) << "\n";
  os << "mu_strides = " << join_ints(cfg.mu_spec.strides) << "\n";
  os << "mu_hidden_layers = " << cfg.mu_spec.hidden_layers << "\n";
  os << "mu_dense_width = " << cfg.mu_spec.dense_width << "\n";
  os << "mu_activation = " << act_name(cfg.mu_spec.activation) << "\n";
  os << "mu_final = "
     << (cfg.mu_spec.final_nonlinearity == FinalNonlin::softplus ? "softplus" : "sigmoid_scaled")
     << "\n";
  os << "mu_sigmoid_scale = " << fmt_double(cfg.mu_spec.sigmoid_scale) << "\n";
  os << "mu_space_as_channels = " << (cfg.mu_spec.space_as_channels ? 1 : 0) << "\n";
  os << "norm_p = " << (cfg.norm.p == kInfNorm ? "inf" : fmt_double(cfg.norm.p)) << "\n";
  os << "norm_rule = " << kind_name(cfg.norm.kind) << "\n";
  os << "eps = " << fmt_double(cfg.eps) << "\n";
  os << "denom_guard = " << fmt_double(cfg.denom_guard) << "\n";
  os << "lr = " << fmt_double(cfg.training.lr) << "\n";
  os << "batch = " << cfg.training.batch_size << "\n";
  os << "epochs = " << cfg.training.epochs << "\n";
  os << "seed = " << cfg.training.seed << "\n";
  os << "val_fraction = " << fmt_double(cfg.training.val_fraction) << "\n";
  os << "early_stop_patience = " << cfg.training.early_stop_patience << "\n";
  os << "optimizer = " << (cfg.training.use_sgd ? "sgd" : "adam") << "\n";
  os << "mask_alternate_times = " << (cfg.training.mask_alternate_times ? 1 : 0) << "\n";
  os << "domain_dim = " << cfg.domain.dim << "\n";
  os << "domain_nx = " << cfg.domain.nx << "\n";
  os << "domain_nt = " << cfg.domain.nt << "\n";
  os << "domain_channels = " << cfg.domain.channels << "\n";
  os << "domain_x0 = " << fmt_double(cfg.domain.x0) << "\n";
  os << "domain_x1 = " << fmt_double(cfg.domain.x1) << "\n";
  os << "domain_t0 = " << fmt_double(cfg.domain.t0) << "\n";
  os << "domain_t1 = " << fmt_double(cfg.domain.t1) << "\n";
  return os.str();
}

ModelConfig config_from_kv(const KvMap& kv, const GridDesc& grid) {
  int n_basis = 16;
  if (auto it = kv.find("n_basis"); it != kv.end()) n_basis = std::stoi(it->second);
  ModelConfig cfg = default_config(grid, n_basis);

  for (const auto& [key, value] : kv) {
    try {
      if (key == "n_basis") {
        // consumed above
      } else if (key == "mode") {
        if (value == "learned_mu") cfg.mode = ProjectionMode::learned_mu;
        else if (value == "fixed_mu") cfg.mode = ProjectionMode::fixed_mu;
        else throw ParameterError("config: unknown mode " + value);
      } else if (key == "g_hidden") {
        std::vector<int> widths = {grid.dim};
        for (int w : parse_ints(value, key)) widths.push_back(w);
        widths.push_back(grid.channels);
        cfg.g_spec.layer_widths = widths;
      } else if (key == "f_hidden") {
        std::vector<int> widths = {cfg.n_basis};
        for (int w : parse_ints(value, key)) widths.push_back(w);
        widths.push_back(cfg.n_basis);
        cfg.f_spec.layer_widths = widths;
      } else if (key == "activation") {
        cfg.g_spec.activation = parse_act(value, key);
        cfg.f_spec.activation = cfg.g_spec.activation;
      } else if (key == "mu_channels") {
        cfg.mu_spec.channels = parse_ints(value, key);
      } else if (key == "mu_widths") {
        cfg.mu_spec.kernel_widths = parse_ints(value, key);
      } else if (key == "mu_strides") {
        cfg.mu_spec.strides = parse_ints(value, key);
      } else if (key == "mu_hidden_layers") {
        cfg.mu_spec.hidden_layers = std::stoi(value);
      } else if (key == "mu_dense_width") {
        cfg.mu_spec.dense_width = std::stoi(value);
      } else if (key == "mu_activation") {
        cfg.mu_spec.activation = parse_act(value, key);
      } else if (key == "mu_final") {
        if (value == "softplus") cfg.mu_spec.final_nonlinearity = FinalNonlin::softplus;
        else if (value == "sigmoid_scaled")
          cfg.mu_spec.final_nonlinearity = FinalNonlin::sigmoid_scaled;
        else throw ParameterError("config: unknown mu_final " + value);
      } else if (key == "mu_sigmoid_scale") {
        cfg.mu_spec.sigmoid_scale = std::stod(value);
      } else if (key == "mu_space_as_channels") {
        cfg.mu_spec.space_as_channels = (value == "1" || value == "true");
      } else if (key == "norm_p") {
        cfg.norm.p = value == "inf" ? kInfNorm : std::stod(value);
      } else if (key == "norm_rule") {
        if (value == "trapezoid") cfg.norm.kind = QuadKind::trapezoid;
        else if (value == "simpson") cfg.norm.kind = QuadKind::simpson;
        else if (value == "rectangle_forward") cfg.norm.kind = QuadKind::rectangle_forward;
        else throw ParameterError("config: unknown norm_rule " + value);
      } else if (key == "eps") {
        cfg.eps = std::stod(value);
      } else if (key == "denom_guard") {
        cfg.denom_guard = std::stod(value);
      } else if (key == "lr") {
        cfg.training.lr = std::stod(value);
      } else if (key == "batch") {
        cfg.training.batch_size = std::stoi(value);
      } else if (key == "epochs") {
        cfg.training.epochs = std::stoi(value);
      } else if (key == "seed") {
        cfg.training.seed = std::stoull(value);
      } else if (key == "val_fraction") {
        cfg.training.val_fraction = std::stod(value);
      } else if (key == "early_stop_patience") {
        cfg.training.early_stop_patience = std::stoi(value);
      } else if (key == "optimizer") {
        if (value == "adam") cfg.training.use_sgd = false;
        else if (value == "sgd") cfg.training.use_sgd = true;
        else throw ParameterError("config: unknown optimizer " + value);
      } else if (key == "mask_alternate_times") {
        cfg.training.mask_alternate_times = (value == "1" || value == "true");
      } else if (key.rfind("domain_", 0) == 0) {
        // accepted for checkpoint round-trips; grid comes from the dataset
      } else if (key == "threads") {
        cfg.training.threads = std::stoi(value);
      } else {
        throw ParameterError("config: unknown key " + key);
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw ParameterError("config: bad value for " + key + ": " + value);
    }
  }
  if (cfg.mu_spec.space_as_channels && grid.dim == 2) {
    cfg.mu_spec.in_channels = grid.nx * grid.channels;
    cfg.mu_spec.in_length = grid.nt;
  } else {
    cfg.mu_spec.space_as_channels = false;  // meaningless on curves
    cfg.mu_spec.in_channels = grid.channels;
    cfg.mu_spec.in_length = grid.nodes();
  }
  cfg.validate();
  return cfg;
}

ModelConfig config_from_text(const std::string& text) {
  KvMap kv = parse_kv_text(text);
  GridDesc grid;
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("checkpoint config missing ") + key);
    return it->second;
  };
  grid.dim = std::stoi(need("domain_dim"));
  grid.nx = std::stoi(need("domain_nx"));
  grid.nt = std::stoi(need("domain_nt"));
  grid.channels = std::stoi(need("domain_channels"));
  grid.x0 = std::stod(need("domain_x0"));
  grid.x1 = std::stod(need("domain_x1"));
  grid.t0 = std::stod(need("domain_t0"));
  grid.t1 = std::stod(need("domain_t1"));
  return config_from_kv(kv, grid);
}

Checkpoint state_to_checkpoint(const ModelState& state) {
  Checkpoint ck;
  ck.config_text = config_to_text(state.config);
  for (std::size_t i = 0; i < state.params.count(); ++i)
    ck.blocks.emplace_back(state.params.name_at(i), state.params.tensor_at(i));
  if (state.net.has_value()) {
    for (int i = 0; i < state.net->size(); ++i) {
      const GridFunction& c = state.net->centers[i];
      ck.blocks.emplace_back("epsnet/center/" + std::to_string(i),
                             Tensor::from_array({c.values.size()}, c.values));
    }
  }
  return ck;
}

ModelState state_from_checkpoint(const Checkpoint& ck) {
  ModelState state;
  state.config = config_from_text(ck.config_text);

  std::vector<GridFunction> centers;
  for (const auto& [name, tensor] : ck.blocks) {
    if (name.rfind("epsnet/center/", 0) == 0) {
      centers.emplace_back(state.config.domain, tensor.values());
    } else {
      Tensor& p = state.params.add(name, tensor.shape());
      p.mutable_values() = tensor.values();
    }
  }
  if (state.config.mode == ProjectionMode::fixed_mu) {
    if (centers.empty()) throw FormatError("fixed-mu checkpoint without net centers");
    EpsNet net;
    net.centers = std::move(centers);
    net.eps = state.config.eps;
    net.norm = state.config.norm;
    state.net = std::move(net);
    if (state.net->size() != state.config.n_basis)
      throw FormatError("checkpoint net size disagrees with n_basis");
  } else if (!centers.empty()) {
    throw FormatError("learned-mu checkpoint carries net centers");
  }
  return state;
}

}  // namespace lsno
