#include "lsno/verify.hpp"

#include <cmath>

#include "lsno/epsnet.hpp"
#include "lsno/leray.hpp"
#include "lsno/model.hpp"
#include "lsno/nn.hpp"
#include "lsno/quadrature.hpp"
#include "lsno/rng.hpp"

namespace lsno {

double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

double max_grad_rel_error(const std::function<double()>& loss_value,
                          const std::function<Tensor()>& loss_graph,
                          const std::vector<Tensor>& leaves, double fd_step, int probe_limit) {
  Tensor loss = loss_graph();
  double max_rel = 0.0;
  for (const Tensor& leaf : leaves) {
    if (!leaf.has_grad()) throw ContractError("gradient check: leaf grad not populated");
    const Index n = leaf.size();
    const Index step = (probe_limit > 0 && n > probe_limit) ? n / probe_limit : 1;
    for (Index i = 0; i < n; i += step) {
      Eigen::ArrayXd& v = const_cast<Tensor&>(leaf).mutable_values();
      const double keep = v[i];
      v[i] = keep + fd_step;
      const double fp = loss_value();
      v[i] = keep - fd_step;
      const double fm = loss_value();
      v[i] = keep;
      const double fd = (fp - fm) / (2.0 * fd_step);
      const double rel = std::abs(leaf.grad()[i] - fd) / (std::abs(fd) + 1e-8);
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

SmoothFunction random_smooth_function(std::uint64_t seed, int modes) {
  Rng rng(seed);
  std::vector<double> amp(modes), freq(modes), phase(modes);
  double bound = 0.0;
  for (int j = 0; j < modes; ++j) {
    amp[j] = rng.uniform(-1.0, 1.0);
    freq[j] = 1.0 + static_cast<double>(rng.next_u64() % 4);  // 1..4 cycles
    phase[j] = rng.uniform(0.0, 6.283185307179586);
    bound += std::abs(amp[j]) * 2.0 * 3.14159265358979323846 * freq[j];
  }
  const double offset = rng.uniform(-1.0, 1.0);
  SmoothFunction sf;
  sf.derivative_bound = bound;
  sf.f = [amp, freq, phase, offset, modes](double t) {
    double y = offset;
    for (int j = 0; j < modes; ++j)
      y += amp[j] * std::sin(2.0 * 3.14159265358979323846 * freq[j] * t + phase[j]);
    return y;
  };
  return sf;
}

GridFunction random_grid_function(const GridDesc& grid, std::uint64_t seed) {
  GridFunction f = GridFunction::zeros(grid);
  for (int c = 0; c < grid.channels; ++c) {
    SmoothFunction sf = random_smooth_function(Rng::derive(seed, c));
    for (int ix = 0; ix < grid.nx; ++ix)
      for (int j = 0; j < grid.nt; ++j) f.at(ix, j, c) = sf.f(grid.node_t(j));
  }
  return f;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad, double lo = -1.0,
                     double hi = 1.0) {
  Eigen::ArrayXd v(shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(lo, hi);
  return Tensor::from_array(std::move(shape), std::move(v), requires_grad);
}

// Weighted-sum head turning any tensor into a scalar with distinct
// per-entry sensitivities.
Tensor weighted_sum(Tape& tape, const Tensor& t, const Tensor& w) {
  return sum(tape, mul(tape, t, w));
}

PropertyResult grad_property(const std::string& name, double threshold,
                             const std::function<Tensor(Tape&)>& graph,
                             const std::vector<Tensor>& leaves, int probe_limit = 0) {
  auto loss_value = [&]() {
    Tape t;
    t.set_recording(false);
    return graph(t).item();
  };
  auto loss_graph = [&]() {
    for (const Tensor& leaf : leaves) {
      leaf.ensure_grad();
      leaf.zero_grad();
    }
    Tape t;
    Tensor loss = graph(t);
    t.backward(loss);
    return loss;
  };
  const double err = max_grad_rel_error(loss_value, loss_graph, leaves, 1e-5, probe_limit);
  PropertyResult r;
  r.name = name;
  r.pass = err < threshold;
  r.margin = threshold - err;
  r.detail = "max relative error " + std::to_string(err) + " (threshold " +
             std::to_string(threshold) + ")";
  return r;
}

void add_primitive_grad_checks(std::vector<PropertyResult>& out, std::uint64_t seed) {
  Rng rng(seed);

  {
    Tensor a = random_tensor({3, 4}, rng, true);
    Tensor b = random_tensor({4, 2}, rng, true);
    Tensor w = random_tensor({3, 2}, rng, false);
    out.push_back(grad_property(
        "gradient/matmul", 1e-4,
        [&](Tape& t) { return weighted_sum(t, matmul(t, a, b), w); }, {a, b}));
  }
  {
    Tensor x = random_tensor({2, 12}, rng, true);
    Tensor k = random_tensor({3, 2, 3}, rng, true);
    Tensor w = random_tensor({3, 5}, rng, false);
    out.push_back(grad_property(
        "gradient/conv1d", 1e-4,
        [&](Tape& t) { return weighted_sum(t, conv1d(t, x, k, 2), w); }, {x, k}));
  }
  {
    Tensor a = random_tensor({6}, rng, true);
    Tensor b = random_tensor({6}, rng, true);
    Tensor s = random_tensor({1}, rng, true);
    Tensor w = random_tensor({6}, rng, false);
    out.push_back(grad_property(
        "gradient/add", 1e-4,
        [&](Tape& t) { return weighted_sum(t, add(t, add(t, a, b), s), w); }, {a, b, s}));
    out.push_back(grad_property(
        "gradient/sub", 1e-4,
        [&](Tape& t) { return weighted_sum(t, sub(t, sub(t, a, b), s), w); }, {a, b, s}));
    out.push_back(grad_property(
        "gradient/mul", 1e-4,
        [&](Tape& t) { return weighted_sum(t, mul(t, mul(t, a, b), s), w); }, {a, b, s}));
  }
  {
    Rng r2(Rng::derive(seed, 11));
    Tensor a = random_tensor({6}, r2, true);
    Tensor b = random_tensor({6}, r2, true, 0.5, 2.0);  // divisor away from zero
    Tensor s = random_tensor({1}, r2, true, 0.5, 2.0);
    Tensor w = random_tensor({6}, r2, false);
    out.push_back(grad_property(
        "gradient/div", 1e-4,
        [&](Tape& t) { return weighted_sum(t, div(t, div(t, a, b), s), w); }, {a, b, s}));
  }

  struct UnaryCase {
    const char* name;
    std::function<Tensor(Tape&, const Tensor&)> apply;
    double lo, hi;
  };
  const UnaryCase cases[] = {
      {"gradient/tanh", [](Tape& t, const Tensor& x) { return tanh(t, x); }, -2.0, 2.0},
      {"gradient/sigmoid", [](Tape& t, const Tensor& x) { return sigmoid(t, x); }, -2.0, 2.0},
      {"gradient/relu", [](Tape& t, const Tensor& x) { return relu(t, x); }, 0.2, 2.0},
      {"gradient/softplus", [](Tape& t, const Tensor& x) { return softplus(t, x); }, -2.0, 2.0},
      {"gradient/abs", [](Tape& t, const Tensor& x) { return abs(t, x); }, 0.3, 2.0},
      {"gradient/pow_p", [](Tape& t, const Tensor& x) { return pow_p(t, x, 1.7); }, 0.2, 2.0},
      {"gradient/clamp_min",
       [](Tape& t, const Tensor& x) { return clamp_min(t, x, 0.1); }, 0.3, 2.0},
  };
  int stream = 20;
  for (const UnaryCase& uc : cases) {
    Rng r2(Rng::derive(seed, stream++));
    Tensor x = random_tensor({8}, r2, true, uc.lo, uc.hi);
    Tensor w = random_tensor({8}, r2, false);
    out.push_back(grad_property(
        uc.name, 1e-4, [&](Tape& t) { return weighted_sum(t, uc.apply(t, x), w); }, {x}));
  }

  {
    Rng r2(Rng::derive(seed, 40));
    Tensor x = random_tensor({3, 4}, r2, true);
    Tensor w0 = random_tensor({4}, r2, false);
    Tensor w1 = random_tensor({3}, r2, false);
    out.push_back(grad_property(
        "gradient/sum_axis", 1e-4,
        [&](Tape& t) { return weighted_sum(t, sum(t, x, 0), w0); }, {x}));
    out.push_back(grad_property(
        "gradient/mean_axis", 1e-4,
        [&](Tape& t) { return weighted_sum(t, mean(t, x, 1), w1); }, {x}));
    out.push_back(grad_property(
        "gradient/mean", 1e-4, [&](Tape& t) { return mean(t, mul(t, x, x)); }, {x}));
  }
  {
    Rng r2(Rng::derive(seed, 41));
    Tensor a = random_tensor({2, 3}, r2, true);
    Tensor b = random_tensor({1, 3}, r2, true);
    Tensor w = random_tensor({3, 3}, r2, false);
    out.push_back(grad_property(
        "gradient/concat", 1e-4,
        [&](Tape& t) { return weighted_sum(t, concat(t, {a, b}), w); }, {a, b}));
    Tensor w2 = random_tensor({6}, r2, false);
    out.push_back(grad_property(
        "gradient/reshape", 1e-4,
        [&](Tape& t) { return weighted_sum(t, reshape(t, a, {6}), w2); }, {a}));
  }
}

void add_network_grad_checks(std::vector<PropertyResult>& out, std::uint64_t seed) {
  {
    Rng rng(Rng::derive(seed, 50));
    MlpSpec spec;
    spec.layer_widths = {3, 8, 8, 2};
    ParamStore store;
    init_mlp_params(store, "net/", spec, rng);
    Tensor x = random_tensor({5, 3}, rng, false);
    std::vector<Tensor> leaves;
    for (std::size_t i = 0; i < store.count(); ++i) leaves.push_back(store.tensor_at(i));
    out.push_back(grad_property(
        "gradient/mlp", 1e-4,
        [&](Tape& t) {
          Tensor y = mlp_forward(t, store, "net/", spec, x);
          return mean(t, mul(t, y, y));
        },
        leaves));
  }
  {
    Rng rng(Rng::derive(seed, 51));
    MuNetSpec spec;
    spec.channels = {4, 4};
    spec.kernel_widths = {3, 3};
    spec.strides = {2, 2};
    spec.hidden_layers = 1;
    spec.dense_width = 6;
    spec.in_channels = 2;
    spec.in_length = 20;
    ParamStore store;
    init_mu_params(store, "mu/", spec, rng);
    Tensor y = random_tensor({2, 20}, rng, false);
    std::vector<Tensor> leaves;
    for (std::size_t i = 0; i < store.count(); ++i) leaves.push_back(store.tensor_at(i));
    out.push_back(grad_property(
        "gradient/mu_net", 1e-4,
        [&](Tape& t) { return mu_forward(t, store, "mu/", spec, y); }, leaves));
  }
  {
    // End-to-end: tiny learned-mode model, probing 50 parameters.
    GridDesc grid{.dim = 1, .nx = 1, .nt = 12, .channels = 2,
                  .x0 = 0.0, .x1 = 0.0, .t0 = 0.0, .t1 = 1.0};
    ModelConfig cfg = default_config(grid, 3);
    cfg.g_spec.layer_widths = {1, 6, 6, 2};
    cfg.f_spec.layer_widths = {3, 8, 3};
    cfg.mu_spec.channels = {4};
    cfg.mu_spec.kernel_widths = {3};
    cfg.mu_spec.strides = {2};
    cfg.mu_spec.dense_width = 6;
    cfg.training.seed = Rng::derive(seed, 52);
    ModelState state = init_model(cfg);

    Rng rng(Rng::derive(seed, 53));
    GridFunction target = random_grid_function(grid, rng.next_u64());
    Sample sample = make_sample(target);

    std::vector<Tensor> leaves;
    for (std::size_t i = 0; i < state.params.count(); ++i)
      leaves.push_back(state.params.tensor_at(i));
    Tensor target_row = Tensor::from_array({1, grid.value_count()}, sample.target.values);
    out.push_back(grad_property(
        "gradient/end_to_end_loss", 1e-3,
        [&](Tape& t) {
          Tensor psi = forward_batch(t, state, {&sample}, grid);
          return loss_mse(t, psi, target_row);
        },
        leaves, /*probe_limit=*/3));
  }
}

void add_quadrature_checks(std::vector<PropertyResult>& out, std::uint64_t seed) {
  {
    PropertyResult r;
    r.name = "quadrature/exactness";
    double worst = 0.0;
    Rng rng(Rng::derive(seed, 60));
    for (int rep = 0; rep < 10; ++rep) {
      const double c0 = rng.uniform(-2, 2), c1 = rng.uniform(-2, 2), c2 = rng.uniform(-2, 2),
                   c3 = rng.uniform(-2, 2);
      QuadratureRule trap = make_rule(QuadKind::trapezoid, 9, 0.0, 1.0);
      Eigen::VectorXd lin(trap.nodes.size());
      for (Eigen::Index i = 0; i < lin.size(); ++i) lin[i] = c0 + c1 * trap.nodes[i];
      worst = std::max(worst, std::abs(integrate(lin, trap) - (c0 + c1 / 2.0)));

      QuadratureRule simp = make_rule(QuadKind::simpson, 9, 0.0, 1.0);
      Eigen::VectorXd cub(simp.nodes.size());
      for (Eigen::Index i = 0; i < cub.size(); ++i) {
        const double t = simp.nodes[i];
        cub[i] = c0 + c1 * t + c2 * t * t + c3 * t * t * t;
      }
      const double exact = c0 + c1 / 2.0 + c2 / 3.0 + c3 / 4.0;
      worst = std::max(worst, std::abs(integrate(cub, simp) - exact));
    }
    r.pass = worst < 1e-12;
    r.margin = 1e-12 - worst;
    r.detail = "worst polynomial defect " + std::to_string(worst);
    out.push_back(r);
  }
  {
    PropertyResult r;
    r.name = "quadrature/rectangle_error_bound";
    double min_margin = std::numeric_limits<double>::infinity();
    bool all_ok = true;
    for (int fn = 0; fn < 20; ++fn) {
      SmoothFunction sf = random_smooth_function(Rng::derive(seed, 70 + fn));
      for (int k : {16, 64, 256}) {
        QuadratureRule rect = make_rule(QuadKind::rectangle_forward, k, 0.0, 1.0);
        Eigen::VectorXd v(k);
        for (int i = 0; i < k; ++i) v[i] = sf.f(rect.nodes[i]);
        const double approx = integrate(v, rect);

        QuadratureRule ref_rule = make_rule(QuadKind::simpson, 64 * k + 1, 0.0, 1.0);
        Eigen::VectorXd rv(ref_rule.nodes.size());
        for (Eigen::Index i = 0; i < rv.size(); ++i) rv[i] = sf.f(ref_rule.nodes[i]);
        const double reference = integrate(rv, ref_rule);

        const double bound = error_bound(k, 0.0, 1.0, SmoothnessSpec{sf.derivative_bound, 1, 1.0});
        const double err = std::abs(approx - reference);
        all_ok = all_ok && err <= bound;
        min_margin = std::min(min_margin, bound - err);
      }
    }
    r.pass = all_ok;
    r.margin = min_margin;
    r.detail = "min (bound - error) over 20 functions x k in {16,64,256} = " +
               std::to_string(min_margin);
    out.push_back(r);
  }
}

void add_net_and_projection_checks(std::vector<PropertyResult>& out, std::uint64_t seed,
                                   double eps_override) {
  const GridDesc grid{.dim = 1, .nx = 1, .nt = 64, .channels = 2,
                      .x0 = 0.0, .x1 = 0.0, .t0 = 0.0, .t1 = 1.0};
  const NormSpec norm{2.0, QuadKind::trapezoid};

  std::vector<GridFunction> samples;
  samples.reserve(200);
  for (int i = 0; i < 200; ++i)
    samples.push_back(random_grid_function(grid, Rng::derive(seed, 1000 + i)));

  const double eps = eps_override > 0.0 ? eps_override : suggest_eps(samples, norm);
  EpsNet net = build_greedy(samples, eps, norm);

  {
    PropertyResult r;
    r.name = "epsnet/coverage";
    CoverageReport report = verify_coverage(samples, net);
    // Independent scan: every sample within eps of some center.
    double worst = 0.0;
    for (const GridFunction& s : samples) {
      double best = std::numeric_limits<double>::infinity();
      for (const GridFunction& c : net.centers) best = std::min(best, distance(s, c, norm));
      worst = std::max(worst, best);
    }
    r.pass = report.uncovered.empty() && report.m_hat > 0.0 && worst <= eps;
    r.margin = eps - worst;
    r.detail = "n=" + std::to_string(net.size()) + ", m_hat=" + std::to_string(report.m_hat) +
               ", M_hat=" + std::to_string(report.M_hat) +
               ", max dist to net=" + std::to_string(worst) + " (eps=" + std::to_string(eps) + ")";
    out.push_back(r);
  }
  {
    PropertyResult r;
    r.name = "leray/projection_bound";
    double min_margin = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (const GridFunction& s : samples) {
      LerayCoefficients lc = project_fixed(s, net);
      GridFunction proj = GridFunction::zeros(grid);
      for (int i = 0; i < net.size(); ++i) proj.values += lc.q[i] * net.centers[i].values;
      const double d = distance(s, proj, norm);
      ok = ok && d < net.eps;
      min_margin = std::min(min_margin, net.eps - d);
    }
    r.pass = ok;
    r.margin = min_margin;
    r.detail = "min (eps - ||x - P_n x||) over 200 samples = " + std::to_string(min_margin);
    out.push_back(r);
  }
  {
    PropertyResult r;
    r.name = "leray/simplex_fixed";
    double worst_sum = 0.0, worst_neg = 0.0;
    Rng rng(Rng::derive(seed, 2000));
    for (int i = 0; i < 1000; ++i) {
      // Small perturbation of a covered sample stays covered.
      const GridFunction& base = samples[rng.next_u64() % samples.size()];
      GridFunction x = base;
      GridFunction noise = random_grid_function(grid, rng.next_u64());
      const double nn = lp_norm(noise, norm);
      if (nn > 0) x.values += noise.values * (0.04 * net.eps / nn);
      LerayCoefficients lc = project_fixed(x, net);
      worst_sum = std::max(worst_sum, std::abs(lc.q.sum() - 1.0));
      worst_neg = std::max(worst_neg, -lc.q.minCoeff());
    }
    r.pass = worst_sum < 1e-9 && worst_neg <= 0.0;
    r.margin = 1e-9 - worst_sum;
    r.detail = "max |sum q - 1| = " + std::to_string(worst_sum) +
               ", most negative coefficient = " + std::to_string(worst_neg);
    out.push_back(r);
  }
  {
    PropertyResult r;
    r.name = "leray/simplex_learned";
    const int n = 4;
    MuNetSpec spec;
    spec.channels = {4};
    spec.kernel_widths = {3};
    spec.strides = {2};
    spec.hidden_layers = 1;
    spec.dense_width = 8;
    spec.in_channels = grid.channels;
    spec.in_length = grid.nodes();
    Rng rng(Rng::derive(seed, 3000));
    ParamStore store;
    for (int i = 0; i < n; ++i)
      init_mu_params(store, "mu/" + std::to_string(i) + "/", spec, rng);

    double worst_sum = 0.0, worst_neg = 0.0;
    for (int i = 0; i < 1000; ++i) {
      GridFunction x = random_grid_function(grid, Rng::derive(seed, 4000 + i));
      Tape tape;
      tape.set_recording(false);
      Tensor q = project_learned(tape, grid_to_mu_input(x), store, spec, n);
      worst_sum = std::max(worst_sum, std::abs(q.values().sum() - 1.0));
      worst_neg = std::max(worst_neg, -q.values().minCoeff());
    }
    r.pass = worst_sum < 1e-9 && worst_neg <= 0.0;
    r.margin = 1e-9 - worst_sum;
    r.detail = "max |sum q - 1| = " + std::to_string(worst_sum) +
               ", most negative coefficient = " + std::to_string(worst_neg);
    out.push_back(r);
  }
}

}  // namespace

std::vector<PropertyResult> run_property_suite(std::uint64_t seed, double eps_override) {
  std::vector<PropertyResult> out;
  add_primitive_grad_checks(out, seed);
  add_network_grad_checks(out, seed);
  add_quadrature_checks(out, seed);
  add_net_and_projection_checks(out, seed, eps_override);
  return out;
}

}  // namespace lsno
