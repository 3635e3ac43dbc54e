#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lsno/nn.hpp"
#include "lsno/verify.hpp"

using namespace lsno;

TEST_CASE("init is deterministic given the seed, biases zero") {
  MlpSpec spec;
  spec.layer_widths = {4, 16, 3};
  ParamStore a, b;
  Rng ra(99), rb(99);
  init_mlp_params(a, "m/", spec, ra);
  init_mlp_params(b, "m/", spec, rb);
  REQUIRE(a.count() == b.count());
  for (std::size_t i = 0; i < a.count(); ++i)
    CHECK((a.tensor_at(i).values() - b.tensor_at(i).values()).abs().maxCoeff() == 0.0);
  CHECK(a.get("m/b0").values().abs().maxCoeff() == 0.0);
  CHECK(a.get("m/b1").values().abs().maxCoeff() == 0.0);
}

TEST_CASE("glorot weights have the expected variance") {
  MlpSpec spec;
  spec.layer_widths = {256, 256};
  ParamStore store;
  Rng rng(5);
  init_mlp_params(store, "m/", spec, rng);
  const Eigen::ArrayXd& w = store.get("m/W0").values();
  const double variance = (w - w.mean()).square().mean();
  const double expected = 2.0 / (256.0 + 256.0);
  CHECK(std::abs(variance - expected) < 0.2 * expected);
}

TEST_CASE("mlp_forward zero parameters give zero output") {
  MlpSpec spec;
  spec.layer_widths = {3, 8, 2};
  ParamStore store;
  store.add("m/W0", {3, 8});
  store.add("m/b0", {1, 8});
  store.add("m/W1", {8, 2});
  store.add("m/b1", {1, 2});
  Tape tape;
  Tensor x = Tensor::full({5, 3}, 0.7);
  Tensor y = mlp_forward(tape, store, "m/", spec, x);
  CHECK(y.values().abs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer reduces to matmul plus bias") {
  MlpSpec spec;
  spec.layer_widths = {2, 2};
  ParamStore store;
  Rng rng(3);
  init_mlp_params(store, "m/", spec, rng);
  store.get("m/b0").mutable_values() << 0.5, -1.0;

  Tape tape;
  Eigen::ArrayXd xv(4);
  xv << 1, 2, 3, 4;
  Tensor x = Tensor::from_array({2, 2}, xv);
  Tensor y = mlp_forward(tape, store, "m/", spec, x);
  Tensor ref = matmul(tape, x, store.get("m/W0"));
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      CHECK(y.values()[r * 2 + c] ==
            doctest::Approx(ref.values()[r * 2 + c] + store.get("m/b0").values()[c])
                .epsilon(1e-15));

  CHECK_THROWS_AS(mlp_forward(tape, store, "m/", spec, Tensor::zeros({2, 3})), DimensionError);
}

TEST_CASE("mlp gradient check") {
  MlpSpec spec;
  spec.layer_widths = {3, 10, 10, 2};
  ParamStore store;
  Rng rng(17);
  init_mlp_params(store, "m/", spec, rng);
  Eigen::ArrayXd xv(4 * 3);
  for (Index i = 0; i < xv.size(); ++i) xv[i] = rng.uniform(-1, 1);
  Tensor x = Tensor::from_array({4, 3}, xv);

  std::vector<Tensor> leaves;
  for (std::size_t i = 0; i < store.count(); ++i) leaves.push_back(store.tensor_at(i));

  auto loss_value = [&]() {
    Tape t;
    t.set_recording(false);
    Tensor y = mlp_forward(t, store, "m/", spec, x);
    return mean(t, mul(t, y, y)).item();
  };
  auto loss_graph = [&]() {
    store.zero_grad();
    Tape t;
    Tensor y = mlp_forward(t, store, "m/", spec, x);
    Tensor loss = mean(t, mul(t, y, y));
    t.backward(loss);
    return loss;
  };
  CHECK(max_grad_rel_error(loss_value, loss_graph, leaves) < 1e-4);
}

TEST_CASE("mu network output is nonnegative for many inputs") {
  MuNetSpec spec;
  spec.channels = {8, 8};
  spec.kernel_widths = {5, 3};
  spec.strides = {2, 2};
  spec.hidden_layers = 1;
  spec.dense_width = 16;
  spec.in_channels = 2;
  spec.in_length = 40;
  ParamStore store;
  Rng rng(23);
  init_mu_params(store, "mu/", spec, rng);

  Tape tape;
  tape.set_recording(false);
  for (int rep = 0; rep < 1000; ++rep) {
    Eigen::ArrayXd v(2 * 40);
    for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-5, 5);
    Tensor y = Tensor::from_array({2, 40}, std::move(v));
    CHECK(mu_forward(tape, store, "mu/", spec, y).item() >= 0.0);
  }
}

TEST_CASE("mu with zeroed head outputs softplus(0) = ln 2") {
  MuNetSpec spec;
  spec.channels = {4};
  spec.kernel_widths = {3};
  spec.strides = {2};
  spec.hidden_layers = 1;
  spec.dense_width = 8;
  spec.in_channels = 1;
  spec.in_length = 20;
  ParamStore store;
  Rng rng(29);
  init_mu_params(store, "mu/", spec, rng);
  // Zero the final dense layer: the head output is exactly 0 before the
  // final nonlinearity regardless of the input.
  store.get("mu/head/W1").mutable_values().setZero();
  store.get("mu/head/b1").mutable_values().setZero();

  Tape tape;
  tape.set_recording(false);
  Eigen::ArrayXd v = Eigen::ArrayXd::Random(20);
  Tensor y = Tensor::from_array({1, 20}, std::move(v));
  CHECK(mu_forward(tape, store, "mu/", spec, y).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mu feed-forward variant (single hidden layer) works") {
  MuNetSpec spec;
  spec.hidden_layers = 1;
  spec.dense_width = 12;
  spec.in_channels = 2;
  spec.in_length = 30;
  REQUIRE(spec.is_feedforward());
  ParamStore store;
  Rng rng(31);
  init_mu_params(store, "mu/", spec, rng);
  Tape tape;
  Eigen::ArrayXd v = Eigen::ArrayXd::Random(60);
  Tensor y = Tensor::from_array({2, 30}, std::move(v));
  CHECK(mu_forward(tape, store, "mu/", spec, y).item() >= 0.0);
}

TEST_CASE("mu gradient check") {
  MuNetSpec spec;
  spec.channels = {4, 4};
  spec.kernel_widths = {3, 3};
  spec.strides = {2, 2};
  spec.hidden_layers = 1;
  spec.dense_width = 6;
  spec.in_channels = 2;
  spec.in_length = 20;
  ParamStore store;
  Rng rng(37);
  init_mu_params(store, "mu/", spec, rng);
  Eigen::ArrayXd v(40);
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1, 1);
  Tensor y = Tensor::from_array({2, 20}, std::move(v));

  std::vector<Tensor> leaves;
  for (std::size_t i = 0; i < store.count(); ++i) leaves.push_back(store.tensor_at(i));
  auto loss_value = [&]() {
    Tape t;
    t.set_recording(false);
    return mu_forward(t, store, "mu/", spec, y).item();
  };
  auto loss_graph = [&]() {
    store.zero_grad();
    Tape t;
    Tensor loss = mu_forward(t, store, "mu/", spec, y);
    t.backward(loss);
    return loss;
  };
  CHECK(max_grad_rel_error(loss_value, loss_graph, leaves) < 1e-4);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ParamStore store;
  Tensor& p = store.add("p", {3});
  p.mutable_values() << 1.0, -2.0, 0.5;
  store.zero_grad();
  const Eigen::ArrayXd before = p.values();
  store.adam_step(AdamConfig{});
  CHECK((p.values() - before).abs().maxCoeff() == 0.0);
  CHECK(store.step_count() == 1);
}

TEST_CASE("adam: first step moves by about lr under unit gradient") {
  ParamStore store;
  Tensor& p = store.add("p", {1});
  p.mutable_values()[0] = 0.0;
  store.zero_grad();
  p.ensure_grad()[0] = 1.0;
  const AdamConfig cfg{.lr = 0.05};
  store.adam_step(cfg);
  CHECK(std::abs(p.values()[0] + cfg.lr) < 1e-6);
}

TEST_CASE("adam: missing gradients are a contract error") {
  ParamStore store;
  store.add("p", {2});
  CHECK_THROWS_AS(store.adam_step(AdamConfig{}), ContractError);
}

TEST_CASE("adam drives a quadratic toward zero") {
  // Oracle: the same scalar recurrence, run independently.
  auto run = [](bool through_store) {
    double x = 1.0, m = 0.0, v = 0.0;
    ParamStore store;
    Tensor& p = store.add("x", {1});
    p.mutable_values()[0] = 1.0;
    const AdamConfig cfg{.lr = 0.05};
    for (int step = 1; step <= 100; ++step) {
      if (through_store) {
        store.zero_grad();
        Tape tape;
        Tensor loss = mul(tape, p, p);
        tape.backward(loss);
        store.adam_step(cfg);
      } else {
        const double g = 2.0 * x;
        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        const double mh = m / (1 - std::pow(cfg.beta1, step));
        const double vh = v / (1 - std::pow(cfg.beta2, step));
        x -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
      }
    }
    return through_store ? store.get("x").values()[0] : x;
  };
  const double oracle = run(false);
  const double actual = run(true);
  CHECK(std::abs(actual - oracle) < 1e-12);
  CHECK(std::abs(actual) < 0.2);
}

TEST_CASE("sgd step follows the raw gradient") {
  ParamStore store;
  Tensor& p = store.add("p", {1});
  p.mutable_values()[0] = 2.0;
  store.zero_grad();
  p.ensure_grad()[0] = 0.5;
  store.sgd_step(0.1);
  CHECK(p.values()[0] == doctest::Approx(1.95).epsilon(1e-15));
}
