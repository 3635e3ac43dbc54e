#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lsno/leray.hpp"
#include "lsno/verify.hpp"

using namespace lsno;

namespace {

const GridDesc kGrid{.dim = 1, .nx = 1, .nt = 48, .channels = 2,
                     .x0 = 0, .x1 = 0, .t0 = 0, .t1 = 1};
const NormSpec kNorm{2.0, QuadKind::trapezoid};

MlpSpec small_g() {
  MlpSpec g;
  g.layer_widths = {1, 8, 8, 2};
  return g;
}

MuNetSpec small_mu(int channels, std::int64_t length) {
  MuNetSpec mu;
  mu.channels = {4};
  mu.kernel_widths = {3};
  mu.strides = {2};
  mu.hidden_layers = 1;
  mu.dense_width = 8;
  mu.in_channels = channels;
  mu.in_length = length;
  return mu;
}

}  // namespace

TEST_CASE("project_fixed basics") {
  GridFunction x = random_grid_function(kGrid, 1);

  EpsNet one;
  one.eps = 1.0;
  one.norm = kNorm;
  one.centers.push_back(x);  // distance zero, well within eps
  LerayCoefficients q1 = project_fixed(x, one);
  REQUIRE(q1.q.size() == 1);
  CHECK(q1.q[0] == 1.0);

  // Two in-range centers equidistant from x give (0.5, 0.5).
  GridFunction noise = random_grid_function(kGrid, 2);
  noise.values *= 0.1 / lp_norm(noise, kNorm);
  EpsNet two;
  two.eps = 1.0;
  two.norm = kNorm;
  two.centers.push_back(GridFunction(kGrid, x.values + noise.values));
  two.centers.push_back(GridFunction(kGrid, x.values - noise.values));
  LerayCoefficients q2 = project_fixed(x, two);
  CHECK(q2.q[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(q2.q[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("project_fixed raises NotCovered outside the net") {
  EpsNet net;
  net.eps = 0.1;
  net.norm = kNorm;
  net.centers.push_back(random_grid_function(kGrid, 5));
  GridFunction far(kGrid, (net.centers[0].values + 100.0).eval());
  CHECK_THROWS_AS(project_fixed(far, net), NotCoveredError);
}

TEST_CASE("fixed projection bound: reconstruction stays within eps") {
  std::vector<GridFunction> samples;
  for (int i = 0; i < 80; ++i) samples.push_back(random_grid_function(kGrid, 100 + i));
  const double eps = suggest_eps(samples, kNorm);
  EpsNet net = build_greedy(samples, eps, kNorm);

  for (const GridFunction& s : samples) {
    LerayCoefficients lc = project_fixed(s, net);
    CHECK(lc.q.minCoeff() >= 0.0);
    CHECK(std::abs(lc.q.sum() - 1.0) < 1e-9);
    GridFunction proj = GridFunction::zeros(kGrid);
    for (int i = 0; i < net.size(); ++i) proj.values += lc.q[i] * net.centers[i].values;
    CHECK(distance(s, proj, kNorm) < eps);
  }
}

TEST_CASE("project_learned: identical mu parameters give uniform coefficients") {
  const int n = 5;
  MuNetSpec spec = small_mu(kGrid.channels, kGrid.nodes());
  ParamStore store;
  Rng rng(7);
  init_mu_params(store, "mu/0/", spec, rng);
  // Copy network 0 into the others.
  for (int i = 1; i < n; ++i) {
    Rng dummy(0);
    init_mu_params(store, "mu/" + std::to_string(i) + "/", spec, dummy);
    for (const char* leaf : {"K0", "kb0", "head/W0", "head/b0", "head/W1", "head/b1"})
      store.get("mu/" + std::to_string(i) + "/" + leaf).mutable_values() =
          store.get(std::string("mu/0/") + leaf).values();
  }
  Tape tape;
  tape.set_recording(false);
  GridFunction x = random_grid_function(kGrid, 11);
  Tensor q = project_learned(tape, grid_to_mu_input(x), store, spec, n);
  for (int i = 0; i < n; ++i)
    CHECK(q.values()[i] == doctest::Approx(1.0 / n).epsilon(1e-12));
}

TEST_CASE("project_learned: simplex on random inputs") {
  const int n = 6;
  MuNetSpec spec = small_mu(kGrid.channels, kGrid.nodes());
  ParamStore store;
  Rng rng(13);
  for (int i = 0; i < n; ++i) init_mu_params(store, "mu/" + std::to_string(i) + "/", spec, rng);
  Tape tape;
  tape.set_recording(false);
  for (int rep = 0; rep < 200; ++rep) {
    GridFunction x = random_grid_function(kGrid, 4000 + rep);
    Tensor q = project_learned(tape, grid_to_mu_input(x), store, spec, n);
    CHECK(q.values().minCoeff() >= 0.0);
    CHECK(std::abs(q.values().sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("project_learned gradient through the mu networks") {
  const int n = 3;
  const GridDesc grid{.dim = 1, .nx = 1, .nt = 20, .channels = 2,
                      .x0 = 0, .x1 = 0, .t0 = 0, .t1 = 1};
  MuNetSpec spec = small_mu(grid.channels, grid.nodes());
  ParamStore store;
  Rng rng(17);
  for (int i = 0; i < n; ++i) init_mu_params(store, "mu/" + std::to_string(i) + "/", spec, rng);
  GridFunction x = random_grid_function(grid, 23);
  Tensor xin = grid_to_mu_input(x);
  Eigen::ArrayXd wv(n);
  for (int i = 0; i < n; ++i) wv[i] = rng.uniform(-1, 1);
  Tensor w = Tensor::from_array({n}, std::move(wv));

  std::vector<Tensor> leaves;
  for (std::size_t i = 0; i < store.count(); ++i) leaves.push_back(store.tensor_at(i));
  auto loss_value = [&]() {
    Tape t;
    t.set_recording(false);
    return sum(t, mul(t, project_learned(t, xin, store, spec, n), w)).item();
  };
  auto loss_graph = [&]() {
    store.zero_grad();
    Tape t;
    Tensor loss = sum(t, mul(t, project_learned(t, xin, store, spec, n), w));
    t.backward(loss);
    return loss;
  };
  CHECK(max_grad_rel_error(loss_value, loss_graph, leaves) < 1e-4);
}

TEST_CASE("evaluate_basis shape and zero network") {
  MlpSpec g = small_g();
  ParamStore store;
  for (const auto& [name, shape] :
       std::vector<std::pair<std::string, Shape>>{{"g/0/W0", {1, 8}}, {"g/0/b0", {1, 8}},
                                                  {"g/0/W1", {8, 8}}, {"g/0/b1", {1, 8}},
                                                  {"g/0/W2", {8, 2}}, {"g/0/b2", {1, 2}}})
    store.add(name, shape);
  Tape tape;
  Tensor points = grid_points(kGrid);
  Tensor field = evaluate_basis(tape, store, g, 1, points);
  REQUIRE(field.shape() == Shape{1, kGrid.nodes(), 2});
  CHECK(field.values().abs().maxCoeff() == 0.0);
}

TEST_CASE("pointwise consistency: subsampled evaluation equals direct evaluation") {
  MlpSpec g = small_g();
  ParamStore store;
  Rng rng(29);
  init_mlp_params(store, "g/0/", g, rng);
  Tape tape;
  tape.set_recording(false);

  Tensor all = grid_points(kGrid);
  Tensor on_all = evaluate_basis(tape, store, g, 1, all);

  // Every 4th node, evaluated directly.
  const Index m = kGrid.nodes() / 4;
  Eigen::ArrayXd sub(m);
  for (Index i = 0; i < m; ++i) sub[i] = all.values()[4 * i];
  Tensor sub_pts = Tensor::from_array({m, 1}, std::move(sub));
  Tensor on_sub = evaluate_basis(tape, store, g, 1, sub_pts);

  for (Index i = 0; i < m; ++i)
    for (Index c = 0; c < 2; ++c)
      CHECK(on_sub.values()[i * 2 + c] == on_all.values()[4 * i * 2 + c]);  // bit-exact
}

TEST_CASE("reconstruct linearity") {
  const int n = 4;
  MlpSpec g = small_g();
  ParamStore store;
  Rng rng(31);
  for (int i = 0; i < n; ++i) init_mlp_params(store, "g/" + std::to_string(i) + "/", g, rng);

  Eigen::VectorXd b1(n), b2(n);
  for (int i = 0; i < n; ++i) {
    b1[i] = rng.uniform(-1, 1);
    b2[i] = rng.uniform(-1, 1);
  }

  GridFunction r1 = reconstruct(OutputCoefficients{b1}, store, g, n, kGrid);
  GridFunction r2 = reconstruct(OutputCoefficients{b2}, store, g, n, kGrid);
  GridFunction r12 = reconstruct(OutputCoefficients{b1 + b2}, store, g, n, kGrid);
  CHECK((r12.values - (r1.values + r2.values)).abs().maxCoeff() < 1e-12);

  GridFunction zero = reconstruct(OutputCoefficients{Eigen::VectorXd::Zero(n)}, store, g, n, kGrid);
  CHECK(zero.values.abs().maxCoeff() == 0.0);

  // One-hot recovers g_j exactly.
  Tape tape;
  tape.set_recording(false);
  Tensor all = evaluate_basis(tape, store, g, n, grid_points(kGrid));
  Eigen::VectorXd e2 = Eigen::VectorXd::Zero(n);
  e2[2] = 1.0;
  GridFunction g2 = reconstruct(OutputCoefficients{e2}, store, g, n, kGrid);
  for (Index i = 0; i < kGrid.nodes() * 2; ++i)
    CHECK(g2.values[i] == all.values()[2 * kGrid.nodes() * 2 + i]);

  // Power-of-two scaling is exact.
  GridFunction rs = reconstruct(OutputCoefficients{(2.0 * b1).eval()}, store, g, n, kGrid);
  CHECK((rs.values - 2.0 * r1.values).abs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(reconstruct(OutputCoefficients{Eigen::VectorXd::Zero(n + 1)}, store, g, n, kGrid),
                  DimensionError);
}

TEST_CASE("reconstruction on a finer grid restricts bit-exactly") {
  const int n = 3;
  MlpSpec g = small_g();
  ParamStore store;
  Rng rng(37);
  for (int i = 0; i < n; ++i) init_mlp_params(store, "g/" + std::to_string(i) + "/", g, rng);
  Eigen::VectorXd b(n);
  b << 0.3, -1.1, 0.7;

  GridFunction coarse = reconstruct(OutputCoefficients{b}, store, g, n, kGrid);
  GridDesc fine = kGrid;
  fine.nt = 2 * (kGrid.nt - 1) + 1;
  GridFunction dense = reconstruct(OutputCoefficients{b}, store, g, n, fine);

  for (int j = 0; j < kGrid.nt; ++j)
    for (int c = 0; c < 2; ++c)
      CHECK(coarse.at(0, j, c) == dense.at(0, 2 * j, c));  // bit-exact
}
