#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "lsno/data.hpp"
#include "lsno/rng.hpp"

using namespace lsno;

TEST_CASE("solve_ie: value at t=0 is z0 + (1, -1)") {
  IEKernelSpec spec;
  Eigen::Vector2d z0(0.3, -0.8);
  Eigen::MatrixXd y = solve_ie(z0, spec);
  REQUIRE(y.rows() == spec.nt);
  CHECK(y(0, 0) == doctest::Approx(z0[0] + 1.0).epsilon(1e-12));
  CHECK(y(0, 1) == doctest::Approx(z0[1] - 1.0).epsilon(1e-12));
}

TEST_CASE("solve_ie: converged trajectories satisfy their equation") {
  IEKernelSpec spec;
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::Vector2d z0(rng.uniform(-2, 2), rng.uniform(-2, 2));
    Eigen::MatrixXd y = solve_ie(z0, spec);
    CHECK(ie_residual(y, z0, spec) < 10.0 * spec.tolerance);
  }
}

TEST_CASE("solve_ie: Picard residuals shrink monotonically after warmup") {
  IEKernelSpec spec;
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::Vector2d z0(rng.uniform(-2, 2), rng.uniform(-2, 2));
    // Manual fixed-point iterations measured by successive distances.
    const int nt = spec.nt;
    const double h = 1.0 / (nt - 1);
    Eigen::MatrixXd y(nt, 2);
    for (int j = 0; j < nt; ++j)
      y.row(j) = (z0 + Eigen::Vector2d(std::cos(j * h), std::cos(j * h + M_PI))).transpose();

    auto rhs = [&](const Eigen::MatrixXd& cur) {
      IEKernelSpec probe = spec;
      probe.max_iterations = 1;  // unused
      Eigen::MatrixXd out(nt, 2);
      // One RHS application == y + residual direction; use ie_residual's
      // underlying map via a single hand-rolled pass.
      for (int j = 0; j < nt; ++j) {
        const double tj = j * h;
        Eigen::Vector2d acc = Eigen::Vector2d::Zero();
        for (int i = 0; i <= j && j >= 1; ++i) {
          const double w = (i == 0 || i == j) ? h / 2.0 : h;
          const double arg = 2.0 * M_PI * (tj - i * h);
          const double c = std::cos(arg), s = std::sin(arg);
          const double g0 = std::tanh(2.0 * M_PI * cur(i, 0));
          const double g1 = std::tanh(2.0 * M_PI * cur(i, 1));
          acc += w * Eigen::Vector2d(c * g0 - s * g1, -s * g0 - c * g1);
        }
        out.row(j) =
            (acc + z0 + Eigen::Vector2d(std::cos(tj), std::cos(tj + M_PI))).transpose();
      }
      return out;
    };

    std::vector<double> updates;
    for (int it = 0; it < 25; ++it) {
      Eigen::MatrixXd next = rhs(y);
      updates.push_back((next - y).cwiseAbs().maxCoeff());
      y = next;
    }
    // Strictly decreasing after warmup, until the iteration bottoms out in
    // roundoff noise below the solver tolerance.
    for (std::size_t i = 4; i < updates.size() && updates[i - 1] > spec.tolerance; ++i)
      CHECK(updates[i] < updates[i - 1]);
  }
}

TEST_CASE("gen_spirals: deterministic, shared grid, self-consistent residuals") {
  IEKernelSpec spec;
  Dataset a = gen_spirals(3, spec, 7);
  Dataset b = gen_spirals(3, spec, 7);
  REQUIRE(a.count() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK((a.samples[i].target.values - b.samples[i].target.values).abs().maxCoeff() == 0.0);
    CHECK(a.samples[i].target.grid == a.grid);
    // Snapshots are drawn from the trajectory.
    CHECK(a.samples[i].init0[0] == a.samples[i].target.at(0, 0, 0));
    CHECK(a.samples[i].init1[1] == a.samples[i].target.at(0, spec.nt - 1, 1));
  }

  for (int i = 0; i < 3; ++i) {
    Eigen::MatrixXd y(spec.nt, 2);
    for (int j = 0; j < spec.nt; ++j) {
      y(j, 0) = a.samples[i].target.at(0, j, 0);
      y(j, 1) = a.samples[i].target.at(0, j, 1);
    }
    // z0 = y(0) - (1, -1).
    Eigen::Vector2d z0(y(0, 0) - 1.0, y(0, 1) + 1.0);
    CHECK(ie_residual(y, z0, spec) < 10.0 * spec.tolerance);
  }
}

TEST_CASE("solve_burgers: zero initial condition stays zero") {
  BurgersSpec spec;
  spec.s = 64;
  spec.nt = 11;
  Eigen::MatrixXd u = solve_burgers(Eigen::VectorXd::Zero(64), spec);
  CHECK(u.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_burgers: constants are preserved") {
  BurgersSpec spec;
  spec.s = 64;
  spec.nt = 21;
  Eigen::MatrixXd u = solve_burgers(Eigen::VectorXd::Constant(64, 0.73), spec);
  CHECK((u.array() - 0.73).abs().maxCoeff() < 1e-10);
}

TEST_CASE("solve_burgers: spatial mean is conserved") {
  BurgersSpec spec;
  spec.s = 64;
  spec.nt = 21;
  Eigen::VectorXd u0 = burgers_initial_condition(spec, 999);
  Eigen::MatrixXd u = solve_burgers(u0, spec);
  const double mean0 = u.col(0).mean();
  for (int j = 1; j < spec.nt; ++j) CHECK(std::abs(u.col(j).mean() - mean0) < 1e-8);
}

TEST_CASE("burgers initial condition: real-valued by conjugate symmetry") {
  BurgersSpec spec;
  spec.s = 128;
  // The construction enforces a Hermitian spectrum; the inverse transform
  // must come out real. Spot-check by transforming back.
  Eigen::VectorXd u0 = burgers_initial_condition(spec, 4242);
  REQUIRE(u0.size() == 128);
  CHECK(u0.allFinite());
  // Imaginary residue: the spectrum of the generated signal is Hermitian,
  // so its naive complex inverse transform has vanishing imaginary part.
  {
    double worst_imag = 0.0;
    Eigen::VectorXcd spec_c(128);
    for (int m = 0; m < 128; ++m) {
      std::complex<double> acc(0, 0);
      for (int j = 0; j < 128; ++j)
        acc += u0[j] * std::exp(std::complex<double>(0, -2.0 * M_PI * m * j / 128.0));
      spec_c[m] = acc;
    }
    for (int j = 0; j < 128; ++j) {
      std::complex<double> acc(0, 0);
      for (int m = 0; m < 128; ++m)
        acc += spec_c[m] * std::exp(std::complex<double>(0, 2.0 * M_PI * m * j / 128.0));
      acc /= 128.0;
      worst_imag = std::max(worst_imag, std::abs(acc.imag()));
    }
    CHECK(worst_imag < 1e-12);
  }
  // Band limit: modes above cutoff are absent (difference from projecting
  // onto the first cutoff_mode Fourier modes is numerically zero).
  Eigen::VectorXd v = u0;
  double energy_tail = 0.0;
  // Naive DFT of the high modes.
  for (int m = spec.cutoff_mode + 1; m <= 64; ++m) {
    double re = 0.0, im = 0.0;
    for (int j = 0; j < 128; ++j) {
      const double th = 2.0 * M_PI * m * j / 128.0;
      re += v[j] * std::cos(th);
      im -= v[j] * std::sin(th);
    }
    energy_tail += re * re + im * im;
  }
  CHECK(energy_tail < 1e-12);
}

TEST_CASE("solve_burgers: self-convergence between s and 2s") {
  BurgersSpec coarse;
  coarse.s = 64;
  coarse.nt = 11;
  BurgersSpec fine = coarse;
  fine.s = 128;

  // The same band-limited field sampled at both resolutions.
  Eigen::VectorXd u0f = burgers_initial_condition(fine, 31337);
  Eigen::VectorXd u0c(64);
  for (int i = 0; i < 64; ++i) u0c[i] = u0f[2 * i];

  Eigen::MatrixXd uc = solve_burgers(u0c, coarse);
  Eigen::MatrixXd uf = solve_burgers(u0f, fine);
  double worst = 0.0;
  for (int j = 0; j < coarse.nt; ++j)
    for (int i = 0; i < 64; ++i) worst = std::max(worst, std::abs(uc(i, j) - uf(2 * i, j)));
  CHECK(worst < 1e-4);
}

TEST_CASE("gen_burgers: deterministic and validated") {
  BurgersSpec spec;
  spec.s = 32;
  spec.cutoff_mode = 8;
  spec.nt = 9;
  Dataset a = gen_burgers(2, spec, 3);
  Dataset b = gen_burgers(2, spec, 3);
  for (int i = 0; i < 2; ++i)
    CHECK((a.samples[i].target.values - b.samples[i].target.values).abs().maxCoeff() == 0.0);
  CHECK(a.grid.dim == 2);
  CHECK(a.grid.nx == 32);

  BurgersSpec bad = spec;
  bad.s = 48;
  CHECK_THROWS_AS(gen_burgers(1, bad, 0), ParameterError);
  CHECK_THROWS_AS(gen_burgers(0, spec, 0), ParameterError);
}
