#include <cmath>
#include <complex>
#include <unsupported/Eigen/FFT>

#include "lsno/data.hpp"
#include "lsno/rng.hpp"

namespace lsno {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool power_of_two(int s) { return s >= 2 && (s & (s - 1)) == 0; }

// Signed wavenumber index for FFT bin j of an s-point transform.
int mode_of(int j, int s) { return j <= s / 2 ? j : j - s; }

struct Spectral {
  int s;
  Eigen::FFT<double> fft;
  Eigen::VectorXd k;       // 2 pi m per bin
  Eigen::ArrayXd dealias;  // 2/3-rule mask

  explicit Spectral(int s_) : s(s_), k(s_), dealias(s_) {
    for (int j = 0; j < s; ++j) {
      const int m = mode_of(j, s);
      k[j] = 2.0 * kPi * m;
      dealias[j] = std::abs(m) <= s / 3 ? 1.0 : 0.0;
    }
  }

  Eigen::VectorXcd fwd(const Eigen::VectorXd& u) {
    Eigen::VectorXcd out;
    fft.fwd(out, u);
    return out;
  }

  Eigen::VectorXd inv(const Eigen::VectorXcd& spec) {
    Eigen::VectorXd out;
    Eigen::VectorXcd tmp = spec;
    fft.inv(out, tmp);
    return out;
  }

  // Spectrum of the nonlinear term N(u) = -1/2 d/dx (u^2), dealiased.
  Eigen::VectorXcd nonlinear(const Eigen::VectorXcd& u_hat) {
    Eigen::VectorXd u = inv(u_hat);
    Eigen::VectorXcd sq = fwd(u.array().square().matrix());
    Eigen::VectorXcd out(s);
    const std::complex<double> im(0.0, 1.0);
    for (int j = 0; j < s; ++j) out[j] = -0.5 * im * k[j] * sq[j] * dealias[j];
    return out;
  }
};

}  // namespace

void BurgersSpec::validate() const {
  if (!power_of_two(s)) throw ParameterError("burgers: s must be a power of two");
  if (nt < 2) throw ParameterError("burgers: needs at least 2 snapshots");
  if (nu <= 0.0) throw ParameterError("burgers: nu must be positive");
  if (cutoff_mode < 1 || cutoff_mode > s / 3)
    throw ParameterError("burgers: cutoff_mode must lie in [1, s/3]");
}

Eigen::MatrixXd solve_burgers(const Eigen::VectorXd& u0, const BurgersSpec& spec) {
  spec.validate();
  if (u0.size() != spec.s) throw DimensionError("solve_burgers: u0 length != s");

  Spectral sp(spec.s);
  Eigen::VectorXcd u_hat = sp.fwd(u0);

  const double snap_dt = 1.0 / (spec.nt - 1);
  const double dx = 1.0 / spec.s;
  const double umax = std::max(1.0, 2.0 * u0.cwiseAbs().maxCoeff());
  const int substeps = std::max(4, static_cast<int>(std::ceil(snap_dt * umax / (spec.cfl * dx))));
  const double dt = snap_dt / substeps;

  // Integrating factor absorbs the diffusion exactly per substep.
  Eigen::ArrayXd e_half(spec.s), e_full(spec.s);
  for (int j = 0; j < spec.s; ++j) {
    const double lam = -spec.nu * sp.k[j] * sp.k[j];
    e_half[j] = std::exp(lam * dt / 2.0);
    e_full[j] = std::exp(lam * dt);
  }

  Eigen::MatrixXd out(spec.s, spec.nt);
  out.col(0) = u0;

  for (int snap = 1; snap < spec.nt; ++snap) {
    for (int step = 0; step < substeps; ++step) {
      const Eigen::VectorXcd a = sp.nonlinear(u_hat);
      Eigen::VectorXcd ua = (e_half * (u_hat.array() + dt / 2.0 * a.array())).matrix();
      const Eigen::VectorXcd b = sp.nonlinear(ua);
      Eigen::VectorXcd ub = (e_half * u_hat.array() + dt / 2.0 * b.array()).matrix();
      const Eigen::VectorXcd c = sp.nonlinear(ub);
      Eigen::VectorXcd uc = (e_full * u_hat.array() + dt * e_half * c.array()).matrix();
      const Eigen::VectorXcd d = sp.nonlinear(uc);
      u_hat = (e_full * u_hat.array() +
               dt / 6.0 * (e_full * a.array() + 2.0 * e_half * (b.array() + c.array()) + d.array()))
                  .matrix();
    }
    Eigen::VectorXd u = sp.inv(u_hat);
    if (!u.allFinite())
      throw StabilityError("solve_burgers: solution blew up; reduce the internal step (cfl)");
    out.col(snap) = u;
  }
  return out;
}

Eigen::VectorXd burgers_initial_condition(const BurgersSpec& spec, std::uint64_t sample_seed) {
  spec.validate();
  Rng rng(sample_seed);
  const int s = spec.s;

  // Conjugate-symmetric spectrum: mode k and s-k carry conjugate values, so
  // the inverse transform is real up to roundoff.
  // Cosine/sine amplitudes of mode m are independent N(0, var_m) with
  // var_m = amp * ((2 pi m)^2 + tau^2)^(-decay): the spectrum of the
  // covariance operator amp * (-Laplacian + tau^2)^(-decay) on the periodic
  // unit interval. amp defaults to tau^(2 decay) so the mean mode has unit
  // variance.
  Eigen::VectorXcd spectrum = Eigen::VectorXcd::Zero(s);
  const double sigma0 = std::sqrt(spec.amp * std::pow(spec.tau * spec.tau, -spec.decay));
  spectrum[0] = std::complex<double>(sigma0 * rng.normal(), 0.0);
  for (int m = 1; m <= spec.cutoff_mode; ++m) {
    const double k = 2.0 * kPi * m;
    const double var = spec.amp * std::pow(k * k + spec.tau * spec.tau, -spec.decay);
    const double sigma = std::sqrt(var);
    const std::complex<double> c(sigma * rng.normal(), sigma * rng.normal());
    // fwd() is unnormalized (the 1/s lives in the inverse), so scale up.
    spectrum[m] = static_cast<double>(s) * c / 2.0;
    spectrum[s - m] = static_cast<double>(s) * std::conj(c) / 2.0;
  }
  spectrum[0] *= static_cast<double>(s);

  Spectral sp(s);
  Eigen::VectorXd u0 = sp.inv(spectrum);
  return u0;
}

Dataset gen_burgers(int count, const BurgersSpec& spec, std::uint64_t seed) {
  if (count < 1) throw ParameterError("gen_burgers: count must be >= 1");
  spec.validate();

  Dataset ds;
  ds.grid = GridDesc{.dim = 2, .nx = spec.s, .nt = spec.nt, .channels = 1,
                     .x0 = 0.0, .x1 = 1.0, .t0 = 0.0, .t1 = 1.0};
  ds.meta.generator = "burgers";
  ds.meta.seed = seed;
  ds.meta.params = {ds.grid.x0, ds.grid.x1, ds.grid.t0, ds.grid.t1,
                    spec.nu, spec.tau, spec.decay, spec.amp,
                    static_cast<double>(spec.cutoff_mode)};

  ds.samples.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t sample_seed = Rng::derive(seed, static_cast<std::uint64_t>(i));
    Eigen::VectorXd u0 = burgers_initial_condition(spec, sample_seed);
    Eigen::MatrixXd traj = solve_burgers(u0, spec);
    GridFunction f = GridFunction::zeros(ds.grid);
    for (int ix = 0; ix < spec.s; ++ix)
      for (int j = 0; j < spec.nt; ++j) f.at(ix, j, 0) = traj(ix, j);
    ds.samples.push_back(make_sample(std::move(f)));
  }
  return ds;
}

}  // namespace lsno
