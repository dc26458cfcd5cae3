#pragma once

// Truncated-Wigner ensembles of the coupled model via Schwinger bosons:
//   S_+ = a1^dag a2, S_z = (a1^dag a1 - a2^dag a2) / 2, same for b on B.
// Each trajectory follows the Ito SDEs of the positive-diffusion Wigner
// equation, integrated by Euler-Maruyama.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dicke/errors.hpp"
#include "dicke/integrate.hpp"
#include "dicke/model.hpp"
#include "dicke/parallel.hpp"

namespace dicke {

using Amplitude = std::complex<double>;

struct BosonicState {
  Amplitude alpha1, alpha2, beta1, beta2;

  [[nodiscard]] double occupation_a() const { return std::norm(alpha1) + std::norm(alpha2); }
  [[nodiscard]] double occupation_b() const { return std::norm(beta1) + std::norm(beta2); }

  [[nodiscard]] bool finite() const {
    for (const Amplitude& z : {alpha1, alpha2, beta1, beta2})
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
  }

  [[nodiscard]] double max_occupation() const {
    return std::max({std::norm(alpha1), std::norm(alpha2), std::norm(beta1), std::norm(beta2)});
  }

  bool operator==(const BosonicState&) const = default;
};

// Bloch-sphere direction: m = (sin t cos p, sin t sin p, cos t).
struct SpinDirection {
  double theta = 0.0;
  double phi = 0.0;

  static SpinDirection from_vector(double mx, double my, double mz) {
    const double r = std::sqrt(mx * mx + my * my + mz * mz);
    detail::require(r > 0.0, "direction vector must be non-zero");
    return {std::acos(std::clamp(mz / r, -1.0, 1.0)), std::atan2(my, mx)};
  }
};

struct TwaConfig {
  std::size_t n_trajectories = 1000;
  double dt = 1e-3;
  double t_final = 50.0;
  std::uint64_t seed = 0;
  std::size_t record_stride = 100;
  double spin_size = 100.0;
  unsigned workers = 0;
  double blowup_occupation = 100.0;  // in units of S
  double max_blowup_fraction = 0.01;

  void validate() const {
    detail::require(n_trajectories >= 1, "n_trajectories must be >= 1");
    detail::require(dt > 0.0 && std::isfinite(dt), "dt must be > 0");
    detail::require(t_final >= 0.0 && std::isfinite(t_final), "t_final must be >= 0");
    detail::require(record_stride >= 1, "record_stride must be >= 1");
    detail::require(spin_size > 0.0, "spin_size must be > 0");
  }

  [[nodiscard]] std::int64_t steps() const { return std::llround(t_final / dt); }
};

// Reconstructed (m_x, m_y, m_z) of both subsystems in the MeanFieldState layout.
inline MeanFieldState observables(const BosonicState& s, double spin_size) {
  const Amplitude ca = std::conj(s.alpha1) * s.alpha2;
  const Amplitude cb = std::conj(s.beta1) * s.beta2;
  return MeanFieldState::from(ca.real() / spin_size, ca.imag() / spin_size,
                              (std::norm(s.alpha1) - std::norm(s.alpha2)) / (2.0 * spin_size),
                              cb.real() / spin_size, cb.imag() / spin_size,
                              (std::norm(s.beta1) - std::norm(s.beta2)) / (2.0 * spin_size));
}

// Spin-coherent amplitudes along each direction, without vacuum noise.
inline BosonicState coherent_amplitudes(const SpinDirection& a, const SpinDirection& b, double spin_size) {
  const double r = std::sqrt(2.0 * spin_size);
  auto pair = [r](const SpinDirection& d) {
    return std::pair<Amplitude, Amplitude>{r * std::cos(0.5 * d.theta),
                                           r * std::sin(0.5 * d.theta) * std::polar(1.0, d.phi)};
  };
  const auto [a1, a2] = pair(a);
  const auto [b1, b2] = pair(b);
  return {a1, a2, b1, b2};
}

// Coherent amplitudes plus independent vacuum-width Gaussians (variance 1/4
// per real quadrature).
template <class Rng>
BosonicState sample_initial_wigner(const SpinDirection& a, const SpinDirection& b, double spin_size, Rng& rng) {
  detail::require(spin_size > 0.0, "spin_size must be > 0");
  std::normal_distribution<double> g(0.0, 0.5);
  BosonicState s = coherent_amplitudes(a, b, spin_size);
  for (Amplitude* z : {&s.alpha1, &s.alpha2, &s.beta1, &s.beta2}) {
    const double re = g(rng);
    const double im = g(rng);
    *z += Amplitude(re, im);
  }
  return s;
}

inline BosonicState sample_initial_wigner(const SpinDirection& a, const SpinDirection& b, double spin_size,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_initial_wigner(a, b, spin_size, rng);
}

namespace detail {

// Prefactor of the kappa and gamma terms. The rates are per spin, N = 2S.
inline double twa_rate_scale(const ModelParams& p) { return 1.0 / (2.0 * p.spin_size); }

}  // namespace detail

// Deterministic part of the SDEs. `half` is the 1/2 added to each occupation
// (0 gives the large-S limit).
inline BosonicState twa_drift(const BosonicState& s, const ModelParams& p, double half = 0.5) {
  const double c = detail::twa_rate_scale(p);
  const double k = p.kappa * c;
  const double g = p.gamma * c;
  const Amplitude i(0.0, 1.0);
  const double w = 0.5 * p.omega;
  BosonicState d;
  d.alpha1 = -i * (w + g * s.beta1 * std::conj(s.beta2)) * s.alpha2 - k * (std::norm(s.alpha2) + half) * s.alpha1;
  d.alpha2 = -i * (w + g * std::conj(s.beta1) * s.beta2) * s.alpha1 + k * (std::norm(s.alpha1) + half) * s.alpha2;
  d.beta1 = -i * (w + g * s.alpha1 * std::conj(s.alpha2)) * s.beta2 + k * (std::norm(s.beta2) + half) * s.beta1;
  d.beta2 = -i * (w + g * std::conj(s.alpha1) * s.alpha2) * s.beta1 - k * (std::norm(s.beta1) + half) * s.beta2;
  return d;
}

// Noise amplitudes multiplying (dW_{2j-1} + i dW_{2j}) for alpha1, alpha2, beta1, beta2.
inline std::array<double, 4> twa_noise_amplitudes(const BosonicState& s, const ModelParams& p) {
  const double k = 0.5 * p.kappa * detail::twa_rate_scale(p);
  return {std::sqrt(k * (std::norm(s.alpha2) + 0.5)), std::sqrt(k * (std::norm(s.alpha1) + 0.5)),
          std::sqrt(k * (std::norm(s.beta2) + 0.5)), std::sqrt(k * (std::norm(s.beta1) + 0.5))};
}

// Rate of change of the reconstructed observables under the drift alone.
inline MeanFieldState observable_drift(const BosonicState& s, const ModelParams& p, double half = 0.5) {
  const BosonicState d = twa_drift(s, p, half);
  const double S = p.spin_size;
  const Amplitude ca = std::conj(d.alpha1) * s.alpha2 + std::conj(s.alpha1) * d.alpha2;
  const Amplitude cb = std::conj(d.beta1) * s.beta2 + std::conj(s.beta1) * d.beta2;
  const double za = std::real(std::conj(s.alpha1) * d.alpha1) - std::real(std::conj(s.alpha2) * d.alpha2);
  const double zb = std::real(std::conj(s.beta1) * d.beta1) - std::real(std::conj(s.beta2) * d.beta2);
  return MeanFieldState::from(ca.real() / S, ca.imag() / S, za / S, cb.real() / S, cb.imag() / S, zb / S);
}

// One Euler-Maruyama step; `noise` holds eight real Wiener increments of variance dt.
inline BosonicState twa_step(const BosonicState& s, const ModelParams& p, double dt, const std::array<double, 8>& noise) {
  const BosonicState d = twa_drift(s, p);
  const auto amp = twa_noise_amplitudes(s, p);
  BosonicState n;
  n.alpha1 = s.alpha1 + d.alpha1 * dt + amp[0] * Amplitude(noise[0], noise[1]);
  n.alpha2 = s.alpha2 + d.alpha2 * dt + amp[1] * Amplitude(noise[2], noise[3]);
  n.beta1 = s.beta1 + d.beta1 * dt + amp[2] * Amplitude(noise[4], noise[5]);
  n.beta2 = s.beta2 + d.beta2 * dt + amp[3] * Amplitude(noise[6], noise[7]);
  if (!n.finite()) throw NonFiniteState("stochastic step produced a non-finite amplitude");
  return n;
}

struct EnsembleResult {
  std::vector<double> times;
  std::vector<MeanFieldState> mean;
  std::vector<MeanFieldState> standard_error;
  std::vector<double> mean_occupation_a;
  std::vector<double> mean_occupation_b;
  std::size_t n_trajectories = 0;  // requested
  std::size_t n_used = 0;          // after dropping blown-up paths
  std::size_t blown_up = 0;
};

namespace detail {

inline constexpr std::size_t kTwaChannels = 8;  // six observables, two occupations

// Pairwise sum of f(i) for i in [lo, hi); the association order depends only on the range.
template <class F>
double pairwise_sum(std::size_t lo, std::size_t hi, const F& f) {
  if (hi - lo <= 8) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += f(i);
    return s;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(lo, mid, f) + pairwise_sum(mid, hi, f);
}

// Integrates one trajectory into rec (records * kTwaChannels). Returns false on blow-up.
inline bool run_trajectory(const SpinDirection& a, const SpinDirection& b, const ModelParams& p, const TwaConfig& c,
                           std::uint64_t seed, std::size_t records, double* rec) {
  std::mt19937_64 rng(seed);
  BosonicState s = sample_initial_wigner(a, b, c.spin_size, rng);
  std::normal_distribution<double> g(0.0, std::sqrt(c.dt));
  const double limit = c.blowup_occupation * c.spin_size;
  auto store = [&](std::size_t r) {
    const MeanFieldState m = observables(s, c.spin_size);
    double* out = rec + r * kTwaChannels;
    for (std::size_t i = 0; i < 6; ++i) out[i] = m[i];
    out[6] = s.occupation_a();
    out[7] = s.occupation_b();
  };
  store(0);
  const std::int64_t steps = c.steps();
  std::array<double, 8> noise{};
  try {
    for (std::int64_t k = 1; k <= steps; ++k) {
      for (double& n : noise) n = g(rng);
      s = twa_step(s, p, c.dt, noise);
      if (s.max_occupation() > limit) return false;
      if (k % static_cast<std::int64_t>(c.record_stride) == 0) store(static_cast<std::size_t>(k) / c.record_stride);
    }
  } catch (const NonFiniteState&) {
    return false;
  }
  return true;
}

}  // namespace detail

// Runs config.n_trajectories independent paths from Wigner samples around the
// given directions; config.spin_size overrides params.spin_size.
inline EnsembleResult run_ensemble(const SpinDirection& dir_a, const SpinDirection& dir_b, ModelParams params,
                                   const TwaConfig& config) {
  config.validate();
  params.spin_size = config.spin_size;
  params.validate();
  const std::size_t records = static_cast<std::size_t>(config.steps()) / config.record_stride + 1;
  const std::size_t n = config.n_trajectories;
  const std::size_t stride = records * detail::kTwaChannels;
  std::vector<double> data(n * stride);
  std::vector<char> ok(n, 0);
  parallel_for(n, config.workers, [&](std::size_t t) {
    ok[t] = detail::run_trajectory(dir_a, dir_b, params, config, derive_seed(config.seed, t), records,
                                   data.data() + t * stride)
                ? 1
                : 0;
  });

  std::vector<std::size_t> used;
  for (std::size_t t = 0; t < n; ++t)
    if (ok[t]) used.push_back(t);
  EnsembleResult r;
  r.n_trajectories = n;
  r.n_used = used.size();
  r.blown_up = n - used.size();
  if (static_cast<double>(r.blown_up) > config.max_blowup_fraction * static_cast<double>(n) || used.empty())
    throw NonFiniteState(std::to_string(r.blown_up) + " of " + std::to_string(n) +
                         " trajectories blew up (limit " + std::to_string(config.max_blowup_fraction * 100.0) + "%)");

  const double m = static_cast<double>(used.size());
  r.times.resize(records);
  r.mean.resize(records);
  r.standard_error.resize(records);
  r.mean_occupation_a.resize(records);
  r.mean_occupation_b.resize(records);
  for (std::size_t k = 0; k < records; ++k) {
    r.times[k] = static_cast<double>(k * config.record_stride) * config.dt;
    auto at = [&](std::size_t i, std::size_t ch) { return data[used[i] * stride + k * detail::kTwaChannels + ch]; };
    for (std::size_t ch = 0; ch < detail::kTwaChannels; ++ch) {
      const double mu = detail::pairwise_sum(0, used.size(), [&](std::size_t i) { return at(i, ch); }) / m;
      if (ch == 6) {
        r.mean_occupation_a[k] = mu;
        continue;
      }
      if (ch == 7) {
        r.mean_occupation_b[k] = mu;
        continue;
      }
      const double ss = detail::pairwise_sum(0, used.size(), [&](std::size_t i) {
        const double e = at(i, ch) - mu;
        return e * e;
      });
      r.mean[k][ch] = mu;
      r.standard_error[k][ch] = used.size() > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
    }
  }
  return r;
}

// Header `t,mxA_mean,mxA_err,...,mzB_mean,mzB_err`.
inline void write_ensemble_csv(std::ostream& os, const EnsembleResult& r) {
  static constexpr const char* names[] = {"mxA", "myA", "mzA", "mxB", "myB", "mzB"};
  os << 't';
  for (const char* nm : names) os << ',' << nm << "_mean," << nm << "_err";
  os << '\n';
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    os << detail::format_double(r.times[k]);
    for (std::size_t i = 0; i < 6; ++i)
      os << ',' << detail::format_double(r.mean[k][i]) << ',' << detail::format_double(r.standard_error[k][i]);
    os << '\n';
  }
}

inline nlohmann::json to_json(const TwaConfig& c) {
  return {{"n_trajectories", c.n_trajectories},
          {"dt", c.dt},
          {"t_final", c.t_final},
          {"seed", c.seed},
          {"record_stride", c.record_stride},
          {"spin_size", c.spin_size},
          {"blowup_occupation", c.blowup_occupation},
          {"max_blowup_fraction", c.max_blowup_fraction}};
}

inline nlohmann::json ensemble_sidecar(const EnsembleResult& r, const TwaConfig& c, const ModelParams& p,
                                       const SpinDirection& a, const SpinDirection& b) {
  return {{"config", to_json(c)},
          {"params", {{"omega", p.omega}, {"gamma", p.gamma}, {"kappa", p.kappa}}},
          {"direction_a", {{"theta", a.theta}, {"phi", a.phi}}},
          {"direction_b", {{"theta", b.theta}, {"phi", b.phi}}},
          {"seed", c.seed},
          {"n_trajectories", r.n_trajectories},
          {"n_used", r.n_used},
          {"blown_up", r.blown_up},
          {"final_mean_occupation_a", r.mean_occupation_a.empty() ? 0.0 : r.mean_occupation_a.back()},
          {"final_mean_occupation_b", r.mean_occupation_b.empty() ? 0.0 : r.mean_occupation_b.back()}};
}

}  // namespace dicke
