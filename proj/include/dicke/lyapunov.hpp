#pragma once

// Largest Lyapunov exponent by the two-trajectory (Benettin) method and the
// melted / time-crystal / chaotic classification derived from it.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <utility>
#include <vector>

#include "dicke/errors.hpp"
#include "dicke/integrate.hpp"
#include "dicke/model.hpp"

namespace dicke {

enum class Phase { Melted, TimeCrystal, Chaotic };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Melted: return "Melted";
    case Phase::TimeCrystal: return "TimeCrystal";
    case Phase::Chaotic: return "Chaotic";
  }
  return "?";
}

struct LyapunovConfig {
  double horizon = 2000.0;
  double renorm_interval = 1.0;
  double separation = 1e-8;
  double transient_cut = 200.0;
  double zero_band = 5e-3;
  std::uint64_t seed = 0;
  double dt = 1e-2;
  bool record_running = true;

  void validate() const {
    detail::require(dt > 0.0 && std::isfinite(dt), "lyapunov dt must be > 0");
    detail::require(renorm_interval >= dt, "renorm_interval must be >= dt");
    detail::require(horizon > transient_cut && transient_cut >= 0.0,
                    "need horizon > transient_cut >= 0");
    detail::require(horizon - transient_cut >= renorm_interval,
                    "averaging window shorter than one renormalization interval");
    detail::require(separation > 0.0 && separation < 1e-2, "separation must lie in (0, 1e-2)");
    detail::require(zero_band > 0.0, "zero_band must be > 0");
  }
};

struct LyapunovResult {
  double lambda_max = 0.0;
  Phase phase = Phase::TimeCrystal;
  // (t, partial estimate) after every renormalization past the transient.
  std::vector<std::pair<double, double>> running_estimate;
};

inline Phase classify_phase(double lambda_max, double zero_band) {
  detail::require(std::isfinite(lambda_max), "lambda_max must be finite");
  if (lambda_max > zero_band) return Phase::Chaotic;
  if (lambda_max < -zero_band) return Phase::Melted;
  return Phase::TimeCrystal;
}

namespace detail {

// Removes the radial component of v on each subsystem, so a perturbation
// never changes the conserved spin lengths.
inline MeanFieldState project_tangent(const MeanFieldState& ref, MeanFieldState v) {
  for (std::size_t b = 0; b < 6; b += 3) {
    double r2 = 0.0, dot = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      r2 += ref[b + c] * ref[b + c];
      dot += ref[b + c] * v[b + c];
    }
    if (r2 > 0.0)
      for (std::size_t c = 0; c < 3; ++c) v[b + c] -= dot / r2 * ref[b + c];
  }
  return v;
}

inline double norm(const MeanFieldState& v) { return distance(v, MeanFieldState{}); }

}  // namespace detail

// Perturbations live in the tangent space of the product of spheres: a radial
// offset would sit on a neighbouring invariant sphere and never contract,
// masking negative exponents.
inline LyapunovResult largest_lyapunov(const MeanFieldState& initial, const ModelParams& params,
                                       const LyapunovConfig& config) {
  params.validate();
  config.validate();
  validate_initial(initial);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MeanFieldState dir;
  double n = 0.0;
  while (n < 1e-6) {
    for (double& c : dir.m) c = normal(rng);
    dir = detail::project_tangent(initial, dir);
    n = detail::norm(dir);
  }

  const double d0 = config.separation;
  MeanFieldState ref = initial;
  MeanFieldState pert = initial + (d0 / n) * dir;

  const auto steps_per_renorm = std::max<std::int64_t>(1, std::llround(config.renorm_interval / config.dt));
  const double interval = static_cast<double>(steps_per_renorm) * config.dt;
  const auto renorms = static_cast<std::int64_t>(std::floor(config.horizon / interval + 1e-9));

  LyapunovResult res;
  if (config.record_running)
    res.running_estimate.reserve(static_cast<std::size_t>(renorms));
  double sum = 0.0, window = 0.0;
  for (std::int64_t k = 1; k <= renorms; ++k) {
    advance(ref, params, config.dt, steps_per_renorm);
    advance(pert, params, config.dt, steps_per_renorm);
    const double t = static_cast<double>(k) * interval;
    const double d = distance(ref, pert);
    if (!(d > 0.0) || !std::isfinite(d)) throw NonFiniteState("perturbation collapsed or diverged at t = " + std::to_string(t));
    if (t > config.transient_cut + 1e-9) {
      sum += std::log(d / d0);
      window += interval;
      if (config.record_running) res.running_estimate.emplace_back(t, sum / window);
    }
    MeanFieldState delta = detail::project_tangent(ref, pert - ref);
    double dn = detail::norm(delta);
    if (!(dn > 0.0)) {
      delta = pert - ref;
      dn = d;
    }
    pert = ref + (d0 / dn) * delta;
  }
  res.lambda_max = sum / window;
  res.phase = classify_phase(res.lambda_max, config.zero_band);
  return res;
}

// Header `t,lambda_partial`.
inline void write_running_estimate_csv(std::ostream& os, const LyapunovResult& r) {
  os << "t,lambda_partial\n";
  for (const auto& [t, l] : r.running_estimate) os << detail::format_double(t) << ',' << detail::format_double(l) << '\n';
}

}  // namespace dicke
