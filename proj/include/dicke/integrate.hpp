#pragma once

// Fixed-step fourth-order Runge-Kutta propagation of the mean-field flow.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "dicke/errors.hpp"
#include "dicke/model.hpp"

namespace dicke {

struct IntegratorConfig {
  double dt = 1e-3;
  double t_final = 1e3;
  std::int64_t record_stride = 1;
  double transient_cut = 0.0;

  // transient_cut defaults to half the horizon for steady-window analyses.
  static IntegratorConfig for_horizon(double t_final, double dt = 1e-3, std::int64_t stride = 1) {
    return IntegratorConfig{dt, t_final, stride, 0.5 * t_final};
  }

  [[nodiscard]] std::int64_t steps() const { return static_cast<std::int64_t>(std::llround(t_final / dt)); }

  void validate() const {
    detail::require(dt > 0.0 && std::isfinite(dt), "dt must be > 0");
    detail::require(t_final >= dt, "t_final must be >= dt");
    detail::require(record_stride >= 1, "record_stride must be >= 1");
    detail::require(transient_cut >= 0.0 && transient_cut < t_final,
                    "transient_cut must lie in [0, t_final)");
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<MeanFieldState> states;
  ModelParams params;
  IntegratorConfig config;

  [[nodiscard]] std::size_t size() const { return times.size(); }

  // One component as a time series, optionally dropping samples before t_from.
  [[nodiscard]] std::vector<double> component(std::size_t c, double t_from = -1.0) const {
    std::vector<double> out;
    out.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
      if (times[i] >= t_from) out.push_back(states[i][c]);
    return out;
  }
};

inline MeanFieldState rk4_step(const MeanFieldState& s, const ModelParams& p, double dt) {
  const MeanFieldState k1 = mean_field_rhs(s, p);
  const MeanFieldState k2 = mean_field_rhs(s + (0.5 * dt) * k1, p);
  const MeanFieldState k3 = mean_field_rhs(s + (0.5 * dt) * k2, p);
  const MeanFieldState k4 = mean_field_rhs(s + dt * k3, p);
  MeanFieldState out = s;
  for (std::size_t i = 0; i < MeanFieldState::kSize; ++i)
    out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

// Advances `s` by `steps` RK4 steps in place.
inline void advance(MeanFieldState& s, const ModelParams& p, double dt, std::int64_t steps) {
  for (std::int64_t n = 0; n < steps; ++n) s = rk4_step(s, p, dt);
  if (!s.finite()) throw NonFiniteState("mean-field state became non-finite; dt too large?");
}

inline void validate_initial(const MeanFieldState& s) {
  constexpr double kSlack = 1e-9;
  detail::require(s.finite(), "initial state must be finite");
  detail::require(std::sqrt(s.norm_sq_a()) <= 1.0 + kSlack && std::sqrt(s.norm_sq_b()) <= 1.0 + kSlack,
                  "initial state must lie inside the unit balls");
}

inline Trajectory integrate_rk4(const MeanFieldState& initial, const ModelParams& params,
                                const IntegratorConfig& config) {
  params.validate();
  config.validate();
  validate_initial(initial);

  const std::int64_t steps = config.steps();
  Trajectory traj{{}, {}, params, config};
  const auto samples = static_cast<std::size_t>(steps / config.record_stride + 1);
  traj.times.reserve(samples);
  traj.states.reserve(samples);

  MeanFieldState s = initial;
  traj.times.push_back(0.0);
  traj.states.push_back(s);
  for (std::int64_t n = 1; n <= steps; ++n) {
    s = rk4_step(s, params, config.dt);
    if (n % config.record_stride == 0) {
      if (!s.finite())
        throw NonFiniteState("mean-field state became non-finite at t = " +
                             std::to_string(static_cast<double>(n) * config.dt));
      traj.times.push_back(static_cast<double>(n) * config.dt);
      traj.states.push_back(s);
    }
  }
  if (!s.finite()) throw NonFiniteState("mean-field state became non-finite");
  return traj;
}

struct ConvergenceReport {
  double deviation_coarse = 0.0;  // max |x_dt - x_{dt/2}| at shared sample times
  double deviation_fine = 0.0;    // max |x_{dt/2} - x_{dt/4}|
  double ratio = 0.0;             // deviation_coarse / deviation_fine, ~16 for fourth order
};

// Step-halving order check. The trajectory is integrated with dt, dt/2 and
// dt/4 and compared at the samples of the coarsest run.
inline ConvergenceReport halve_step_check(const MeanFieldState& initial, const ModelParams& params,
                                          const IntegratorConfig& config) {
  config.validate();
  auto run = [&](int refine) {
    IntegratorConfig c = config;
    c.dt = config.dt / refine;
    c.record_stride = config.record_stride * refine;
    return integrate_rk4(initial, params, c);
  };
  const Trajectory t1 = run(1);
  const Trajectory t2 = run(2);
  const Trajectory t4 = run(4);

  auto max_dev = [](const Trajectory& a, const Trajectory& b) {
    const std::size_t n = std::min(a.size(), b.size());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < MeanFieldState::kSize; ++c)
        d = std::max(d, std::abs(a.states[i][c] - b.states[i][c]));
    return d;
  };
  ConvergenceReport r;
  r.deviation_coarse = max_dev(t1, t2);
  r.deviation_fine = max_dev(t2, t4);
  r.ratio = r.deviation_fine > 0.0 ? r.deviation_coarse / r.deviation_fine : 0.0;
  return r;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Header `t,mxA,myA,mzA,mxB,myB,mzB`, 17 significant digits.
inline void write_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,mxA,myA,mzA,mxB,myB,mzB\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    os << detail::format_double(traj.times[i]);
    for (double c : traj.states[i].m) os << ',' << detail::format_double(c);
    os << '\n';
  }
}

}  // namespace dicke
