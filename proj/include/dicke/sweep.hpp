#pragma once

// Lyapunov phase diagrams over (gamma, omega) grids and period-bifurcation
// scans at fixed drive.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dicke/errors.hpp"
#include "dicke/fixed_points.hpp"
#include "dicke/integrate.hpp"
#include "dicke/lyapunov.hpp"
#include "dicke/model.hpp"
#include "dicke/parallel.hpp"

namespace dicke {

// Called with (units done, units total); serialized by the caller.
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

struct GridSpec {
  double gamma_min = 0.0, gamma_max = 2.5;
  double omega_min = 0.0, omega_max = 2.5;
  std::size_t n_gamma = 101, n_omega = 101;
  LyapunovConfig lyapunov{};
  double init_eps = 0.1, init_delta = 0.1;
  std::uint64_t seed = 0;
  unsigned workers = 0;

  void validate() const {
    detail::require(n_gamma >= 2 && n_omega >= 2, "grid needs at least 2 points per axis");
    detail::require(gamma_max > gamma_min && omega_max > omega_min, "grid ranges must be nonempty");
    detail::require(gamma_min >= 0.0 && omega_min >= 0.0, "grid ranges must be nonnegative");
    detail::require(init_eps * init_eps + init_delta * init_delta <= 1.0, "eps^2 + delta^2 must be <= 1");
    lyapunov.validate();
  }

  [[nodiscard]] double gamma_at(std::size_t j) const {
    return gamma_min + (gamma_max - gamma_min) * static_cast<double>(j) / static_cast<double>(n_gamma - 1);
  }
  [[nodiscard]] double omega_at(std::size_t i) const {
    return omega_min + (omega_max - omega_min) * static_cast<double>(i) / static_cast<double>(n_omega - 1);
  }
  // Seed of cell (row i = omega index, column j = gamma index).
  [[nodiscard]] std::uint64_t cell_seed(std::size_t i, std::size_t j) const {
    return derive_seed(seed, static_cast<std::uint64_t>(i) * n_gamma + j);
  }
};

struct GridCell {
  double lambda = std::numeric_limits<double>::quiet_NaN();
  std::optional<Phase> phase;  // empty when the cell errored
  std::string error;
};

struct PhaseGrid {
  GridSpec spec;
  std::vector<GridCell> cells;  // row-major, rows = omega ascending
  std::vector<std::pair<double, double>> lower_overlay;  // (gamma, omega)
  std::vector<std::pair<double, double>> upper_overlay;

  [[nodiscard]] const GridCell& at(std::size_t i, std::size_t j) const { return cells[i * spec.n_gamma + j]; }
};

namespace detail {

inline GridCell evaluate_cell(const MeanFieldState& initial, const ModelParams& p, LyapunovConfig cfg,
                              std::uint64_t seed) {
  cfg.seed = seed;
  cfg.record_running = false;
  GridCell cell;
  try {
    const auto r = largest_lyapunov(initial, p, cfg);
    cell.lambda = r.lambda_max;
    cell.phase = r.phase;
  } catch (const NonFiniteState& e) {
    cell.error = e.what();
  }
  return cell;
}

}  // namespace detail

inline PhaseGrid run_phase_grid(const GridSpec& spec, const ProgressFn& progress = {}) {
  spec.validate();
  PhaseGrid grid;
  grid.spec = spec;
  grid.cells.resize(spec.n_omega * spec.n_gamma);
  for (std::size_t j = 0; j < spec.n_gamma; ++j) {
    const double g = spec.gamma_at(j);
    grid.lower_overlay.emplace_back(g, lower_boundary(g));
    grid.upper_overlay.emplace_back(g, upper_boundary(g));
  }

  const MeanFieldState initial = MeanFieldState::tilted_up(spec.init_eps, spec.init_delta);
  std::mutex progress_mutex;
  std::size_t rows_done = 0;
  parallel_for(spec.n_omega, spec.workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < spec.n_gamma; ++j)
      grid.cells[i * spec.n_gamma + j] = detail::evaluate_cell(
          initial, ModelParams{spec.omega_at(i), spec.gamma_at(j)}, spec.lyapunov, spec.cell_seed(i, j));
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(++rows_done, spec.n_omega);
    }
  });
  return grid;
}

// Lyapunov labels along an arbitrary list of parameter points, e.g. a 1-D
// slice through the phase diagram. Point k uses derive_seed(seed, k).
inline std::vector<GridCell> run_phase_line(const std::vector<ModelParams>& points, const LyapunovConfig& lyapunov,
                                            double init_eps = 0.1, double init_delta = 0.1,
                                            std::uint64_t seed = 0, unsigned workers = 0) {
  lyapunov.validate();
  for (const auto& p : points) p.validate();
  const MeanFieldState initial = MeanFieldState::tilted_up(init_eps, init_delta);
  std::vector<GridCell> out(points.size());
  parallel_for(points.size(), workers, [&](std::size_t k) {
    out[k] = detail::evaluate_cell(initial, points[k], lyapunov, derive_seed(seed, k));
  });
  return out;
}

// Fraction of non-chaotic cells whose Lyapunov label agrees with the linear
// prediction (Melted vs any time crystal), counting only cells more than
// `margin_cells` grid spacings away from every analytic boundary, including
// the vertical melted/CTC2 line gamma = kappa.
struct BoundaryAgreement {
  std::size_t eligible = 0;
  std::size_t agreeing = 0;
  [[nodiscard]] double fraction() const { return eligible ? static_cast<double>(agreeing) / eligible : 0.0; }
};

inline BoundaryAgreement boundary_agreement(const PhaseGrid& grid, double margin_cells = 2.0) {
  const GridSpec& s = grid.spec;
  const double dg = (s.gamma_max - s.gamma_min) / static_cast<double>(s.n_gamma - 1);
  const double dw = (s.omega_max - s.omega_min) / static_cast<double>(s.n_omega - 1);
  const double kappa = 1.0;
  BoundaryAgreement out;
  for (std::size_t i = 0; i < s.n_omega; ++i)
    for (std::size_t j = 0; j < s.n_gamma; ++j) {
      const GridCell& c = grid.at(i, j);
      if (!c.phase || *c.phase == Phase::Chaotic) continue;
      const double w = s.omega_at(i), g = s.gamma_at(j);
      const double lo = lower_boundary(g), hi = upper_boundary(g);
      if (std::abs(w - lo) <= margin_cells * dw || std::abs(w - hi) <= margin_cells * dw) continue;
      if (w < lo && std::abs(g - kappa) <= margin_cells * dg) continue;
      const PredictedPhase pred = classify_by_boundaries(ModelParams{w, g});
      const bool pred_melted = pred == PredictedPhase::Melted;
      ++out.eligible;
      if (pred_melted == (*c.phase == Phase::Melted)) ++out.agreeing;
    }
  return out;
}

// Lambda matrix, rows = omega ascending, columns = gamma ascending; errored
// cells are written as `nan`.
inline void write_lambda_csv(std::ostream& os, const PhaseGrid& g) {
  for (std::size_t i = 0; i < g.spec.n_omega; ++i) {
    for (std::size_t j = 0; j < g.spec.n_gamma; ++j) {
      if (j) os << ',';
      const double l = g.at(i, j).lambda;
      os << (std::isfinite(l) ? detail::format_double(l) : std::string("nan"));
    }
    os << '\n';
  }
}

inline void write_labels_csv(std::ostream& os, const PhaseGrid& g) {
  for (std::size_t i = 0; i < g.spec.n_omega; ++i) {
    for (std::size_t j = 0; j < g.spec.n_gamma; ++j) {
      if (j) os << ',';
      const auto& c = g.at(i, j);
      os << (c.phase ? to_string(*c.phase) : "Error");
    }
    os << '\n';
  }
}

inline nlohmann::json to_json(const LyapunovConfig& c) {
  return {{"horizon", c.horizon},       {"renorm_interval", c.renorm_interval},
          {"separation", c.separation}, {"transient_cut", c.transient_cut},
          {"zero_band", c.zero_band},   {"dt", c.dt},
          {"seed", c.seed}};
}

inline nlohmann::json to_json(const GridSpec& s) {
  return {{"gamma_min", s.gamma_min}, {"gamma_max", s.gamma_max}, {"omega_min", s.omega_min},
          {"omega_max", s.omega_max}, {"n_gamma", s.n_gamma},     {"n_omega", s.n_omega},
          {"init_eps", s.init_eps},   {"init_delta", s.init_delta}, {"seed", s.seed},
          {"lyapunov", to_json(s.lyapunov)}};
}

// Sidecar metadata. Worker count is deliberately left out so exports are
// identical for any degree of parallelism.
inline nlohmann::json grid_sidecar(const PhaseGrid& g) {
  nlohmann::json labels = nlohmann::json::array();
  nlohmann::json errors = nlohmann::json::array();
  for (std::size_t i = 0; i < g.spec.n_omega; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < g.spec.n_gamma; ++j) {
      const auto& c = g.at(i, j);
      row.push_back(c.phase ? to_string(*c.phase) : "Error");
      if (!c.error.empty()) errors.push_back({{"row", i}, {"col", j}, {"message", c.error}});
    }
    labels.push_back(row);
  }
  auto poly = [](const std::vector<std::pair<double, double>>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [x, y] : v) out.push_back({x, y});
    return out;
  };
  nlohmann::json gammas = nlohmann::json::array(), omegas = nlohmann::json::array();
  for (std::size_t j = 0; j < g.spec.n_gamma; ++j) gammas.push_back(g.spec.gamma_at(j));
  for (std::size_t i = 0; i < g.spec.n_omega; ++i) omegas.push_back(g.spec.omega_at(i));
  return {{"spec", to_json(g.spec)},
          {"seeding", "cell (i, j) uses derive_seed(seed, i * n_gamma + j), SplitMix64-based"},
          {"gamma_axis", gammas},
          {"omega_axis", omegas},
          {"boundary_overlay",
           {{"lower", {{"formula", "omega = |gamma^2 - 1| / sqrt(gamma^2 + 1)"}, {"points", poly(g.lower_overlay)}}},
            {"upper", {{"formula", "omega = sqrt(gamma^2 + 1)"}, {"points", poly(g.upper_overlay)}}}}},
          {"labels", labels},
          {"errors", errors}};
}

// ---------------------------------------------------------------------------
// Bifurcation scans.

struct PeriodCount {
  enum class Kind { Periodic, QuasiPeriodic, Chaotic };
  Kind kind = Kind::Periodic;
  std::size_t count = 0;  // number of maxima bands; meaningful for Periodic
};

inline std::string to_string(const PeriodCount& c) {
  switch (c.kind) {
    case PeriodCount::Kind::Periodic: return std::to_string(c.count);
    case PeriodCount::Kind::QuasiPeriodic: return "quasi-periodic";
    case PeriodCount::Kind::Chaotic: return "chaotic";
  }
  return "?";
}

struct BifurcationConfig {
  double dt = 1e-2;
  double t_final = 2e4;
  double transient_cut = 1e4;
  double init_eps = 0.0, init_delta = 0.0;
  // Maxima closer than `resolution` in m_z are merged into one band; a band
  // wider than `max_band_width` means the maxima do not repeat.
  double resolution = 0.03;
  double max_band_width = 0.06;
  std::size_t cluster_cap = 64;
  std::size_t min_maxima = 10;
  LyapunovConfig lyapunov{};
  std::uint64_t seed = 0;
  unsigned workers = 0;

  void validate() const {
    detail::require(dt > 0.0, "bifurcation dt must be > 0");
    detail::require(t_final > transient_cut && transient_cut >= 0.0, "need t_final > transient_cut >= 0");
    detail::require(resolution > 0.0 && max_band_width >= resolution, "need max_band_width >= resolution > 0");
    detail::require(cluster_cap >= 1 && min_maxima >= 3, "cluster_cap >= 1 and min_maxima >= 3 required");
    detail::require(init_eps * init_eps + init_delta * init_delta <= 1.0, "eps^2 + delta^2 must be <= 1");
    lyapunov.validate();
  }
};

// Strict local maxima of m_z^A for t > transient_cut.
inline std::vector<double> post_transient_maxima(const ModelParams& p, const BifurcationConfig& c) {
  MeanFieldState s = MeanFieldState::tilted_up(c.init_eps, c.init_delta);
  const auto steps = static_cast<std::int64_t>(std::llround(c.t_final / c.dt));
  const auto cut = static_cast<std::int64_t>(std::llround(c.transient_cut / c.dt));
  std::vector<double> maxima;
  double z0 = s[MeanFieldState::kZA], z1 = z0;
  for (std::int64_t n = 1; n <= steps; ++n) {
    s = rk4_step(s, p, c.dt);
    const double z2 = s[MeanFieldState::kZA];
    // z1 is the sample at step n - 1.
    if (n - 1 > cut && n >= 2 && z1 > z0 && z1 > z2) maxima.push_back(z1);
    z0 = z1;
    z1 = z2;
  }
  if (!s.finite()) throw NonFiniteState("bifurcation trajectory became non-finite");
  return maxima;
}

struct MaximaBands {
  std::vector<std::pair<double, double>> bands;  // (min, max) per band, ascending
  [[nodiscard]] double widest() const {
    double w = 0.0;
    for (const auto& [lo, hi] : bands) w = std::max(w, hi - lo);
    return w;
  }
};

// Single-linkage grouping of sorted values: a gap larger than `resolution`
// starts a new band.
inline MaximaBands cluster_maxima(std::vector<double> values, double resolution) {
  MaximaBands out;
  std::sort(values.begin(), values.end());
  for (double v : values) {
    if (out.bands.empty() || v - out.bands.back().second > resolution)
      out.bands.emplace_back(v, v);
    else
      out.bands.back().second = v;
  }
  return out;
}

struct BifurcationPoint {
  double gamma = 0.0;
  std::vector<double> maxima;
  MaximaBands bands;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  PeriodCount period;
  std::string error;  // nonempty when the point could not be evaluated
};

struct BifurcationScan {
  double omega = 0.0;
  BifurcationConfig config;
  std::vector<BifurcationPoint> points;
};

inline PeriodCount classify_maxima(const MaximaBands& b, double lambda, const BifurcationConfig& c) {
  if (b.bands.size() <= c.cluster_cap && b.widest() <= c.max_band_width)
    return {PeriodCount::Kind::Periodic, b.bands.size()};
  if (std::isfinite(lambda) && lambda > c.lyapunov.zero_band) return {PeriodCount::Kind::Chaotic, b.bands.size()};
  return {PeriodCount::Kind::QuasiPeriodic, b.bands.size()};
}

inline BifurcationPoint bifurcation_point(double omega, double gamma, const BifurcationConfig& c,
                                          std::uint64_t seed) {
  const ModelParams p{omega, gamma};
  p.validate();
  BifurcationPoint pt;
  pt.gamma = gamma;
  pt.maxima = post_transient_maxima(p, c);
  if (pt.maxima.size() < c.min_maxima)
    throw TooFewMaxima("only " + std::to_string(pt.maxima.size()) + " maxima after the transient at gamma = " +
                       std::to_string(gamma) + "; increase t_final");
  pt.bands = cluster_maxima(pt.maxima, c.resolution);
  LyapunovConfig lc = c.lyapunov;
  lc.seed = seed;
  lc.record_running = false;
  pt.lambda = largest_lyapunov(MeanFieldState::tilted_up(c.init_eps, c.init_delta), p, lc).lambda_max;
  pt.period = classify_maxima(pt.bands, pt.lambda, c);
  return pt;
}

// Errors at individual points are recorded on the point; the scan continues.
inline BifurcationScan run_bifurcation_scan(double omega, const std::vector<double>& gamma_values,
                                            const BifurcationConfig& config, const ProgressFn& progress = {}) {
  detail::require(omega > 0.0, "bifurcation scan requires omega > 0");
  detail::require(!gamma_values.empty(), "gamma_values must be nonempty");
  config.validate();
  BifurcationScan scan{omega, config, std::vector<BifurcationPoint>(gamma_values.size())};
  std::mutex progress_mutex;
  std::size_t done = 0;
  parallel_for(gamma_values.size(), config.workers, [&](std::size_t k) {
    try {
      scan.points[k] = bifurcation_point(omega, gamma_values[k], config, derive_seed(config.seed, k));
    } catch (const Error& e) {
      scan.points[k] = BifurcationPoint{};
      scan.points[k].gamma = gamma_values[k];
      scan.points[k].error = e.what();
    }
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(++done, gamma_values.size());
    }
  });
  return scan;
}

// Long format `gamma,max_value`, one row per retained maximum.
inline void write_bifurcation_csv(std::ostream& os, const BifurcationScan& scan) {
  os << "gamma,max_value\n";
  for (const auto& pt : scan.points)
    for (double m : pt.maxima) os << detail::format_double(pt.gamma) << ',' << detail::format_double(m) << '\n';
}

// `gamma,period,bands,widest_band,lambda` summary, one row per scan point.
inline void write_period_csv(std::ostream& os, const BifurcationScan& scan) {
  os << "gamma,period,bands,widest_band,lambda\n";
  for (const auto& pt : scan.points) {
    os << detail::format_double(pt.gamma) << ',';
    if (!pt.error.empty()) {
      os << "error,,,\n";
      continue;
    }
    os << to_string(pt.period) << ',' << pt.bands.bands.size() << ',' << detail::format_double(pt.bands.widest())
       << ',' << detail::format_double(pt.lambda) << '\n';
  }
}

}  // namespace dicke
