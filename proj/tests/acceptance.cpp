// Acceptance checks. Usage: dicke_acceptance [N ...] (default: all).
// Prints one PASS/FAIL line per criterion; exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dicke/fixed_points.hpp"
#include "dicke/integrate.hpp"
#include "dicke/lyapunov.hpp"
#include "dicke/spectrum.hpp"
#include "dicke/sweep.hpp"
#include "dicke/twa.hpp"

using namespace dicke;

namespace {

// Tolerances and reference values.
constexpr std::size_t kDraws = 200;
constexpr std::uint64_t kDrawSeed = 20240611;
constexpr double kResidualTol = 1e-10;
constexpr double kEigenTol = 1e-8;
constexpr double kChaosLambda = 5e-3;
constexpr double kSpectrumHorizon = 1e3;
constexpr double kSpectrumDt = 1e-2;
constexpr double kPeakProminence = 0.01;
constexpr double kDriftTol = 1e-8;
constexpr double kTrackSlack = 0.05;
constexpr double kTrackHorizon = 5.0;
constexpr double kMinSpeedup = 4.8;
constexpr unsigned kManyWorkers = 8;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<ModelParams> random_draws() {
  std::mt19937_64 rng(kDrawSeed);
  std::uniform_real_distribution<double> u(0.0, 2.5);
  std::vector<ModelParams> out;
  for (std::size_t k = 0; k < kDraws; ++k) {
    const double g = u(rng), w = u(rng);
    out.push_back({w, g});
  }
  return out;
}

std::vector<FixedPointRecord> valid_records(const ModelParams& p) {
  std::vector<FixedPointRecord> out;
  for (auto& r : survey_fixed_points(p).records)
    if (r.valid) out.push_back(std::move(r));
  return out;
}

Outcome criterion1() {
  double worst = 0.0;
  std::size_t checked = 0;
  std::map<std::string, std::size_t> per_family;
  for (const auto& p : random_draws())
    for (const auto& r : valid_records(p)) {
      worst = std::max(worst, mean_field_rhs(r.location, p).max_abs());
      ++checked;
      ++per_family[to_string(r.family)];
    }
  std::string fams;
  for (const auto& [f, n] : per_family) fams += fmt(" %s=%zu", f.c_str(), n);
  return {checked > 0 && worst < kResidualTol,
          fmt("%zu valid branches (%s ), worst max|rhs| = %.2e (tol %.0e)", checked, fams.c_str() + 1, worst,
              kResidualTol)};
}

Outcome criterion2() {
  double worst = 0.0, worst_pair = 0.0, largest_real = -1e300;
  std::size_t checked = 0, fp2 = 0;
  for (const auto& p : random_draws())
    for (const auto& r : valid_records(p)) {
      worst = std::max(worst, multiset_distance(r.analytic_eigs, r.numeric_eigs));
      ++checked;
      if (r.family != FixedPointFamily::FP2) continue;
      std::vector<double> reals;
      for (const auto& e : r.analytic_eigs)
        if (std::abs(e.imag()) == 0.0 && e.real() != 0.0) reals.push_back(e.real());
      if (reals.size() != 2) {
        worst_pair = 1e300;
        continue;
      }
      worst_pair = std::max(worst_pair, std::abs(reals[0] - reals[1]));
      if (r.branch == +1) {
        largest_real = std::max(largest_real, reals[0]);
        ++fp2;
      }
    }
  const bool pass = checked > 0 && fp2 > 0 && worst < kEigenTol && worst_pair == 0.0 && largest_real < 0.0;
  return {pass, fmt("%zu valid branches, worst multiset distance %.2e (tol %.0e); FP2 (%zu draws): real pair "
                    "spread %.1e, largest real eigenvalue %.4f",
                    checked, worst, kEigenTol, fp2, worst_pair, largest_real)};
}

// First index where the label leaves Melted, provided the sequence is Melted
// before it and never Melted after it; npos otherwise.
std::size_t single_transition(const std::vector<std::optional<Phase>>& labels) {
  std::size_t k = 0;
  while (k < labels.size() && labels[k] == Phase::Melted) ++k;
  if (k == 0 || k == labels.size()) return std::string::npos;
  for (std::size_t m = k; m < labels.size(); ++m)
    if (!labels[m] || *labels[m] == Phase::Melted) return std::string::npos;
  return k;
}

PhaseGrid reference_grid(unsigned workers, double* elapsed) {
  GridSpec spec;
  spec.seed = 7;
  spec.workers = workers;
  const auto t0 = std::chrono::steady_clock::now();
  PhaseGrid g = run_phase_grid(spec);
  *elapsed = seconds_since(t0);
  return g;
}

Outcome criterion3() {
  double elapsed = 0.0;
  const PhaseGrid g = reference_grid(kManyWorkers, &elapsed);
  const GridSpec& s = g.spec;
  const double cell = (s.omega_max - s.omega_min) / static_cast<double>(s.n_omega - 1);
  std::vector<std::optional<Phase>> column, row;
  for (std::size_t i = 0; i < s.n_omega; ++i) column.push_back(g.at(i, 0).phase);
  for (std::size_t j = 0; j < s.n_gamma; ++j) row.push_back(g.at(0, j).phase);
  const std::size_t ci = single_transition(column), rj = single_transition(row);
  const double omega_c = ci == std::string::npos ? NAN : s.omega_at(ci);
  const double gamma_c = rj == std::string::npos ? NAN : s.gamma_at(rj);
  // The boundary lies between the last melted cell and the first non-melted one.
  const bool col_ok = std::abs(omega_c - 0.5 * cell - 1.0) <= cell;
  const bool row_ok = std::abs(gamma_c - 0.5 * cell - 1.0) <= cell;
  const std::size_t ic = static_cast<std::size_t>(std::lround(2.0 / cell)), jc =
      static_cast<std::size_t>(std::lround(1.4 / cell));
  const GridCell& chaos = g.at(ic, jc);
  const bool chaos_ok = chaos.phase == Phase::Chaotic && chaos.lambda > kChaosLambda;
  return {col_ok && row_ok && chaos_ok,
          fmt("Gamma=0 column first non-melted Omega = %.3f; Omega=0 row first non-melted Gamma = %.3f "
              "(cell %.3f); cell (%.2f, %.2f) %s, lambda %.4f; %.0f s at %u workers",
              omega_c, gamma_c, cell, s.omega_at(ic), s.gamma_at(jc),
              chaos.phase ? to_string(*chaos.phase) : "error", chaos.lambda, elapsed, kManyWorkers)};
}

std::vector<double> mz_series(const MeanFieldState& initial, const ModelParams& p, double horizon) {
  IntegratorConfig c;
  c.dt = kSpectrumDt;
  c.t_final = horizon;
  const auto traj = integrate_rk4(initial, p, c);
  std::vector<double> z;
  z.reserve(traj.size());
  for (const auto& s : traj.states) z.push_back(s[MeanFieldState::kZA]);
  return z;
}

// A fixed point nudged off itself along a fixed direction, renormalized.
MeanFieldState nudged(const MeanFieldState& fp) {
  MeanFieldState s = fp;
  const std::array<double, 6> dir{0.6, -0.3, 0.2, -0.5, 0.4, 0.1};
  for (std::size_t i = 0; i < 6; ++i) s[i] += 0.01 * dir[i];
  return s.normalized();
}

Outcome criterion4() {
  struct Case {
    const char* name;
    ModelParams p;
    MeanFieldState initial;
    double target;
  };
  const std::vector<Case> cases{
      {"CTC1", {1.5, 0.1}, MeanFieldState::from(0, 0, 1, 0, 0, 1), 1.1180},
      {"CTC2", {0.1, 1.5}, nudged(fixed_point_fp1({0.1, 1.5}, +1).location), 1.1063},
      {"CTC3", {0.75, 0.75}, nudged(fixed_point_fp2({0.75, 0.75}, +1).location), 0.8292},
  };
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto s = emission_spectrum(mz_series(c.initial, c.p, kSpectrumHorizon), kSpectrumDt);
    const double peak = dominant_frequency(s), bin = s.delta_omega();
    const bool ok = std::abs(peak - c.target) <= bin;
    pass = pass && ok;
    detail += fmt("%s%s %.5f vs %.4f (|d| = %.1e, bin %.1e)", detail.empty() ? "" : "; ", c.name, peak, c.target,
                  std::abs(peak - c.target), bin);
  }
  return {pass, detail};
}

Outcome criterion5() {
  BifurcationConfig c;
  c.workers = kManyWorkers;
  std::vector<double> gammas{0.251, 0.29};
  for (int k = 301; k <= 400; ++k) gammas.push_back(k / 1000.0);
  const auto scan = run_bifurcation_scan(1.2, gammas, c);
  const auto& a = scan.points[0];
  const auto& b = scan.points[1];
  std::size_t positive = 0, errors = 0;
  for (std::size_t k = 2; k < scan.points.size(); ++k) {
    if (!scan.points[k].error.empty()) ++errors;
    if (scan.points[k].lambda > 0.0) ++positive;
  }
  const std::size_t n = scan.points.size() - 2;
  const bool pass = a.error.empty() && b.error.empty() && a.period.kind == PeriodCount::Kind::Periodic &&
                    a.period.count == 6 && b.period.kind == PeriodCount::Kind::Periodic && b.period.count == 3 &&
                    2 * positive > n;
  return {pass, fmt("Gamma=0.251 -> %s, Gamma=0.29 -> %s; lambda > 0 at %zu/%zu points in (0.3, 0.4] "
                    "(%zu errors)",
                    to_string(a.period).c_str(), to_string(b.period).c_str(), positive, n, errors)};
}

Outcome criterion6() {
  const ModelParams chaos{2.0, 1.4};
  const auto z = mz_series(MeanFieldState::tilted_up(0.1, 0.1), chaos, kSpectrumHorizon);
  const std::size_t short_n = static_cast<std::size_t>(std::lround(100.0 / kSpectrumDt)) + 1;
  const std::vector<double> head(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(short_n));
  const auto s_long = emission_spectrum(z, kSpectrumDt);
  const auto s_short = emission_spectrum(head, kSpectrumDt);
  const std::size_t n_long = extract_peaks(s_long, kPeakProminence).size();
  const std::size_t n_short = extract_peaks(s_short, kPeakProminence).size();
  const double w = 3.0 * s_long.delta_omega();
  const double chaos_frac = power_fraction_near(s_long, dominant_frequency(s_long), w);

  const auto ctc = emission_spectrum(mz_series(MeanFieldState::from(0, 0, 1, 0, 0, 1), {1.5, 0.1}, kSpectrumHorizon),
                                     kSpectrumDt);
  const double ctc_frac = power_fraction_near(ctc, dominant_frequency(ctc), 3.0 * ctc.delta_omega());
  return {n_long > n_short && chaos_frac < 0.5 && ctc_frac > 0.9,
          fmt("chaotic peaks: %zu at kt=1000 vs %zu at kt=100; power within 3 bins of top peak: chaotic %.3f "
              "(< 0.5), CTC1 %.3f (> 0.9)",
              n_long, n_short, chaos_frac, ctc_frac)};
}

SpinDirection random_direction(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), ph(0.0, 2.0 * std::numbers::pi);
  return {std::acos(u(rng)), ph(rng)};
}

// Mean half swing of the m_z^A ensemble mean per drive period, from the
// second period up to the end of the record.
double envelope(const EnsembleResult& r, double period) {
  double sum = 0.0;
  std::size_t windows = 0;
  for (double start = period; start + period <= r.times.back() + 1e-9; start += period) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t k = 0; k < r.times.size(); ++k)
      if (r.times[k] >= start && r.times[k] < start + period) {
        lo = std::min(lo, r.mean[k][MeanFieldState::kZA]);
        hi = std::max(hi, r.mean[k][MeanFieldState::kZA]);
      }
    sum += 0.5 * (hi - lo);
    ++windows;
  }
  return windows ? sum / static_cast<double>(windows) : NAN;
}

Outcome criterion7() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 2.5);
  double worst_drift = 0.0;
  for (int k = 0; k < 20; ++k) {
    ModelParams p{u(rng), u(rng)};
    p.spin_size = 1e6;
    const BosonicState s = coherent_amplitudes(random_direction(rng), random_direction(rng), p.spin_size);
    const auto got = observable_drift(s, p, 0.0);
    const auto want = mean_field_rhs(observables(s, p.spin_size), p);
    for (std::size_t i = 0; i < 6; ++i) worst_drift = std::max(worst_drift, std::abs(got[i] - want[i]));
  }
  const bool a_ok = worst_drift < kDriftTol;

  const SpinDirection up{0.0, 0.0};
  const ModelParams ctc1{1.5, 0.1};
  TwaConfig c;
  c.n_trajectories = 1000;
  c.t_final = 30.0;
  c.record_stride = 10;
  c.seed = 1;
  const double period = 2.0 * std::numbers::pi / std::sqrt(1.5 * 1.5 - 1.0);
  c.spin_size = 50.0;
  const double env50 = envelope(run_ensemble(up, up, ctc1, c), period);
  c.spin_size = 200.0;
  const double env200 = envelope(run_ensemble(up, up, ctc1, c), period);
  const bool b_ok = env200 > env50;

  const ModelParams chaos{2.0, 1.4};
  c.spin_size = 200.0;
  c.t_final = kTrackHorizon;
  const auto ens = run_ensemble(up, up, chaos, c);
  IntegratorConfig ic;
  ic.dt = c.dt;
  ic.t_final = kTrackHorizon;
  ic.record_stride = static_cast<std::int64_t>(c.record_stride);
  const auto mf = integrate_rk4(MeanFieldState::from(0, 0, 1, 0, 0, 1), chaos, ic);
  double worst_excess = -1e300, first_exit = NAN;
  for (std::size_t k = 0; k < ens.times.size() && k < mf.size(); ++k)
    for (std::size_t i = 0; i < 6; ++i) {
      const double excess =
          std::abs(ens.mean[k][i] - mf.states[k][i]) - (2.0 * ens.standard_error[k][i] + kTrackSlack);
      worst_excess = std::max(worst_excess, excess);
      if (excess > 0.0 && std::isnan(first_exit)) first_exit = ens.times[k];
    }
  const bool c_ok = worst_excess <= 0.0;
  return {a_ok && b_ok && c_ok,
          fmt("(a) %s worst |drift - rhs| %.1e; (b) %s envelope S=50 %.3f, S=200 %.3f; (c) %s worst excess over "
              "2*stderr+%.2f is %.3f, first exit at kt=%.2f",
              a_ok ? "ok" : "FAIL", worst_drift, b_ok ? "ok" : "FAIL", env50, env200, c_ok ? "ok" : "FAIL",
              kTrackSlack, worst_excess, first_exit)};
}

template <class F>
std::string exported(F&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

Outcome criterion8() {
  double t1 = 0.0, tn = 0.0;
  const PhaseGrid g1 = reference_grid(1, &t1);
  const PhaseGrid gn = reference_grid(kManyWorkers, &tn);
  const bool grid_same =
      exported([&](std::ostream& os) { write_lambda_csv(os, g1); }) ==
          exported([&](std::ostream& os) { write_lambda_csv(os, gn); }) &&
      exported([&](std::ostream& os) { write_labels_csv(os, g1); }) ==
          exported([&](std::ostream& os) { write_labels_csv(os, gn); }) &&
      grid_sidecar(g1).dump() == grid_sidecar(gn).dump();

  TwaConfig c;
  c.n_trajectories = 200;
  c.t_final = 5.0;
  c.spin_size = 100.0;
  c.seed = 9;
  const SpinDirection up{0.0, 0.0};
  c.workers = 1;
  const auto e1 = run_ensemble(up, up, {2.0, 1.4}, c);
  c.workers = kManyWorkers;
  const auto en = run_ensemble(up, up, {2.0, 1.4}, c);
  const bool twa_same = exported([&](std::ostream& os) { write_ensemble_csv(os, e1); }) ==
                        exported([&](std::ostream& os) { write_ensemble_csv(os, en); });

  const double speedup = t1 / tn;
  return {grid_same && twa_same && speedup >= kMinSpeedup,
          fmt("grid exports identical at 1 vs %u workers: %s; ensemble identical: %s; speedup %.2fx "
              "(%.0f s -> %.0f s, need %.1fx; %u hardware threads)",
              kManyWorkers, grid_same ? "yes" : "no", twa_same ? "yes" : "no", speedup, t1, tn, kMinSpeedup,
              std::thread::hardware_concurrency())};
}

Outcome criterion9() {
  const std::vector<std::pair<const char*, ModelParams>> points{
      {"melted", {0.5, 0.5}}, {"CTC1", {1.5, 0.1}}, {"CTC2", {0.1, 1.5}}, {"chaotic", {2.0, 1.4}}};
  std::vector<ModelParams> params;
  for (const auto& [name, p] : points) params.push_back(p);
  const auto a = run_phase_line(params, LyapunovConfig{}, 0.1, 0.1, 0, kManyWorkers);
  const auto b = run_phase_line(params, LyapunovConfig{}, 0.3, 0.2, 0, kManyWorkers);
  bool pass = true;
  std::string detail;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const bool same = a[k].phase && b[k].phase && *a[k].phase == *b[k].phase;
    pass = pass && same;
    detail += fmt("%s%s %s/%s (%.4f, %.4f)", detail.empty() ? "" : "; ", points[k].first,
                  a[k].phase ? to_string(*a[k].phase) : "error", b[k].phase ? to_string(*b[k].phase) : "error",
                  a[k].lambda, b[k].lambda);
  }
  return {pass, detail};
}

const std::map<int, std::pair<const char*, std::function<Outcome()>>> kCriteria{
    {1, {"fixed-point residuals", criterion1}},
    {2, {"eigenvalue equivalence", criterion2}},
    {3, {"phase-boundary recovery", criterion3}},
    {4, {"spectral-peak match", criterion4}},
    {5, {"bifurcation reproduction", criterion5}},
    {6, {"chaos spectral signature", criterion6}},
    {7, {"TWA consistency", criterion7}},
    {8, {"determinism and scaling", criterion8}},
    {9, {"initial-state robustness", criterion9}},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int k = 1; k < argc; ++k) {
    const int n = std::atoi(argv[k]);
    if (!kCriteria.count(n)) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[k]);
      return 2;
    }
    selected.push_back(n);
  }
  if (selected.empty())
    for (const auto& [n, c] : kCriteria) selected.push_back(n);

  int failures = 0;
  for (int n : selected) {
    const auto& [name, fn] = kCriteria.at(n);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
