// dicke: command-line front end for the coupled Dicke-model toolkit.
//
// Exit codes: 0 ok, 2 usage or invalid input, 3 numerical failure, 4 I/O.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dicke/fixed_points.hpp"
#include "dicke/integrate.hpp"
#include "dicke/lyapunov.hpp"
#include "dicke/spectrum.hpp"
#include "dicke/sweep.hpp"
#include "dicke/twa.hpp"
#include "manifest.hpp"

#ifndef DICKE_VERSION
#define DICKE_VERSION "0.0.0"
#endif

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace dicke;
using cli::IoError;
using cli::OutputDir;
using cli::RunManifest;

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

// Tracks every option of a subcommand so the resolved configuration can be
// written to the manifest and replayed as an argument list.
class Registry {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& name, T& var, const std::string& help) {
    fields_.emplace_back(name, [&var] { return json(var); });
    return app->add_option("--" + name, var, help)->capture_default_str();
  }

  [[nodiscard]] json resolved() const {
    json j = json::object();
    for (const auto& [name, get] : fields_) j[name] = get();
    return j;
  }

 private:
  std::vector<std::pair<std::string, std::function<json()>>> fields_;
};

struct Range {
  double lo = 0.0, hi = 0.0;
};

Range parse_range(const std::string& text, const std::string& flag) {
  const auto colon = text.find(':');
  Range r;
  try {
    if (colon == std::string::npos) throw std::invalid_argument("missing ':'");
    std::size_t used = 0;
    const std::string a = text.substr(0, colon), b = text.substr(colon + 1);
    r.lo = std::stod(a, &used);
    if (used != a.size()) throw std::invalid_argument("trailing text");
    r.hi = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument("trailing text");
  } catch (const std::exception&) {
    throw PreconditionError("--" + flag + " expects lo:hi, got '" + text + "'");
  }
  if (!(r.hi > r.lo)) throw PreconditionError("--" + flag + " needs hi > lo, got '" + text + "'");
  return r;
}

unsigned default_workers() {
  if (const char* env = std::getenv("DICKE_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 0) return static_cast<unsigned>(v);
    std::cerr << "warning: ignoring DICKE_WORKERS='" << env << "'\n";
  }
  return 0;
}

struct Progress {
  std::string label;
  void operator()(std::size_t done, std::size_t total) const {
    std::cerr << '\r' << label << ": " << done << '/' << total << std::flush;
    if (done == total) std::cerr << '\n';
  }
};

struct Common {
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  unsigned workers = default_workers();
};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  Registry registry;
  std::function<void(OutputDir&, RunManifest&)> run;
};

void add_lyapunov_options(Command& c, LyapunovConfig& l) {
  c.registry.add(c.app, "horizon", l.horizon, "Lyapunov integration horizon (1/kappa)");
  c.registry.add(c.app, "lyap-transient", l.transient_cut, "Lyapunov transient discarded before averaging");
  c.registry.add(c.app, "renorm-interval", l.renorm_interval, "Time between separation renormalizations");
  c.registry.add(c.app, "separation", l.separation, "Initial separation d0");
  c.registry.add(c.app, "zero-band", l.zero_band, "|Lambda| below this counts as zero");
  c.registry.add(c.app, "lyap-dt", l.dt, "RK4 step for Lyapunov runs")->check(CLI::PositiveNumber);
}

MeanFieldState initial_state(double eps, double delta) {
  detail::require(eps * eps + delta * delta <= 1.0, "--init-eps^2 + --init-delta^2 must be <= 1");
  return MeanFieldState::tilted_up(eps, delta);
}

json state_json(const MeanFieldState& s) { return json(s.m); }

// ---------------------------------------------------------------------------

struct EvolveArgs {
  ModelParams p;
  double eps = 0.1, delta = 0.1;
  IntegratorConfig ic{1e-3, 1e3, 10, 0.0};
};

void setup_evolve(Command& c, EvolveArgs& a) {
  c.registry.add(c.app, "omega", a.p.omega, "Drive Omega/kappa")->check(CLI::NonNegativeNumber);
  c.registry.add(c.app, "gamma", a.p.gamma, "Coupling Gamma/kappa")->check(CLI::NonNegativeNumber);
  c.registry.add(c.app, "init-eps", a.eps, "Initial m_x on both subsystems");
  c.registry.add(c.app, "init-delta", a.delta, "Initial m_y on both subsystems");
  c.registry.add(c.app, "t-final", a.ic.t_final, "Final time (1/kappa)")->check(CLI::NonNegativeNumber);
  c.registry.add(c.app, "dt", a.ic.dt, "RK4 step")->check(CLI::PositiveNumber);
  c.registry.add(c.app, "record-stride", a.ic.record_stride, "Keep every n-th step")->check(CLI::PositiveNumber);
  c.registry.add(c.app, "transient-cut", a.ic.transient_cut, "Drop samples before this time")
      ->check(CLI::NonNegativeNumber);
  c.run = [&a](OutputDir& out, RunManifest& m) {
    const auto traj = integrate_rk4(initial_state(a.eps, a.delta), a.p, a.ic);
    out.write("trajectory.csv", [&](std::ostream& os) { write_csv(os, traj); });
    const MeanFieldState& last = traj.states.back();
    const MeanFieldState rate = mean_field_rhs(last, a.p);
    double drift = 0.0;
    for (const auto& s : traj.states)
      drift = std::max({drift, std::abs(std::sqrt(s.norm_sq_a()) - 1.0), std::abs(std::sqrt(s.norm_sq_b()) - 1.0)});
    m.summary = {{"final_state", state_json(last)},
                 {"terminal_rate_norm", rate.max_abs()},
                 {"max_norm_drift", drift},
                 {"samples", traj.states.size()}};
  };
}

// ---------------------------------------------------------------------------

struct LyapunovArgs {
  ModelParams p;
  double eps = 0.1, delta = 0.1;
  LyapunovConfig l;
};

void setup_lyapunov(Command& c, LyapunovArgs& a, Common& common) {
  c.registry.add(c.app, "omega", a.p.omega, "Drive Omega/kappa")->check(CLI::NonNegativeNumber);
  c.registry.add(c.app, "gamma", a.p.gamma, "Coupling Gamma/kappa")->check(CLI::NonNegativeNumber);
  c.registry.add(c.app, "init-eps", a.eps, "Initial m_x on both subsystems");
  c.registry.add(c.app, "init-delta", a.delta, "Initial m_y on both subsystems");
  add_lyapunov_options(c, a.l);
  c.run = [&a, &common](OutputDir& out, RunManifest& m) {
    a.l.seed = common.seed;
    const auto r = largest_lyapunov(initial_state(a.eps, a.delta), a.p, a.l);
    out.write("lyapunov.csv", [&](std::ostream& os) { write_running_estimate_csv(os, r); });
    m.summary = {{"lambda_max", r.lambda_max}, {"phase", to_string(r.phase)}};
  };
}

// ---------------------------------------------------------------------------

struct PhaseDiagramArgs {
  std::string gamma_range = "0:2.5", omega_range = "0:2.5";
  std::size_t resolution = 101;
  GridSpec spec;
};

void setup_phase_diagram(Command& c, PhaseDiagramArgs& a, Common& common) {
  c.registry.add(c.app, "gamma-range", a.gamma_range, "Gamma/kappa range lo:hi");
  c.registry.add(c.app, "omega-range", a.omega_range, "Omega/kappa range lo:hi");
  c.registry.add(c.app, "resolution", a.resolution, "Grid points per axis")->check(CLI::Range(2, 100000));
  c.registry.add(c.app, "init-eps", a.spec.init_eps, "Initial m_x on both subsystems");
  c.registry.add(c.app, "init-delta", a.spec.init_delta, "Initial m_y on both subsystems");
  add_lyapunov_options(c, a.spec.lyapunov);
  c.run = [&a, &common](OutputDir& out, RunManifest& m) {
    const Range g = parse_range(a.gamma_range, "gamma-range");
    const Range w = parse_range(a.omega_range, "omega-range");
    a.spec.gamma_min = g.lo;
    a.spec.gamma_max = g.hi;
    a.spec.omega_min = w.lo;
    a.spec.omega_max = w.hi;
    a.spec.n_gamma = a.spec.n_omega = a.resolution;
    a.spec.seed = common.seed;
    a.spec.workers = common.workers;
    const auto grid = run_phase_grid(a.spec, Progress{"phase-diagram rows"});
    out.write("lambda.csv", [&](std::ostream& os) { write_lambda_csv(os, grid); });
    out.write("labels.csv", [&](std::ostream& os) { write_labels_csv(os, grid); });
    out.write("phase_grid.json", [&](std::ostream& os) { os << grid_sidecar(grid).dump(1) << '\n'; });
    std::map<std::string, std::size_t> counts;
    for (const auto& cell : grid.cells) ++counts[cell.phase ? to_string(*cell.phase) : "Error"];
    const auto agree = boundary_agreement(grid);
    m.summary = {{"label_counts", counts},
                 {"boundary_agreement", {{"agreeing", agree.agreeing}, {"eligible", agree.eligible}}}};
  };
}

// ---------------------------------------------------------------------------

struct TwaArgs {
  ModelParams p;
  double eps = 0.1, delta = 0.1;
  TwaConfig config;
};

void setup_twa(Command& c, TwaArgs& a, Common& common) {
  c.registry.add(c.app, "omega", a.p.omega, "Drive Omega/kappa")->check(CLI::NonNegativeNumber);
  c.registry.add(c.app, "gamma", a.p.gamma, "Coupling Gamma/kappa")->check(CLI::NonNegativeNumber);
  c.registry.add(c.app, "init-eps", a.eps, "Initial m_x direction on both subsystems");
  c.registry.add(c.app, "init-delta", a.delta, "Initial m_y direction on both subsystems");
  c.registry.add(c.app, "spin-size", a.config.spin_size, "Spin size S = N/2")->check(CLI::PositiveNumber);
  c.registry.add(c.app, "trajectories", a.config.n_trajectories, "Ensemble size")->check(CLI::PositiveNumber);
  c.registry.add(c.app, "dt", a.config.dt, "Euler-Maruyama step")->check(CLI::PositiveNumber);
  c.registry.add(c.app, "t-final", a.config.t_final, "Final time (1/kappa)")->check(CLI::NonNegativeNumber);
  c.registry.add(c.app, "record-stride", a.config.record_stride, "Record every n-th step")
      ->check(CLI::PositiveNumber);
  c.registry.add(c.app, "blowup-occupation", a.config.blowup_occupation,
                 "Drop a trajectory once any |amplitude|^2 exceeds this times S");
  c.registry.add(c.app, "max-blowup-fraction", a.config.max_blowup_fraction,
                 "Fail if more than this fraction of trajectories is dropped");
  c.run = [&a, &common](OutputDir& out, RunManifest& m) {
    const MeanFieldState s = initial_state(a.eps, a.delta);
    const SpinDirection dir = SpinDirection::from_vector(s[0], s[1], s[2]);
    a.config.seed = common.seed;
    a.config.workers = common.workers;
    const auto r = run_ensemble(dir, dir, a.p, a.config);
    out.write("ensemble.csv", [&](std::ostream& os) { write_ensemble_csv(os, r); });
    out.write("ensemble.json",
              [&](std::ostream& os) { os << ensemble_sidecar(r, a.config, a.p, dir, dir).dump(2) << '\n'; });
    m.summary = {{"n_used", r.n_used}, {"blown_up", r.blown_up}, {"final_mean", state_json(r.mean.back())}};
  };
}

// ---------------------------------------------------------------------------

struct SeriesFile {
  std::vector<double> t, values;
};

SeriesFile read_column(const std::string& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw PreconditionError(path + " is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::ptrdiff_t ti = -1, ci = -1;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == "t") ti = static_cast<std::ptrdiff_t>(k);
    if (header[k] == column) ci = static_cast<std::ptrdiff_t>(k);
  }
  if (ti < 0) throw PreconditionError(path + " has no 't' column");
  if (ci < 0) throw PreconditionError(path + " has no '" + column + "' column");
  SeriesFile f;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      cells.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str()) throw PreconditionError(path + ":" + std::to_string(row) + ": not a number");
    }
    if (cells.size() != header.size())
      throw PreconditionError(path + ":" + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                              " fields");
    f.t.push_back(cells[static_cast<std::size_t>(ti)]);
    f.values.push_back(cells[static_cast<std::size_t>(ci)]);
  }
  return f;
}

struct SpectrumArgs {
  std::string input, column = "mzA", window = "hann";
  double transient_cut = -1.0;
  double prominence = 0.01;
};

void setup_spectrum(Command& c, SpectrumArgs& a) {
  c.registry.add(c.app, "input", a.input, "Trajectory CSV with a 't' column")->required();
  c.registry.add(c.app, "column", a.column, "Column to analyse");
  c.registry.add(c.app, "transient-cut", a.transient_cut,
                 "Drop samples before this time (negative: first half of the series)");
  c.registry.add(c.app, "window", a.window, "Taper: hann or none")->check(CLI::IsMember({"hann", "none"}));
  c.registry.add(c.app, "prominence", a.prominence, "Peak prominence threshold")->check(CLI::NonNegativeNumber);
  c.run = [&a](OutputDir& out, RunManifest& m) {
    const SeriesFile f = read_column(a.input, a.column);
    if (f.t.size() < 2) throw TooShort(a.input + " has fewer than 2 samples");
    const double dt = (f.t.back() - f.t.front()) / static_cast<double>(f.t.size() - 1);
    for (std::size_t k = 1; k < f.t.size(); ++k)
      if (std::abs(f.t[k] - f.t[k - 1] - dt) > 1e-6 * dt)
        throw PreconditionError(a.input + ": samples are not uniformly spaced in t");
    if (a.transient_cut < 0.0) a.transient_cut = 0.5 * (f.t.back() - f.t.front());
    const auto s = emission_spectrum(f.values, dt, a.transient_cut, parse_window(a.window));
    const auto peaks = extract_peaks(s, a.prominence);
    out.write("spectrum.csv", [&](std::ostream& os) { write_spectrum_csv(os, s); });
    out.write("peaks.json", [&](std::ostream& os) { os << to_json(peaks, s).dump(2) << '\n'; });
    m.inputs.push_back({a.input, cli::sha256_file(a.input), fs::file_size(a.input)});
    m.summary = {{"dt", dt},
                 {"delta_omega", s.delta_omega()},
                 {"dominant_omega", dominant_frequency(s)},
                 {"peaks", peaks.size()}};
  };
}

// ---------------------------------------------------------------------------

struct BifurcateArgs {
  double omega = 1.2;
  std::string gamma_range = "0:0.4";
  std::size_t steps = 400;
  BifurcationConfig config;
};

void setup_bifurcate(Command& c, BifurcateArgs& a, Common& common) {
  c.registry.add(c.app, "omega", a.omega, "Drive Omega/kappa")->check(CLI::PositiveNumber);
  c.registry.add(c.app, "gamma-range", a.gamma_range, "Gamma/kappa range lo:hi");
  c.registry.add(c.app, "steps", a.steps, "Number of Gamma intervals (steps + 1 points)")
      ->check(CLI::PositiveNumber);
  c.registry.add(c.app, "t-final", a.config.t_final, "Integration time per point");
  c.registry.add(c.app, "transient-cut", a.config.transient_cut, "Discarded transient");
  c.registry.add(c.app, "dt", a.config.dt, "RK4 step")->check(CLI::PositiveNumber);
  c.registry.add(c.app, "init-eps", a.config.init_eps, "Initial m_x on both subsystems");
  c.registry.add(c.app, "init-delta", a.config.init_delta, "Initial m_y on both subsystems");
  c.registry.add(c.app, "cluster-resolution", a.config.resolution, "Gap that separates maxima bands");
  c.registry.add(c.app, "max-band-width", a.config.max_band_width, "Widest band still counted as one value");
  c.registry.add(c.app, "cluster-cap", a.config.cluster_cap, "Most bands reported as a period");
  c.registry.add(c.app, "min-maxima", a.config.min_maxima, "Fewest maxima needed after the transient");
  add_lyapunov_options(c, a.config.lyapunov);
  c.run = [&a, &common](OutputDir& out, RunManifest& m) {
    const Range g = parse_range(a.gamma_range, "gamma-range");
    std::vector<double> gammas;
    for (std::size_t k = 0; k <= a.steps; ++k)
      gammas.push_back(g.lo + (g.hi - g.lo) * static_cast<double>(k) / static_cast<double>(a.steps));
    a.config.seed = common.seed;
    a.config.workers = common.workers;
    const auto scan = run_bifurcation_scan(a.omega, gammas, a.config, Progress{"bifurcate points"});
    out.write("maxima.csv", [&](std::ostream& os) { write_bifurcation_csv(os, scan); });
    out.write("periods.csv", [&](std::ostream& os) { write_period_csv(os, scan); });
    std::map<std::string, std::size_t> counts;
    for (const auto& pt : scan.points) ++counts[pt.error.empty() ? to_string(pt.period) : "error"];
    m.summary = {{"period_counts", counts}};
  };
}

// ---------------------------------------------------------------------------

struct FixedPointArgs {
  ModelParams p;
};

std::string format_complex(const Complex& z) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(5);
  if (std::abs(z.imag()) < 5e-13)
    os << z.real();
  else if (std::abs(z.real()) < 5e-13)
    os << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << 'i';
  else
    os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << 'i';
  return os.str();
}

void print_fixed_points(std::ostream& os, const FixedPointSurvey& s, const ModelParams& p) {
  os << "Omega/kappa = " << p.omega << ", Gamma/kappa = " << p.gamma
     << ", linear prediction: " << to_string(classify_by_boundaries(p)) << "\n\n";
  os << std::left << std::setw(8) << "family" << std::setw(8) << "branch" << std::setw(8) << "valid"
     << std::setw(11) << "frequency" << "eigenvalues / notes\n";
  for (const auto& r : s.records) {
    double freq = 0.0;
    for (const auto& e : r.analytic_eigs) freq = std::max(freq, std::abs(e.imag()));
    std::string eigs;
    for (const auto& e : r.analytic_eigs) eigs += (eigs.empty() ? "" : ", ") + format_complex(e);
    std::ostringstream f;
    f << std::fixed << std::setprecision(5) << freq;
    os << std::left << std::setw(8) << to_string(r.family) << std::setw(8) << (r.branch > 0 ? "+" : "-")
       << std::setw(8) << (r.valid ? "yes" : "no") << std::setw(11) << (r.analytic_eigs.empty() ? "-" : f.str())
       << (eigs.empty() ? "-" : "{" + eigs + "}");
    for (const auto& v : r.violated_constraints) os << "  [" << v << "]";
    if (r.approximate) os << "  [approximate]";
    os << '\n';
  }
  for (const auto& sk : s.skipped) os << "skipped " << sk << '\n';
}

void setup_fixed_points(Command& c, FixedPointArgs& a) {
  c.registry.add(c.app, "omega", a.p.omega, "Drive Omega/kappa")->check(CLI::NonNegativeNumber);
  c.registry.add(c.app, "gamma", a.p.gamma, "Coupling Gamma/kappa")->check(CLI::NonNegativeNumber);
  c.run = [&a](OutputDir& out, RunManifest& m) {
    const auto s = survey_fixed_points(a.p);
    print_fixed_points(std::cout, s, a.p);
    out.write("fixed_points.json", [&](std::ostream& os) {
      json j = {{"omega", a.p.omega},
                {"gamma", a.p.gamma},
                {"predicted_phase", to_string(classify_by_boundaries(a.p))},
                {"records", to_json(s.records)},
                {"skipped", s.skipped}};
      os << j.dump(2) << '\n';
    });
    std::size_t valid = 0;
    for (const auto& r : s.records) valid += r.valid ? 1 : 0;
    m.summary = {{"records", s.records.size()}, {"valid", valid}};
  };
}

// ---------------------------------------------------------------------------

struct Cli {
  CLI::App app{"Mean-field, Lyapunov, spectral and truncated-Wigner analysis of two coupled "
               "driven-dissipative Dicke models.",
               "dicke"};
  Common common;
  std::string from_manifest;
  std::string override_out_dir;
  std::vector<std::unique_ptr<Command>> commands;

  EvolveArgs evolve;
  LyapunovArgs lyapunov;
  PhaseDiagramArgs phase;
  TwaArgs twa;
  SpectrumArgs spectrum;
  BifurcateArgs bifurcate;
  FixedPointArgs fixed;

  Cli() {
    app.set_version_flag("--version", DICKE_VERSION);
    app.add_option("--from-manifest", from_manifest, "Re-run the command recorded in a manifest.json");
    app.add_option("--out-dir", override_out_dir, "With --from-manifest: write outputs here instead");
    app.require_subcommand(0, 1);
    add("evolve", "Integrate the mean-field flow and write the trajectory", [this](Command& c) {
      setup_evolve(c, evolve);
    });
    add("lyapunov", "Largest Lyapunov exponent at one parameter point", [this](Command& c) {
      setup_lyapunov(c, lyapunov, common);
    });
    add("phase-diagram", "Lyapunov phase grid over (Gamma, Omega)", [this](Command& c) {
      setup_phase_diagram(c, phase, common);
    });
    add("twa", "Truncated-Wigner ensemble at finite spin size", [this](Command& c) { setup_twa(c, twa, common); });
    add("spectrum", "Emission spectrum and peaks of one trajectory column", [this](Command& c) {
      setup_spectrum(c, spectrum);
    });
    add("bifurcate", "Period counts of m_z^A maxima along a Gamma scan", [this](Command& c) {
      setup_bifurcate(c, bifurcate, common);
    });
    add("fixed-points", "Closed-form fixed points, validity and eigenvalues", [this](Command& c) {
      setup_fixed_points(c, fixed);
    });
  }

  void add(const std::string& name, const std::string& help, const std::function<void(Command&)>& setup) {
    auto c = std::make_unique<Command>();
    c->name = name;
    c->app = app.add_subcommand(name, help);
    c->app->add_option("--out-dir", common.out_dir, "Directory for all output files")->capture_default_str();
    c->registry.add(c->app, "seed", common.seed, "Base seed");
    c->registry.add(c->app, "workers", common.workers, "Worker threads (0: all; default from DICKE_WORKERS)");
    setup(*c);
    commands.push_back(std::move(c));
  }

  [[nodiscard]] Command* selected() const {
    for (const auto& c : commands)
      if (c->app->parsed()) return c.get();
    return nullptr;
  }
};

// Argument list that reproduces a manifest's command and configuration.
std::vector<std::string> replay_args(const json& manifest, const std::string& out_dir) {
  if (!manifest.contains("command") || !manifest.contains("config"))
    throw PreconditionError("manifest lacks 'command' or 'config'");
  std::vector<std::string> args{"dicke", manifest["command"].get<std::string>()};
  for (const auto& [key, value] : manifest["config"].items()) {
    args.push_back("--" + key);
    args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
  }
  args.push_back("--out-dir");
  args.push_back(out_dir);
  return args;
}

int execute(Cli& cli, const json* reference) {
  Command* cmd = cli.selected();
  if (!cmd) {
    std::cerr << cli.app.help();
    return kExitUsage;
  }
  OutputDir out(cli.common.out_dir);
  RunManifest m;
  m.command = cmd->name;
  m.seed = cli.common.seed;
  m.version = DICKE_VERSION;
  m.started_utc = cli::utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  try {
    cmd->run(out, m);
  } catch (const PreconditionError& e) {
    m.status = "error";
    m.error = e.what();
    code = kExitUsage;
  } catch (const TooShort& e) {
    m.status = "error";
    m.error = e.what();
    code = kExitUsage;
  } catch (const IoError& e) {
    m.status = "error";
    m.error = e.what();
    code = kExitIo;
  } catch (const Error& e) {
    m.status = "error";
    m.error = e.what();
    code = kExitNumeric;
  }
  m.config = cmd->registry.resolved();
  m.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.outputs = out.files();
  out.write_manifest(m);
  if (code != 0) {
    std::cerr << "error: " << m.error << '\n';
    return code;
  }
  if (reference) {
    std::map<std::string, std::string> want;
    for (const auto& f : (*reference)["outputs"]) want[f["file"].get<std::string>()] = f["sha256"].get<std::string>();
    bool same = want.size() == m.outputs.size();
    for (const auto& f : m.outputs) {
      const auto it = want.find(f.name);
      if (it == want.end() || it->second != f.sha256) {
        std::cerr << "digest mismatch: " << f.name << '\n';
        same = false;
      }
    }
    std::cerr << (same ? "all output digests match the manifest\n" : "outputs differ from the manifest\n");
    if (!same) return kExitNumeric;
  }
  return 0;
}

int run_main(int argc, char** argv) {
  Cli cli;
  try {
    cli.app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  if (cli.from_manifest.empty()) {
    if (!cli.override_out_dir.empty()) {
      std::cerr << "error: top-level --out-dir is only valid with --from-manifest\n";
      return kExitUsage;
    }
    return execute(cli, nullptr);
  }
  if (cli.selected()) {
    std::cerr << "error: --from-manifest cannot be combined with a subcommand\n";
    return kExitUsage;
  }
  std::ifstream in(cli.from_manifest);
  if (!in) throw IoError("cannot read " + cli.from_manifest);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw PreconditionError(cli.from_manifest + " is not valid JSON: " + e.what());
  }
  const std::string out_dir = cli.override_out_dir.empty()
                                  ? fs::path(cli.from_manifest).parent_path().string()
                                  : cli.override_out_dir;
  const auto args = replay_args(manifest, out_dir.empty() ? "." : out_dir);
  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());
  Cli replay;
  try {
    replay.app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    replay.app.exit(e);
    return kExitUsage;
  }
  return execute(replay, &manifest);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_main(argc, argv);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}
