#pragma once

// Closed-form fixed points of the mean-field flow, their validity regions and
// Jacobian spectra, plus the linear phase prediction built from them.

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <array>
#include <string>
#include <vector>

#include "dicke/errors.hpp"
#include "dicke/model.hpp"

namespace dicke {

using Complex = std::complex<double>;

enum class FixedPointFamily { FP1, FP2, FP3 };

inline const char* to_string(FixedPointFamily f) {
  switch (f) {
    case FixedPointFamily::FP1: return "FP1";
    case FixedPointFamily::FP2: return "FP2";
    case FixedPointFamily::FP3: return "FP3";
  }
  return "?";
}

struct FixedPointRecord {
  FixedPointFamily family = FixedPointFamily::FP1;
  int branch = +1;  // +1 or -1
  MeanFieldState location;
  bool valid = false;
  std::vector<std::string> violated_constraints;
  std::vector<Complex> analytic_eigs;
  std::vector<Complex> numeric_eigs;
  // Set when the analytic eigenvalues only approximate the coupled dynamics.
  bool approximate = false;
  std::string note;
};

namespace detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline void check_branch(int branch) { require(branch == 1 || branch == -1, "branch must be +1 or -1"); }

inline void check_nondegenerate(const ModelParams& p, const char* family) {
  if (p.gamma == p.kappa)
    throw DegenerateCoupling(std::string(family) + " is singular at gamma == kappa");
}

}  // namespace detail

using LongState = std::array<long double, 6>;

// Eigenvalues of the 6x6 Jacobian, computed in extended precision. The
// norm-conservation directions make the zero eigenvalue defective, so an
// O(eps) error in the matrix moves it by O(sqrt(eps)); both the location and
// the solve therefore use long double.
inline std::vector<Complex> jacobian_eigenvalues(const LongState& s, const ModelParams& p) {
  using LMat = Eigen::Matrix<long double, 6, 6>;
  const LMat j = mean_field_jacobian<long double>(s, p);
  Eigen::EigenSolver<LMat> solver(j, false);
  std::vector<Complex> out;
  out.reserve(6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    const auto ev = solver.eigenvalues()[i];
    out.emplace_back(static_cast<double>(ev.real()), static_cast<double>(ev.imag()));
  }
  return out;
}

inline std::vector<Complex> jacobian_eigenvalues(const MeanFieldState& s, const ModelParams& p) {
  LongState l;
  for (std::size_t i = 0; i < 6; ++i) l[i] = s[i];
  return jacobian_eigenvalues(l, p);
}

namespace detail {

inline MeanFieldState to_state(const LongState& l) {
  MeanFieldState s;
  for (std::size_t i = 0; i < 6; ++i) s[i] = static_cast<double>(l[i]);
  return s;
}

}  // namespace detail

inline void sort_eigenvalues(std::vector<Complex>& v) {
  std::sort(v.begin(), v.end(), [](const Complex& a, const Complex& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
}

// Largest pairing distance between two eigenvalue multisets after greedy
// nearest matching. Infinity when the sizes differ.
inline double multiset_distance(std::vector<Complex> a, std::vector<Complex> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  sort_eigenvalues(a);
  std::vector<bool> used(b.size(), false);
  double worst = 0.0;
  for (const Complex& x : a) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (used[k]) continue;
      const double d = std::abs(x - b[k]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    used[best] = true;
    worst = std::max(worst, best_d);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// FP1: both subsystems polarized along a common z sign.

struct Fp1Quantities {
  double y;        // Gamma^2 - kappa^2
  double z;        // Gamma^2 + kappa^2
  double bound;    // |Y| / sqrt(Z)
  double mz_sq;    // 1 - Omega^2 Z / Y^2
};

inline Fp1Quantities fp1_quantities(const ModelParams& p) {
  detail::check_nondegenerate(p, "FP1");
  const double g2 = p.gamma * p.gamma, k2 = p.kappa * p.kappa;
  const double y = g2 - k2, z = g2 + k2;
  return {y, z, std::abs(y) / std::sqrt(z), 1.0 - p.omega * p.omega * z / (y * y)};
}

// Location on a branch, assuming the validity bound holds.
template <class T>
std::array<T, 6> fp1_location(const ModelParams& p, int branch) {
  const T g = p.gamma, k = p.kappa, w = p.omega;
  const T y = g * g - k * k, z = g * g + k * k;
  const T mx = -g * w / y;
  const T my = -k * w / y;
  using std::sqrt;
  using std::max;
  const T mz = branch * sqrt(max(T(0), 1 - w * w * z / (y * y)));
  return {mx, my, mz, mx, -my, mz};
}

inline FixedPointRecord fixed_point_fp1(const ModelParams& p, int branch = +1) {
  p.validate();
  detail::check_branch(branch);
  const Fp1Quantities q = fp1_quantities(p);

  FixedPointRecord r;
  r.family = FixedPointFamily::FP1;
  r.branch = branch;
  r.valid = p.omega <= q.bound;
  if (!r.valid) {
    r.violated_constraints.push_back("omega <= |gamma^2 - kappa^2| / sqrt(gamma^2 + kappa^2)");
    r.location = MeanFieldState::from(detail::nan(), detail::nan(), detail::nan(), detail::nan(),
                                      detail::nan(), detail::nan());
    return r;
  }
  const LongState loc = fp1_location<long double>(p, branch);
  r.location = detail::to_state(loc);
  const double mz = r.location[MeanFieldState::kZA];

  // lambda = i sqrt(Y) m_z, doubly degenerate together with its negative.
  const Complex lambda = Complex(0.0, 1.0) * std::sqrt(Complex(q.y, 0.0)) * mz;
  r.analytic_eigs = {0.0, 0.0, lambda, lambda, -lambda, -lambda};
  r.numeric_eigs = jacobian_eigenvalues(loc, p);
  return r;
}

// ---------------------------------------------------------------------------
// FP2: subsystem B in the equatorial plane, A tilted below it.

struct Fp2Quantities {
  double y;      // Gamma^2 - kappa^2
  double z;      // Gamma^2 + kappa^2
  double x;      // Omega^2 Z - Y^2
  double lower;  // |Y| / sqrt(Z)
  double upper;  // sqrt(Z)
};

inline Fp2Quantities fp2_quantities(const ModelParams& p) {
  detail::check_nondegenerate(p, "FP2");
  const double g2 = p.gamma * p.gamma, k2 = p.kappa * p.kappa;
  const double y = g2 - k2, z = g2 + k2;
  return {y, z, p.omega * p.omega * z - y * y, std::abs(y) / std::sqrt(z), std::sqrt(z)};
}

// Decay rate of the doubly degenerate real pair, -sqrt((-X + 2 Gamma kappa sqrt X) / Z).
inline double fp2_real_eigenvalue(const ModelParams& p) {
  const Fp2Quantities q = fp2_quantities(p);
  if (q.x < 0.0) throw DomainError("FP2 eigenvalues need X = omega^2 Z - Y^2 >= 0");
  const double sx = std::sqrt(q.x);
  const double rad = (-q.x + 2.0 * p.gamma * p.kappa * sx) / q.z;
  if (rad < 0.0) throw DomainError("FP2 eigenvalues need omega <= sqrt(gamma^2 + kappa^2)");
  return -std::sqrt(rad);
}

// Location on a branch, assuming the validity bounds hold. Branch +1 has
// m_z^A < 0; branch -1 is its image under z -> -z.
template <class T>
std::array<T, 6> fp2_location(const ModelParams& p, int branch) {
  using std::sqrt;
  using std::max;
  const T g = p.gamma, k = p.kappa, w = p.omega;
  const T y = g * g - k * k, z = g * g + k * k;
  const T x = w * w * z - y * y;
  const T sx = sqrt(max(T(0), x));
  const T mxa = g * (-k * y + g * sx) / (w * k * z);
  const T mya = (x - k * k * y - k * g * sx) / (k * w * z);
  const T mza = -branch * sqrt(max(T(0), (-x + 2 * g * k * sx) / z)) / k;
  const T mxb = -(g * y + k * sx) / (w * z);
  const T myb = (k * y - g * sx) / (w * z);
  return {mxa, mya, mza, mxb, myb, T(0)};
}

inline FixedPointRecord fixed_point_fp2(const ModelParams& p, int branch = +1) {
  p.validate();
  detail::check_branch(branch);
  detail::require(p.omega > 0.0, "FP2 requires omega > 0");
  const Fp2Quantities q = fp2_quantities(p);

  FixedPointRecord r;
  r.family = FixedPointFamily::FP2;
  r.branch = branch;
  if (q.x < 0.0) r.violated_constraints.push_back("X = omega^2 (gamma^2 + kappa^2) - (gamma^2 - kappa^2)^2 >= 0");
  if (p.omega < q.lower) r.violated_constraints.push_back("omega >= |gamma^2 - kappa^2| / sqrt(gamma^2 + kappa^2)");
  if (p.omega > q.upper) r.violated_constraints.push_back("omega <= sqrt(gamma^2 + kappa^2)");
  r.valid = r.violated_constraints.empty();
  if (!r.valid) {
    r.location = MeanFieldState::from(detail::nan(), detail::nan(), detail::nan(), detail::nan(),
                                      detail::nan(), detail::nan());
    return r;
  }

  const double sx = std::sqrt(q.x);
  const double d = fp2_real_eigenvalue(p);
  const LongState loc = fp2_location<long double>(p, branch);
  r.location = detail::to_state(loc);

  const double re = branch * d;
  r.analytic_eigs = {0.0, 0.0, Complex(0.0, sx), Complex(0.0, -sx), re, re};
  r.numeric_eigs = jacobian_eigenvalues(loc, p);
  return r;
}

// ---------------------------------------------------------------------------
// FP3: the uncoupled limit, both subsystems in the equatorial plane.

template <class T>
std::array<T, 6> fp3_location_t(const ModelParams& p, int branch) {
  using std::sqrt;
  using std::max;
  const T r = T(p.kappa) / T(p.omega);
  const T mx = branch * sqrt(max(T(0), 1 - r * r));
  return {mx, r, T(0), mx, -r, T(0)};
}

inline MeanFieldState fp3_location(const ModelParams& p, int branch = +1) {
  detail::check_branch(branch);
  if (p.omega < p.kappa) throw DomainError("FP3 location is complex for omega < kappa");
  return MeanFieldState{fp3_location_t<double>(p, branch)};
}

inline FixedPointRecord fixed_point_fp3(const ModelParams& p, int branch = +1) {
  p.validate();
  detail::check_branch(branch);
  detail::require(p.omega > 0.0, "FP3 requires omega > 0");

  FixedPointRecord r;
  r.family = FixedPointFamily::FP3;
  r.branch = branch;
  if (!(p.omega > p.kappa)) r.violated_constraints.push_back("omega > kappa");
  if (p.gamma != 0.0) {
    r.violated_constraints.push_back("requires gamma == 0 (uncoupled)");
    r.approximate = true;
    r.note = "eigenvalues describe the uncoupled dynamics; the main spectral peak matches only approximately";
  }
  r.valid = r.violated_constraints.empty();

  if (p.omega >= p.kappa) {
    r.location = fp3_location(p, branch);
    const double w = std::sqrt(p.omega * p.omega - p.kappa * p.kappa);
    r.analytic_eigs = {0.0, 0.0, Complex(0.0, w), Complex(0.0, w), Complex(0.0, -w), Complex(0.0, -w)};
  } else {
    r.location = MeanFieldState::from(detail::nan(), detail::nan(), detail::nan(), detail::nan(),
                                      detail::nan(), detail::nan());
  }
  if (r.valid) r.numeric_eigs = jacobian_eigenvalues(fp3_location_t<long double>(p, branch), p);
  return r;
}

// Every family and branch at `p`. Families that are singular or outside their
// preconditions are skipped; the reason is returned in `skipped`.
struct FixedPointSurvey {
  std::vector<FixedPointRecord> records;
  std::vector<std::string> skipped;
};

inline FixedPointSurvey survey_fixed_points(const ModelParams& p) {
  FixedPointSurvey s;
  auto attempt = [&](auto&& fn, const char* name) {
    for (int branch : {+1, -1}) {
      try {
        s.records.push_back(fn(p, branch));
      } catch (const Error& e) {
        s.skipped.push_back(std::string(name) + ": " + e.what());
        return;
      }
    }
  };
  attempt([](const ModelParams& q, int b) { return fixed_point_fp1(q, b); }, "FP1");
  attempt([](const ModelParams& q, int b) { return fixed_point_fp2(q, b); }, "FP2");
  attempt([](const ModelParams& q, int b) { return fixed_point_fp3(q, b); }, "FP3");
  return s;
}

// ---------------------------------------------------------------------------
// Linear phase prediction.

enum class PredictedPhase { Melted, CTC1, CTC2, CTC3, Boundary };

inline const char* to_string(PredictedPhase ph) {
  switch (ph) {
    case PredictedPhase::Melted: return "Melted";
    case PredictedPhase::CTC1: return "CTC1";
    case PredictedPhase::CTC2: return "CTC2";
    case PredictedPhase::CTC3: return "CTC3";
    case PredictedPhase::Boundary: return "Boundary";
  }
  return "?";
}

// Lower and upper analytic phase boundaries in omega at fixed gamma.
inline double lower_boundary(double gamma, double kappa = 1.0) {
  const double g2 = gamma * gamma, k2 = kappa * kappa;
  return std::abs(g2 - k2) / std::sqrt(g2 + k2);
}
inline double upper_boundary(double gamma, double kappa = 1.0) {
  return std::sqrt(gamma * gamma + kappa * kappa);
}

inline PredictedPhase classify_by_boundaries(const ModelParams& p, double tol = 1e-12) {
  p.validate();
  const double lo = lower_boundary(p.gamma, p.kappa);
  const double hi = upper_boundary(p.gamma, p.kappa);
  if (std::abs(p.omega - lo) <= tol || std::abs(p.omega - hi) <= tol) return PredictedPhase::Boundary;
  if (p.omega < lo) {
    if (std::abs(p.gamma - p.kappa) <= tol) return PredictedPhase::Boundary;
    return p.gamma < p.kappa ? PredictedPhase::Melted : PredictedPhase::CTC2;
  }
  if (p.omega <= hi) return PredictedPhase::CTC3;
  return PredictedPhase::CTC1;
}

// ---------------------------------------------------------------------------
// JSON export.

namespace detail {

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json complex_list(const std::vector<Complex>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (const Complex& c : v) out.push_back({c.real(), c.imag()});
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const FixedPointRecord& r) {
  nlohmann::json loc = nlohmann::json::array();
  for (double c : r.location.m) loc.push_back(detail::finite_or_null(c));
  nlohmann::json j{{"family", to_string(r.family)},
                   {"branch", r.branch > 0 ? "+" : "-"},
                   {"location", loc},
                   {"valid", r.valid},
                   {"violated_constraints", r.violated_constraints},
                   {"analytic_eigs", detail::complex_list(r.analytic_eigs)},
                   {"numeric_eigs", detail::complex_list(r.numeric_eigs)},
                   {"approximate", r.approximate}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline nlohmann::json to_json(const std::vector<FixedPointRecord>& rs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rs) out.push_back(to_json(r));
  return out;
}

}  // namespace dicke
