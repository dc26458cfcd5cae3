#pragma once

// Mean-field flow of two coupled driven-dissipative Dicke models.
//
// Subsystem A loses excitations at rate kappa, subsystem B gains at the same
// rate; both are driven with amplitude omega and exchange excitations through
// the flip-flop coupling gamma. Time is measured in units of 1/kappa.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>

#include "dicke/errors.hpp"

namespace dicke {

struct ModelParams {
  double omega = 0.0;      // drive amplitude
  double gamma = 0.0;      // inter-subsystem coupling
  double kappa = 1.0;      // collective decay rate, sets the time unit
  double spin_size = 1.0;  // S = N/2, only used by the stochastic ensemble

  // Signed decay rates: A dissipates, B experiences gain.
  [[nodiscard]] double kappa_a() const { return kappa; }
  [[nodiscard]] double kappa_b() const { return -kappa; }

  void validate() const {
    std::ostringstream msg;
    if (!(kappa > 0.0)) msg << "kappa must be > 0 (got " << kappa << ") ";
    if (!(omega >= 0.0)) msg << "omega must be >= 0 (got " << omega << ") ";
    if (!(gamma >= 0.0)) msg << "gamma must be >= 0 (got " << gamma << ") ";
    if (!(spin_size > 0.0)) msg << "spin_size must be > 0 (got " << spin_size << ") ";
    if (!msg.str().empty()) throw PreconditionError(msg.str());
  }

  bool operator==(const ModelParams&) const = default;
};

// Six rescaled spin expectations, ordered (x^A, y^A, z^A, x^B, y^B, z^B).
// The same layout is used for time derivatives and Jacobian rows/columns.
struct MeanFieldState {
  enum Component : std::size_t { kXA = 0, kYA, kZA, kXB, kYB, kZB };
  static constexpr std::size_t kSize = 6;

  std::array<double, kSize> m{};

  static MeanFieldState from(double mx_a, double my_a, double mz_a, double mx_b, double my_b,
                             double mz_b) {
    return MeanFieldState{{mx_a, my_a, mz_a, mx_b, my_b, mz_b}};
  }

  // The (eps, delta, sqrt(1 - eps^2 - delta^2)) family on both subsystems.
  static MeanFieldState tilted_up(double eps, double delta) {
    const double z = std::sqrt(1.0 - eps * eps - delta * delta);
    return from(eps, delta, z, eps, delta, z);
  }

  double& operator[](std::size_t i) { return m[i]; }
  double operator[](std::size_t i) const { return m[i]; }

  [[nodiscard]] double norm_sq_a() const { return m[kXA] * m[kXA] + m[kYA] * m[kYA] + m[kZA] * m[kZA]; }
  [[nodiscard]] double norm_sq_b() const { return m[kXB] * m[kXB] + m[kYB] * m[kYB] + m[kZB] * m[kZB]; }

  // Each subsystem rescaled to unit length.
  [[nodiscard]] MeanFieldState normalized() const {
    MeanFieldState r = *this;
    const double a = std::sqrt(norm_sq_a()), b = std::sqrt(norm_sq_b());
    for (std::size_t i = 0; i < 3; ++i) {
      r.m[i] /= a;
      r.m[3 + i] /= b;
    }
    return r;
  }

  [[nodiscard]] bool finite() const {
    for (double c : m)
      if (!std::isfinite(c)) return false;
    return true;
  }

  [[nodiscard]] double max_abs() const {
    double r = 0.0;
    for (double c : m) r = std::max(r, std::abs(c));
    return r;
  }

  MeanFieldState& operator+=(const MeanFieldState& o) {
    for (std::size_t i = 0; i < kSize; ++i) m[i] += o.m[i];
    return *this;
  }
  MeanFieldState& operator-=(const MeanFieldState& o) {
    for (std::size_t i = 0; i < kSize; ++i) m[i] -= o.m[i];
    return *this;
  }
  MeanFieldState& operator*=(double s) {
    for (double& c : m) c *= s;
    return *this;
  }
  friend MeanFieldState operator+(MeanFieldState a, const MeanFieldState& b) { return a += b; }
  friend MeanFieldState operator-(MeanFieldState a, const MeanFieldState& b) { return a -= b; }
  friend MeanFieldState operator*(double s, MeanFieldState a) { return a *= s; }
  friend MeanFieldState operator*(MeanFieldState a, double s) { return a *= s; }

  bool operator==(const MeanFieldState&) const = default;
};

// Euclidean distance in R^6.
inline double distance(const MeanFieldState& a, const MeanFieldState& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < MeanFieldState::kSize; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

using Jacobian = Eigen::Matrix<double, 6, 6>;

// Time derivative of the six spin components. For alpha in {A, B}, beta the
// other subsystem and kappa_A = +kappa, kappa_B = -kappa:
//   dx^a/dt = k_a x^a z^a + G z^a y^b
//   dy^a/dt = -W z^a + k_a y^a z^a - G z^a x^b
//   dz^a/dt = W y^a - k_a (x^a^2 + y^a^2) + G (y^a x^b - x^a y^b)
inline MeanFieldState mean_field_rhs(const MeanFieldState& s, const ModelParams& p) {
  using S = MeanFieldState;
  const double w = p.omega;
  const double g = p.gamma;
  const double ka = p.kappa_a();
  const double kb = p.kappa_b();
  const double xa = s[S::kXA], ya = s[S::kYA], za = s[S::kZA];
  const double xb = s[S::kXB], yb = s[S::kYB], zb = s[S::kZB];

  MeanFieldState d;
  d[S::kXA] = ka * xa * za + g * za * yb;
  d[S::kYA] = -w * za + ka * ya * za - g * za * xb;
  d[S::kZA] = w * ya - ka * (xa * xa + ya * ya) + g * (ya * xb - xa * yb);
  d[S::kXB] = kb * xb * zb + g * zb * ya;
  d[S::kYB] = -w * zb + kb * yb * zb - g * zb * xa;
  d[S::kZB] = w * yb - kb * (xb * xb + yb * yb) + g * (yb * xa - xb * ya);
  return d;
}

// J(i, j) = d(rhs_i)/d(state_j), both indices in MeanFieldState order.
// Templated on the scalar so eigenvalue checks can run in extended precision.
template <class T>
Eigen::Matrix<T, 6, 6> mean_field_jacobian(const std::array<T, 6>& s, const ModelParams& p) {
  using S = MeanFieldState;
  const T w = p.omega;
  const T g = p.gamma;
  const T ka = p.kappa_a();
  const T kb = p.kappa_b();
  const T xa = s[S::kXA], ya = s[S::kYA], za = s[S::kZA];
  const T xb = s[S::kXB], yb = s[S::kYB], zb = s[S::kZB];

  Eigen::Matrix<T, 6, 6> j = Eigen::Matrix<T, 6, 6>::Zero();
  j(S::kXA, S::kXA) = ka * za;
  j(S::kXA, S::kZA) = ka * xa + g * yb;
  j(S::kXA, S::kYB) = g * za;

  j(S::kYA, S::kYA) = ka * za;
  j(S::kYA, S::kZA) = -w + ka * ya - g * xb;
  j(S::kYA, S::kXB) = -g * za;

  j(S::kZA, S::kXA) = -2 * ka * xa - g * yb;
  j(S::kZA, S::kYA) = w - 2 * ka * ya + g * xb;
  j(S::kZA, S::kXB) = g * ya;
  j(S::kZA, S::kYB) = -g * xa;

  j(S::kXB, S::kXB) = kb * zb;
  j(S::kXB, S::kZB) = kb * xb + g * ya;
  j(S::kXB, S::kYA) = g * zb;

  j(S::kYB, S::kYB) = kb * zb;
  j(S::kYB, S::kZB) = -w + kb * yb - g * xa;
  j(S::kYB, S::kXA) = -g * zb;

  j(S::kZB, S::kXB) = -2 * kb * xb - g * ya;
  j(S::kZB, S::kYB) = w - 2 * kb * yb + g * xa;
  j(S::kZB, S::kXA) = g * yb;
  j(S::kZB, S::kYA) = -g * xb;
  return j;
}

inline Jacobian mean_field_jacobian(const MeanFieldState& s, const ModelParams& p) {
  return mean_field_jacobian<double>(s.m, p);
}

}  // namespace dicke
