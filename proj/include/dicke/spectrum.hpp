#pragma once

// Emission spectra of observable time series and spectral peak extraction.

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "dicke/errors.hpp"
#include "dicke/integrate.hpp"

namespace dicke {

enum class Window { Hann, None };

inline const char* to_string(Window w) { return w == Window::Hann ? "hann" : "none"; }

inline Window parse_window(const std::string& s) {
  if (s == "hann") return Window::Hann;
  if (s == "none") return Window::None;
  throw PreconditionError("unknown window '" + s + "' (expected hann or none)");
}

struct SpectrumResult {
  std::vector<double> frequencies;  // angular, one-sided, starting at 0
  std::vector<double> power;        // normalized to max = 1
  std::vector<double> raw_power;    // one-sided |X_k|^2 / n before normalization
  double acquisition_time = 0.0;    // samples * dt
  Window window = Window::Hann;
  std::size_t samples = 0;

  [[nodiscard]] double delta_omega() const { return 2.0 * std::numbers::pi / acquisition_time; }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// Real-to-complex DFT; returns |X_k|^2 for k = 0 .. n/2.
inline std::vector<double> rfft_power(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * x.size())));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (x.size() / 2 + 1))));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE);
  }
  std::copy(x.begin(), x.end(), in.get());
  fftw_execute(plan);
  std::vector<double> p(x.size() / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = out.get()[k][0] * out.get()[k][0] + out.get()[k][1] * out.get()[k][1];
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return p;
}

}  // namespace detail

// Spectrum of `series` sampled every `dt`, dropping samples with t < transient_cut.
inline SpectrumResult emission_spectrum(const std::vector<double>& series, double dt, double transient_cut = 0.0,
                                        Window window = Window::Hann) {
  detail::require(dt > 0.0 && std::isfinite(dt), "dt must be > 0");
  detail::require(transient_cut >= 0.0, "transient_cut must be >= 0");
  const auto first = static_cast<std::size_t>(std::ceil(transient_cut / dt - 1e-9));
  const std::size_t n = first < series.size() ? series.size() - first : 0;
  if (n < 256) throw TooShort("spectrum needs >= 256 samples after the transient cut, got " + std::to_string(n));

  std::vector<double> x(series.begin() + static_cast<std::ptrdiff_t>(first), series.end());
  double mean = 0.0;
  for (double v : x) {
    detail::require(std::isfinite(v), "series contains non-finite samples");
    mean += v;
  }
  mean /= static_cast<double>(n);
  for (double& v : x) v -= mean;
  if (window == Window::Hann)
    for (std::size_t k = 0; k < n; ++k)
      x[k] *= 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n - 1)));

  SpectrumResult r;
  r.window = window;
  r.samples = n;
  r.acquisition_time = static_cast<double>(n) * dt;
  r.raw_power = detail::rfft_power(x);
  for (double& p : r.raw_power) p /= static_cast<double>(n);
  const double peak = *std::max_element(r.raw_power.begin(), r.raw_power.end());
  r.power.resize(r.raw_power.size());
  r.frequencies.resize(r.raw_power.size());
  for (std::size_t k = 0; k < r.power.size(); ++k) {
    r.power[k] = peak > 0.0 ? r.raw_power[k] / peak : 0.0;
    r.frequencies[k] = r.delta_omega() * static_cast<double>(k);
  }
  return r;
}

struct Peak {
  double omega = 0.0;       // interpolated position
  double power = 0.0;       // normalized power of the peak bin
  double half_width = 0.0;  // half-width at half prominence
  double prominence = 0.0;
  std::size_t bin = 0;
};

using PeakList = std::vector<Peak>;

// Sub-bin peak position from a parabola through the log power of the peak
// bin and its neighbours.
inline double interpolate_peak(const SpectrumResult& s, std::size_t k) {
  if (k == 0 || k + 1 >= s.power.size()) return s.frequencies[k];
  const double a = s.power[k - 1], b = s.power[k], c = s.power[k + 1];
  if (!(a > 0.0 && b > 0.0 && c > 0.0)) return s.frequencies[k];
  const double la = std::log(a), lb = std::log(b), lc = std::log(c);
  const double denom = la - 2.0 * lb + lc;
  if (denom >= 0.0) return s.frequencies[k];
  const double off = 0.5 * (la - lc) / denom;
  return s.frequencies[k] + std::clamp(off, -0.5, 0.5) * s.delta_omega();
}

namespace detail {

// Range-minimum queries over a fixed array.
class SparseMin {
 public:
  explicit SparseMin(const std::vector<double>& v) {
    const std::size_t n = v.size();
    table_.push_back(v);
    for (std::size_t w = 1; 2 * w <= n; w *= 2) {
      const auto& prev = table_.back();
      std::vector<double> next(n - 2 * w + 1);
      for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::min(prev[i], prev[i + w]);
      table_.push_back(std::move(next));
    }
  }
  // Minimum over [l, r], inclusive.
  [[nodiscard]] double min(std::size_t l, std::size_t r) const {
    const std::size_t len = r - l + 1;
    std::size_t lvl = 0;
    while ((std::size_t{2} << lvl) <= len) ++lvl;
    return std::min(table_[lvl][l], table_[lvl][r + 1 - (std::size_t{1} << lvl)]);
  }

 private:
  std::vector<std::vector<double>> table_;
};

}  // namespace detail

// Local maxima whose topographic prominence (height above the higher of the
// two lowest points separating them from taller terrain) reaches `prominence_threshold`.
inline PeakList extract_peaks(const SpectrumResult& s, double prominence_threshold) {
  const std::vector<double>& p = s.power;
  const std::size_t n = p.size();
  PeakList out;
  if (n < 3) return out;
  const detail::SparseMin rmq(p);

  // Nearest strictly higher sample on each side, by monotonic stacks.
  std::vector<std::ptrdiff_t> left_higher(n, -1), right_higher(n, static_cast<std::ptrdiff_t>(n));
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    while (!stack.empty() && p[stack.back()] <= p[i]) stack.pop_back();
    if (!stack.empty()) left_higher[i] = static_cast<std::ptrdiff_t>(stack.back());
    stack.push_back(i);
  }
  stack.clear();
  for (std::size_t i = n; i-- > 0;) {
    while (!stack.empty() && p[stack.back()] <= p[i]) stack.pop_back();
    if (!stack.empty()) right_higher[i] = static_cast<std::ptrdiff_t>(stack.back());
    stack.push_back(i);
  }

  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (!(p[k] > p[k - 1] && p[k] >= p[k + 1])) continue;
    const std::size_t l0 = left_higher[k] < 0 ? 0 : static_cast<std::size_t>(left_higher[k]);
    const std::size_t r0 = right_higher[k] >= static_cast<std::ptrdiff_t>(n) ? n - 1 : static_cast<std::size_t>(right_higher[k]);
    const double left_base = rmq.min(l0, k);
    const double right_base = rmq.min(k, r0);
    const double prom = p[k] - std::max(left_base, right_base);
    if (prom < prominence_threshold) continue;

    const double level = p[k] - 0.5 * prom;
    auto crossing = [&](int dir) {
      std::size_t i = k;
      while (true) {
        const std::size_t j = dir < 0 ? i - 1 : i + 1;
        if ((dir < 0 && i == 0) || (dir > 0 && i + 1 >= n)) return s.frequencies[i];
        if (p[j] < level) {
          const double t = (p[i] - level) / (p[i] - p[j]);
          return s.frequencies[i] + t * (s.frequencies[j] - s.frequencies[i]);
        }
        i = j;
      }
    };
    Peak pk;
    pk.bin = k;
    pk.omega = interpolate_peak(s, k);
    pk.power = p[k];
    pk.prominence = prom;
    pk.half_width = 0.5 * (crossing(+1) - crossing(-1));
    out.push_back(pk);
  }
  std::stable_sort(out.begin(), out.end(), [](const Peak& a, const Peak& b) { return a.power > b.power; });
  return out;
}

// Fraction of total (normalized) power in bins with |omega - center| <= half_window.
inline double power_fraction_near(const SpectrumResult& s, double center, double half_window) {
  double inside = 0.0, total = 0.0;
  for (std::size_t k = 0; k < s.power.size(); ++k) {
    total += s.power[k];
    if (std::abs(s.frequencies[k] - center) <= half_window + 1e-12) inside += s.power[k];
  }
  return total > 0.0 ? inside / total : 0.0;
}

// Position of the strongest bin, refined by interpolation.
inline double dominant_frequency(const SpectrumResult& s) {
  const auto it = std::max_element(s.power.begin(), s.power.end());
  return interpolate_peak(s, static_cast<std::size_t>(it - s.power.begin()));
}

// Header `omega,power`.
inline void write_spectrum_csv(std::ostream& os, const SpectrumResult& s) {
  os << "omega,power\n";
  for (std::size_t k = 0; k < s.power.size(); ++k)
    os << detail::format_double(s.frequencies[k]) << ',' << detail::format_double(s.power[k]) << '\n';
}

inline nlohmann::json to_json(const PeakList& peaks, const SpectrumResult& s) {
  nlohmann::json list = nlohmann::json::array();
  for (const Peak& p : peaks)
    list.push_back({{"omega", p.omega}, {"power", p.power}, {"half_width", p.half_width}, {"prominence", p.prominence}});
  return {{"acquisition_time", s.acquisition_time},
          {"delta_omega", s.delta_omega()},
          {"window", to_string(s.window)},
          {"samples", s.samples},
          {"peaks", list}};
}

}  // namespace dicke
