// Copyright 2026 The floquet_lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "floquet_lab/core_fock.hpp"
#include "floquet_lab/errors.hpp"

namespace floquet_lab {

struct FourierMode {
  int k = 0;
  Complex c{0.0, 0.0};
};

struct SampledDrive {
  std::vector<double> t;
  std::vector<double> f;
  int order = 1;  // piecewise linear, periodic wrap
};

// T-periodic real drive.  Either a finite Fourier series or, as a fallback,
// periodic linear interpolation of samples on [0, T).
class DriveSpec {
 public:
  DriveSpec() = default;

  static DriveSpec zero(double period) { return fourier(period, {}); }

  static DriveSpec fourier(double period, const std::vector<FourierMode>& modes) {
    DriveSpec d;
    d.period_ = period;
    d.check_period();
    std::map<int, Complex> merged;
    for (const auto& m : modes) {
      if (!std::isfinite(m.c.real()) || !std::isfinite(m.c.imag())) {
        throw Error(ErrorKind::kConfig, "non-finite Fourier coefficient");
      }
      merged[m.k] += m.c;
    }
    double scale = 0.0;
    for (const auto& [k, c] : merged) scale = std::max(scale, std::abs(c));
    for (const auto& [k, c] : merged) {
      auto it = merged.find(-k);
      const Complex partner = it == merged.end() ? Complex{} : it->second;
      if (std::abs(partner - std::conj(c)) > 1e-12 * std::max(scale, 1.0)) {
        throw Error(ErrorKind::kConfig,
                    "Fourier coefficients must satisfy f_{-k} = conj(f_k) (k=" +
                        std::to_string(k) + ")");
      }
    }
    for (const auto& [k, c] : merged) {
      if (c == Complex{}) continue;
      auto it = merged.find(-k);
      const Complex partner = it == merged.end() ? Complex{} : it->second;
      // Symmetrize so f(t) is real up to rounding.
      const Complex sym = k == 0 ? Complex(c.real(), 0.0) : 0.5 * (c + std::conj(partner));
      d.modes_.push_back({k, sym});
    }
    return d;
  }

  static DriveSpec sampled(double period, SampledDrive samples) {
    DriveSpec d;
    d.period_ = period;
    d.check_period();
    if (samples.order != 1) {
      throw Error(ErrorKind::kConfig, "only interpolation order 1 is supported");
    }
    if (samples.t.size() != samples.f.size() || samples.t.size() < 2) {
      throw Error(ErrorKind::kConfig, "sampled drive needs matching t/f arrays");
    }
    for (std::size_t i = 0; i < samples.t.size(); ++i) {
      if (!std::isfinite(samples.t[i]) || !std::isfinite(samples.f[i])) {
        throw Error(ErrorKind::kConfig, "non-finite drive sample");
      }
      if (i > 0 && !(samples.t[i] > samples.t[i - 1])) {
        throw Error(ErrorKind::kConfig, "sample times must be increasing");
      }
    }
    if (samples.t.front() < 0.0 || samples.t.back() >= period) {
      throw Error(ErrorKind::kConfig, "sample times must lie in [0, T)");
    }
    d.samples_ = std::move(samples);
    return d;
  }

  double period() const { return period_; }
  double angular_frequency() const { return kTwoPi / period_; }
  bool is_sampled() const { return samples_.has_value(); }
  const std::vector<FourierMode>& modes() const { return modes_; }
  const std::optional<SampledDrive>& samples() const { return samples_; }

  bool is_zero() const { return !samples_ && modes_.empty(); }

  int max_mode() const {
    int m = 0;
    for (const auto& md : modes_) m = std::max(m, std::abs(md.k));
    return m;
  }

  double operator()(double t) const {
    if (samples_) return interpolate(t);
    const double w = angular_frequency();
    Complex acc{0.0, 0.0};
    for (const auto& md : modes_) acc += md.c * std::exp(kI * (w * md.k * t));
    return acc.real();
  }

  // Sample knots shifted into [a, b], sorted.  Empty for Fourier drives.
  std::vector<double> knots_in(double a, double b) const {
    std::vector<double> out;
    if (!samples_) return out;
    const double base = std::floor(a / period_) - 1.0;
    for (double m = base;; m += 1.0) {
      const double shift = m * period_;
      if (shift + samples_->t.front() > b) break;
      for (double tk : samples_->t) {
        const double u = tk + shift;
        if (u > a && u < b) out.push_back(u);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  void check_period() const {
    if (!(period_ > 0.0) || !std::isfinite(period_)) {
      throw Error(ErrorKind::kConfig, "drive period must be positive");
    }
  }

  double interpolate(double t) const {
    const auto& ts = samples_->t;
    const auto& fs = samples_->f;
    double u = std::fmod(t, period_);
    if (u < 0.0) u += period_;
    const std::size_t n = ts.size();
    auto it = std::upper_bound(ts.begin(), ts.end(), u);
    std::size_t hi = static_cast<std::size_t>(it - ts.begin());
    double t0, t1, f0, f1;
    if (hi == 0) {
      t0 = ts[n - 1] - period_;
      f0 = fs[n - 1];
      t1 = ts[0];
      f1 = fs[0];
    } else if (hi == n) {
      t0 = ts[n - 1];
      f0 = fs[n - 1];
      t1 = ts[0] + period_;
      f1 = fs[0];
    } else {
      t0 = ts[hi - 1];
      f0 = fs[hi - 1];
      t1 = ts[hi];
      f1 = fs[hi];
    }
    const double w = (u - t0) / (t1 - t0);
    return f0 + w * (f1 - f0);
  }

  double period_ = kTwoPi;
  std::vector<FourierMode> modes_;
  std::optional<SampledDrive> samples_;
};

inline double eval_drive(const DriveSpec& spec, double t) { return spec(t); }

inline void require_consistent(const DriveSpec& spec, const OscillatorParams& params) {
  params.validate();
  if (std::abs(spec.period() - params.period) > 1e-12 * params.period) {
    throw Error(ErrorKind::kConfig, "drive period does not match system period");
  }
}

namespace detail {

// e^{ix} - 1 without cancellation.
inline Complex expm1i(double x) {
  const double s = std::sin(0.5 * x);
  return Complex(-2.0 * s * s, std::sin(x));
}

// y - sin(y) without cancellation for small y.
inline double y_minus_sin(double y) {
  if (std::abs(y) < 1.0) {
    const double y2 = y * y;
    double term = y * y2 / 6.0;
    double sum = term;
    for (int k = 2; k < 30; ++k) {
      term *= -y2 / ((2.0 * k) * (2.0 * k + 1.0));
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return y - std::sin(y);
}

// (y - sin y) / sin^2(y/2); removable singularity at y = 0.
inline double y_minus_sin_over_sin2(double y) {
  if (std::abs(y) < 1e-4) return (2.0 * y / 3.0) * (1.0 + y * y / 30.0);
  const double s = std::sin(0.5 * y);
  return y_minus_sin(y) / (s * s);
}

// x / sin(x)
inline double x_over_sin(double x) {
  if (std::abs(x) < 1e-4) return 1.0 + x * x / 6.0 + 7.0 * x * x * x * x / 360.0;
  return x / std::sin(x);
}

// x cot(x)
inline double x_cot(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 3.0 - x * x * x * x / 45.0;
  return x * std::cos(x) / std::sin(x);
}

// sin(x) / x
inline double sinc(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0 + x * x * x * x / 120.0;
  return std::sin(x) / x;
}

// int_s^t e^{i a u} du
inline Complex exp_integral(double a, double s, double t) {
  const double len = t - s;
  const double x = a * len;
  Complex h0;
  if (std::abs(x) < 1e-3) {
    const Complex z = kI * x;
    h0 = 1.0 + z * (1.0 / 2 + z * (1.0 / 6 + z * (1.0 / 24 + z * (1.0 / 120 + z / 720.0))));
  } else {
    h0 = expm1i(x) / (kI * x);
  }
  return std::exp(kI * (a * s)) * len * h0;
}

template <typename F>
double gauss_panels(F&& f, double a, double b, long panels) {
  using Rule = boost::math::quadrature::gauss<double, 20>;
  panels = std::max<long>(panels, 1);
  const double h = (b - a) / static_cast<double>(panels);
  double acc = 0.0;
  for (long j = 0; j < panels; ++j) {
    const double lo = a + h * static_cast<double>(j);
    const double hi = j + 1 == panels ? b : lo + h;
    acc += Rule::integrate(f, lo, hi);
  }
  return acc;
}

// Adaptive Gauss-Kronrod over [a, b] split at the given breakpoints.
template <typename F>
double adaptive_integral(F&& f, double a, double b, const std::vector<double>& breaks,
                         double abs_tol) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
  if (a == b) return 0.0;
  const double sign = b >= a ? 1.0 : -1.0;
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  std::vector<double> pts{lo};
  for (double u : breaks) {
    if (u > lo && u < hi) pts.push_back(u);
  }
  pts.push_back(hi);
  std::sort(pts.begin(), pts.end());
  double acc = 0.0;
  double err_total = 0.0;
  double l1_total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double err = 0.0;
    double l1 = 0.0;
    acc += Rule::integrate(f, pts[i], pts[i + 1], 12, 1e-10, &err, &l1);
    err_total += err;
    l1_total += l1;
  }
  // abs_tol is relative to the scale of |f| over the interval.
  if (!(err_total <= abs_tol * std::max(1.0, l1_total))) {
    std::ostringstream msg;
    msg << "quadrature did not converge, achieved error " << std::scientific << err_total;
    throw Error(ErrorKind::kIntegration, msg.str());
  }
  return sign * acc;
}

}  // namespace detail

inline Complex fourier_coefficient(const DriveSpec& spec, int k) {
  if (!spec.is_sampled()) {
    for (const auto& md : spec.modes()) {
      if (md.k == k) return md.c;
    }
    return {0.0, 0.0};
  }
  const double w = spec.angular_frequency() * k;
  const double T = spec.period();
  const auto breaks = spec.knots_in(0.0, T);
  const double re = detail::adaptive_integral(
      [&](double u) { return std::cos(w * u) * spec(u); }, 0.0, T, breaks, 1e-11);
  const double im = detail::adaptive_integral(
      [&](double u) { return -std::sin(w * u) * spec(u); }, 0.0, T, breaks, 1e-11);
  return Complex(re, im) / T;
}

// int_s^t e^{-i omega u} f(u) du
inline Complex drive_transform(const DriveSpec& spec, double omega, double s, double t) {
  if (!spec.is_sampled()) {
    const double w = spec.angular_frequency();
    Complex acc{0.0, 0.0};
    for (const auto& md : spec.modes()) {
      acc += md.c * detail::exp_integral(w * md.k - omega, s, t);
    }
    return acc;
  }
  const auto breaks = spec.knots_in(std::min(s, t), std::max(s, t));
  const double re = detail::adaptive_integral(
      [&](double u) { return std::cos(omega * u) * spec(u); }, s, t, breaks, 1e-10);
  const double im = detail::adaptive_integral(
      [&](double u) { return -std::sin(omega * u) * spec(u); }, s, t, breaks, 1e-10);
  return {re, im};
}

struct Phi12 {
  double phi1 = 0.0;
  double phi2 = 0.0;
};

// phi1 + i phi2 = int_s^t e^{i omega (t - u)} f(u) du
inline Phi12 phi12(const DriveSpec& spec, const OscillatorParams& params, double t,
                   double s) {
  require_consistent(spec, params);
  if (t == s || spec.is_zero()) return {};
  const double w = params.omega;
  Complex z;
  if (!spec.is_sampled()) {
    z = std::exp(kI * (w * t)) * drive_transform(spec, w, s, t);
  } else {
    const auto breaks = spec.knots_in(std::min(s, t), std::max(s, t));
    z = {detail::adaptive_integral(
             [&](double u) { return std::cos(w * (t - u)) * spec(u); }, s, t, breaks, 1e-10),
         detail::adaptive_integral(
             [&](double u) { return std::sin(w * (t - u)) * spec(u); }, s, t, breaks, 1e-10)};
  }
  return {z.real(), z.imag()};
}

// psi(t,s) = 1/2 int_s^t (phi1(v,s)^2 - phi2(v,s)^2) dv
inline double psi(const DriveSpec& spec, const OscillatorParams& params, double t, double s) {
  require_consistent(spec, params);
  if (t == s || spec.is_zero()) return 0.0;
  auto integrand = [&](double v) {
    const Phi12 k = phi12(spec, params, v, s);
    return 0.5 * (k.phi1 * k.phi1 - k.phi2 * k.phi2);
  };
  if (!spec.is_sampled()) {
    // The integrand is a trigonometric polynomial with at most linear secular
    // factors; a 20-point rule on panels of phase width ~2 is exact to rounding.
    const double fmax = 2.0 * std::max(params.omega, spec.angular_frequency() * spec.max_mode());
    const long panels = static_cast<long>(std::ceil(std::abs(t - s) * fmax / 2.0));
    return detail::gauss_panels(integrand, s, t, panels);
  }
  const auto breaks = spec.knots_in(std::min(s, t), std::max(s, t));
  return detail::adaptive_integral(integrand, s, t, breaks, 1e-10);
}

struct TimeSplit {
  long n = 0;         // integer number of oscillator periods
  double delta = 0.0; // remainder in (0, 2 pi / omega)
};

inline bool is_resonant_length(double omega, double len) {
  const double x = omega * len / kTwoPi;
  return std::abs(x - std::round(x)) < 1e-9;
}

inline TimeSplit split_time(double omega, double len) {
  const double x = omega * len / kTwoPi;
  if (std::abs(x - std::round(x)) < 1e-9) {
    throw Error(ErrorKind::kResonantTime,
                "t - s is an integer multiple of 2 pi / omega; use the factored form");
  }
  const double n = std::floor(x);
  return {static_cast<long>(n), (x - n) * kTwoPi / omega};
}

struct SingleExpScalars {
  double mu = 0.0;
  double nu = 0.0;
  double sigma = 0.0;
  long n = 0;
  double delta = 0.0;
};

// Scalars of U(t,s) = (-1)^N exp(-i Delta H + i (mu/omega) p + i nu x + i sigma).
inline SingleExpScalars mu_nu_sigma(const DriveSpec& spec, const OscillatorParams& params,
                                    double t, double s, double psi_sign = 1.0) {
  require_consistent(spec, params);
  const double w = params.omega;
  const TimeSplit split = split_time(w, t - s);
  SingleExpScalars out;
  out.n = split.n;
  out.delta = split.delta;
  if (spec.is_zero()) return out;
  const Complex tr = drive_transform(spec, w, s, t);
  const Complex z = std::exp(kI * (w * t)) * tr;
  const Complex j = std::exp(kI * (0.5 * w * (t + s))) * tr;
  const double y = w * split.delta;
  const double sign = (split.n % 2 == 0) ? 1.0 : -1.0;
  // omega Delta / (2 sin(omega (t - s) / 2))
  const double pref = sign * detail::x_over_sin(0.5 * y);
  out.mu = pref * j.imag();
  out.nu = -pref * j.real();
  const double p1 = z.real();
  const double p2 = z.imag();
  out.sigma = -psi_sign * psi(spec, params, t, s) + p1 * p2 / (2.0 * w) -
              detail::y_minus_sin_over_sin2(y) / (8.0 * w) * (p1 * p1 + p2 * p2);
  return out;
}

struct FloquetScalars {
  double xi = 0.0;
  double eta = 0.0;
  double phi = 0.0;
  double F1 = 0.0;
  double F2 = 0.0;
  double Phi = 0.0;
  double dF1 = 0.0;
  double dF2 = 0.0;
  double dPhi = 0.0;
};

// Scalar data of the explicit Floquet decomposition.  The monodromy scalars
// mu(T,0), nu(T,0), sigma(T,0) are computed once.
class FloquetScalarModel {
 public:
  FloquetScalarModel(const DriveSpec& spec, const OscillatorParams& params)
      : spec_(spec), params_(params) {
    require_consistent(spec, params);
    if (is_resonant_length(params.omega, params.period)) {
      throw Error(ErrorKind::kResonance,
                  "T is an integer multiple of 2 pi / omega; no Floquet scalars");
    }
    mono_ = mu_nu_sigma(spec, params, params.period, 0.0);
  }

  const SingleExpScalars& monodromy() const { return mono_; }
  const DriveSpec& drive() const { return spec_; }
  const OscillatorParams& params() const { return params_; }

  // Constant part of H_F: -sigma/T + pi N (mu^2 + nu^2) / (omega^3 Delta^2 T).
  double hf_shift() const {
    const double w = params_.omega;
    const double T = params_.period;
    const double d = mono_.delta;
    return -mono_.sigma / T + kPi * static_cast<double>(mono_.n) *
                                  (mono_.mu * mono_.mu + mono_.nu * mono_.nu) /
                                  (w * w * w * d * d * T);
  }

  FloquetScalars at(double t) const {
    const double w = params_.omega;
    const double mu = mono_.mu;
    const double nu = mono_.nu;
    const double d = mono_.delta;
    const double y = w * t;
    const double sy = std::sin(y);
    const double cy = std::cos(y);
    const double sh = std::sin(0.5 * y);
    const double one_minus_c = 2.0 * sh * sh;

    FloquetScalars out;
    out.xi = (sy * mu - one_minus_c * nu) / (w * d);
    out.eta = (one_minus_c * mu + sy * nu) / (w * d);
    const double a = 4.0 * detail::y_minus_sin(y) - detail::y_minus_sin(2.0 * y);
    const double b = -8.0 * cy * sh * sh;
    const double c = detail::y_minus_sin(2.0 * y);
    const double pref = -1.0 / (4.0 * w * w * w * d * d);
    out.phi = pref * (a * mu * mu + b * mu * nu + c * nu * nu);

    const Phi12 k = phi12(spec_, params_, t, 0.0);
    const double ps = psi(spec_, params_, t, 0.0);
    const double slope = hf_shift();
    out.F1 = k.phi2 - out.xi;
    out.F2 = -k.phi1 - out.eta;
    out.Phi = -ps + out.phi + slope * t - k.phi2 * out.eta / w;

    const double dxi = (cy * mu - sy * nu) / d;
    const double deta = (sy * mu + cy * nu) / d;
    const double da = b;
    const double db = 4.0 * sy - 4.0 * std::sin(2.0 * y);
    const double dc = 4.0 * sy * sy;
    const double dphi = w * pref * (da * mu * mu + db * mu * nu + dc * nu * nu);
    const double f = spec_(t);
    const double dphi1 = f - w * k.phi2;
    const double dphi2 = w * k.phi1;
    const double dpsi = 0.5 * (k.phi1 * k.phi1 - k.phi2 * k.phi2);
    out.dF1 = dphi2 - dxi;
    out.dF2 = -dphi1 - deta;
    out.dPhi = -dpsi + dphi + slope - (dphi2 * out.eta + k.phi2 * deta) / w;
    return out;
  }

 private:
  DriveSpec spec_;
  OscillatorParams params_;
  SingleExpScalars mono_;
};

inline FloquetScalars floquet_scalars(const DriveSpec& spec, const OscillatorParams& params,
                                      double t) {
  return FloquetScalarModel(spec, params).at(t);
}

}  // namespace floquet_lab
