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
#include <string>
#include <variant>

#include "floquet_lab/core_fock.hpp"
#include "floquet_lab/drive.hpp"
#include "floquet_lab/errors.hpp"

namespace floquet_lab {

struct ForwardSplit {
  double xi = 0.0;
  double eta = 0.0;
  double phi = 0.0;
};

struct InverseSplit {
  double mu = 0.0;
  double nu = 0.0;
  double phi = 0.0;
};

// exp(-i t H + i (mu/omega) p + i nu x)
//   = e^{-i phi} exp(i (xi/omega) p) exp(i eta x) exp(-i t H).
inline ForwardSplit split_forward(double mu, double nu, double t, double omega) {
  const double y = omega * t;
  const double h = 0.5 * y;
  const double pref = detail::sinc(h);
  ForwardSplit out;
  out.xi = pref * (std::cos(h) * mu - std::sin(h) * nu);
  out.eta = pref * (std::sin(h) * mu + std::cos(h) * nu);
  // Brackets divided by y^2.
  double a, b, c;
  if (std::abs(y) < 1e-4) {
    const double y2 = y * y;
    a = -2.0 * y / 3.0 + 28.0 * y * y2 / 120.0;
    b = -2.0 + 7.0 * y2 / 6.0;
    c = 4.0 * y / 3.0 - 4.0 * y * y2 / 15.0;
  } else {
    const double y2 = y * y;
    const double sh = std::sin(h);
    a = (4.0 * detail::y_minus_sin(y) - detail::y_minus_sin(2.0 * y)) / y2;
    b = -8.0 * std::cos(y) * sh * sh / y2;
    c = detail::y_minus_sin(2.0 * y) / y2;
  }
  out.phi = -(a * mu * mu + b * mu * nu + c * nu * nu) / (4.0 * omega);
  return out;
}

// Inverse of split_forward on |t| < 2 pi / omega.
inline InverseSplit split_inverse(double xi, double eta, double t, double omega) {
  if (!(std::abs(t) < kTwoPi / omega)) {
    throw Error(ErrorKind::kDomain, "split_inverse requires |t| < 2 pi / omega");
  }
  const double y = omega * t;
  const double c = detail::x_cot(0.5 * y);
  InverseSplit out;
  out.mu = c * xi + 0.5 * y * eta;
  out.nu = -0.5 * y * xi + c * eta;
  out.phi = xi * eta / (2.0 * omega) -
            detail::y_minus_sin_over_sin2(y) / (8.0 * omega) * (xi * xi + eta * eta);
  return out;
}

struct FactoredScalars {
  double phi1 = 0.0;
  double phi2 = 0.0;
  double psi = 0.0;
  double dt = 0.0;
};

using PropagatorFactors = std::variant<FactoredScalars, SingleExpScalars>;

inline FactoredScalars factored_scalars(const DriveSpec& spec, const OscillatorParams& params,
                                        double t, double s) {
  const Phi12 k = phi12(spec, params, t, s);
  return {k.phi1, k.phi2, psi(spec, params, t, s), t - s};
}

// U = exp(-i phi1 x) exp(i (phi2/omega) p) exp(-i dt H) e^{-i psi}, at the
// dimension of the cache (not trimmed).
inline Matrix materialize_factored(const FactoredScalars& f, const QuadratureExponentials& qe,
                                   double psi_sign = 1.0) {
  Matrix u = qe.exp_x(-f.phi1) * qe.exp_p(f.phi2 / qe.omega());
  u *= qe.exp_h_diag(f.dt).asDiagonal();
  u *= std::exp(-kI * (psi_sign * f.psi));
  return u;
}

inline Matrix propagator_factored(const DriveSpec& spec, const OscillatorParams& params,
                                  const Truncation& trunc, double t, double s,
                                  double psi_sign = 1.0) {
  trunc.validate();
  const FactoredScalars f = factored_scalars(spec, params, t, s);
  const QuadratureExponentials qe(params.omega, trunc.full_dim());
  return materialize_factored(f, qe, psi_sign).topLeftCorner(trunc.n_keep, trunc.n_keep);
}

// Same, reusing a cache built at trunc.full_dim().
inline Matrix propagator_factored(const DriveSpec& spec, const OscillatorParams& params,
                                  const Truncation& trunc, const QuadratureExponentials& qe,
                                  double t, double s, double psi_sign = 1.0) {
  const FactoredScalars f = factored_scalars(spec, params, t, s);
  return materialize_factored(f, qe, psi_sign).topLeftCorner(trunc.n_keep, trunc.n_keep);
}

// (-1)^N exp(-i Delta H + i (mu/omega) p + i nu x) e^{i sigma}, at dimension dim.
inline Matrix materialize_single_exp(const SingleExpScalars& sc, const OscillatorParams& params,
                                     Index dim) {
  const QuadratureOps ops = build_xpH(params, dim);
  const Matrix g = sc.delta * ops.h_omega - (sc.mu / params.omega) * ops.p - sc.nu * ops.x;
  const double sign = (sc.n % 2 == 0) ? 1.0 : -1.0;
  return exp_hermitian(g, -kI) * (sign * std::exp(kI * sc.sigma));
}

// Fock level reached by P_{<=k} under a phase-space rotation by `angle` about
// the centre of exp(-i angle/omega (H_omega - (mu/(omega delta)) p - (nu/delta) x)),
// which sits at level (mu^2 + nu^2) / (2 omega^3 delta^2).  A truncated matrix
// exponential is faithful on P_{<=k} only when the basis covers this reach.
inline double orbit_reach(double mu, double nu, double delta, double omega, double angle,
                          Index k) {
  const double centre = (mu * mu + nu * nu) / (2.0 * omega * omega * omega * delta * delta);
  const double h = std::sin(0.5 * std::min(std::abs(angle), kPi));
  const double r = std::sqrt(static_cast<double>(k)) + std::sqrt(4.0 * centre * h * h);
  return r * r;
}

inline double single_exp_reach(const SingleExpScalars& sc, double omega, Index k) {
  if (sc.delta == 0.0) return static_cast<double>(k);
  return orbit_reach(sc.mu, sc.nu, sc.delta, omega, omega * sc.delta, k);
}

// kFixed exponentiates at trunc.full_dim().  kAdaptive treats n_pad as a
// minimum and widens the basis until it covers the orbit of the kept block;
// near Delta -> 2 pi / omega the centre runs off to high levels.
enum class SingleExpPad { kAdaptive, kFixed };

inline constexpr Index kMaxSingleExpDim = 2048;

inline Index single_exp_dim(const SingleExpScalars& sc, const OscillatorParams& params,
                            const Truncation& trunc, SingleExpPad pad = SingleExpPad::kAdaptive) {
  if (pad == SingleExpPad::kFixed) return trunc.full_dim();
  const double reach = single_exp_reach(sc, params.omega, trunc.n_keep);
  if (!(reach + static_cast<double>(trunc.n_pad) <= static_cast<double>(kMaxSingleExpDim))) {
    throw Error(ErrorKind::kNumeric,
                "single exponential needs a basis beyond " + std::to_string(kMaxSingleExpDim) +
                    " levels this close to a resonant time; use the factored form");
  }
  return std::max(trunc.full_dim(), static_cast<Index>(std::ceil(reach)) + trunc.n_pad);
}

inline Matrix propagator_single_exp(const DriveSpec& spec, const OscillatorParams& params,
                                    const Truncation& trunc, double t, double s,
                                    double psi_sign = 1.0,
                                    SingleExpPad pad = SingleExpPad::kAdaptive) {
  trunc.validate();
  const SingleExpScalars sc = mu_nu_sigma(spec, params, t, s, psi_sign);
  return materialize_single_exp(sc, params, single_exp_dim(sc, params, trunc, pad))
      .topLeftCorner(trunc.n_keep, trunc.n_keep);
}

inline Matrix materialize(const PropagatorFactors& factors, const OscillatorParams& params,
                          const Truncation& trunc) {
  trunc.validate();
  if (const auto* f = std::get_if<FactoredScalars>(&factors)) {
    const QuadratureExponentials qe(params.omega, trunc.full_dim());
    return materialize_factored(*f, qe).topLeftCorner(trunc.n_keep, trunc.n_keep);
  }
  const auto& sc = std::get<SingleExpScalars>(factors);
  return materialize_single_exp(sc, params, single_exp_dim(sc, params, trunc))
      .topLeftCorner(trunc.n_keep, trunc.n_keep);
}

// H(t) = H_omega + f(t) x at dimension dim.
inline Matrix hamiltonian(const DriveSpec& spec, const OscillatorParams& params, double t,
                          Index dim) {
  const QuadratureOps ops = build_xpH(params, dim);
  return ops.h_omega + spec(t) * ops.x;
}

struct HeisenbergReport {
  double x_deviation = 0.0;
  double p_deviation = 0.0;
  double max_deviation = 0.0;
};

// Conjugation of x and p by the free evolution against the classical rotation,
// on the kept/2 block.
inline HeisenbergReport heisenberg_check(const OscillatorParams& params, const Truncation& trunc,
                                         double t) {
  trunc.validate();
  const Index n = trunc.n_keep;
  const QuadratureOps ops = build_xpH(params, n);
  const QuadratureExponentials qe(params.omega, n);
  const Vector ph = qe.exp_h_diag(t);
  // e^{itH} X e^{-itH}
  const Matrix xt = ph.conjugate().asDiagonal() * ops.x * ph.asDiagonal();
  const Matrix pt = ph.conjugate().asDiagonal() * ops.p * ph.asDiagonal();
  const double w = params.omega;
  const double c = std::cos(w * t);
  const double sn = std::sin(w * t);
  const Matrix x_ref = c * ops.x + (sn / w) * ops.p;
  const Matrix p_ref = -w * sn * ops.x + c * ops.p;
  HeisenbergReport r;
  r.x_deviation = block_diff(xt, x_ref, n / 2);
  r.p_deviation = block_diff(pt, p_ref, n / 2);
  r.max_deviation = std::max(r.x_deviation, r.p_deviation);
  return r;
}

}  // namespace floquet_lab
