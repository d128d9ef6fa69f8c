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
#include <vector>

#include "floquet_lab/core_fock.hpp"
#include "floquet_lab/drive.hpp"
#include "floquet_lab/errors.hpp"

namespace floquet_lab {

enum class Scheme { kMidpointExp, kCF4 };

inline const char* to_string(Scheme s) {
  return s == Scheme::kMidpointExp ? "MidpointExp" : "CF4";
}

namespace detail {

inline constexpr double kSqrt3 = 1.7320508075688772;
inline constexpr double kCf4A1 = (3.0 - 2.0 * kSqrt3) / 12.0;
inline constexpr double kCf4A2 = (3.0 + 2.0 * kSqrt3) / 12.0;
inline constexpr double kCf4C1 = 0.5 - kSqrt3 / 6.0;
inline constexpr double kCf4C2 = 0.5 + kSqrt3 / 6.0;

// Steps resolve the shorter of the drive period and the oscillator period.
inline double resolved_period(const OscillatorParams& params) {
  return std::min(params.period, kTwoPi / params.omega);
}

inline long step_count(double len, double period, int steps_per_period) {
  const double raw = std::abs(len) / period * steps_per_period;
  return std::max<long>(1, static_cast<long>(std::ceil(raw - 1e-9)));
}

// Applies exp(-i (a H_omega + b x)) from the left.  The exponent is a real
// symmetric tridiagonal matrix.
class TridiagonalExp {
 public:
  TridiagonalExp(double omega, Index dim)
      : levels_(oscillator_levels(omega, dim)), offdiag_(position_offdiag(omega, dim)) {}

  template <typename Derived>
  void apply(double a, double b, Eigen::MatrixBase<Derived>& u) {
    const Index n = levels_.size();
    if (b == 0.0) {
      for (Index i = 0; i < n; ++i) u.row(i) *= std::exp(-kI * (a * levels_(i)));
      return;
    }
    es_.computeFromTridiagonal(a * levels_, b * offdiag_, Eigen::ComputeEigenvectors);
    const RealMatrix& q = es_.eigenvectors();
    const RealVector& lam = es_.eigenvalues();
    re_.noalias() = q.transpose() * u.real();
    im_.noalias() = q.transpose() * u.imag();
    for (Index i = 0; i < n; ++i) {
      const double c = std::cos(lam(i));
      const double s = std::sin(lam(i));
      for (Index j = 0; j < re_.cols(); ++j) {
        const double r = re_(i, j);
        const double m = im_(i, j);
        re_(i, j) = c * r + s * m;
        im_(i, j) = c * m - s * r;
      }
    }
    u.real() = q * re_;
    u.imag() = q * im_;
  }

 private:
  RealVector levels_;
  RealVector offdiag_;
  Eigen::SelfAdjointEigenSolver<RealMatrix> es_;
  RealMatrix re_;
  RealMatrix im_;
};

}  // namespace detail

// Time stepper for H(t) = H_omega + f(t) x at a fixed dimension.
class OracleStepper {
 public:
  OracleStepper(const DriveSpec& spec, const OscillatorParams& params, Index dim,
                int steps_per_period, Scheme scheme)
      : spec_(spec), params_(params), dim_(dim), spp_(steps_per_period), scheme_(scheme),
        exp_(params.omega, dim) {
    require_consistent(spec, params);
    if (steps_per_period < 16) {
      throw Error(ErrorKind::kInvalidInput,
                  "steps_per_period must be at least 16, got " + std::to_string(steps_per_period));
    }
  }

  Index dim() const { return dim_; }

  // u <- U(t, s) u
  template <typename Derived>
  void propagate(Eigen::MatrixBase<Derived>& u, double s, double t) {
    if (t == s) return;
    const long n = detail::step_count(t - s, detail::resolved_period(params_), spp_);
    const double h = (t - s) / static_cast<double>(n);
    for (long j = 0; j < n; ++j) {
      const double t0 = s + h * static_cast<double>(j);
      if (scheme_ == Scheme::kMidpointExp) {
        exp_.apply(h, h * spec_(t0 + 0.5 * h), u);
      } else {
        const double f1 = spec_(t0 + detail::kCf4C1 * h);
        const double f2 = spec_(t0 + detail::kCf4C2 * h);
        exp_.apply(0.5 * h, h * (detail::kCf4A2 * f1 + detail::kCf4A1 * f2), u);
        exp_.apply(0.5 * h, h * (detail::kCf4A1 * f1 + detail::kCf4A2 * f2), u);
      }
    }
  }

  Matrix propagator(double t, double s) {
    Matrix u = Matrix::Identity(dim_, dim_);
    propagate(u, s, t);
    return u;
  }

 private:
  DriveSpec spec_;
  OscillatorParams params_;
  Index dim_;
  int spp_;
  Scheme scheme_;
  detail::TridiagonalExp exp_;
};

// Brute-force propagator U(t, s) at padded dimension, trimmed to n_keep.
inline Matrix integrate(const DriveSpec& spec, const OscillatorParams& params,
                        const Truncation& trunc, double t, double s, int steps_per_period = 256,
                        Scheme scheme = Scheme::kCF4) {
  trunc.validate();
  OracleStepper stepper(spec, params, trunc.full_dim(), steps_per_period, scheme);
  return stepper.propagator(t, s).topLeftCorner(trunc.n_keep, trunc.n_keep);
}

struct EvolveResult {
  std::vector<double> times;
  std::vector<Vector> states;  // padded dimension
  bool support_warning = false;
  Index support_index = 0;
};

// States U(t, 0) psi0 for t in t_grid (non-negative, non-decreasing).  One
// period is stepped with full matrices; later times use U(nT + tau, 0) =
// U(tau, 0) U(T, 0)^n.
inline EvolveResult evolve_state(const DriveSpec& spec, const OscillatorParams& params,
                                 const Truncation& trunc, const Vector& psi0,
                                 const std::vector<double>& t_grid, int steps_per_period = 128,
                                 Scheme scheme = Scheme::kCF4) {
  trunc.validate();
  const Index full = trunc.full_dim();
  if (psi0.size() != trunc.n_keep && psi0.size() != full) {
    throw Error(ErrorKind::kInvalidInput, "initial state has the wrong dimension");
  }
  if (std::abs(psi0.norm() - 1.0) > 1e-12) {
    throw Error(ErrorKind::kInvalidInput, "initial state must be normalized");
  }
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] < 0.0 || (i > 0 && t_grid[i] < t_grid[i - 1])) {
      throw Error(ErrorKind::kInvalidInput, "time grid must be non-negative and sorted");
    }
  }
  EvolveResult out;
  out.times = t_grid;
  Vector start = Vector::Zero(full);
  start.head(psi0.size()) = psi0;
  for (Index n = 0; n < psi0.size(); ++n) {
    if (std::abs(psi0(n)) > 1e-12) out.support_index = n;
  }
  out.support_warning = out.support_index > trunc.n_keep / 4;

  const double T = params.period;
  struct Item {
    std::size_t slot;
    long cycles;
    double phase;
  };
  std::vector<Item> items;
  long max_cycles = 0;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    long n = static_cast<long>(std::floor(t_grid[i] / T + 1e-12));
    double tau = std::max(0.0, t_grid[i] - static_cast<double>(n) * T);
    if (tau > T * (1.0 - 1e-12)) {
      ++n;
      tau = 0.0;
    }
    items.push_back({i, n, tau});
    max_cycles = std::max(max_cycles, n);
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& a, const Item& b) { return a.phase < b.phase; });

  OracleStepper stepper(spec, params, full, steps_per_period, scheme);
  Matrix u = Matrix::Identity(full, full);
  double at = 0.0;
  std::vector<Vector> cycle_states;
  // Phases are merged within 1e-12 T.
  std::vector<std::pair<double, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (groups.empty() || items[i].phase - groups.back().first > 1e-12 * T) {
      groups.push_back({items[i].phase, {}});
    }
    groups.back().second.push_back(i);
  }
  out.states.assign(t_grid.size(), Vector());
  std::vector<Matrix> phase_maps;
  for (const auto& g : groups) {
    stepper.propagate(u, at, g.first);
    at = g.first;
    phase_maps.push_back(u);
  }
  stepper.propagate(u, at, T);
  const Matrix& monodromy = u;
  cycle_states.reserve(static_cast<std::size_t>(max_cycles) + 1);
  cycle_states.push_back(start);
  for (long n = 1; n <= max_cycles; ++n) cycle_states.push_back(monodromy * cycle_states.back());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (std::size_t idx : groups[gi].second) {
      const Item& it = items[idx];
      out.states[it.slot] = phase_maps[gi] * cycle_states[static_cast<std::size_t>(it.cycles)];
    }
  }
  return out;
}

// CF4 / midpoint propagator for a generic Hermitian H(t) given as a callable.
template <typename HFunc>
Matrix integrate_hamiltonian(HFunc&& h_of_t, Index dim, double t, double s, long steps,
                             Scheme scheme = Scheme::kCF4) {
  if (steps < 1) throw Error(ErrorKind::kInvalidInput, "steps must be positive");
  Matrix u = Matrix::Identity(dim, dim);
  const double h = (t - s) / static_cast<double>(steps);
  for (long j = 0; j < steps; ++j) {
    const double t0 = s + h * static_cast<double>(j);
    if (scheme == Scheme::kMidpointExp) {
      u = exp_hermitian(h_of_t(t0 + 0.5 * h), -kI * h) * u;
    } else {
      const Matrix h1 = h_of_t(t0 + detail::kCf4C1 * h);
      const Matrix h2 = h_of_t(t0 + detail::kCf4C2 * h);
      const Matrix g1 = detail::kCf4A2 * h1 + detail::kCf4A1 * h2;
      const Matrix g2 = detail::kCf4A1 * h1 + detail::kCf4A2 * h2;
      u = exp_hermitian(0.5 * (g1 + g1.adjoint()), -kI * h) * u;
      u = exp_hermitian(0.5 * (g2 + g2.adjoint()), -kI * h) * u;
    }
  }
  return u;
}

}  // namespace floquet_lab
