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

#include <cmath>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "floquet_lab/core_fock.hpp"
#include "floquet_lab/drive.hpp"

namespace floquet_lab::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = Complex(g(rng), g(rng));
  return m;
}

inline Matrix random_hermitian(std::mt19937_64& rng, Index n) {
  const Matrix m = random_matrix(rng, n);
  return 0.5 * (m + m.adjoint());
}

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

// f(t) = amp * sin(2 pi t / T)
inline DriveSpec sine_drive(double period, double amp = 1.0, int k = 1) {
  return DriveSpec::fourier(period, {{k, Complex(0.0, -0.5 * amp)}, {-k, Complex(0.0, 0.5 * amp)}});
}

// f(t) = amp * cos(2 pi k t / T)
inline DriveSpec cosine_drive(double period, double amp = 1.0, int k = 1) {
  return DriveSpec::fourier(period, {{k, Complex(0.5 * amp, 0.0)}, {-k, Complex(0.5 * amp, 0.0)}});
}

inline DriveSpec random_drive(std::mt19937_64& rng, double period, int kmax, double amp) {
  std::vector<FourierMode> modes;
  modes.push_back({0, Complex(uniform(rng, -amp, amp), 0.0)});
  for (int k = 1; k <= kmax; ++k) {
    const Complex c(uniform(rng, -amp, amp), uniform(rng, -amp, amp));
    modes.push_back({k, c});
    modes.push_back({-k, std::conj(c)});
  }
  return DriveSpec::fourier(period, modes);
}

// Adaptive Gauss-Kronrod on [a, b], used as an independent oracle.
template <typename F>
double gk(F&& f, double a, double b) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  return Rule::integrate(f, a, b, 8, 1e-13);
}

// Composite adaptive rule: split [a, b] into pieces of length <= piece.
template <typename F>
double gk_split(F&& f, double a, double b, double piece) {
  const long n = std::max<long>(1, static_cast<long>(std::ceil(std::abs(b - a) / piece)));
  const double h = (b - a) / static_cast<double>(n);
  double acc = 0.0;
  for (long j = 0; j < n; ++j) acc += gk(f, a + h * j, j + 1 == n ? b : a + h * (j + 1));
  return acc;
}

// phi1, phi2 by direct quadrature of the defining integrals.
inline std::pair<double, double> phi12_quad(const DriveSpec& d, double omega, double t, double s) {
  const double p1 = gk_split([&](double u) { return std::cos(omega * (t - u)) * d(u); }, s, t, 1.0);
  const double p2 = gk_split([&](double u) { return std::sin(omega * (t - u)) * d(u); }, s, t, 1.0);
  return {p1, p2};
}

// psi by nested quadrature.
inline double psi_quad(const DriveSpec& d, double omega, double t, double s) {
  return gk_split(
      [&](double v) {
        const auto [p1, p2] = phi12_quad(d, omega, v, s);
        return 0.5 * (p1 * p1 - p2 * p2);
      },
      s, t, 1.0);
}

}  // namespace floquet_lab::testing
