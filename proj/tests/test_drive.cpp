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

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "floquet_lab/drive.hpp"
#include "test_support.hpp"

using namespace floquet_lab;
using floquet_lab::testing::gk_split;
using floquet_lab::testing::phi12_quad;
using floquet_lab::testing::psi_quad;

namespace {

const double kT = kTwoPi * std::sqrt(2.0);

}  // namespace

TEST_CASE("eval_drive", "[drive]") {
  SECTION("sin from Fourier pair") {
    const DriveSpec d = DriveSpec::fourier(kTwoPi, {{1, {0.0, -0.5}}, {-1, {0.0, 0.5}}});
    for (double t : {0.0, 0.3, 1.7, 4.0, -2.2}) REQUIRE(std::abs(d(t) - std::sin(t)) < 1e-15);
  }
  SECTION("empty is zero") {
    const DriveSpec d = DriveSpec::fourier(3.0, {});
    REQUIRE(d(1.234) == 0.0);
    REQUIRE(d.is_zero());
  }
  SECTION("periodic") {
    std::mt19937_64 rng(1);
    const DriveSpec d = testing::random_drive(rng, 2.5, 4, 1.0);
    for (int i = 0; i < 20; ++i) {
      const double t = testing::uniform(rng, -10, 10);
      REQUIRE(std::abs(d(t + 2.5) - d(t)) < 1e-13);
    }
  }
  SECTION("conjugate symmetry is enforced") {
    REQUIRE_THROWS_AS(DriveSpec::fourier(1.0, {{1, {1.0, 0.0}}}), Error);
    REQUIRE_THROWS_AS(DriveSpec::fourier(1.0, {{0, {1.0, 0.5}}}), Error);
    REQUIRE_THROWS_AS(DriveSpec::fourier(-1.0, {}), Error);
  }
  SECTION("sampled drive interpolates periodically") {
    SampledDrive s;
    s.t = {0.0, 1.0, 2.0, 3.0};
    s.f = {0.0, 1.0, 0.0, -1.0};
    const DriveSpec d = DriveSpec::sampled(4.0, s);
    REQUIRE(d(0.5) == Catch::Approx(0.5));
    REQUIRE(d(3.5) == Catch::Approx(-0.5));
    REQUIRE(d(4.5) == Catch::Approx(0.5));
    REQUIRE(d(-0.5) == Catch::Approx(-0.5));
  }
}

TEST_CASE("phi12", "[drive]") {
  const OscillatorParams params{1.0, kT};
  const DriveSpec sine = testing::sine_drive(kT);
  SECTION("zero drive") {
    const Phi12 k = phi12(DriveSpec::zero(kT), params, 2.0, 0.3);
    REQUIRE(k.phi1 == 0.0);
    REQUIRE(k.phi2 == 0.0);
  }
  SECTION("equal times") {
    const Phi12 k = phi12(sine, params, 1.3, 1.3);
    REQUIRE(k.phi1 == 0.0);
    REQUIRE(k.phi2 == 0.0);
  }
  SECTION("closed form against quadrature") {
    const Phi12 k = phi12(sine, params, kT, 0.0);
    const auto [q1, q2] = phi12_quad(sine, 1.0, kT, 0.0);
    REQUIRE(std::abs(k.phi1 - q1) <= 1e-12);
    REQUIRE(std::abs(k.phi2 - q2) <= 1e-12);
    std::mt19937_64 rng(2);
    const DriveSpec d = testing::random_drive(rng, kT, 3, 0.7);
    for (int i = 0; i < 10; ++i) {
      const double s = testing::uniform(rng, -5, 5);
      const double t = testing::uniform(rng, -5, 15);
      const Phi12 c = phi12(d, params, t, s);
      const auto [r1, r2] = phi12_quad(d, 1.0, t, s);
      REQUIRE(std::abs(c.phi1 - r1) <= 1e-12);
      REQUIRE(std::abs(c.phi2 - r2) <= 1e-12);
    }
  }
  SECTION("secular growth at resonance") {
    const OscillatorParams res{1.0, kTwoPi};
    const DriveSpec d = testing::sine_drive(kTwoPi);
    const double base = std::abs(phi12(d, res, kTwoPi, 0.0).phi2);
    REQUIRE(base > 1.0);
    for (int n : {2, 5, 10, 40}) {
      const double v = std::abs(phi12(d, res, n * kTwoPi, 0.0).phi2);
      REQUIRE(v == Catch::Approx(n * base).epsilon(1e-10));
    }
  }
  SECTION("classical equations of motion") {
    std::mt19937_64 rng(3);
    const OscillatorParams p{1.3, kT};
    const DriveSpec d = testing::random_drive(rng, kT, 3, 1.0);
    const double h = 1e-4;
    for (int i = 0; i < 10; ++i) {
      const double s = testing::uniform(rng, 0, 5);
      const double t = testing::uniform(rng, 0, 10);
      const Phi12 plus = phi12(d, p, t + h, s);
      const Phi12 minus = phi12(d, p, t - h, s);
      const Phi12 mid = phi12(d, p, t, s);
      const double d1 = (plus.phi1 - minus.phi1) / (2 * h);
      const double d2 = (plus.phi2 - minus.phi2) / (2 * h);
      const double scale = 1.0 + std::abs(mid.phi1) + std::abs(mid.phi2) + std::abs(d(t));
      REQUIRE(std::abs(d1 - (-p.omega * mid.phi2 + d(t))) <= 1e-6 * scale);
      REQUIRE(std::abs(d2 - p.omega * mid.phi1) <= 1e-6 * scale);
    }
  }
  SECTION("periodic translation") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 10; ++i) {
      const double s = testing::uniform(rng, -3, 3);
      const double t = testing::uniform(rng, -3, 20);
      const Phi12 a = phi12(sine, params, t, s);
      const Phi12 b = phi12(sine, params, t + kT, s + kT);
      REQUIRE(std::abs(a.phi1 - b.phi1) <= 1e-12);
      REQUIRE(std::abs(a.phi2 - b.phi2) <= 1e-12);
    }
  }
  SECTION("period mismatch is rejected") {
    REQUIRE_THROWS_AS(phi12(sine, OscillatorParams{1.0, 3.0}, 1.0, 0.0), Error);
  }
}

TEST_CASE("psi", "[drive]") {
  const OscillatorParams params{1.0, kT};
  SECTION("zero drive and empty interval") {
    REQUIRE(psi(DriveSpec::zero(kT), params, 3.0, 1.0) == 0.0);
    REQUIRE(psi(testing::sine_drive(kT), params, 1.0, 1.0) == 0.0);
  }
  SECTION("cos drive against nested quadrature") {
    // f(t) = cos(2 pi t / T)
    const DriveSpec d = testing::cosine_drive(kT, 1.0, 1);
    REQUIRE(std::abs(psi(d, params, kT, 0.0) - psi_quad(d, 1.0, kT, 0.0)) <= 1e-9);
  }
  SECTION("random drive and periodic translation") {
    std::mt19937_64 rng(5);
    const DriveSpec d = testing::random_drive(rng, kT, 2, 0.8);
    for (int i = 0; i < 3; ++i) {
      const double s = testing::uniform(rng, -2, 2);
      const double t = testing::uniform(rng, -2, 8);
      const double v = psi(d, params, t, s);
      REQUIRE(std::abs(v - psi_quad(d, 1.0, t, s)) <= 1e-9);
      REQUIRE(std::abs(v - psi(d, params, t + kT, s + kT)) <= 1e-10);
    }
  }
}

TEST_CASE("mu_nu_sigma", "[drive]") {
  const OscillatorParams params{1.0, kT};
  SECTION("zero drive") {
    const SingleExpScalars sc = mu_nu_sigma(DriveSpec::zero(kT), params, 2.0, 0.5);
    REQUIRE(sc.mu == 0.0);
    REQUIRE(sc.nu == 0.0);
    REQUIRE(sc.sigma == 0.0);
  }
  SECTION("fractional split") {
    const double w = 1.7;
    const OscillatorParams p{w, kT};
    const SingleExpScalars sc = mu_nu_sigma(DriveSpec::zero(kT), p, 1.5 * kTwoPi / w, 0.0);
    REQUIRE(sc.n == 1);
    REQUIRE(sc.delta == Catch::Approx(kPi / w).epsilon(1e-12));
  }
  SECTION("split reconstructs the interval") {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 200; ++i) {
      const double w = testing::uniform(rng, 0.2, 3.0);
      const double len = testing::uniform(rng, -40, 40);
      if (is_resonant_length(w, len)) continue;
      const TimeSplit sp = split_time(w, len);
      REQUIRE(sp.delta > 0.0);
      REQUIRE(sp.delta < kTwoPi / w);
      const double x = w * len / kTwoPi;
      REQUIRE(std::abs(sp.n + sp.delta * w / kTwoPi - x) <= 1e-12 * std::max(1.0, std::abs(x)));
    }
  }
  SECTION("resonant time difference") {
    REQUIRE_THROWS_AS(mu_nu_sigma(testing::sine_drive(kT), params, 2 * kTwoPi + 0.1, 0.1), Error);
    try {
      mu_nu_sigma(testing::sine_drive(kT), params, kTwoPi, 0.0);
    } catch (const Error& e) {
      REQUIRE(e.kind() == ErrorKind::kResonantTime);
    }
  }
  SECTION("intermediate cot form") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
      const double w = testing::uniform(rng, 0.5, 2.0);
      const OscillatorParams p{w, kT};
      const DriveSpec d = testing::random_drive(rng, kT, 2, 1.0);
      const double s = testing::uniform(rng, -3, 3);
      const double t = testing::uniform(rng, -3, 12);
      const double half = 0.5 * w * (t - s);
      if (std::abs(std::sin(half)) < 0.05) continue;
      const SingleExpScalars sc = mu_nu_sigma(d, p, t, s);
      const Phi12 k = phi12(d, p, t, s);
      const double a = 0.5 * w * sc.delta;
      const double cot = std::cos(half) / std::sin(half);
      REQUIRE(std::abs(sc.mu - a * (cot * k.phi2 - k.phi1)) <= 1e-11 * (1 + std::abs(sc.mu)));
      // nu carries an overall minus relative to mu's pattern; the matrix
      // comparison in test_propagator pins the sign.
      REQUIRE(std::abs(sc.nu + a * (k.phi2 + cot * k.phi1)) <= 1e-11 * (1 + std::abs(sc.nu)));
    }
  }
}

TEST_CASE("floquet_scalars", "[drive]") {
  const OscillatorParams params{1.0, kT};
  const DriveSpec sine = testing::sine_drive(kT);
  const FloquetScalarModel model(sine, params);
  const SingleExpScalars& mono = model.monodromy();
  SECTION("zero drive") {
    const FloquetScalars z = floquet_scalars(DriveSpec::zero(kT), params, 1.234);
    REQUIRE(z.xi == 0.0);
    REQUIRE(z.eta == 0.0);
    REQUIRE(z.phi == 0.0);
    REQUIRE(z.F1 == 0.0);
    REQUIRE(z.F2 == 0.0);
    REQUIRE(z.Phi == 0.0);
  }
  SECTION("resonant period is refused") {
    REQUIRE_THROWS_AS(floquet_scalars(testing::sine_drive(kTwoPi), OscillatorParams{1.0, kTwoPi}, 0.3),
                      Error);
  }
  SECTION("vanish at t = 0 and are periodic") {
    const FloquetScalars z = model.at(0.0);
    REQUIRE(std::abs(z.F1) <= 1e-14);
    REQUIRE(std::abs(z.F2) <= 1e-14);
    REQUIRE(std::abs(z.Phi) <= 1e-14);
    std::mt19937_64 rng(8);
    for (int i = 0; i < 10; ++i) {
      const double t = testing::uniform(rng, 0, 2 * kT);
      const FloquetScalars a = model.at(t);
      const FloquetScalars b = model.at(t + kT);
      REQUIRE(std::abs(a.F1 - b.F1) <= 1e-11);
      REQUIRE(std::abs(a.F2 - b.F2) <= 1e-11);
      REQUIRE(std::abs(a.Phi - b.Phi) <= 1e-10);
    }
  }
  SECTION("xi, eta against their integral forms") {
    const double w = params.omega;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 10; ++i) {
      const double t = testing::uniform(rng, -5, 15);
      const FloquetScalars a = model.at(t);
      const double ratio = std::sin(w * t / 2) / std::sin(w * kT / 2);
      const double m = (t + kT) / 2;
      const double is = gk_split([&](double u) { return std::sin(w * (m - u)) * sine(u); }, 0, kT, 1.0);
      const double ic = gk_split([&](double u) { return std::cos(w * (m - u)) * sine(u); }, 0, kT, 1.0);
      REQUIRE(std::abs(a.xi - ratio * is) <= 1e-11);
      REQUIRE(std::abs(a.eta + ratio * ic) <= 1e-11);
      if (std::abs(std::sin(w * t / 2)) > 1e-2) {
        const double y = w * t;
        const double alt = a.xi * a.eta / (2 * w) -
                           (y - std::sin(y)) / (8 * w * std::pow(std::sin(y / 2), 2)) *
                               (a.xi * a.xi + a.eta * a.eta);
        REQUIRE(std::abs(a.phi - alt) <= 1e-11);
      }
    }
  }
  SECTION("F1, F2 and Phi against their integral forms") {
    const double w = params.omega;
    const double den = 2 * std::sin(w * kT / 2);
    const auto [p1T, p2T] = phi12_quad(sine, w, kT, 0.0);
    const double psiT = psi_quad(sine, w, kT, 0.0);
    for (double t : {0.4, 2.3, 5.1, 9.7}) {
      const FloquetScalars a = model.at(t);
      const double f1 = gk_split(
          [&](double u) { return std::cos(w * (u - kT / 2)) * (sine(t - u) - sine(u)); }, 0, kT, 1.0);
      const double f2 = gk_split(
          [&](double u) { return std::sin(w * (u - kT / 2)) * (sine(t - u) + sine(u)); }, 0, kT, 1.0);
      REQUIRE(std::abs(a.F1 - f1 / den) <= 1e-10);
      REQUIRE(std::abs(a.F2 - f2 / den) <= 1e-10);
      const auto [p1, p2] = phi12_quad(sine, w, t, 0.0);
      const double y = w * t;
      const double yT = w * kT;
      const double long_form =
          -psi_quad(sine, w, t, 0.0) + t / kT * psiT + a.xi * a.eta / (2 * w) -
          t / (2 * w * kT) * p1T * p2T - p2 * a.eta / w -
          (y - std::sin(y)) / (8 * w * std::pow(std::sin(y / 2), 2)) * (a.xi * a.xi + a.eta * a.eta) +
          (yT - std::sin(yT)) * t / (8 * w * std::pow(std::sin(yT / 2), 2) * kT) * (p1T * p1T + p2T * p2T);
      REQUIRE(std::abs(a.Phi - long_form) <= 1e-9);
    }
  }
  SECTION("derivatives against central differences") {
    const double h = 1e-4;
    for (double t : {0.3, 1.9, 4.4, 7.0}) {
      const FloquetScalars a = model.at(t);
      const FloquetScalars p = model.at(t + h);
      const FloquetScalars m = model.at(t - h);
      REQUIRE(std::abs(a.dF1 - (p.F1 - m.F1) / (2 * h)) <= 1e-6);
      REQUIRE(std::abs(a.dF2 - (p.F2 - m.F2) / (2 * h)) <= 1e-6);
      REQUIRE(std::abs(a.dPhi - (p.Phi - m.Phi) / (2 * h)) <= 1e-6);
    }
  }
  SECTION("monodromy scalars are finite") {
    REQUIRE(std::isfinite(mono.mu));
    REQUIRE(std::isfinite(mono.nu));
    REQUIRE(std::isfinite(mono.sigma));
  }
}

TEST_CASE("fourier_coefficient", "[drive]") {
  SECTION("sin") {
    const DriveSpec d = testing::sine_drive(3.0);
    REQUIRE(std::abs(fourier_coefficient(d, 1) - Complex(0, -0.5)) < 1e-15);
    REQUIRE(std::abs(fourier_coefficient(d, -1) - Complex(0, 0.5)) < 1e-15);
    REQUIRE(fourier_coefficient(d, 2) == Complex(0, 0));
  }
  SECTION("constant") {
    const DriveSpec d = DriveSpec::fourier(2.0, {{0, {0.7, 0.0}}});
    REQUIRE(fourier_coefficient(d, 0) == Complex(0.7, 0.0));
    REQUIRE(fourier_coefficient(d, 3) == Complex(0.0, 0.0));
  }
  SECTION("quadrature round trip") {
    std::mt19937_64 rng(10);
    const double T = 2.7;
    const DriveSpec d = testing::random_drive(rng, T, 4, 1.0);
    const double w = kTwoPi / T;
    for (int k = -5; k <= 5; ++k) {
      const double re = gk_split([&](double u) { return std::cos(w * k * u) * d(u); }, 0, T, 0.5) / T;
      const double im = -gk_split([&](double u) { return std::sin(w * k * u) * d(u); }, 0, T, 0.5) / T;
      REQUIRE(std::abs(Complex(re, im) - fourier_coefficient(d, k)) <= 1e-12);
    }
  }
  SECTION("sampled drive") {
    const double T = 2.0;
    SampledDrive s;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
      s.t.push_back(T * i / n);
      s.f.push_back(std::sin(kTwoPi * i / n));
    }
    const DriveSpec d = DriveSpec::sampled(T, s);
    REQUIRE(std::abs(fourier_coefficient(d, 1) - Complex(0, -0.5)) <= 1e-4);
    REQUIRE(std::abs(fourier_coefficient(d, 2)) <= 1e-10);
    // Kernels of the sampled fallback track the Fourier ones.
    const DriveSpec f = testing::sine_drive(T);
    const OscillatorParams p{1.3, T};
    const Phi12 a = phi12(d, p, 3.1, 0.2);
    const Phi12 b = phi12(f, p, 3.1, 0.2);
    REQUIRE(std::abs(a.phi1 - b.phi1) <= 1e-4);
    REQUIRE(std::abs(a.phi2 - b.phi2) <= 1e-4);
    REQUIRE(std::abs(psi(d, p, 3.1, 0.2) - psi(f, p, 3.1, 0.2)) <= 1e-4);
  }
}
