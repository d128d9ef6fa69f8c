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

#include <map>
#include <random>

#include "floquet_lab/commutators.hpp"
#include "test_support.hpp"

using namespace floquet_lab;

namespace {

const double kT = kTwoPi * std::sqrt(2.0);
const OscillatorParams kParams{1.0, kT};

// Brute-force normal ordering of (A+B)^p.  A term (w, a) stands for
// x_{w0} x_{w1} ... A^a with x_j = ad_A^j B.  Left multiplication uses only
// B (w, a) = (0 w, a) and A (w, a) = ad_A(w) A^a + (w, a+1), with ad_A acting
// on words by the Leibniz rule.
using Term = std::pair<Word, int>;

std::map<Term, std::int64_t> expand(int p) {
  std::map<Term, std::int64_t> cur{{{Word{}, 0}, 1}};
  for (int step = 0; step < p; ++step) {
    std::map<Term, std::int64_t> next;
    for (const auto& [term, c] : cur) {
      const auto& [w, a] = term;
      Word bw{0};
      bw.insert(bw.end(), w.begin(), w.end());
      next[{bw, a}] += c;
      for (std::size_t i = 0; i < w.size(); ++i) {
        Word dw = w;
        ++dw[i];
        next[{dw, a}] += c;
      }
      next[{w, a + 1}] += c;
    }
    cur = std::move(next);
  }
  return cur;
}

double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

}  // namespace

TEST_CASE("binomial", "[commutators]") {
  REQUIRE(binomial(0, 0) == 1);
  REQUIRE(binomial(5, 2) == 10);
  REQUIRE(binomial(6, 3) == 20);
  REQUIRE(binomial(3, 4) == 0);
  REQUIRE(binomial(20, 10) == 184756);
}

TEST_CASE("ad_power", "[commutators]") {
  std::mt19937_64 rng(51);
  SECTION("identity commutes") {
    const Matrix a = testing::random_hermitian(rng, 6);
    const CommutatorTower t = ad_power(a, Matrix::Identity(6, 6), 4);
    for (int n = 1; n <= 4; ++n) REQUIRE(t.powers[n].cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE(t.powers[0] == Matrix::Identity(6, 6));
  }
  SECTION("diagonal base on a matrix unit") {
    Matrix a = Matrix::Zero(4, 4);
    a.diagonal() << 0.5, -1.0, 2.0, 3.5;
    Matrix e = Matrix::Zero(4, 4);
    e(1, 3) = 1.0;
    const CommutatorTower t = ad_power(a, e, 5);
    for (int n = 0; n <= 5; ++n) {
      Matrix ref = Matrix::Zero(4, 4);
      ref(1, 3) = std::pow(-1.0 - 3.5, n);
      REQUIRE((t.powers[n] - ref).cwiseAbs().maxCoeff() <= 1e-12 * (1 + std::abs(ref(1, 3))));
    }
  }
  SECTION("derivation and adjoint rules") {
    for (int i = 0; i < 5; ++i) {
      const Matrix a = testing::random_hermitian(rng, 7);
      const Matrix x = testing::random_matrix(rng, 7);
      const Matrix y = testing::random_matrix(rng, 7);
      REQUIRE((ad(a, x * y) - (ad(a, x) * y + x * ad(a, y))).norm() <= 1e-11 * (1 + ad(a, x * y).norm()));
      REQUIRE((ad(a, x.adjoint()) + ad(a, x).adjoint()).norm() <= 1e-11);
    }
  }
  SECTION("iterated and binomial forms agree") {
    for (Index dim : {4, 16, 32}) {
      const Matrix a = testing::random_hermitian(rng, dim);
      const Matrix x = testing::random_matrix(rng, dim);
      const CommutatorTower t = ad_power(a, x, 6);
      REQUIRE(t.powers.size() == 7);
      REQUIRE(t.binomial_residual <= 1e-9);
      for (int n = 0; n <= 6; ++n) REQUIRE(rel(ad_binomial(a, x, n), t.powers[n]) <= 1e-9);
    }
  }
  SECTION("non-Hermitian base is refused") {
    const Matrix a = testing::random_matrix(rng, 5);
    try {
      ad_power(a, a, 2);
      FAIL("expected an invalid-input error");
    } catch (const Error& e) {
      REQUIRE(e.kind() == ErrorKind::kInvalidInput);
    }
  }
}

TEST_CASE("f_polynomial", "[commutators]") {
  SECTION("low orders") {
    const FPolynomial f10 = f_polynomial(1, 0);
    REQUIRE(f10.terms == std::map<Word, std::int64_t>{{{0}, 1}});
    const FPolynomial f20 = f_polynomial(2, 0);
    REQUIRE(f20.terms == std::map<Word, std::int64_t>{{{0, 0}, 1}, {{1}, 1}});
    const FPolynomial f21 = f_polynomial(2, 1);
    REQUIRE(f21.terms == std::map<Word, std::int64_t>{{{0}, 2}});
    for (int p = 0; p <= 6; ++p) REQUIRE(f_polynomial(p, p).terms == std::map<Word, std::int64_t>{{{}, 1}});
  }
  SECTION("index errors") {
    try {
      f_polynomial(2, 3);
      FAIL("expected an index error");
    } catch (const Error& e) {
      REQUIRE(e.kind() == ErrorKind::kIndex);
    }
    REQUIRE_THROWS_AS(f_polynomial(-1, 0), Error);
  }
  SECTION("matches brute-force normal ordering") {
    for (int p = 1; p <= 6; ++p) {
      const auto all = expand(p);
      std::map<int, std::map<Word, std::int64_t>> by_k;
      for (const auto& [term, c] : all) by_k[term.second][term.first] += c;
      REQUIRE(by_k[p] == std::map<Word, std::int64_t>{{{}, 1}});
      for (int k = 0; k < p; ++k) {
        const FPolynomial f = f_polynomial(p, k);
        INFO("p=" << p << " k=" << k);
        REQUIRE(f.terms == by_k[k]);
        for (const auto& [w, c] : f.terms) {
          REQUIRE(c > 0);
          for (int j : w) REQUIRE(j <= p - k - 1);
        }
      }
    }
  }
}

TEST_CASE("ap_commute and (A+B)^p", "[commutators]") {
  std::mt19937_64 rng(52);
  SECTION("small orders") {
    const Matrix a = testing::random_hermitian(rng, 5);
    const Matrix b = testing::random_matrix(rng, 5);
    REQUIRE(ap_commute(a, b, 0) == b);
    REQUIRE(rel(ap_commute(a, b, 1), a * b) <= 1e-14);
    const Matrix a8 = testing::random_hermitian(rng, 8);
    const Matrix b8 = testing::random_matrix(rng, 8);
    const Matrix lhs = a8 * a8 * a8 * a8 * b8;
    REQUIRE((ap_commute(a8, b8, 4) - lhs).norm() <= 1e-11 * lhs.norm());
  }
  SECTION("20 random pairs at dim 16") {
    double worst_ap = 0.0, worst_sum = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Matrix a = testing::random_hermitian(rng, 16);
      const Matrix b = testing::random_hermitian(rng, 16);
      Matrix apow = Matrix::Identity(16, 16);
      Matrix spow = Matrix::Identity(16, 16);
      for (int p = 1; p <= 5; ++p) {
        apow = apow * a;
        spow = spow * (a + b);
        worst_ap = std::max(worst_ap, rel(ap_commute(a, b, p), apow * b));
        worst_sum = std::max(worst_sum, rel(aplusb_power(a, b, p), spow));
      }
    }
    REQUIRE(worst_ap <= 1e-10);
    REQUIRE(worst_sum <= 1e-10);
  }
}

TEST_CASE("xn_operator", "[commutators]") {
  const Truncation trunc{48, 48};
  SECTION("n = 0 is the propagator") {
    const DriveSpec sine = testing::sine_drive(kT);
    const Matrix x0 = xn_operator(sine, kParams, trunc, 0, 2.2, 0.4);
    REQUIRE((x0 - propagator_factored(sine, kParams, trunc, 2.2, 0.4)).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SECTION("zero drive: X_1 vanishes") {
    const Matrix x1 = xn_operator(DriveSpec::zero(kT), kParams, trunc, 1, 1.9, 0.2);
    REQUIRE(top_left(x1, 40).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("direct and conjugated constructions agree") {
    const DriveSpec sine = testing::sine_drive(kT);
    const FloquetData fd(sine, kParams, trunc);
    std::mt19937_64 rng(53);
    for (int i = 0; i < 4; ++i) {
      const double t = testing::uniform(rng, 0, 2 * kT);
      const double s = testing::uniform(rng, 0, 2 * kT);
      for (int n : {1, 2, 3}) {
        const Matrix a = xn_operator(sine, kParams, trunc, n, t, s);
        const Matrix b = xn_conjugated(fd, n, t, s);
        INFO("n=" << n);
        REQUIRE(block_diff(a, b, 12) <= 1e-5);
      }
    }
  }
  SECTION("order range") {
    REQUIRE_THROWS_AS(xn_operator(DriveSpec::zero(kT), kParams, trunc, 5, 1.0, 0.0), Error);
  }
}

TEST_CASE("higher_order_bound_check", "[commutators]") {
  SECTION("zero drive") {
    const HigherOrderReport r =
        higher_order_bound_check(DriveSpec::zero(kT), kParams, {32, 16}, 2, 1.0, 0.5, {0, 2}, {8, 30}, 4);
    REQUIRE(r.lhs <= 1e-14);
    REQUIRE(r.holds);
  }
  SECTION("p = 1 next to the first-order bound") {
    const HigherOrderReport r = higher_order_bound_check(testing::sine_drive(kT), kParams, {48, 24}, 1, 2.3,
                                                         0.7, {0, 2}, {5, 20}, 6);
    REQUIRE(r.first_order_rhs > 0.0);
    REQUIRE(r.holds);
    REQUIRE(r.lhs <= r.first_order_rhs * (1 + 1e-6));
  }
  SECTION("sine drive, p = 2, n_keep = 96") {
    const HigherOrderReport r = higher_order_bound_check(testing::sine_drive(kT), kParams, {96, 48}, 2, 2.3,
                                                         0.7, {0, 2}, {8, 30});
    INFO("lhs " << r.lhs << " C_p " << r.c_p << " rhs " << r.rhs);
    REQUIRE(r.grid == 16);
    REQUIRE(r.lhs > 0.0);
    REQUIRE(r.holds);
  }
  SECTION("recursive chain") {
    for (double t : {0.9, 4.4}) {
      REQUIRE(chain_residual(testing::sine_drive(kT), kParams, {48, 24}, 3, t, 0.3, {0, 3}, {6, 20}) <= 1e-8);
    }
  }
  SECTION("intervals must be separated") {
    REQUIRE_THROWS_AS(higher_order_bound_check(DriveSpec::zero(kT), kParams, {16, 8}, 2, 1.0, 0.5, {0, 5},
                                               {4, 30}, 2),
                      Error);
  }
}
