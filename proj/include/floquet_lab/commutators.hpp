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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "floquet_lab/core_fock.hpp"
#include "floquet_lab/errors.hpp"
#include "floquet_lab/floquet.hpp"
#include "floquet_lab/propagator.hpp"

namespace floquet_lab {

inline std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline Matrix ad(const Matrix& a, const Matrix& x) { return a * x - x * a; }

// sum_k C(n,k) (-1)^k A^{n-k} X A^k
inline Matrix ad_binomial(const Matrix& a, const Matrix& x, int n) {
  std::vector<Matrix> apow{Matrix::Identity(a.rows(), a.cols())};
  for (int k = 1; k <= n; ++k) apow.push_back(apow.back() * a);
  Matrix acc = Matrix::Zero(x.rows(), x.cols());
  for (int k = 0; k <= n; ++k) {
    const double c = static_cast<double>(binomial(n, k)) * (k % 2 == 0 ? 1.0 : -1.0);
    acc += c * (apow[static_cast<std::size_t>(n - k)] * x * apow[static_cast<std::size_t>(k)]);
  }
  return acc;
}

// sum_k C(n,k) (-1)^k L^{n-k} X R^k
inline Matrix ad_binomial_pair(const Matrix& l, const Matrix& x, const Matrix& r, int n) {
  std::vector<Matrix> lx{x};
  for (int k = 1; k <= n; ++k) lx.push_back(l * lx.back());
  Matrix acc = Matrix::Zero(x.rows(), x.cols());
  Matrix rpow = Matrix::Identity(r.rows(), r.cols());
  for (int k = 0; k <= n; ++k) {
    const double c = static_cast<double>(binomial(n, k)) * (k % 2 == 0 ? 1.0 : -1.0);
    acc += c * (lx[static_cast<std::size_t>(n - k)] * rpow);
    rpow = rpow * r;
  }
  return acc;
}

struct CommutatorTower {
  Matrix base;
  std::vector<Matrix> powers;  // powers[n] = ad_A^n X
  double binomial_residual = 0.0;  // max relative deviation of the binomial form
};

inline constexpr double kBinomialTol = 1e-9;

inline CommutatorTower ad_power(const Matrix& a, const Matrix& x, int n) {
  if (n < 0) throw Error(ErrorKind::kInvalidInput, "ad_power order must be non-negative");
  if (a.rows() != a.cols() || !is_hermitian(a)) {
    throw Error(ErrorKind::kInvalidInput, "ad_power base must be Hermitian");
  }
  CommutatorTower t;
  t.base = a;
  t.powers.push_back(x);
  for (int k = 1; k <= n; ++k) t.powers.push_back(ad(a, t.powers.back()));
  // Relative to the natural scale (2 ||A||)^k ||X|| of the k-th bracket.
  const double na = a.norm();
  const double nx = x.norm();
  for (int k = 0; k <= n; ++k) {
    const double scale = std::pow(2.0 * na, k) * nx;
    if (scale == 0.0) continue;
    const double dev = (ad_binomial(a, x, k) - t.powers[static_cast<std::size_t>(k)]).norm() / scale;
    t.binomial_residual = std::max(t.binomial_residual, dev);
  }
  if (!(t.binomial_residual <= kBinomialTol)) {
    throw Error(ErrorKind::kNumeric, "iterated and binomial commutator forms disagree");
  }
  return t;
}

// A word is a sequence of symbol indices j standing for x_j = ad_A^j B,
// multiplied left to right.
using Word = std::vector<int>;

struct FPolynomial {
  int p = 0;
  int k = 0;
  std::map<Word, std::int64_t> terms;  // lexicographic order on words

  bool operator==(const FPolynomial& o) const { return p == o.p && k == o.k && terms == o.terms; }
};

namespace detail {

inline std::map<Word, std::int64_t> f_terms(int p, int k,
                                            std::map<std::pair<int, int>, std::map<Word, std::int64_t>>& memo) {
  if (k < 0 || k > p) return {};
  if (k == p) return {{Word{}, 1}};
  const auto key = std::make_pair(p, k);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  std::map<Word, std::int64_t> out;
  if (p == 1) {
    out[Word{0}] = 1;  // F_{1,0} = x_0
  } else {
    // F_{p,k} = F_{p-1,k-1} + sum_{l=k}^{p-1} C(l,k) F_{p-1,l} x_{l-k}
    for (const auto& [w, c] : f_terms(p - 1, k - 1, memo)) out[w] += c;
    for (int l = k; l <= p - 1; ++l) {
      const std::int64_t b = binomial(l, k);
      for (const auto& [w, c] : f_terms(p - 1, l, memo)) {
        Word nw = w;
        nw.push_back(l - k);
        out[nw] += b * c;
      }
    }
  }
  memo[key] = out;
  return out;
}

}  // namespace detail

inline FPolynomial f_polynomial(int p, int k) {
  if (p < 0 || k < 0) throw Error(ErrorKind::kIndex, "F_{p,k} needs non-negative indices");
  if (k > p) {
    throw Error(ErrorKind::kIndex,
                "F_{p,k} needs k <= p, got p=" + std::to_string(p) + " k=" + std::to_string(k));
  }
  std::map<std::pair<int, int>, std::map<Word, std::int64_t>> memo;
  FPolynomial f;
  f.p = p;
  f.k = k;
  f.terms = detail::f_terms(p, k, memo);
  return f;
}

// F evaluated with x_j -> xs[j].
inline Matrix evaluate(const FPolynomial& f, const std::vector<Matrix>& xs, Index dim) {
  Matrix acc = Matrix::Zero(dim, dim);
  for (const auto& [w, c] : f.terms) {
    Matrix m = Matrix::Identity(dim, dim);
    for (int j : w) {
      if (j >= static_cast<int>(xs.size())) throw Error(ErrorKind::kIndex, "missing ad power");
      m = m * xs[static_cast<std::size_t>(j)];
    }
    acc += static_cast<double>(c) * m;
  }
  return acc;
}

// sum_k C(p,k) (ad_A^{p-k} B) A^k, which equals A^p B.
inline Matrix ap_commute(const Matrix& a, const Matrix& b, int p) {
  if (p < 0) throw Error(ErrorKind::kInvalidInput, "p must be non-negative");
  std::vector<Matrix> adp{b};
  for (int k = 1; k <= p; ++k) adp.push_back(ad(a, adp.back()));
  Matrix apow = Matrix::Identity(a.rows(), a.cols());
  Matrix acc = Matrix::Zero(b.rows(), b.cols());
  for (int k = 0; k <= p; ++k) {
    acc += static_cast<double>(binomial(p, k)) * (adp[static_cast<std::size_t>(p - k)] * apow);
    apow = apow * a;
  }
  return acc;
}

// A^p + sum_{k<p} F_{p,k}(B, ad_A B, ...) A^k, which equals (A+B)^p.
inline Matrix aplusb_power(const Matrix& a, const Matrix& b, int p) {
  if (p < 0) throw Error(ErrorKind::kInvalidInput, "p must be non-negative");
  const Index n = a.rows();
  std::vector<Matrix> xs{b};
  for (int j = 1; j < p; ++j) xs.push_back(ad(a, xs.back()));
  std::vector<Matrix> apow{Matrix::Identity(n, n)};
  for (int k = 1; k <= p; ++k) apow.push_back(apow.back() * a);
  Matrix acc = apow[static_cast<std::size_t>(p)];
  for (int k = 0; k < p; ++k) acc += evaluate(f_polynomial(p, k), xs, n) * apow[static_cast<std::size_t>(k)];
  return acc;
}

// X_n(t,s) = sum_k C(n,k) (-1)^k H(t)^{n-k} U(t,s) H(s)^k on the padded basis.
inline Matrix xn_padded(const DriveSpec& spec, const OscillatorParams& params, Index dim, int n,
                        double t, double s, const QuadratureExponentials& qe) {
  const Matrix u = materialize_factored(factored_scalars(spec, params, t, s), qe);
  return ad_binomial_pair(hamiltonian(spec, params, t, dim), u, hamiltonian(spec, params, s, dim), n);
}

inline Matrix xn_operator(const DriveSpec& spec, const OscillatorParams& params, const Truncation& trunc,
                          int n, double t, double s) {
  trunc.validate();
  if (n < 0 || n > 4) throw Error(ErrorKind::kInvalidInput, "X_n is provided for 0 <= n <= 4");
  const QuadratureExponentials qe(params.omega, trunc.full_dim());
  return top_left(xn_padded(spec, params, trunc.full_dim(), n, t, s, qe), trunc.n_keep);
}

// Conjugated construction U_F(t) Z_n U_F(s)^{-1}, Z_0 = e^{-i(t-s)H_F},
// Z_{n+1} = ad_{H_F} Z_n + S_F(t) Z_n - Z_n S_F(s).
inline Matrix xn_conjugated(const FloquetData& fd, int n, double t, double s) {
  if (n < 0 || n > 4) throw Error(ErrorKind::kInvalidInput, "X_n is provided for 0 <= n <= 4");
  const Matrix& hf = fd.H_F_padded();
  const Matrix st = fd.S_F_padded(t);
  const Matrix ss = fd.S_F_padded(s);
  Matrix z = exp_hermitian(hf, -kI * (t - s));
  for (int k = 0; k < n; ++k) z = ad(hf, z) + st * z - z * ss;
  const Matrix full = fd.U_F_padded(t) * z * fd.U_F_padded(s).adjoint();
  return top_left(full, fd.truncation().n_keep);
}

struct HigherOrderReport {
  int p = 0;
  double lhs = 0.0;
  double c_p = 0.0;
  double rhs = 0.0;
  double distance = 0.0;
  bool holds = true;
  // p = 1 side-by-side: 2 ||S_F||_block / dist
  double first_order_rhs = 0.0;
  int grid = 0;
};

// max over a grid x grid uniform sample of [0,T)^2, plus the extra points,
// of the kept-block norm of X_p.
inline double xp_sup(const DriveSpec& spec, const OscillatorParams& params, const Truncation& trunc, int p,
                     int grid, const std::vector<std::pair<double, double>>& extra = {}) {
  trunc.validate();
  if (grid < 1) throw Error(ErrorKind::kInvalidInput, "grid must be positive");
  const QuadratureExponentials qe(params.omega, trunc.full_dim());
  const double T = params.period;
  std::vector<std::pair<double, double>> pts = extra;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) pts.emplace_back(T * i / grid, T * j / grid);
  }
  double sup = 0.0;
  for (const auto& [t, s] : pts) {
    sup = std::max(sup, op_norm(top_left(xn_padded(spec, params, trunc.full_dim(), p, t, s, qe), trunc.n_keep)));
  }
  return sup;
}

inline HigherOrderReport higher_order_bound_check(const DriveSpec& spec, const OscillatorParams& params,
                                                  const Truncation& trunc, int p, double t, double s,
                                                  const Interval& d1, const Interval& d2, int grid = 16,
                                                  std::optional<double> c_p = std::nullopt) {
  if (p < 1 || p > 4) throw Error(ErrorKind::kInvalidInput, "p must be in 1..4");
  HigherOrderReport r;
  r.p = p;
  r.grid = grid;
  r.distance = interval_distance(d1, d2);
  const Index keep = trunc.n_keep;
  const Matrix b1 = spectral_basis(spectral_data(hamiltonian(spec, params, t, keep)), d1);
  const Matrix b2 = spectral_basis(spectral_data(hamiltonian(spec, params, s, keep)), d2);
  if (b1.cols() > 0 && b2.cols() > 0) {
    const Matrix u = propagator_factored(spec, params, trunc, t, s);
    r.lhs = op_norm(b1.adjoint() * u * b2);
  }
  r.c_p = c_p ? *c_p : xp_sup(spec, params, trunc, p, grid, {{t, s}});
  r.rhs = r.c_p / std::pow(r.distance, p);
  r.holds = r.lhs <= r.rhs * (1.0 + 1e-6);
  if (p == 1 && !spec.is_sampled() && classify_monodromy(spec, params) == Classification::kNonResonant) {
    const FloquetData fd(spec, params, trunc);
    r.first_order_rhs = 2.0 * sf_block_sup(fd) / r.distance;
  }
  return r;
}

// max_n ||Y_{n+1} - (Q1 Y_n - Y_n Q2)|| / ||Y_{n+1}|| for n < n_max, with
// Y_n = P(t,D1) X_n P(s,D2) and everything on the kept block.
inline double chain_residual(const DriveSpec& spec, const OscillatorParams& params, const Truncation& trunc,
                             int n_max, double t, double s, const Interval& d1, const Interval& d2) {
  const Index keep = trunc.n_keep;
  const Matrix ht = hamiltonian(spec, params, t, keep);
  const Matrix hs = hamiltonian(spec, params, s, keep);
  const Matrix p1 = spectral_projector(spectral_data(ht), d1);
  const Matrix p2 = spectral_projector(spectral_data(hs), d2);
  const Matrix q1 = ht * p1;
  const Matrix q2 = hs * p2;
  const Matrix u = propagator_factored(spec, params, trunc, t, s);
  std::vector<Matrix> y;
  for (int n = 0; n <= n_max; ++n) y.push_back(p1 * ad_binomial_pair(ht, u, hs, n) * p2);
  double worst = 0.0;
  for (int n = 0; n < n_max; ++n) {
    const Matrix& next = y[static_cast<std::size_t>(n + 1)];
    const Matrix pred = q1 * y[static_cast<std::size_t>(n)] - y[static_cast<std::size_t>(n)] * q2;
    const double scale = std::max(next.norm(), 1e-300);
    worst = std::max(worst, (next - pred).norm() / scale);
  }
  return worst;
}

}  // namespace floquet_lab
