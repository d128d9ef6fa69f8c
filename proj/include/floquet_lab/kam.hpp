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
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "floquet_lab/core_fock.hpp"
#include "floquet_lab/errors.hpp"

namespace floquet_lab {

// Iterative diagonalization of K_0 + V on the Fourier (x) level lattice.
//
// Operators that commute with the Fourier shift are stored as mode families
// X = {X_q}, |q| <= Q, each X_q acting on the level space; on the lattice
// they are the block Toeplitz matrices block(k, j) = X_{k-j}.  Products are
// convolutions with modes beyond Q dropped.

struct Level {
  double h = 0.0;
  int mult = 1;
};

class FloquetMatrixSpace {
 public:
  // mode_cutoff < 0 selects 4 * k_max.
  FloquetMatrixSpace(double omega, int k_max, std::vector<Level> levels, int mode_cutoff = -1)
      : omega_(omega), k_max_(k_max), levels_(std::move(levels)) {
    if (!(omega_ > 0.0) || !std::isfinite(omega_))
      throw Error(ErrorKind::kInvalidInput, "omega must be positive and finite");
    if (k_max_ < 0) throw Error(ErrorKind::kInvalidInput, "k_max must be non-negative");
    if (levels_.empty()) throw Error(ErrorKind::kInvalidInput, "at least one level required");
    cutoff_ = mode_cutoff < 0 ? 4 * k_max_ : mode_cutoff;
    Index off = 0;
    for (const Level& l : levels_) {
      if (l.mult < 1) throw Error(ErrorKind::kInvalidInput, "level multiplicity must be >= 1");
      if (!std::isfinite(l.h)) throw Error(ErrorKind::kInvalidInput, "level energy must be finite");
      offsets_.push_back(off);
      off += l.mult;
    }
    level_dim_ = off;
    delta0_ = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < levels_.size(); ++m)
      for (std::size_t n = m + 1; n < levels_.size(); ++n)
        delta0_ = std::min(delta0_, std::abs(levels_[m].h - levels_[n].h));
    if (!(delta0_ > 0.0)) throw Error(ErrorKind::kInvalidInput, "level energies must be distinct");
    energies_.resize(level_dim_);
    label_.resize(static_cast<std::size_t>(level_dim_));
    for (std::size_t m = 0; m < levels_.size(); ++m)
      for (int i = 0; i < levels_[m].mult; ++i) {
        energies_(offsets_[m] + i) = levels_[m].h;
        label_[static_cast<std::size_t>(offsets_[m] + i)] = static_cast<int>(m);
      }
    double hmax = 0.0;
    for (const Level& l : levels_) hmax = std::max(hmax, std::abs(l.h));
    scale_ = std::max(1.0, hmax + omega_ * std::max(cutoff_, 2 * k_max_));
  }

  double omega() const { return omega_; }
  int k_max() const { return k_max_; }
  int mode_cutoff() const { return cutoff_; }
  const std::vector<Level>& levels() const { return levels_; }
  int n_levels() const { return static_cast<int>(levels_.size()); }
  Index level_dim() const { return level_dim_; }
  Index level_offset(int m) const { return offsets_[static_cast<std::size_t>(m)]; }
  int level_mult(int m) const { return levels_[static_cast<std::size_t>(m)].mult; }
  int level_of(Index i) const { return label_[static_cast<std::size_t>(i)]; }
  const RealVector& energies() const { return energies_; }
  Index total_dim() const { return (2 * k_max_ + 1) * level_dim_; }
  double delta0() const { return delta0_; }
  // Tolerance for "same K_0 eigenvalue".
  double degeneracy_tol() const { return 1e-12 * scale_; }
  // Bare K_0 gap q*omega + h_a - h_b between level-space states.
  double bare_gap(int q, Index a, Index b) const { return q * omega_ + energies_(a) - energies_(b); }

 private:
  double omega_;
  int k_max_;
  int cutoff_ = 0;
  std::vector<Level> levels_;
  std::vector<Index> offsets_;
  std::vector<int> label_;
  Index level_dim_ = 0;
  RealVector energies_;
  double delta0_ = 0.0;
  double scale_ = 1.0;
};

class ModeFamily {
 public:
  ModeFamily() = default;
  ModeFamily(int cutoff, Index dim)
      : cutoff_(cutoff), dim_(dim), modes_(static_cast<std::size_t>(2 * cutoff + 1), Matrix::Zero(dim, dim)) {}
  explicit ModeFamily(const FloquetMatrixSpace& space) : ModeFamily(space.mode_cutoff(), space.level_dim()) {}

  static ModeFamily identity(const FloquetMatrixSpace& space) {
    ModeFamily f(space);
    f[0] = Matrix::Identity(f.dim_, f.dim_);
    return f;
  }

  int cutoff() const { return cutoff_; }
  Index dim() const { return dim_; }
  Matrix& operator[](int q) { return modes_[static_cast<std::size_t>(q + cutoff_)]; }
  const Matrix& operator[](int q) const { return modes_[static_cast<std::size_t>(q + cutoff_)]; }

  // X^dagger: (X^dagger)_q = (X_{-q})^dagger.
  ModeFamily adjoint() const {
    ModeFamily r(cutoff_, dim_);
    for (int q = -cutoff_; q <= cutoff_; ++q) r[q] = (*this)[-q].adjoint();
    return r;
  }

  ModeFamily& operator+=(const ModeFamily& o) {
    for (std::size_t i = 0; i < modes_.size(); ++i) modes_[i] += o.modes_[i];
    return *this;
  }
  ModeFamily& operator-=(const ModeFamily& o) {
    for (std::size_t i = 0; i < modes_.size(); ++i) modes_[i] -= o.modes_[i];
    return *this;
  }
  ModeFamily& operator*=(Complex c) {
    for (Matrix& m : modes_) m *= c;
    return *this;
  }
  friend ModeFamily operator+(ModeFamily a, const ModeFamily& b) { return a += b; }
  friend ModeFamily operator-(ModeFamily a, const ModeFamily& b) { return a -= b; }
  friend ModeFamily operator*(Complex c, ModeFamily a) { return a *= c; }

  // Truncated convolution.
  friend ModeFamily operator*(const ModeFamily& a, const ModeFamily& b) {
    ModeFamily r(a.cutoff_, a.dim_);
    const std::vector<int> na = a.nonzero_modes();
    const std::vector<int> nb = b.nonzero_modes();
    for (int q1 : na)
      for (int q2 : nb) {
        const int q = q1 + q2;
        if (q < -a.cutoff_ || q > a.cutoff_) continue;
        r[q].noalias() += a[q1] * b[q2];
      }
    return r;
  }

  std::vector<int> nonzero_modes() const {
    std::vector<int> out;
    for (int q = -cutoff_; q <= cutoff_; ++q)
      if (!(*this)[q].isZero(0.0)) out.push_back(q);
    return out;
  }

  // Sum of spectral norms of the modes; bounds the lattice operator norm.
  double norm() const {
    double s = 0.0;
    for (const Matrix& m : modes_)
      if (!m.isZero(0.0)) s += op_norm(m);
    return s;
  }

  double max_abs() const {
    double s = 0.0;
    for (const Matrix& m : modes_)
      if (m.size() > 0) s = std::max(s, m.cwiseAbs().maxCoeff());
    return s;
  }

 private:
  int cutoff_ = 0;
  Index dim_ = 0;
  std::vector<Matrix> modes_;
};

inline ModeFamily commutator(const ModeFamily& a, const ModeFamily& b) { return a * b - b * a; }

// Lattice matrix of a mode family, (k outer, level inner).
inline Matrix materialize(const ModeFamily& x, const FloquetMatrixSpace& space) {
  const Index l = space.level_dim();
  const int kmax = space.k_max();
  Matrix out = Matrix::Zero(space.total_dim(), space.total_dim());
  for (int k = -kmax; k <= kmax; ++k)
    for (int j = -kmax; j <= kmax; ++j) {
      const int q = k - j;
      if (q < -x.cutoff() || q > x.cutoff()) continue;
      out.block((k + kmax) * l, (j + kmax) * l, l, l) = x[q];
    }
  return out;
}

// Largest deviation of a lattice matrix from the block Toeplitz pattern of
// the given mode cutoff (entries outside |k - j| <= Q must vanish).
inline double band_pattern_defect(const Matrix& m, const FloquetMatrixSpace& space) {
  const Index l = space.level_dim();
  const int kmax = space.k_max();
  double worst = 0.0;
  for (int k = -kmax; k <= kmax; ++k)
    for (int j = -kmax; j <= kmax; ++j) {
      const auto blk = m.block((k + kmax) * l, (j + kmax) * l, l, l);
      if (std::abs(k - j) > space.mode_cutoff()) {
        worst = std::max(worst, blk.cwiseAbs().maxCoeff());
      } else if (k < kmax && j < kmax) {
        const auto next = m.block((k + kmax + 1) * l, (j + kmax + 1) * l, l, l);
        worst = std::max(worst, (blk - next).cwiseAbs().maxCoeff());
      }
    }
  return worst;
}

inline Matrix build_k0(const FloquetMatrixSpace& space) {
  const Index l = space.level_dim();
  Matrix out = Matrix::Zero(space.total_dim(), space.total_dim());
  for (int k = -space.k_max(); k <= space.k_max(); ++k)
    for (Index i = 0; i < l; ++i) {
      const Index idx = (k + space.k_max()) * l + i;
      out(idx, idx) = k * space.omega() + space.energies()(i);
    }
  return out;
}

inline RealVector k0_eigenvalues(const FloquetMatrixSpace& space) { return build_k0(space).diagonal().real(); }

// Distinct (k, m) != (j, n) on the lattice with k*omega + h_m = j*omega + h_n.
struct Collision {
  int q = 0;  // k - j > 0
  int m = 0;
  int n = 0;
  double gap = 0.0;
};

inline std::vector<Collision> k0_collisions(const FloquetMatrixSpace& space) {
  std::vector<Collision> out;
  for (int q = 1; q <= 2 * space.k_max(); ++q)
    for (int m = 0; m < space.n_levels(); ++m)
      for (int n = 0; n < space.n_levels(); ++n) {
        const double gap = q * space.omega() + space.levels()[m].h - space.levels()[n].h;
        if (std::abs(gap) <= space.degeneracy_tol()) out.push_back({q, m, n, std::abs(gap)});
      }
  return out;
}

// [K_0, X]_q = q*omega*X_q + [H_0, X_q].
inline ModeFamily ad_k0(const ModeFamily& x, const FloquetMatrixSpace& space) {
  ModeFamily r(x.cutoff(), x.dim());
  const RealVector& e = space.energies();
  for (int q = -x.cutoff(); q <= x.cutoff(); ++q) {
    const Matrix& xq = x[q];
    if (xq.isZero(0.0)) continue;
    Matrix& rq = r[q];
    for (Index a = 0; a < xq.rows(); ++a)
      for (Index b = 0; b < xq.cols(); ++b) rq(a, b) = (q * space.omega() + e(a) - e(b)) * xq(a, b);
  }
  return r;
}

// D(X) on the lattice: keep entries between equal K_0 eigenvalues.
inline Matrix diagonal_part(const Matrix& x, const FloquetMatrixSpace& space) {
  const RealVector lam = k0_eigenvalues(space);
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Index a = 0; a < x.rows(); ++a)
    for (Index b = 0; b < x.cols(); ++b)
      if (std::abs(lam(a) - lam(b)) <= space.degeneracy_tol()) out(a, b) = x(a, b);
  return out;
}

inline ModeFamily diagonal_part(const ModeFamily& x, const FloquetMatrixSpace& space) {
  ModeFamily out(x.cutoff(), x.dim());
  for (int q = -x.cutoff(); q <= x.cutoff(); ++q)
    for (Index a = 0; a < x.dim(); ++a)
      for (Index b = 0; b < x.dim(); ++b)
        if (std::abs(space.bare_gap(q, a, b)) <= space.degeneracy_tol()) out[q](a, b) = x[q](a, b);
  return out;
}

inline ModeFamily offdiagonal_part(const ModeFamily& x, const FloquetMatrixSpace& space) {
  return x - diagonal_part(x, space);
}

// ---------------------------------------------------------------------------
// Perturbations.

using BlockKey = std::tuple<int, int, int>;  // (k, n, m)

struct BlockPerturbation {
  std::map<BlockKey, Matrix> blocks;
};

inline void validate_blocks(const BlockPerturbation& v, const FloquetMatrixSpace& space) {
  for (const auto& [key, blk] : v.blocks) {
    const auto [k, n, m] = key;
    if (std::abs(k) > space.k_max())
      throw Error(ErrorKind::kInvalidInput, "V block mode " + std::to_string(k) + " exceeds k_max");
    if (n < 0 || n >= space.n_levels() || m < 0 || m >= space.n_levels())
      throw Error(ErrorKind::kInvalidInput, "V block level index out of range");
    if (blk.rows() != space.level_mult(n) || blk.cols() != space.level_mult(m))
      throw Error(ErrorKind::kInvalidInput, "V block shape does not match level multiplicities");
    if (!blk.allFinite()) throw Error(ErrorKind::kInvalidInput, "V block has non-finite entries");
  }
}

// max over blocks of |V_{knm} - V_{-k,m,n}^dagger|.
inline double hermiticity_residual(const BlockPerturbation& v) {
  double worst = 0.0;
  for (const auto& [key, blk] : v.blocks) {
    const auto [k, n, m] = key;
    const auto it = v.blocks.find({-k, m, n});
    const double d = it == v.blocks.end() ? blk.cwiseAbs().maxCoeff()
                                          : (blk - it->second.adjoint()).cwiseAbs().maxCoeff();
    worst = std::max(worst, d);
  }
  return worst;
}

inline ModeFamily to_family(const BlockPerturbation& v, const FloquetMatrixSpace& space) {
  validate_blocks(v, space);
  ModeFamily f(space);
  for (const auto& [key, blk] : v.blocks) {
    const auto [k, n, m] = key;
    if (std::abs(k) > f.cutoff()) continue;
    f[k].block(space.level_offset(n), space.level_offset(m), blk.rows(), blk.cols()) += blk;
  }
  return f;
}

// sup_n sum_m sum_k (1+|k|)^r ||X_{knm}||, spectral norms of the level blocks.
inline double weighted_norm(const ModeFamily& x, const FloquetMatrixSpace& space, double r) {
  if (r < 0.0) throw Error(ErrorKind::kDomain, "weight exponent must be non-negative");
  double sup = 0.0;
  for (int n = 0; n < space.n_levels(); ++n) {
    double row = 0.0;
    for (int m = 0; m < space.n_levels(); ++m)
      for (int q = -x.cutoff(); q <= x.cutoff(); ++q) {
        const auto blk = x[q].block(space.level_offset(n), space.level_offset(m), space.level_mult(n),
                                    space.level_mult(m));
        if (blk.isZero(0.0)) continue;
        row += std::pow(1.0 + std::abs(q), r) * op_norm(blk);
      }
    sup = std::max(sup, row);
  }
  return sup;
}

inline double eps_v_norm(const BlockPerturbation& v, const FloquetMatrixSpace& space, double r) {
  if (r < 0.0) throw Error(ErrorKind::kDomain, "r must be non-negative");
  std::vector<double> rows(static_cast<std::size_t>(space.n_levels()), 0.0);
  for (const auto& [key, blk] : v.blocks) {
    const auto [k, n, m] = key;
    (void)m;
    if (blk.isZero(0.0)) continue;
    rows[static_cast<std::size_t>(n)] += std::pow(1.0 + std::abs(k), r) * op_norm(blk);
  }
  return *std::max_element(rows.begin(), rows.end());
}

// Hermitian V with modes |k| <= k_max, entries drawn uniformly in the unit
// square, rescaled to eps_v_norm(V, r) = eps.
inline BlockPerturbation random_perturbation(const FloquetMatrixSpace& space, std::uint64_t seed, double eps,
                                             double r) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng]() { return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0; };
  BlockPerturbation v;
  for (int k = 0; k <= space.k_max(); ++k)
    for (int n = 0; n < space.n_levels(); ++n)
      for (int m = 0; m < space.n_levels(); ++m) {
        if (k == 0 && m < n) continue;
        Matrix b(space.level_mult(n), space.level_mult(m));
        for (Index i = 0; i < b.rows(); ++i)
          for (Index j = 0; j < b.cols(); ++j) {
            const double re = unit();
            const double im = unit();
            b(i, j) = Complex(re, im);
          }
        if (k == 0 && n == m) b = 0.5 * (b + b.adjoint()).eval();
        v.blocks[{k, n, m}] = b;
        if (!(k == 0 && n == m)) v.blocks[{-k, m, n}] = b.adjoint();
      }
  const double e = eps_v_norm(v, space, r);
  if (e > 0.0)
    for (auto& [key, blk] : v.blocks) blk *= eps / e;
  return v;
}

// V restricted to |k| <= cutoff.
inline BlockPerturbation fourier_truncate(const BlockPerturbation& v, int cutoff) {
  BlockPerturbation out;
  for (const auto& [key, blk] : v.blocks)
    if (std::abs(std::get<0>(key)) <= cutoff) out.blocks.emplace(key, blk);
  return out;
}

// ---------------------------------------------------------------------------
// ad-series.

namespace detail {
inline constexpr int kMaxSeriesTerms = 400;
inline constexpr double kSeriesTol = 1e-16;
}  // namespace detail

// exp(ad_A) X = e^A X e^{-A}.
inline ModeFamily exp_ad(const ModeFamily& a, const ModeFamily& x) {
  ModeFamily sum = x;
  ModeFamily term = x;
  const double ref = std::max(x.norm(), 1e-300);
  for (int n = 1; n <= detail::kMaxSeriesTerms; ++n) {
    term = commutator(a, term);
    term *= Complex(1.0 / n);
    sum += term;
    if (term.norm() < detail::kSeriesTol * ref) return sum;
  }
  throw Error(ErrorKind::kNumeric, "exp(ad_A) series did not converge");
}

// ((e^{ad_A} - 1)/ad_A) C = sum_{n>=1} ad_A^{n-1} C / n!.
inline ModeFamily expm1_over_ad(const ModeFamily& a, const ModeFamily& c) {
  ModeFamily sum = c;
  ModeFamily term = c;
  const double ref = std::max(c.norm(), 1e-300);
  for (int n = 2; n <= detail::kMaxSeriesTerms; ++n) {
    term = commutator(a, term);
    term *= Complex(1.0 / n);
    sum += term;
    if (term.norm() < detail::kSeriesTol * ref) return sum;
  }
  throw Error(ErrorKind::kNumeric, "(e^ad - 1)/ad series did not converge");
}

// ad_A Phi(ad_A) Z with Phi(x) = (e^x - (e^x - 1)/x)/x, i.e.
// sum_{n>=1} n/(n+1)! ad_A^n Z.
inline ModeFamily ad_phi(const ModeFamily& a, const ModeFamily& z) {
  ModeFamily sum(z.cutoff(), z.dim());
  ModeFamily pow = z;  // ad_A^n Z / (n+1)!
  const double ref = std::max(z.norm(), 1e-300);
  if (z.norm() == 0.0) return sum;
  for (int n = 1; n <= detail::kMaxSeriesTerms; ++n) {
    pow = commutator(a, pow);
    pow *= Complex(1.0 / (n + 1));
    ModeFamily term = pow;
    term *= Complex(static_cast<double>(n));
    sum += term;
    if (term.norm() < detail::kSeriesTol * ref) return sum;
  }
  throw Error(ErrorKind::kNumeric, "Phi(ad_A) series did not converge");
}

// e^A for a mode family, Taylor with scaling and squaring.
inline ModeFamily exp_family(const ModeFamily& a, const FloquetMatrixSpace& space) {
  const double n = a.norm();
  int squarings = 0;
  if (n > 0.25) squarings = static_cast<int>(std::ceil(std::log2(n / 0.25)));
  ModeFamily b = a;
  b *= Complex(std::ldexp(1.0, -squarings));
  ModeFamily sum = ModeFamily::identity(space);
  ModeFamily term = ModeFamily::identity(space);
  for (int k = 1; k <= detail::kMaxSeriesTerms; ++k) {
    term = term * b;
    term *= Complex(1.0 / k);
    sum += term;
    if (term.norm() < 1e-17) break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

// W (K_0 + X) W^dagger - K_0 for W = e^{A_{s-1}} ... e^{A_0}.
inline ModeFamily conjugate_shifted(const std::vector<ModeFamily>& as, const ModeFamily& x,
                                    const FloquetMatrixSpace& space) {
  ModeFamily z = x;
  for (const ModeFamily& a : as) {
    ModeFamily c = ad_k0(a, space);
    c *= Complex(-1.0);  // [A, K_0]
    z = exp_ad(a, z) + expm1_over_ad(a, c);
  }
  return z;
}

// ---------------------------------------------------------------------------
// Homological equation [A, K] = -Y.

// Dense form: K Hermitian, solved in its eigenbasis; pairs with equal
// eigenvalues get A = 0.
inline Matrix solve_homological(const Matrix& k, const Matrix& y, double min_denom_guard,
                                double* min_denominator = nullptr) {
  if (k.rows() != k.cols() || y.rows() != k.rows() || y.cols() != k.cols())
    throw Error(ErrorKind::kInvalidInput, "homological equation shape mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (k + k.adjoint()));
  const Matrix& r = es.eigenvectors();
  const RealVector& lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  const Matrix yp = r.adjoint() * y * r;
  const double floor = 1e-14 * std::max(1.0, yp.cwiseAbs().maxCoeff());
  Matrix ap = Matrix::Zero(k.rows(), k.cols());
  double mind = std::numeric_limits<double>::infinity();
  for (Index a = 0; a < k.rows(); ++a)
    for (Index b = 0; b < k.cols(); ++b) {
      const double gap = lam(a) - lam(b);
      if (std::abs(gap) <= 1e-12 * scale) continue;
      if (std::abs(yp(a, b)) <= floor) continue;
      if (std::abs(gap) < min_denom_guard) throw SmallDenominatorError(0, a, b, std::abs(gap), true);
      mind = std::min(mind, std::abs(gap));
      ap(a, b) = yp(a, b) / gap;
    }
  if (min_denominator) *min_denominator = mind;
  return r * ap * r.adjoint();
}

struct HomologicalSolution {
  ModeFamily a;
  double min_denominator = std::numeric_limits<double>::infinity();
};

// Mode-family form against K_0 + dg, dg = D(G).  The dressed basis
// diagonalizes H_0 + dg_0 level by level.  Resonant couplings (D(G) entries
// outside the zero mode of a single level) are refused: they sit at a zero
// bare gap.
inline HomologicalSolution solve_homological(const FloquetMatrixSpace& space, const ModeFamily& dg,
                                             const ModeFamily& y, double min_denom_guard) {
  const Index l = space.level_dim();
  const double ref = std::max({1.0, dg.max_abs(), y.max_abs()});
  const double floor = 1e-14 * ref;
  for (int q = -dg.cutoff(); q <= dg.cutoff(); ++q)
    for (Index a = 0; a < l; ++a)
      for (Index b = 0; b < l; ++b) {
        if (q == 0 && space.level_of(a) == space.level_of(b)) continue;
        if (std::abs(dg[q](a, b)) > floor)
          throw SmallDenominatorError(q, a, b, std::abs(space.bare_gap(q, a, b)), false);
      }

  Matrix rot = Matrix::Zero(l, l);
  RealVector e(l);
  for (int m = 0; m < space.n_levels(); ++m) {
    const Index off = space.level_offset(m);
    const Index mult = space.level_mult(m);
    Matrix blk = dg[0].block(off, off, mult, mult);
    blk = 0.5 * (blk + blk.adjoint()).eval();
    blk.diagonal().array() += space.levels()[static_cast<std::size_t>(m)].h;
    Eigen::SelfAdjointEigenSolver<Matrix> es(blk);
    rot.block(off, off, mult, mult) = es.eigenvectors();
    e.segment(off, mult) = es.eigenvalues();
  }

  HomologicalSolution out{ModeFamily(y.cutoff(), l)};
  for (int q = -y.cutoff(); q <= y.cutoff(); ++q) {
    if (y[q].isZero(0.0)) continue;
    const Matrix yp = rot.adjoint() * y[q] * rot;
    Matrix ap = Matrix::Zero(l, l);
    for (Index a = 0; a < l; ++a)
      for (Index b = 0; b < l; ++b) {
        if (q == 0 && space.level_of(a) == space.level_of(b)) continue;
        if (std::abs(yp(a, b)) <= floor) continue;
        const double gap = q * space.omega() + e(a) - e(b);
        const double bare = std::abs(space.bare_gap(q, a, b));
        if (std::abs(gap) < min_denom_guard)
          throw SmallDenominatorError(q, a, b, std::abs(gap), bare >= min_denom_guard);
        out.min_denominator = std::min(out.min_denominator, std::abs(gap));
        ap(a, b) = yp(a, b) / gap;
      }
    out.a[q] = rot * ap * rot.adjoint();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Iteration.

enum class KamSchedule { kConstant, kFourierCutoff };

inline const char* to_string(KamSchedule s) {
  return s == KamSchedule::kConstant ? "constant" : "fourier_cutoff";
}

inline KamSchedule parse_schedule(const std::string& s) {
  if (s == "constant") return KamSchedule::kConstant;
  if (s == "fourier_cutoff") return KamSchedule::kFourierCutoff;
  throw Error(ErrorKind::kConfig, "unknown schedule '" + s + "'");
}

// Fourier cutoff of V_s under the schedule.
inline int schedule_cutoff(KamSchedule schedule, int s, int k_max) {
  if (schedule == KamSchedule::kConstant) return k_max;
  if (s >= 30) return k_max;
  return std::min(k_max, (1 << s) - 1);
}

struct KamOptions {
  KamSchedule schedule = KamSchedule::kConstant;
  int max_iters = 30;
  double tol = 1e-10;
  double r = 2.0;
  double nu = 1.0;
  // <= 0 selects 1e-8 * omega.
  double min_denom_guard = 0.0;
  bool keep_lattice = false;
};

struct KamState {
  int s = 0;
  double offdiag_residual = 0.0;
  // Smallest dressed denominator used to build A_s; infinity when A_s = 0 or
  // was not built.
  double min_denominator = std::numeric_limits<double>::infinity();
  double eps_V = 0.0;  // eps_v_norm(V_s, r)
  double conjugation_residual = 0.0;
  double g_hermiticity = 0.0;
  double a_antihermiticity = 0.0;
  double w_unitarity = 0.0;
  double a_norm = 0.0;
  double w_weighted_norm = 0.0;  // nu-weighted
  double band_defect = 0.0;      // lattice G_s, A_s, W_s
  ModeFamily G;
  ModeFamily A;
  ModeFamily W;
  // Lattice matrices, filled when KamOptions::keep_lattice is set.
  Matrix G_lattice;
  Matrix A_lattice;
  Matrix W_lattice;
};

enum class KamOutcome { kConverged, kSmallDenominator, kIterationLimit };

inline const char* to_string(KamOutcome o) {
  switch (o) {
    case KamOutcome::kConverged: return "converged";
    case KamOutcome::kSmallDenominator: return "small_denominator_abort";
    case KamOutcome::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

struct SmallDenominatorInfo {
  int q = 0;
  long a = 0;
  long b = 0;
  double gap = 0.0;
  bool dressed = false;
  int level_a = 0;
  int level_b = 0;
};

struct KamResult {
  KamOutcome outcome = KamOutcome::kIterationLimit;
  std::vector<KamState> history;
  ModeFamily W;
  ModeFamily G_inf;
  Matrix G;  // level-space generator, D(G_inf) zero mode
  double final_identity_residual = 0.0;
  std::optional<SmallDenominatorInfo> small_denominator;
  double eps_V = 0.0;
  double truncation_leak = 0.0;  // norm of V's blocks at |k| = k_max
};

inline KamResult kam_iterate(const FloquetMatrixSpace& space, const BlockPerturbation& v,
                             const KamOptions& opts = {}) {
  validate_blocks(v, space);
  const double vscale = 1.0 + to_family(v, space).norm();
  if (hermiticity_residual(v) > 1e-12 * vscale)
    throw Error(ErrorKind::kInvalidInput, "V is not Hermitian");
  if (opts.max_iters < 0) throw Error(ErrorKind::kInvalidInput, "max_iters must be non-negative");
  if (!(opts.tol > 0.0)) throw Error(ErrorKind::kInvalidInput, "tol must be positive");
  const double guard = opts.min_denom_guard > 0.0 ? opts.min_denom_guard : 1e-8 * space.omega();

  auto v_at = [&](int s) { return to_family(fourier_truncate(v, schedule_cutoff(opts.schedule, s, space.k_max())), space); };
  auto eps_at = [&](int s) {
    return eps_v_norm(fourier_truncate(v, schedule_cutoff(opts.schedule, s, space.k_max())), space, opts.r);
  };

  KamResult res;
  res.eps_V = eps_v_norm(v, space, opts.r);
  {
    BlockPerturbation edge;
    for (const auto& [key, blk] : v.blocks)
      if (std::abs(std::get<0>(key)) == space.k_max()) edge.blocks.emplace(key, blk);
    res.truncation_leak = to_family(edge, space).norm();
  }
  const ModeFamily vfull = to_family(v, space);

  std::vector<ModeFamily> as;
  ModeFamily g_prev(space);
  ModeFamily g = v_at(0);
  ModeFamily w = ModeFamily::identity(space);
  ModeFamily v_cur = g;

  for (int s = 0;; ++s) {
    KamState st;
    st.s = s;
    st.eps_V = eps_at(s);
    const ModeFamily z = conjugate_shifted(as, vfull, space);
    st.offdiag_residual = offdiagonal_part(z, space).norm();
    const ModeFamily zs = conjugate_shifted(as, v_cur, space);
    const ModeFamily ident = zs - (g - offdiagonal_part(g_prev, space));
    st.conjugation_residual = ident.norm();
    st.g_hermiticity = (g - g.adjoint()).norm();
    st.w_unitarity = (w * w.adjoint() - ModeFamily::identity(space)).norm();
    st.w_weighted_norm = weighted_norm(w, space, opts.nu);
    st.G = g;
    st.W = w;

    auto finish_state = [&](KamState& state) {
      const Matrix gl = materialize(state.G, space);
      const Matrix al = materialize(state.A.dim() ? state.A : ModeFamily(space), space);
      const Matrix wl = materialize(state.W, space);
      state.band_defect =
          std::max({band_pattern_defect(gl, space), band_pattern_defect(al, space), band_pattern_defect(wl, space)});
      if (opts.keep_lattice) {
        state.G_lattice = gl;
        state.A_lattice = al;
        state.W_lattice = wl;
      }
    };

    if (st.offdiag_residual < opts.tol) {
      st.A = ModeFamily(space);
      finish_state(st);
      res.history.push_back(std::move(st));
      res.outcome = KamOutcome::kConverged;
      res.W = w;
      res.G_inf = g;
      res.G = diagonal_part(g, space)[0];
      res.G = 0.5 * (res.G + res.G.adjoint()).eval();
      res.final_identity_residual = (z - diagonal_part(g, space)).norm();
      return res;
    }
    if (s >= opts.max_iters) {
      st.A = ModeFamily(space);
      finish_state(st);
      res.history.push_back(std::move(st));
      res.outcome = KamOutcome::kIterationLimit;
      res.W = w;
      res.G_inf = g;
      return res;
    }

    const ModeFamily y = offdiagonal_part(g - g_prev, space);
    HomologicalSolution hs;
    try {
      hs = solve_homological(space, diagonal_part(g, space), y, guard);
    } catch (const SmallDenominatorError& e) {
      st.A = ModeFamily(space);
      finish_state(st);
      res.history.push_back(std::move(st));
      res.outcome = KamOutcome::kSmallDenominator;
      res.small_denominator = SmallDenominatorInfo{e.q(), e.a(), e.b(), e.gap(), e.dressed(),
                                                   space.level_of(e.a()), space.level_of(e.b())};
      res.W = w;
      res.G_inf = g;
      return res;
    }
    // Enforce exact anti-Hermiticity against rounding.
    ModeFamily a = hs.a;
    {
      ModeFamily ad = a.adjoint();
      a -= ad;
      a *= Complex(0.5);
    }
    st.A = a;
    st.min_denominator = hs.min_denominator;
    st.a_norm = a.norm();
    st.a_antihermiticity = (hs.a + hs.a.adjoint()).norm();
    finish_state(st);
    res.history.push_back(std::move(st));

    as.push_back(a);
    const ModeFamily v_next = v_at(s + 1);
    ModeFamily g_next = g + ad_phi(a, y);
    const ModeFamily dv = v_next - v_cur;
    if (dv.max_abs() > 0.0) {
      ModeFamily chain = dv;
      for (const ModeFamily& ai : as) chain = exp_ad(ai, chain);
      g_next += chain;
    }
    g_prev = g;
    g = g_next;
    v_cur = v_next;
    w = exp_family(a, space) * w;
  }
}

// ---------------------------------------------------------------------------
// Propagator.

// W(t) = sum_q e^{i q omega t} W_q.
inline Matrix family_at(const ModeFamily& x, double omega, double t) {
  Matrix out = Matrix::Zero(x.dim(), x.dim());
  for (int q = -x.cutoff(); q <= x.cutoff(); ++q)
    if (!x[q].isZero(0.0)) out += std::exp(Complex(0.0, q * omega * t)) * x[q];
  return out;
}

// H_0 + V(omega t) on the level space.
inline Matrix level_hamiltonian(const FloquetMatrixSpace& space, const ModeFamily& v, double t) {
  Matrix h = family_at(v, space.omega(), t);
  h.diagonal() += space.energies().cast<Complex>();
  return 0.5 * (h + h.adjoint());
}

// U(t, s) = W(t)^dagger e^{-i(t-s)(H_0 + G)} W(s).
inline Matrix reconstruct_propagator(const FloquetMatrixSpace& space, const KamResult& result, double t,
                                     double s) {
  if (result.outcome != KamOutcome::kConverged)
    throw Error(ErrorKind::kInvalidInput, "propagator reconstruction needs a converged KAM result");
  Matrix h = result.G;
  h.diagonal() += space.energies().cast<Complex>();
  const Matrix e = exp_hermitian(0.5 * (h + h.adjoint()), Complex(0.0, -(t - s)));
  return family_at(result.W, space.omega(), t).adjoint() * e * family_at(result.W, space.omega(), s);
}

}  // namespace floquet_lab
