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
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "floquet_lab/errors.hpp"

namespace floquet_lab {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct OscillatorParams {
  double omega = 1.0;
  double period = kTwoPi;

  void validate() const {
    if (!(omega > 0.0) || !std::isfinite(omega)) {
      throw Error(ErrorKind::kConfig, "omega must be positive");
    }
    if (!(period > 0.0) || !std::isfinite(period)) {
      throw Error(ErrorKind::kConfig, "period must be positive");
    }
  }
};

struct Truncation {
  Index n_keep = 48;
  Index n_pad = 48;

  // Default padding equals the kept dimension.
  static Truncation with_default_pad(Index n_keep) { return {n_keep, n_keep}; }

  Index full_dim() const { return n_keep + n_pad; }

  void validate() const {
    if (n_keep < 2) {
      throw Error(ErrorKind::kInvalidTruncation,
                  "n_keep must be at least 2, got " + std::to_string(n_keep));
    }
    if (n_pad < 0) {
      throw Error(ErrorKind::kInvalidTruncation, "n_pad must be non-negative");
    }
  }
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::kNumeric, std::string(what) + ": non-finite entries");
  }
}

// max |M - M^dagger| entry.
inline double hermitian_residual(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const Matrix& m, double rel_tol = 1e-12) {
  const double scale = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
  return hermitian_residual(m) <= rel_tol * std::max(scale, 1e-300);
}

// Largest singular value.
inline double op_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const Matrix g = m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  return std::sqrt(std::max(lmax, 0.0));
}

inline Matrix top_left(const Matrix& m, Index k) {
  k = std::min<Index>(k, std::min(m.rows(), m.cols()));
  return m.topLeftCorner(k, k);
}

// ||(A - B) P_k|| with P_k the projector on the first k basis states.
inline double projected_diff(const Matrix& a, const Matrix& b, Index k) {
  k = std::min<Index>(k, a.cols());
  return op_norm((a - b).leftCols(k));
}

// ||P_k (A - B) P_k||.
inline double block_diff(const Matrix& a, const Matrix& b, Index k) {
  return op_norm(top_left(a, k) - top_left(b, k));
}

struct Ladder {
  Matrix a;
  Matrix a_dagger;
};

inline Ladder build_ladder(Index dim) {
  if (dim < 2) {
    throw Error(ErrorKind::kInvalidTruncation,
                "ladder dimension must be at least 2");
  }
  Ladder out;
  out.a = Matrix::Zero(dim, dim);
  for (Index n = 1; n < dim; ++n) {
    out.a(n - 1, n) = std::sqrt(static_cast<double>(n));
  }
  out.a_dagger = out.a.adjoint();
  return out;
}

inline Ladder build_ladder(const Truncation& trunc) {
  trunc.validate();
  return build_ladder(trunc.n_keep);
}

// Off-diagonal of the real symmetric tridiagonal position matrix.
inline RealVector position_offdiag(double omega, Index dim) {
  RealVector e(std::max<Index>(dim - 1, 0));
  const double c = 1.0 / std::sqrt(2.0 * omega);
  for (Index n = 0; n + 1 < dim; ++n) {
    e(n) = c * std::sqrt(static_cast<double>(n + 1));
  }
  return e;
}

inline RealVector oscillator_levels(double omega, Index dim) {
  RealVector d(dim);
  for (Index n = 0; n < dim; ++n) d(n) = omega * (static_cast<double>(n) + 0.5);
  return d;
}

struct QuadratureOps {
  Matrix x;
  Matrix p;
  Matrix h_omega;
};

inline QuadratureOps build_xpH(const OscillatorParams& params, Index dim) {
  params.validate();
  const Ladder l = build_ladder(dim);
  QuadratureOps ops;
  ops.x = (l.a + l.a_dagger) / std::sqrt(2.0 * params.omega);
  ops.p = kI * std::sqrt(params.omega / 2.0) * (l.a_dagger - l.a);
  ops.h_omega = oscillator_levels(params.omega, dim).cast<Complex>().asDiagonal();
  return ops;
}

inline QuadratureOps build_xpH(const OscillatorParams& params,
                               const Truncation& trunc) {
  trunc.validate();
  return build_xpH(params, trunc.n_keep);
}

// exp(c * H) for Hermitian H, via eigendecomposition.
inline Matrix exp_hermitian(const Matrix& h, Complex c) {
  const Index n = h.rows();
  if (n == 0) return h;
  if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(h.real());
    const RealMatrix& v = es.eigenvectors();
    Vector phases(n);
    for (Index i = 0; i < n; ++i) phases(i) = std::exp(c * es.eigenvalues()(i));
    const Matrix vc = v.cast<Complex>();
    return vc * phases.asDiagonal() * vc.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Matrix& v = es.eigenvectors();
  Vector phases(n);
  for (Index i = 0; i < n; ++i) phases(i) = std::exp(c * es.eigenvalues()(i));
  return v * phases.asDiagonal() * v.adjoint();
}

// Dense exponential.  Hermitian and anti-Hermitian inputs go through the
// eigendecomposition; everything else through Pade scaling and squaring.
inline Matrix matrix_exp(const Matrix& m) {
  require_finite(m, "matrix_exp");
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::kInvalidInput, "matrix_exp needs a square matrix");
  }
  if (m.size() == 0) return m;
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return Matrix::Identity(m.rows(), m.cols());
  const double tol = 1e-14 * scale;
  if ((m + m.adjoint()).cwiseAbs().maxCoeff() <= tol) {
    const Matrix h = kI * m;
    return exp_hermitian(0.5 * (h + h.adjoint()), -kI);
  }
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() <= tol) {
    return exp_hermitian(0.5 * (m + m.adjoint()), 1.0);
  }
  Matrix out = m.exp();
  require_finite(out, "matrix_exp");
  return out;
}

// Build the generator at n_keep + n_pad, exponentiate, keep the leading block.
template <typename Builder>
Matrix exp_padded(Builder&& generator_builder, const Truncation& trunc) {
  trunc.validate();
  const Index full = trunc.full_dim();
  const Matrix g = generator_builder(full);
  if (g.rows() != full || g.cols() != full) {
    throw Error(ErrorKind::kInvalidInput,
                "generator builder returned the wrong dimension");
  }
  return matrix_exp(g).topLeftCorner(trunc.n_keep, trunc.n_keep);
}

// Cached spectral data of x at a fixed dimension.  Since p = -omega D^* x D with
// D = diag(i^n), exp(i a x) and exp(i b p) both reduce to the same real
// eigendecomposition.
class QuadratureExponentials {
 public:
  QuadratureExponentials(double omega, Index dim) : omega_(omega), dim_(dim) {
    if (dim < 2) {
      throw Error(ErrorKind::kInvalidTruncation, "dimension must be at least 2");
    }
    Eigen::SelfAdjointEigenSolver<RealMatrix> es;
    es.computeFromTridiagonal(RealVector::Zero(dim), position_offdiag(omega, dim),
                              Eigen::ComputeEigenvectors);
    q_ = es.eigenvectors().cast<Complex>();
    lambda_ = es.eigenvalues();
    d_.resize(dim);
    static constexpr Complex kPowers[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (Index n = 0; n < dim; ++n) d_(n) = kPowers[n % 4];
  }

  Index dim() const { return dim_; }
  double omega() const { return omega_; }

  // exp(i a x)
  Matrix exp_x(double a) const {
    if (a == 0.0) return Matrix::Identity(dim_, dim_);
    Vector ph(dim_);
    for (Index i = 0; i < dim_; ++i) ph(i) = std::exp(kI * (a * lambda_(i)));
    return q_ * ph.asDiagonal() * q_.transpose();
  }

  // exp(i b p)
  Matrix exp_p(double b) const {
    const Matrix e = exp_x(-b * omega_);
    return d_.conjugate().asDiagonal() * e * d_.asDiagonal();
  }

  // exp(-i t H_omega), diagonal.
  Vector exp_h_diag(double t) const {
    Vector ph(dim_);
    for (Index n = 0; n < dim_; ++n) {
      ph(n) = std::exp(-kI * (t * omega_ * (static_cast<double>(n) + 0.5)));
    }
    return ph;
  }

 private:
  double omega_;
  Index dim_;
  Matrix q_;
  RealVector lambda_;
  Vector d_;
};

}  // namespace floquet_lab
