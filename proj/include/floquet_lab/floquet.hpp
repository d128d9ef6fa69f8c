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
#include <optional>
#include <string>
#include <vector>

#include "floquet_lab/core_fock.hpp"
#include "floquet_lab/drive.hpp"
#include "floquet_lab/errors.hpp"
#include "floquet_lab/oracle.hpp"
#include "floquet_lab/propagator.hpp"

namespace floquet_lab {

enum class Classification { kNonResonant, kResonantIdentityMultiple, kResonantAbsolutelyContinuous };

inline std::string to_string(Classification c) {
  switch (c) {
    case Classification::kNonResonant:
      return "NonResonant";
    case Classification::kResonantIdentityMultiple:
      return "ResonantIdentityMultiple";
    case Classification::kResonantAbsolutelyContinuous:
      return "ResonantAbsolutelyContinuous";
  }
  return "unknown";
}

// |f_N| + |f_{-N}| at or below this counts as a vanishing resonant mode.
inline constexpr double kResonantModeTol = 1e-12;

inline Classification classify_monodromy(const DriveSpec& spec, const OscillatorParams& params) {
  params.validate();
  if (!is_resonant_length(params.omega, params.period)) return Classification::kNonResonant;
  const int n = static_cast<int>(std::lround(params.omega * params.period / kTwoPi));
  const double weight = std::abs(fourier_coefficient(spec, n)) + std::abs(fourier_coefficient(spec, -n));
  return weight <= kResonantModeTol ? Classification::kResonantIdentityMultiple
                                    : Classification::kResonantAbsolutelyContinuous;
}

// H_F at the given dimension (no trimming).
inline Matrix hf_matrix(const FloquetScalarModel& model, Index dim) {
  const OscillatorParams& params = model.params();
  const QuadratureOps ops = build_xpH(params, dim);
  const SingleExpScalars& m = model.monodromy();
  const double w = params.omega;
  Matrix h = ops.h_omega - (m.mu / (w * m.delta)) * ops.p - (m.nu / m.delta) * ops.x;
  h.diagonal().array() += model.hf_shift();
  return h;
}

inline Matrix build_HF(const DriveSpec& spec, const OscillatorParams& params, const Truncation& trunc) {
  trunc.validate();
  return hf_matrix(FloquetScalarModel(spec, params), trunc.n_keep);
}

inline Matrix uf_matrix(const FloquetScalars& f, const QuadratureExponentials& qe) {
  Matrix u = qe.exp_x(f.F2) * qe.exp_p(f.F1 / qe.omega());
  u *= std::exp(kI * f.Phi);
  return u;
}

// S_F(t) = -(F1'/omega) p - F2' x + F1 F2'/omega - Phi'
inline Matrix sf_matrix(const FloquetScalars& f, const OscillatorParams& params, Index dim) {
  const QuadratureOps ops = build_xpH(params, dim);
  const double w = params.omega;
  Matrix s = -(f.dF1 / w) * ops.p - f.dF2 * ops.x;
  s.diagonal().array() += f.F1 * f.dF2 / w - f.dPhi;
  return s;
}

inline void require_fourier(const DriveSpec& spec) {
  if (spec.is_sampled()) {
    throw Error(ErrorKind::kUnsupportedDrive, "S_F needs a Fourier drive (exact derivatives)");
  }
}

inline Matrix build_UF(const DriveSpec& spec, const OscillatorParams& params, const Truncation& trunc,
                       double t) {
  trunc.validate();
  const FloquetScalarModel model(spec, params);
  const QuadratureExponentials qe(params.omega, trunc.full_dim());
  return uf_matrix(model.at(t), qe).topLeftCorner(trunc.n_keep, trunc.n_keep);
}

inline Matrix build_SF(const DriveSpec& spec, const OscillatorParams& params, const Truncation& trunc,
                       double t) {
  trunc.validate();
  require_fourier(spec);
  const FloquetScalarModel model(spec, params);
  return sf_matrix(model.at(t), params, trunc.n_keep);
}

// Floquet decomposition U(t,0) = U_F(t) e^{-itH_F} with cached monodromy data.
class FloquetData {
 public:
  FloquetData(const DriveSpec& spec, const OscillatorParams& params, const Truncation& trunc)
      : model_(spec, params),
        trunc_(trunc),
        qe_(params.omega, trunc.full_dim()),
        classification_(classify_monodromy(spec, params)) {
    trunc.validate();
    hf_padded_ = hf_matrix(model_, trunc.full_dim());
  }

  const FloquetScalarModel& model() const { return model_; }
  const Truncation& truncation() const { return trunc_; }
  Classification classification() const { return classification_; }

  Matrix H_F() const { return top_left(hf_padded_, trunc_.n_keep); }
  const Matrix& H_F_padded() const { return hf_padded_; }

  FloquetScalars scalars(double t) const { return model_.at(t); }

  Matrix U_F_padded(double t) const { return uf_matrix(model_.at(t), qe_); }
  Matrix U_F_at(double t) const { return top_left(U_F_padded(t), trunc_.n_keep); }

  Matrix S_F_padded(double t) const {
    require_fourier(model_.drive());
    return sf_matrix(model_.at(t), model_.params(), trunc_.full_dim());
  }
  Matrix S_F_at(double t) const { return top_left(S_F_padded(t), trunc_.n_keep); }

  // exp(-i t H_F), kept block.
  Matrix evolution(double t) const {
    return exp_hermitian(hf_padded_, -kI * t).topLeftCorner(trunc_.n_keep, trunc_.n_keep);
  }

 private:
  FloquetScalarModel model_;
  Truncation trunc_;
  QuadratureExponentials qe_;
  Classification classification_;
  Matrix hf_padded_;
};

// Least-squares slope of log(max(y, 1e-14)) against log t over the last half
// of the grid (t > 0 only).
inline double growth_exponent(const std::vector<double>& t, const std::vector<double>& y) {
  constexpr double kFloor = 1e-14;
  std::vector<double> lx, ly;
  const std::size_t start = t.size() / 2;
  for (std::size_t i = start; i < t.size(); ++i) {
    if (t[i] <= 0.0) continue;
    lx.push_back(std::log(t[i]));
    ly.push_back(std::log(std::max(y[i], kFloor)));
  }
  if (lx.size() < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(ly.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  if (den == 0.0) return 0.0;
  const double slope = num / den;
  // A constant series fits to rounding noise.
  return std::abs(slope) < 1e-12 ? 0.0 : slope;
}

// Mean-energy exponents below this are reported as bounded.
inline constexpr double kBoundedExponent = 0.5;
inline constexpr double kLeakThreshold = 1e-6;

struct StabilityReport {
  std::vector<double> t_grid;
  std::vector<double> energy_norms;
  std::vector<double> mean_energy;
  std::vector<double> high_mode_population;
  double sup_bound = 0.0;
  std::optional<double> c_psi;
  std::optional<double> sf_resolvent_norm;
  Classification classification = Classification::kNonResonant;
  double growth_exponent = 0.0;
  bool bounded = true;
  bool bound_holds = true;
  bool leak_warning = false;
  bool support_warning = false;
  std::string verdict() const { return bounded ? "bounded" : "growing"; }
};

inline std::vector<double> stability_grid(double period, int n_periods, int samples_per_period) {
  std::vector<double> grid;
  const long total = static_cast<long>(n_periods) * samples_per_period;
  grid.reserve(static_cast<std::size_t>(total) + 1);
  for (long j = 0; j <= total; ++j) {
    grid.push_back(period * static_cast<double>(j) / samples_per_period);
  }
  return grid;
}

// C_psi = ||H_F psi|| + sup_t ||S_F(t)(H_F+i)^{-1}|| ||(H_F+i) psi||, with the
// resolvent norm taken on the kept block and the sup over the given times.
struct EnergyBound {
  double value = 0.0;
  double resolvent_norm = 0.0;
};

inline EnergyBound energy_bound(const FloquetData& fd, const Vector& psi0,
                                const std::vector<double>& times) {
  const Index full = fd.truncation().full_dim();
  const Index keep = fd.truncation().n_keep;
  Vector v = Vector::Zero(full);
  v.head(psi0.size()) = psi0;
  const Matrix& hf = fd.H_F_padded();
  const Matrix shifted = hf + kI * Matrix::Identity(full, full);
  const Matrix resolvent = shifted.inverse();
  double sup = 0.0;
  for (double t : times) {
    const Matrix m = fd.S_F_padded(t) * resolvent;
    sup = std::max(sup, op_norm(top_left(m, keep)));
  }
  EnergyBound out;
  out.resolvent_norm = sup;
  out.value = (hf * v).norm() + sup * (shifted * v).norm();
  return out;
}

inline StabilityReport stability_scan(const DriveSpec& spec, const OscillatorParams& params,
                                      const Truncation& trunc, const Vector& psi0, int n_periods,
                                      int samples_per_period, int steps_per_period = 128) {
  trunc.validate();
  if (n_periods < 1) throw Error(ErrorKind::kInvalidInput, "n_periods must be positive");
  if (samples_per_period < 1) throw Error(ErrorKind::kInvalidInput, "samples_per_period must be positive");
  StabilityReport r;
  r.classification = classify_monodromy(spec, params);
  r.t_grid = stability_grid(params.period, n_periods, samples_per_period);
  const EvolveResult ev = evolve_state(spec, params, trunc, psi0, r.t_grid, steps_per_period);
  r.support_warning = ev.support_warning;
  const Index full = trunc.full_dim();
  const QuadratureOps ops = build_xpH(params, full);
  for (std::size_t i = 0; i < r.t_grid.size(); ++i) {
    const Vector& v = ev.states[i];
    const Vector hv = ops.h_omega * v + spec(r.t_grid[i]) * (ops.x * v);
    r.energy_norms.push_back(hv.norm());
    r.mean_energy.push_back(v.dot(hv).real());
    r.high_mode_population.push_back(v.tail(full - trunc.n_keep).squaredNorm());
  }
  r.sup_bound = *std::max_element(r.energy_norms.begin(), r.energy_norms.end());
  r.leak_warning = *std::max_element(r.high_mode_population.begin(), r.high_mode_population.end()) >
                   kLeakThreshold;
  r.growth_exponent = growth_exponent(r.t_grid, r.mean_energy);
  r.bounded = r.growth_exponent < kBoundedExponent;
  if (r.classification == Classification::kNonResonant && !spec.is_sampled()) {
    const FloquetData fd(spec, params, trunc);
    std::vector<double> phases(r.t_grid.begin(),
                               r.t_grid.begin() + std::min<std::ptrdiff_t>(samples_per_period, r.t_grid.size()));
    const EnergyBound b = energy_bound(fd, psi0, phases);
    r.c_psi = b.value;
    r.sf_resolvent_norm = b.resolvent_norm;
    r.bound_holds = r.sup_bound <= b.value * (1.0 + 1e-6);
    r.bounded = r.bounded && r.bound_holds;
  }
  return r;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

inline double interval_distance(const Interval& a, const Interval& b) {
  if (!(a.lo <= a.hi) || !(b.lo <= b.hi)) {
    throw Error(ErrorKind::kInvalidInterval, "interval bounds are reversed");
  }
  const double d = std::max(a.lo - b.hi, b.lo - a.hi);
  if (!(d > 0.0)) throw Error(ErrorKind::kInvalidInterval, "intervals overlap or touch");
  return d;
}

struct SpectralData {
  RealVector values;
  Matrix vectors;
};

inline SpectralData spectral_data(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::kNumeric, "eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

// Indices of eigenvalues in the closed interval; endpoints included.
inline std::vector<Index> spectral_indices(const SpectralData& sd, const Interval& iv) {
  std::vector<Index> cols;
  for (Index i = 0; i < sd.values.size(); ++i) {
    if (iv.contains(sd.values(i))) cols.push_back(i);
  }
  return cols;
}

// Eigenvectors whose eigenvalue lies in the closed interval (columns).
inline Matrix spectral_basis(const SpectralData& sd, const Interval& iv) {
  const std::vector<Index> cols = spectral_indices(sd, iv);
  Matrix out(sd.vectors.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = sd.vectors.col(cols[j]);
  return out;
}

inline Matrix spectral_projector(const SpectralData& sd, const Interval& iv) {
  const Matrix b = spectral_basis(sd, iv);
  return b * b.adjoint();
}

struct TransitionReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double sf_block_norm = 0.0;
  double distance = 0.0;
  bool holds = true;
  // max over eigenpairs of ||P_n U P_m|| * |E_n - E_m| / (2 ||S_F||)
  double worst_pair_ratio = 0.0;
  Index dim_1 = 0;
  Index dim_2 = 0;
  std::string caveat =
      "S_F is unbounded; its norm is replaced by the kept-block norm sup over a period grid";
};

// sup over an n-point grid of [0, T) of the kept-block norm of S_F.
inline double sf_block_sup(const FloquetData& fd, int samples = 64) {
  const double T = fd.model().params().period;
  double sup = 0.0;
  for (int j = 0; j < samples; ++j) sup = std::max(sup, op_norm(fd.S_F_at(T * j / samples)));
  return sup;
}

inline TransitionReport transition_bound_check(const DriveSpec& spec, const OscillatorParams& params,
                                               const Truncation& trunc, double t, double s,
                                               const Interval& d1, const Interval& d2,
                                               int sf_samples = 64) {
  trunc.validate();
  TransitionReport r;
  r.distance = interval_distance(d1, d2);
  const Index keep = trunc.n_keep;
  const SpectralData st = spectral_data(hamiltonian(spec, params, t, keep));
  const SpectralData ss = spectral_data(hamiltonian(spec, params, s, keep));
  const std::vector<Index> i1 = spectral_indices(st, d1);
  const std::vector<Index> i2 = spectral_indices(ss, d2);
  const Matrix b1 = spectral_basis(st, d1);
  const Matrix b2 = spectral_basis(ss, d2);
  r.dim_1 = b1.cols();
  r.dim_2 = b2.cols();
  const Matrix u = propagator_factored(spec, params, trunc, t, s);
  const FloquetData fd(spec, params, trunc);
  r.sf_block_norm = sf_block_sup(fd, sf_samples);
  r.rhs = 2.0 * r.sf_block_norm / r.distance;
  if (b1.cols() > 0 && b2.cols() > 0) {
    const Matrix core = b1.adjoint() * u * b2;
    r.lhs = op_norm(core);
    if (r.sf_block_norm > 0.0) {
      for (Index i = 0; i < b1.cols(); ++i) {
        for (Index j = 0; j < b2.cols(); ++j) {
          const double en = st.values(i1[static_cast<std::size_t>(i)]);
          const double em = ss.values(i2[static_cast<std::size_t>(j)]);
          const double ratio = std::abs(core(i, j)) * std::abs(en - em) / (2.0 * r.sf_block_norm);
          r.worst_pair_ratio = std::max(r.worst_pair_ratio, ratio);
        }
      }
    }
  }
  r.holds = r.lhs <= r.rhs * (1.0 + 1e-6);
  return r;
}

// Solution of A X - X B = Y for Hermitian A, B with disjoint spectra, via
// their eigenbases.
inline Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& y) {
  const SpectralData sa = spectral_data(a);
  const SpectralData sb = spectral_data(b);
  Matrix z = sa.vectors.adjoint() * y * sb.vectors;
  for (Index i = 0; i < z.rows(); ++i) {
    for (Index j = 0; j < z.cols(); ++j) {
      const double gap = sa.values(i) - sb.values(j);
      if (gap == 0.0) throw Error(ErrorKind::kNumeric, "spectra of A and B intersect");
      z(i, j) /= gap;
    }
  }
  return sa.vectors * z * sb.vectors.adjoint();
}

}  // namespace floquet_lab
