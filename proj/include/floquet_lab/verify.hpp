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
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "floquet_lab/commutators.hpp"
#include "floquet_lab/core_fock.hpp"
#include "floquet_lab/floquet.hpp"
#include "floquet_lab/io.hpp"
#include "floquet_lab/kam.hpp"
#include "floquet_lab/oracle.hpp"
#include "floquet_lab/propagator.hpp"

namespace floquet_lab {

// Invariant suites behind `floquet_lab verify` and the acceptance run.

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

inline Check check_le(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, value <= threshold};
}

inline Check check_ge(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, value >= threshold};
}

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;
  bool passed() const {
    for (const Check& c : checks)
      if (!c.pass) return false;
    return !checks.empty();
  }
};

namespace verify_detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Matrix random_hermitian(std::mt19937_64& rng, Index n) {
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = Complex(uniform(rng, -1, 1), uniform(rng, -1, 1));
  return 0.5 * (m + m.adjoint());
}

inline double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

}  // namespace verify_detail

// omega = 1, T = 2 pi sqrt(2), f(t) = sin(2 pi t / T), n_keep = n_pad = 48.
inline RunConfig default_run_config() {
  RunConfig c;
  c.params = {1.0, kTwoPi * std::sqrt(2.0)};
  c.drive = DriveSpec::fourier(c.params.period, {{1, Complex(0.0, -0.5)}, {-1, Complex(0.0, 0.5)}});
  c.trunc = {48, 48};
  return c;
}

// ---------------------------------------------------------------------------
// Exponential splitting identities and the closed-form propagators.

// exp(-i t H + i (mu/omega) p + i nu x) against its split form, both built
// at dimension dim and compared on the keep block.
inline double split_identity_worst(int draws, std::uint64_t seed, Index dim = 96, Index keep = 48) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double w = verify_detail::uniform(rng, 0.5, 2.0);
    const double t = verify_detail::uniform(rng, -0.95, 0.95) * kTwoPi / w;
    const double mu = verify_detail::uniform(rng, -1.5, 1.5);
    const double nu = verify_detail::uniform(rng, -1.5, 1.5);
    const QuadratureOps ops = build_xpH({w, 1.0}, dim);
    const Matrix lhs = exp_hermitian(t * ops.h_omega - (mu / w) * ops.p - nu * ops.x, -kI);
    const ForwardSplit f = split_forward(mu, nu, t, w);
    const Matrix rhs = std::exp(-kI * f.phi) * exp_hermitian(ops.p, kI * (f.xi / w)) *
                       exp_hermitian(ops.x, kI * f.eta) * exp_hermitian(ops.h_omega, -kI * t);
    worst = std::max(worst, block_diff(lhs, rhs, keep));
  }
  return worst;
}

// split_inverse(split_forward(mu, nu, t)) on |t| < 2 pi / omega; errors are
// relative to 1 + |mu| + |nu|.
inline double split_round_trip_worst(int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double w = verify_detail::uniform(rng, 0.2, 3.0);
    const double t = verify_detail::uniform(rng, -0.999, 0.999) * kTwoPi / w;
    const double mu = verify_detail::uniform(rng, -2, 2);
    const double nu = verify_detail::uniform(rng, -2, 2);
    const ForwardSplit f = split_forward(mu, nu, t, w);
    const InverseSplit b = split_inverse(f.xi, f.eta, t, w);
    const double scale = 1.0 + std::abs(mu) + std::abs(nu);
    worst = std::max({worst, std::abs(b.mu - mu) / scale, std::abs(b.nu - nu) / scale,
                      std::abs(b.phi - f.phi) / scale});
  }
  return worst;
}

struct OracleAgreement {
  double factored = 0.0;
  double single_exp = 0.0;
  int single_exp_skipped = 0;
};

// Closed forms against the CF4 oracle at n_times points (k / n_times) *
// horizon, k = 1..n_times, on the first `block` Fock columns.
inline OracleAgreement propagator_oracle_agreement(const RunConfig& cfg, int n_times, double horizon,
                                                   Index block = 12) {
  OracleAgreement out;
  OracleStepper stepper(cfg.drive, cfg.params, cfg.trunc.full_dim(), cfg.steps_per_period, Scheme::kCF4);
  const QuadratureExponentials qe(cfg.params.omega, cfg.trunc.full_dim());
  Matrix u = Matrix::Identity(cfg.trunc.full_dim(), cfg.trunc.full_dim());
  double prev = 0.0;
  for (int i = 1; i <= n_times; ++i) {
    const double t = horizon * i / n_times;
    stepper.propagate(u, prev, t);
    prev = t;
    const Matrix oracle = top_left(u, cfg.trunc.n_keep);
    const Matrix fac = propagator_factored(cfg.drive, cfg.params, cfg.trunc, qe, t, 0.0, cfg.psi_sign);
    out.factored = std::max(out.factored, projected_diff(fac, oracle, block));
    try {
      const Matrix se = propagator_single_exp(cfg.drive, cfg.params, cfg.trunc, t, 0.0, cfg.psi_sign);
      out.single_exp = std::max(out.single_exp, projected_diff(se, oracle, block));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kResonantTime) throw;
      ++out.single_exp_skipped;
    }
  }
  return out;
}

inline SuiteReport appendix_suite(const RunConfig& cfg, int split_draws = 50) {
  SuiteReport r{"appendix", {}};
  r.checks.push_back(check_le("split_identity", split_identity_worst(split_draws, 101), 1e-7));
  r.checks.push_back(check_le("split_round_trip", split_round_trip_worst(1000, 102), 1e-10));
  const OracleAgreement a = propagator_oracle_agreement(cfg, 20, 5.0 * cfg.params.period);
  r.checks.push_back(check_le("factored_vs_oracle", a.factored, 1e-6));
  r.checks.push_back(check_le("single_exp_vs_oracle", a.single_exp, 1e-6));
  return r;
}

// ---------------------------------------------------------------------------
// Floquet decomposition.

struct FloquetValues {
  double factorization = 0.0;
  double uf_identity = 0.0;
  double periodicity = 0.0;
  double h0_split = 0.0;
  double sf_finite_difference = 0.0;
};

inline FloquetValues floquet_values(const RunConfig& cfg) {
  const FloquetData fd(cfg.drive, cfg.params, cfg.trunc);
  const double T = cfg.params.period;
  const Index keep = cfg.trunc.n_keep;
  FloquetValues v;
  OracleStepper stepper(cfg.drive, cfg.params, cfg.trunc.full_dim(), cfg.steps_per_period, Scheme::kCF4);
  Matrix u = Matrix::Identity(cfg.trunc.full_dim(), cfg.trunc.full_dim());
  double prev = 0.0;
  for (int i = 1; i <= 20; ++i) {
    const double t = 3.0 * T * i / 20;
    stepper.propagate(u, prev, t);
    prev = t;
    const Matrix rhs = fd.U_F_padded(t) * exp_hermitian(fd.H_F_padded(), -kI * t);
    v.factorization = std::max(v.factorization, projected_diff(top_left(u, keep), top_left(rhs, keep), 12));
    v.periodicity = std::max(v.periodicity, block_diff(fd.U_F_at(t + T), fd.U_F_at(t), keep / 2));
  }
  v.uf_identity = (fd.U_F_at(0.0) - Matrix::Identity(keep, keep)).cwiseAbs().maxCoeff();
  v.h0_split = op_norm(hamiltonian(cfg.drive, cfg.params, 0.0, keep) - fd.H_F() - fd.S_F_at(0.0));
  const double h = 1e-5 * T / kTwoPi;
  for (double frac : {0.07, 0.41, 0.83}) {
    const double t = frac * T;
    const Matrix d = (fd.U_F_padded(t + h) - fd.U_F_padded(t - h)) / (2 * h);
    const Matrix fdiff = kI * fd.U_F_padded(t).adjoint() * d;
    v.sf_finite_difference = std::max(v.sf_finite_difference, block_diff(fd.S_F_padded(t), fdiff, 12));
  }
  return v;
}

inline SuiteReport floquet_suite(const RunConfig& cfg) {
  SuiteReport r{"floquet", {}};
  if (classify_monodromy(cfg.drive, cfg.params) != Classification::kNonResonant || cfg.drive.is_sampled()) {
    r.checks.push_back({"non_resonant_fourier_config", 0.0, 1.0, false});
    return r;
  }
  const FloquetValues v = floquet_values(cfg);
  r.checks.push_back(check_le("factorization", v.factorization, 1e-6));
  r.checks.push_back(check_le("uf_at_zero", v.uf_identity, 1e-12));
  r.checks.push_back(check_le("uf_periodicity", v.periodicity, 1e-7));
  r.checks.push_back(check_le("h0_equals_hf_plus_sf0", v.h0_split, 1e-8));
  r.checks.push_back(check_le("sf_finite_difference", v.sf_finite_difference, 1e-5));
  return r;
}

// ---------------------------------------------------------------------------
// Commutator algebra.

// Brute-force normal ordering of (A+B)^p: a term (w, a) stands for
// x_{w0} x_{w1} ... A^a with x_j = ad_A^j B; left multiplication by B prepends
// 0, by A applies the Leibniz rule to the word and raises a.
inline std::map<std::pair<Word, int>, std::int64_t> normal_order_expand(int p) {
  using Term = std::pair<Word, int>;
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

// Number of (p, k) with p <= p_max whose F_{p,k} differs from the brute-force
// expansion.
inline int f_polynomial_mismatches(int p_max) {
  int bad = 0;
  for (int p = 1; p <= p_max; ++p) {
    std::map<int, std::map<Word, std::int64_t>> by_k;
    for (const auto& [term, c] : normal_order_expand(p))
      if (c != 0) by_k[term.second][term.first] += c;
    for (int k = 0; k <= p; ++k)
      if (f_polynomial(p, k).terms != by_k[k]) ++bad;
  }
  return bad;
}

struct CommutatorValues {
  double ap_commute = 0.0;
  double aplusb_power = 0.0;
  int f_mismatches = 0;
};

inline CommutatorValues commutator_values(int pairs = 20, Index dim = 16, int p_max = 5, std::uint64_t seed = 103) {
  std::mt19937_64 rng(seed);
  CommutatorValues v;
  for (int i = 0; i < pairs; ++i) {
    const Matrix a = verify_detail::random_hermitian(rng, dim);
    const Matrix b = verify_detail::random_hermitian(rng, dim);
    Matrix apow = Matrix::Identity(dim, dim);
    Matrix spow = Matrix::Identity(dim, dim);
    for (int p = 1; p <= p_max; ++p) {
      apow = apow * a;
      spow = spow * (a + b);
      v.ap_commute = std::max(v.ap_commute, verify_detail::rel(ap_commute(a, b, p), apow * b));
      v.aplusb_power = std::max(v.aplusb_power, verify_detail::rel(aplusb_power(a, b, p), spow));
    }
  }
  v.f_mismatches = f_polynomial_mismatches(4);
  return v;
}

inline SuiteReport commutators_suite() {
  SuiteReport r{"commutators", {}};
  const CommutatorValues v = commutator_values();
  r.checks.push_back(check_le("ap_commute", v.ap_commute, 1e-10));
  r.checks.push_back(check_le("aplusb_power", v.aplusb_power, 1e-10));
  r.checks.push_back(check_le("f_polynomial_mismatches", v.f_mismatches, 0));
  return r;
}

// ---------------------------------------------------------------------------
// KAM engine.

inline constexpr double kGoldenRatio = 1.6180339887498949;

// Levels 0.5..3.5 at the golden-ratio frequency, k_max = 8, random V with
// eps_V = 0.01 at r = 2.
inline KamProblem golden_kam_problem(std::uint64_t seed = 2026) {
  FloquetMatrixSpace space(kGoldenRatio, 8, {{0.5, 1}, {1.5, 1}, {2.5, 1}, {3.5, 1}});
  BlockPerturbation v = random_perturbation(space, seed, 0.01, 2.0);
  return {std::move(space), std::move(v), KamOptions{}};
}

struct KamValues {
  int trivial_zero_steps = 0;
  int trivial_diag_steps = 0;
  bool trivial_converged = false;
  bool golden_converged = false;
  double golden_residual = 0.0;
  double golden_identity = 0.0;
  double golden_worst_ratio = 0.0;
  int golden_iterations = 0;
  double band_defect = 0.0;
  double unitarity = 0.0;
  bool resonant_abort = false;
  double resonant_gap = 0.0;
  double reconstruction = 0.0;
};

inline KamValues kam_values() {
  KamValues v;
  KamProblem g = golden_kam_problem();
  {
    const KamResult z = kam_iterate(g.space, BlockPerturbation{});
    BlockPerturbation diag;
    for (int m = 0; m < g.space.n_levels(); ++m) diag.blocks[{0, m, m}] = Matrix::Constant(1, 1, Complex(0.01 * (m + 1)));
    const KamResult d = kam_iterate(g.space, diag);
    v.trivial_converged = z.outcome == KamOutcome::kConverged && d.outcome == KamOutcome::kConverged;
    v.trivial_zero_steps = z.history.back().s;
    v.trivial_diag_steps = d.history.back().s;
  }
  const KamResult r = kam_iterate(g.space, g.v, g.options);
  v.golden_converged = r.outcome == KamOutcome::kConverged;
  v.golden_residual = r.history.back().offdiag_residual;
  v.golden_iterations = r.history.back().s;
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    const KamState& st = r.history[i];
    v.golden_identity = std::max(v.golden_identity, st.conjugation_residual);
    v.band_defect = std::max(v.band_defect, st.band_defect);
    v.unitarity = std::max({v.unitarity, st.w_unitarity, st.g_hermiticity, st.a_antihermiticity});
    if (i > 0)
      v.golden_worst_ratio =
          std::max(v.golden_worst_ratio, st.offdiag_residual / r.history[i - 1].offdiag_residual);
  }
  {
    const FloquetMatrixSpace res(g.space.levels()[1].h - g.space.levels()[0].h, 8, g.space.levels());
    const KamResult a = kam_iterate(res, random_perturbation(res, 2026, 0.01, 2.0));
    v.resonant_abort = a.outcome == KamOutcome::kSmallDenominator && a.small_denominator.has_value();
    v.resonant_gap = v.resonant_abort ? a.small_denominator->gap : std::numeric_limits<double>::infinity();
  }
  if (v.golden_converged) {
    const ModeFamily vf = to_family(g.v, g.space);
    const double period = kTwoPi / g.space.omega();
    const Index dim = g.space.level_dim();
    Matrix u = Matrix::Identity(dim, dim);
    double prev = 0.0;
    for (int i = 1; i <= 24; ++i) {
      const double t = 3.0 * period * i / 24;
      u = integrate_hamiltonian([&](double tau) { return level_hamiltonian(g.space, vf, tau); }, dim, t, prev, 100) *
          u;
      prev = t;
      v.reconstruction = std::max(v.reconstruction, op_norm(reconstruct_propagator(g.space, r, t, 0.0) - u));
    }
  } else {
    v.reconstruction = std::numeric_limits<double>::infinity();
  }
  return v;
}

inline SuiteReport kam_suite() {
  SuiteReport r{"kam", {}};
  const KamValues v = kam_values();
  r.checks.push_back(check_le("trivial_cases_steps", v.trivial_converged ? std::max(v.trivial_zero_steps, v.trivial_diag_steps) : 99, 1));
  r.checks.push_back(check_le("golden_offdiag_residual", v.golden_converged ? v.golden_residual : 1.0, 1e-10));
  r.checks.push_back(check_le("golden_conjugation_identity", v.golden_identity, 1e-8));
  r.checks.push_back(check_le("golden_iterations", v.golden_iterations, 8));
  r.checks.push_back(check_le("golden_residual_ratio", v.golden_worst_ratio, 0.5));
  r.checks.push_back(check_le("structure_residual", v.unitarity, 1e-9));
  r.checks.push_back(check_le("band_pattern_defect", v.band_defect, 0.0));
  r.checks.push_back(check_le("resonant_abort_gap", v.resonant_gap, 1e-8));
  r.checks.push_back(check_le("reconstruction_vs_oracle", v.reconstruction, 1e-5));
  return r;
}

inline Json suite_json(const SuiteReport& r) {
  Json j;
  j["suite"] = r.suite;
  j["passed"] = r.passed();
  Json checks = Json::array();
  for (const Check& c : r.checks) {
    Json cj;
    cj["name"] = c.name;
    cj["value"] = json_number(c.value);
    cj["threshold"] = json_number(c.threshold);
    cj["pass"] = c.pass;
    checks.push_back(cj);
  }
  j["checks"] = checks;
  return j;
}

}  // namespace floquet_lab
