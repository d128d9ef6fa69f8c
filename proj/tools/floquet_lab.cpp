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

// floquet_lab command-line front end.
//
// Exit codes: 0 ok, 1 verification failed, 2 config/argument error,
// 3 resonant time, 4 numeric failure, 5 small-denominator abort,
// 6 iteration limit.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "floquet_lab/floquet.hpp"
#include "floquet_lab/io.hpp"
#include "floquet_lab/kam.hpp"
#include "floquet_lab/oracle.hpp"
#include "floquet_lab/propagator.hpp"
#include "floquet_lab/verify.hpp"

using namespace floquet_lab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitResonantTime = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitSmallDenominator = 5;
constexpr int kExitIterationLimit = 6;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kResonantTime: return kExitResonantTime;
    case ErrorKind::kNumeric:
    case ErrorKind::kIntegration: return kExitNumeric;
    case ErrorKind::kSmallDenominator: return kExitSmallDenominator;
    default: return kExitConfig;
  }
}

void report_error(const std::string& kind, const std::string& message) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << dump_json(j) << '\n';
}

void emit(const std::optional<std::string>& path, const std::string& content) {
  if (path) {
    write_text_file(*path, content);
  } else {
    std::cout << content;
  }
}

unsigned thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FLOQUET_LAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

// Runs f(i) for i in [0, n) on a worker pool; results stay in index order.
// The first failure by index is rethrown.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::min<unsigned>(thread_count(), static_cast<unsigned>(std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------

struct PropagateArgs {
  std::string config;
  double t = 0.0;
  double s = 0.0;
  std::string form = "factored";
  std::optional<std::string> out;
};

Json kernels_json(const RunConfig& cfg, double t, double s) {
  Json k;
  const FactoredScalars f = factored_scalars(cfg.drive, cfg.params, t, s);
  k["phi1"] = json_number(f.phi1);
  k["phi2"] = json_number(f.phi2);
  k["psi"] = json_number(cfg.psi_sign * f.psi);
  if (!is_resonant_length(cfg.params.omega, t - s)) {
    const SingleExpScalars sc = mu_nu_sigma(cfg.drive, cfg.params, t, s, cfg.psi_sign);
    k["mu"] = json_number(sc.mu);
    k["nu"] = json_number(sc.nu);
    k["sigma"] = json_number(sc.sigma);
    k["N"] = sc.n;
    k["Delta"] = json_number(sc.delta);
  }
  return k;
}

int cmd_propagate(const PropagateArgs& a) {
  const RunConfig cfg = load_config(a.config);
  const Truncation& tr = cfg.trunc;
  std::optional<Matrix> fac, single, oracle;
  auto get_fac = [&]() -> const Matrix& {
    if (!fac) fac = propagator_factored(cfg.drive, cfg.params, tr, a.t, a.s, cfg.psi_sign);
    return *fac;
  };
  auto get_single = [&]() -> const Matrix& {
    if (!single) single = propagator_single_exp(cfg.drive, cfg.params, tr, a.t, a.s, cfg.psi_sign);
    return *single;
  };
  auto get_oracle = [&]() -> const Matrix& {
    if (!oracle) oracle = integrate(cfg.drive, cfg.params, tr, a.t, a.s, cfg.steps_per_period);
    return *oracle;
  };
  const Matrix& u = a.form == "factored" ? get_fac() : a.form == "single-exp" ? get_single() : get_oracle();

  const Index half = tr.n_keep / 2;
  Json cross;
  cross["block"] = half;
  const bool single_ok = !is_resonant_length(cfg.params.omega, a.t - a.s);
  cross["factored_vs_oracle"] = json_number(block_diff(get_fac(), get_oracle(), half));
  if (single_ok) {
    cross["single_exp_vs_oracle"] = json_number(block_diff(get_single(), get_oracle(), half));
    cross["factored_vs_single_exp"] = json_number(block_diff(get_fac(), get_single(), half));
  } else {
    cross["single_exp_vs_oracle"] = nullptr;
    cross["factored_vs_single_exp"] = nullptr;
  }

  Json meta;
  meta["form"] = a.form;
  meta["t"] = a.t;
  meta["s"] = a.s;
  meta["omega"] = cfg.params.omega;
  meta["period"] = cfg.params.period;
  meta["n_keep"] = tr.n_keep;
  meta["n_pad"] = tr.n_pad;
  meta["psi_sign"] = cfg.psi_sign;
  meta["oracle_steps_per_period"] = cfg.steps_per_period;
  meta["kernels"] = kernels_json(cfg, a.t, a.s);
  meta["unitarity_defect"] = json_number(block_diff(u.adjoint() * u, Matrix::Identity(tr.n_keep, tr.n_keep), half));
  meta["cross_form"] = cross;

  Json out;
  out["metadata"] = meta;
  const Json m = matrix_json(u);
  out["dim"] = m["dim"];
  out["re"] = m["re"];
  out["im"] = m["im"];
  emit(a.out, dump_json(out) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct StabilityArgs {
  std::string config;
  int periods = 0;
  int samples = 0;
  std::string state = "ground";
  std::optional<std::string> out_csv;
  std::optional<std::string> out_json;
  std::optional<int> steps_per_period;
};

Json stability_json(const StabilityReport& r) {
  Json j;
  j["verdict"] = r.verdict();
  j["classification"] = to_string(r.classification);
  j["growth_exponent"] = json_number(r.growth_exponent);
  j["sup_energy"] = json_number(r.sup_bound);
  j["c_psi"] = r.c_psi ? json_number(*r.c_psi) : Json(nullptr);
  j["sf_resolvent_norm"] = r.sf_resolvent_norm ? json_number(*r.sf_resolvent_norm) : Json(nullptr);
  j["bound_holds"] = r.bound_holds;
  j["leak_warning"] = r.leak_warning;
  j["support_warning"] = r.support_warning;
  return j;
}

int cmd_stability(const StabilityArgs& a) {
  const RunConfig cfg = load_config(a.config);
  if (a.periods < 1) throw Error(ErrorKind::kConfig, "--periods must be positive");
  if (a.samples < 1) throw Error(ErrorKind::kConfig, "--samples must be positive");
  const Vector psi0 = parse_state(a.state, cfg.trunc.n_keep);
  const int spp = a.steps_per_period.value_or(cfg.steps_per_period);
  const StabilityReport r = stability_scan(cfg.drive, cfg.params, cfg.trunc, psi0, a.periods, a.samples, spp);
  CsvWriter csv({"t", "energy_norm", "mean_energy", "high_mode_population"});
  for (std::size_t i = 0; i < r.t_grid.size(); ++i)
    csv.row({r.t_grid[i], r.energy_norms[i], r.mean_energy[i], r.high_mode_population[i]});
  emit(a.out_csv, csv.str());
  Json side = stability_json(r);
  side["state"] = a.state;
  side["periods"] = a.periods;
  side["samples_per_period"] = a.samples;
  side["steps_per_period"] = spp;
  std::optional<std::string> side_path = a.out_json;
  if (!side_path && a.out_csv) side_path = *a.out_csv + ".json";
  if (side_path) {
    write_text_file(*side_path, dump_json(side, 2) + "\n");
  } else {
    std::cerr << dump_json(side) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ScanArgs {
  std::string config;
  std::string omega_range;
  int steps = 0;
  int periods = 20;
  int samples = 8;
  std::string state = "ground";
  std::optional<std::string> out_csv;
  std::optional<int> steps_per_period;
};

std::pair<double, double> parse_range(const std::string& s) {
  const auto sep = s.find_first_of(":,");
  if (sep == std::string::npos) throw Error(ErrorKind::kConfig, "--omega-range must be LO:HI");
  double lo = 0.0, hi = 0.0;
  try {
    std::size_t p1 = 0, p2 = 0;
    const std::string a = s.substr(0, sep), b = s.substr(sep + 1);
    lo = std::stod(a, &p1);
    hi = std::stod(b, &p2);
    if (p1 != a.size() || p2 != b.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig, "--omega-range must be LO:HI with numbers");
  }
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi))
    throw Error(ErrorKind::kConfig, "--omega-range needs 0 < LO < HI");
  return {lo, hi};
}

int cmd_resonance_scan(const ScanArgs& a) {
  const RunConfig cfg = load_config(a.config);
  const auto [lo, hi] = parse_range(a.omega_range);
  if (a.steps < 2) throw Error(ErrorKind::kConfig, "--steps must be at least 2");
  if (a.periods < 1 || a.samples < 1) throw Error(ErrorKind::kConfig, "--periods and --samples must be positive");
  const Vector psi0 = parse_state(a.state, cfg.trunc.n_keep);
  const int spp = a.steps_per_period.value_or(cfg.steps_per_period);
  std::vector<double> omegas(static_cast<std::size_t>(a.steps));
  for (int i = 0; i < a.steps; ++i) omegas[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (a.steps - 1);
  std::vector<StabilityReport> rows(omegas.size());
  parallel_for(omegas.size(), [&](std::size_t i) {
    const OscillatorParams p{omegas[i], cfg.params.period};
    rows[i] = stability_scan(cfg.drive, p, cfg.trunc, psi0, a.periods, a.samples, spp);
  });
  CsvWriter csv({"omega", "classification", "growth_exponent", "sup_energy", "verdict"});
  for (std::size_t i = 0; i < rows.size(); ++i)
    csv.row_strings({format_double(omegas[i]), to_string(rows[i].classification),
                     format_double(rows[i].growth_exponent), format_double(rows[i].sup_bound), rows[i].verdict()});
  emit(a.out_csv, csv.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct KamArgs {
  std::string problem;
  std::optional<std::string> out_history;
  std::optional<std::string> out_result;
};

int cmd_kam(const KamArgs& a) {
  const KamProblem p = load_kam_problem(a.problem);
  KamResult r;
  try {
    r = kam_iterate(p.space, p.v, p.options);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kInvalidInput) throw Error(ErrorKind::kConfig, e.what());
    throw;
  }
  std::string history;
  for (const KamState& st : r.history) history += dump_json(kam_state_json(st)) + "\n";
  if (a.out_history) write_text_file(*a.out_history, history);
  emit(a.out_result, dump_json(kam_result_json(p, r), 2) + "\n");
  switch (r.outcome) {
    case KamOutcome::kConverged: return kExitOk;
    case KamOutcome::kSmallDenominator:
      report_error("small_denominator", "KAM iteration aborted on a small denominator");
      return kExitSmallDenominator;
    case KamOutcome::kIterationLimit:
      report_error("iteration_limit", "KAM iteration did not converge within max_iters");
      return kExitIterationLimit;
  }
  return kExitNumeric;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string suite = "all";
  std::optional<std::string> config;
  std::optional<std::string> out;
};

int cmd_verify(const VerifyArgs& a) {
  const RunConfig cfg = a.config ? load_config(*a.config) : default_run_config();
  std::vector<SuiteReport> reports;
  const bool all = a.suite == "all";
  if (all || a.suite == "appendix") reports.push_back(appendix_suite(cfg));
  if (all || a.suite == "floquet") reports.push_back(floquet_suite(cfg));
  if (all || a.suite == "commutators") reports.push_back(commutators_suite());
  if (all || a.suite == "kam") reports.push_back(kam_suite());
  bool ok = true;
  Json j = Json::array();
  for (const SuiteReport& r : reports) {
    for (const Check& c : r.checks)
      std::cout << (c.pass ? "PASS " : "FAIL ") << r.suite << '/' << c.name << " value=" << format_double(c.value)
                << " threshold=" << format_double(c.threshold) << '\n';
    std::cout << (r.passed() ? "PASS " : "FAIL ") << "suite " << r.suite << '\n';
    ok = ok && r.passed();
    j.push_back(suite_json(r));
  }
  if (a.out) write_text_file(*a.out, dump_json(j, 2) + "\n");
  return ok ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floquet analysis of the driven harmonic oscillator and a quantum KAM engine"};
  app.require_subcommand(1);

  PropagateArgs pa;
  auto* prop = app.add_subcommand("propagate", "propagator U(t, s) on the kept block");
  prop->add_option("config", pa.config, "config JSON")->required();
  prop->add_option("--t", pa.t, "final time")->required();
  prop->add_option("--s", pa.s, "initial time");
  prop->add_option("--form", pa.form, "factored | single-exp | oracle")
      ->check(CLI::IsMember({"factored", "single-exp", "oracle"}));
  prop->add_option("--out", pa.out, "output JSON (default stdout)");

  StabilityArgs sa;
  auto* stab = app.add_subcommand("stability", "energy history and bounded/growing verdict");
  stab->add_option("config", sa.config, "config JSON")->required();
  stab->add_option("--periods", sa.periods, "number of drive periods")->required();
  stab->add_option("--samples", sa.samples, "samples per period")->required();
  stab->add_option("--state", sa.state, "ground | fock:n | coherent:a");
  stab->add_option("--out-csv", sa.out_csv, "CSV output (default stdout)");
  stab->add_option("--out-json", sa.out_json, "verdict sidecar (default <out-csv>.json)");
  stab->add_option("--steps-per-period", sa.steps_per_period, "oracle steps per period");

  ScanArgs ra;
  auto* scan = app.add_subcommand("resonance-scan", "classification and verdict over an omega grid");
  scan->add_option("config", ra.config, "config JSON")->required();
  scan->add_option("--omega-range", ra.omega_range, "LO:HI")->required();
  scan->add_option("--steps", ra.steps, "grid points (>= 2)")->required();
  scan->add_option("--periods", ra.periods, "periods per grid point");
  scan->add_option("--samples", ra.samples, "samples per period");
  scan->add_option("--state", ra.state, "initial state");
  scan->add_option("--out-csv", ra.out_csv, "CSV output (default stdout)");
  scan->add_option("--steps-per-period", ra.steps_per_period, "oracle steps per period");

  KamArgs ka;
  auto* kam = app.add_subcommand("kam", "iterative diagonalization of K_0 + V");
  kam->add_option("problem", ka.problem, "problem JSON")->required();
  kam->add_option("--out-history", ka.out_history, "history JSON lines");
  kam->add_option("--out-result", ka.out_result, "result JSON (default stdout)");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "run invariant suites");
  ver->add_option("--suite", va.suite, "appendix | floquet | commutators | kam | all")
      ->check(CLI::IsMember({"appendix", "floquet", "commutators", "kam", "all"}));
  ver->add_option("--config", va.config, "config JSON for the appendix and floquet suites");
  ver->add_option("--out", va.out, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("config", e.what());
    return kExitConfig;
  }

  try {
    if (*prop) return cmd_propagate(pa);
    if (*stab) return cmd_stability(sa);
    if (*scan) return cmd_resonance_scan(ra);
    if (*kam) return cmd_kam(ka);
    if (*ver) return cmd_verify(va);
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error("numeric", e.what());
    return kExitNumeric;
  }
  return kExitConfig;
}
