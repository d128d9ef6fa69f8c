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

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "floquet_lab/commutators.hpp"
#include "floquet_lab/core_fock.hpp"
#include "floquet_lab/drive.hpp"
#include "floquet_lab/errors.hpp"
#include "floquet_lab/kam.hpp"

namespace floquet_lab {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Output formatting.  Floats use the shortest decimal that round-trips.

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return std::signbit(x) ? "-0" : "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline void dump_string(const std::string& s, std::string& out) {
  // Reuse the library's escaping for strings.
  out += Json(s).dump();
}

inline void dump_json(const Json& j, int indent, int depth, std::string& out) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        dump_string(it.key(), out);
        out += indent < 0 ? ":" : ": ";
        dump_json(it.value(), indent, depth + 1, out);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        dump_json(v, indent, depth + 1, out);
      }
      newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      out += std::isfinite(x) ? format_double(x) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

inline std::string dump_json(const Json& j, int indent = -1) {
  std::string out;
  detail::dump_json(j, indent, 0, out);
  return out;
}

inline Json json_number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kConfig, "cannot open '" + path + "' for writing");
  f << content;
  if (!f) throw Error(ErrorKind::kConfig, "write to '" + path + "' failed");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kConfig, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::kConfig, what + ": malformed JSON: " + e.what());
  }
}

inline Json load_json(const std::string& path) { return parse_json_text(read_text_file(path), path); }

// Row-major re/im arrays.
inline Json matrix_json(const Matrix& m) {
  Json re = Json::array();
  Json im = Json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      re.push_back(json_number(m(i, j).real()));
      im.push_back(json_number(m(i, j).imag()));
    }
  Json out;
  out["dim"] = m.rows();
  out["re"] = std::move(re);
  out["im"] = std::move(im);
  return out;
}

// CSV with a header row and fixed column order.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : ncols_(columns.size()) { row_strings(columns); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    s.reserve(values.size());
    for (double v : values) s.push_back(format_double(v));
    row_strings(s);
  }

  void row_strings(const std::vector<std::string>& cells) {
    if (cells.size() != ncols_) throw Error(ErrorKind::kInvalidInput, "CSV row has the wrong number of cells");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ += ',';
      out_ += cells[i];
    }
    out_ += '\n';
  }

  const std::string& str() const { return out_; }

 private:
  std::size_t ncols_;
  std::string out_;
};

// ---------------------------------------------------------------------------
// Config parsing.

namespace detail {

inline void require_object(const Json& j, const std::string& what) {
  if (!j.is_object()) throw Error(ErrorKind::kConfig, what + " must be a JSON object");
}

inline void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw Error(ErrorKind::kConfig, what + ": unknown key '" + it.key() + "'");
}

inline double get_double(const Json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) throw Error(ErrorKind::kConfig, what + ": missing '" + key + "'");
  const Json& v = j.at(key);
  if (!v.is_number()) throw Error(ErrorKind::kConfig, what + ": '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw Error(ErrorKind::kConfig, what + ": '" + key + "' must be finite");
  return x;
}

inline double get_double_or(const Json& j, const std::string& key, double fallback, const std::string& what) {
  return j.contains(key) ? get_double(j, key, what) : fallback;
}

inline long get_int(const Json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) throw Error(ErrorKind::kConfig, what + ": missing '" + key + "'");
  const Json& v = j.at(key);
  if (!v.is_number_integer()) throw Error(ErrorKind::kConfig, what + ": '" + key + "' must be an integer");
  return v.get<long>();
}

inline long get_int_or(const Json& j, const std::string& key, long fallback, const std::string& what) {
  return j.contains(key) ? get_int(j, key, what) : fallback;
}

inline std::vector<double> get_double_array(const Json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw Error(ErrorKind::kConfig, what + ": '" + key + "' must be an array");
  std::vector<double> out;
  for (const Json& v : j.at(key)) {
    if (!v.is_number()) throw Error(ErrorKind::kConfig, what + ": '" + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

// {"period": T, "fourier": [{"k", "re", "im"}], "samples": {"t", "f", "order"}}
inline DriveSpec parse_drive(const Json& j, double default_period) {
  detail::require_object(j, "drive");
  detail::reject_unknown(j, {"period", "fourier", "samples"}, "drive");
  const double period = detail::get_double_or(j, "period", default_period, "drive");
  if (j.contains("samples")) {
    if (j.contains("fourier")) throw Error(ErrorKind::kConfig, "drive: give either 'fourier' or 'samples'");
    const Json& s = j.at("samples");
    detail::require_object(s, "drive.samples");
    detail::reject_unknown(s, {"t", "f", "order"}, "drive.samples");
    SampledDrive sd;
    sd.t = detail::get_double_array(s, "t", "drive.samples");
    sd.f = detail::get_double_array(s, "f", "drive.samples");
    sd.order = static_cast<int>(detail::get_int_or(s, "order", 1, "drive.samples"));
    return DriveSpec::sampled(period, std::move(sd));
  }
  std::vector<FourierMode> modes;
  if (j.contains("fourier")) {
    if (!j.at("fourier").is_array()) throw Error(ErrorKind::kConfig, "drive.fourier must be an array");
    for (const Json& m : j.at("fourier")) {
      detail::require_object(m, "drive.fourier entry");
      detail::reject_unknown(m, {"k", "re", "im"}, "drive.fourier entry");
      modes.push_back({static_cast<int>(detail::get_int(m, "k", "drive.fourier entry")),
                       Complex(detail::get_double_or(m, "re", 0.0, "drive.fourier entry"),
                               detail::get_double_or(m, "im", 0.0, "drive.fourier entry"))});
    }
  }
  return DriveSpec::fourier(period, modes);
}

struct RunConfig {
  OscillatorParams params;
  DriveSpec drive;
  Truncation trunc;
  // +1 is the corrected convention; -1 reproduces the flipped sign.
  double psi_sign = 1.0;
  int steps_per_period = 256;
};

inline RunConfig parse_config(const Json& j) {
  detail::require_object(j, "config");
  detail::reject_unknown(j, {"system", "drive", "truncation", "tolerances", "kernels"}, "config");
  RunConfig c;
  if (!j.contains("system")) throw Error(ErrorKind::kConfig, "config: missing 'system'");
  const Json& sys = j.at("system");
  detail::require_object(sys, "system");
  detail::reject_unknown(sys, {"omega", "period"}, "system");
  c.params.omega = detail::get_double(sys, "omega", "system");
  c.params.period = detail::get_double(sys, "period", "system");
  c.params.validate();
  c.drive = j.contains("drive") ? parse_drive(j.at("drive"), c.params.period) : DriveSpec::zero(c.params.period);
  require_consistent(c.drive, c.params);
  if (j.contains("truncation")) {
    const Json& t = j.at("truncation");
    detail::require_object(t, "truncation");
    detail::reject_unknown(t, {"n_keep", "n_pad"}, "truncation");
    c.trunc.n_keep = detail::get_int_or(t, "n_keep", 48, "truncation");
    c.trunc.n_pad = detail::get_int_or(t, "n_pad", c.trunc.n_keep, "truncation");
  }
  try {
    c.trunc.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  if (j.contains("tolerances")) {
    const Json& t = j.at("tolerances");
    detail::require_object(t, "tolerances");
    detail::reject_unknown(t, {"steps_per_period"}, "tolerances");
    c.steps_per_period = static_cast<int>(detail::get_int_or(t, "steps_per_period", 256, "tolerances"));
    if (c.steps_per_period < 16) throw Error(ErrorKind::kConfig, "tolerances.steps_per_period must be >= 16");
  }
  if (j.contains("kernels")) {
    const Json& k = j.at("kernels");
    detail::require_object(k, "kernels");
    detail::reject_unknown(k, {"psi_sign"}, "kernels");
    c.psi_sign = detail::get_double(k, "psi_sign", "kernels");
    if (c.psi_sign != 1.0 && c.psi_sign != -1.0) throw Error(ErrorKind::kConfig, "kernels.psi_sign must be +1 or -1");
  }
  return c;
}

inline RunConfig load_config(const std::string& path) { return parse_config(load_json(path)); }

// "ground", "fock:n", "coherent:a" or "coherent:re,im".  Coherent states are
// expanded up to n_keep/4 and renormalized.
inline Vector parse_state(const std::string& spec, Index n_keep) {
  Vector v = Vector::Zero(n_keep);
  auto number = [&](const std::string& s) {
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(x))
      throw Error(ErrorKind::kConfig, "bad number '" + s + "' in state '" + spec + "'");
    return x;
  };
  if (spec == "ground") {
    v(0) = 1.0;
    return v;
  }
  if (spec.rfind("fock:", 0) == 0) {
    const double n = number(spec.substr(5));
    if (n < 0 || n != std::floor(n) || n >= static_cast<double>(n_keep))
      throw Error(ErrorKind::kConfig, "Fock index must be an integer in [0, n_keep)");
    v(static_cast<Index>(n)) = 1.0;
    return v;
  }
  if (spec.rfind("coherent:", 0) == 0) {
    const std::string rest = spec.substr(9);
    const auto comma = rest.find(',');
    const Complex alpha = comma == std::string::npos
                              ? Complex(number(rest), 0.0)
                              : Complex(number(rest.substr(0, comma)), number(rest.substr(comma + 1)));
    const Index cut = std::max<Index>(1, n_keep / 4);
    Complex c = 1.0;
    for (Index n = 0; n < cut; ++n) {
      v(n) = c;
      c *= alpha / std::sqrt(static_cast<double>(n + 1));
    }
    v /= v.norm();
    return v;
  }
  throw Error(ErrorKind::kConfig, "unknown state '" + spec + "' (ground | fock:n | coherent:a)");
}

// ---------------------------------------------------------------------------
// KAM problem files.

struct KamProblem {
  FloquetMatrixSpace space;
  BlockPerturbation v;
  KamOptions options;
};

// {"omega", "k_max", "levels": [{"h", "mult"}], "V_blocks": [{"k", "n", "m",
// "re": [[..]], "im": [[..]]}], "V_random": {"seed", "eps_V"}, "r", "nu",
// "schedule", "max_iters", "tol", "mode_cutoff", "min_denom_guard"}.
// A block whose partner (-k, m, n) is absent is completed by its adjoint.
inline KamProblem parse_kam_problem(const Json& j) {
  const std::string what = "kam problem";
  detail::require_object(j, what);
  detail::reject_unknown(j, {"omega", "k_max", "levels", "V_blocks", "V_random", "r", "nu", "schedule", "max_iters",
                             "tol", "mode_cutoff", "min_denom_guard"},
                         what);
  const double omega = detail::get_double(j, "omega", what);
  const long k_max = detail::get_int(j, "k_max", what);
  if (!j.contains("levels") || !j.at("levels").is_array() || j.at("levels").empty())
    throw Error(ErrorKind::kConfig, what + ": 'levels' must be a non-empty array");
  std::vector<Level> levels;
  for (const Json& l : j.at("levels")) {
    detail::require_object(l, "level");
    detail::reject_unknown(l, {"h", "mult"}, "level");
    levels.push_back({detail::get_double(l, "h", "level"), static_cast<int>(detail::get_int_or(l, "mult", 1, "level"))});
  }
  const int cutoff = static_cast<int>(detail::get_int_or(j, "mode_cutoff", -1, what));
  KamOptions opts;
  opts.r = detail::get_double_or(j, "r", 2.0, what);
  opts.nu = detail::get_double_or(j, "nu", 1.0, what);
  if (opts.r < 0.0 || opts.nu < 0.0) throw Error(ErrorKind::kConfig, what + ": r and nu must be non-negative");
  if (j.contains("schedule")) {
    if (!j.at("schedule").is_string()) throw Error(ErrorKind::kConfig, what + ": 'schedule' must be a string");
    opts.schedule = parse_schedule(j.at("schedule").get<std::string>());
  }
  opts.max_iters = static_cast<int>(detail::get_int_or(j, "max_iters", opts.max_iters, what));
  opts.tol = detail::get_double_or(j, "tol", opts.tol, what);
  opts.min_denom_guard = detail::get_double_or(j, "min_denom_guard", 0.0, what);
  if (opts.max_iters < 0 || !(opts.tol > 0.0)) throw Error(ErrorKind::kConfig, what + ": bad max_iters or tol");

  auto make_space = [&]() {
    try {
      return FloquetMatrixSpace(omega, static_cast<int>(k_max), levels, cutoff);
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfig, std::string(what) + ": " + e.what());
    }
  };
  KamProblem p{make_space(), {}, opts};

  if (j.contains("V_random")) {
    const Json& r = j.at("V_random");
    detail::require_object(r, "V_random");
    detail::reject_unknown(r, {"seed", "eps_V"}, "V_random");
    const long seed = detail::get_int(r, "seed", "V_random");
    if (seed < 0) throw Error(ErrorKind::kConfig, "V_random.seed must be non-negative");
    const double eps = detail::get_double(r, "eps_V", "V_random");
    if (eps < 0.0) throw Error(ErrorKind::kConfig, "V_random.eps_V must be non-negative");
    p.v = random_perturbation(p.space, static_cast<std::uint64_t>(seed), eps, opts.r);
  }
  if (j.contains("V_blocks")) {
    if (!j.at("V_blocks").is_array()) throw Error(ErrorKind::kConfig, "V_blocks must be an array");
    BlockPerturbation given;
    for (const Json& b : j.at("V_blocks")) {
      detail::require_object(b, "V block");
      detail::reject_unknown(b, {"k", "n", "m", "re", "im"}, "V block");
      const int k = static_cast<int>(detail::get_int(b, "k", "V block"));
      const int n = static_cast<int>(detail::get_int(b, "n", "V block"));
      const int m = static_cast<int>(detail::get_int(b, "m", "V block"));
      if (n < 0 || n >= p.space.n_levels() || m < 0 || m >= p.space.n_levels())
        throw Error(ErrorKind::kConfig, "V block level index out of range");
      auto rows = [&](const char* key) {
        std::vector<std::vector<double>> out;
        if (!b.contains(key)) return out;
        if (!b.at(key).is_array()) throw Error(ErrorKind::kConfig, std::string("V block '") + key + "' must be an array");
        for (const Json& row : b.at(key)) {
          if (!row.is_array()) throw Error(ErrorKind::kConfig, "V block rows must be arrays");
          std::vector<double> r;
          for (const Json& x : row) {
            if (!x.is_number()) throw Error(ErrorKind::kConfig, "V block entries must be numbers");
            r.push_back(x.get<double>());
          }
          out.push_back(std::move(r));
        }
        return out;
      };
      const auto re = rows("re");
      const auto im = rows("im");
      const Index nr = p.space.level_mult(n), nc = p.space.level_mult(m);
      Matrix blk = Matrix::Zero(nr, nc);
      for (const auto* part : {&re, &im}) {
        if (part->empty()) continue;
        if (static_cast<Index>(part->size()) != nr) throw Error(ErrorKind::kConfig, "V block has the wrong shape");
        for (Index i = 0; i < nr; ++i) {
          if (static_cast<Index>((*part)[static_cast<std::size_t>(i)].size()) != nc)
            throw Error(ErrorKind::kConfig, "V block has the wrong shape");
          for (Index c = 0; c < nc; ++c)
            blk(i, c) += part == &re ? Complex((*part)[i][c], 0.0) : Complex(0.0, (*part)[i][c]);
        }
      }
      if (!given.blocks.emplace(BlockKey{k, n, m}, blk).second)
        throw Error(ErrorKind::kConfig, "duplicate V block");
    }
    auto accumulate = [&p](const BlockKey& key, const Matrix& m) {
      auto it = p.v.blocks.find(key);
      if (it == p.v.blocks.end()) {
        p.v.blocks.emplace(key, m);
      } else {
        it->second += m;
      }
    };
    for (const auto& [key, blk] : given.blocks) {
      const auto [k, n, m] = key;
      accumulate(key, blk);
      if (!given.blocks.count({-k, m, n})) accumulate({-k, m, n}, blk.adjoint());
    }
  }
  try {
    validate_blocks(p.v, p.space);
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  return p;
}

inline KamProblem load_kam_problem(const std::string& path) { return parse_kam_problem(load_json(path)); }

inline Json kam_state_json(const KamState& st) {
  Json j;
  j["s"] = st.s;
  j["offdiag_residual"] = json_number(st.offdiag_residual);
  j["min_denominator"] = json_number(st.min_denominator);
  j["eps_V"] = json_number(st.eps_V);
  j["conjugation_residual"] = json_number(st.conjugation_residual);
  j["g_hermiticity"] = json_number(st.g_hermiticity);
  j["a_antihermiticity"] = json_number(st.a_antihermiticity);
  j["w_unitarity"] = json_number(st.w_unitarity);
  j["a_norm"] = json_number(st.a_norm);
  j["w_weighted_norm"] = json_number(st.w_weighted_norm);
  j["band_defect"] = json_number(st.band_defect);
  return j;
}

inline Json kam_result_json(const KamProblem& p, const KamResult& r) {
  Json j;
  j["outcome"] = to_string(r.outcome);
  j["iterations"] = r.history.empty() ? 0 : r.history.back().s;
  j["final_residual"] = r.history.empty() ? Json(nullptr) : json_number(r.history.back().offdiag_residual);
  j["final_identity_residual"] = json_number(r.final_identity_residual);
  j["eps_V"] = json_number(r.eps_V);
  j["truncation_leak"] = json_number(r.truncation_leak);
  j["schedule"] = to_string(p.options.schedule);
  j["tol"] = p.options.tol;
  j["total_dim"] = p.space.total_dim();
  j["mode_cutoff"] = p.space.mode_cutoff();
  if (r.small_denominator) {
    const SmallDenominatorInfo& s = *r.small_denominator;
    Json sd;
    sd["q"] = s.q;
    sd["a"] = s.a;
    sd["b"] = s.b;
    sd["level_a"] = s.level_a;
    sd["level_b"] = s.level_b;
    sd["gap"] = json_number(s.gap);
    sd["dressed"] = s.dressed;
    j["small_denominator"] = sd;
  } else {
    j["small_denominator"] = nullptr;
  }
  if (r.outcome == KamOutcome::kConverged) {
    Matrix h = r.G;
    h.diagonal() += p.space.energies().cast<Complex>();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()), Eigen::EigenvaluesOnly);
    Json q = Json::array();
    for (Index i = 0; i < es.eigenvalues().size(); ++i) q.push_back(json_number(es.eigenvalues()(i)));
    j["quasi_energies"] = q;
    j["G"] = matrix_json(r.G);
    j["W_weighted_norm"] = json_number(weighted_norm(r.W, p.space, p.options.nu));
  }
  return j;
}

// F_{p,k} as {"p", "k", "terms": [{"word": [...], "coeff": c}]}.
inline Json f_polynomial_json(const FPolynomial& f) {
  Json j;
  j["p"] = f.p;
  j["k"] = f.k;
  Json terms = Json::array();
  for (const auto& [w, c] : f.terms) {
    Json t;
    t["word"] = w;
    t["coeff"] = c;
    terms.push_back(t);
  }
  j["terms"] = terms;
  return j;
}

}  // namespace floquet_lab
