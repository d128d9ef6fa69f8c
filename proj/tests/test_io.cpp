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

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "floquet_lab/io.hpp"

using namespace floquet_lab;
namespace fs = std::filesystem;

namespace {

const std::string kCli = FLOQUET_LAB_CLI;
const std::string kConfigs = FLOQUET_LAB_CONFIGS;

std::string config(const std::string& name) { return kConfigs + "/" + name; }

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("floquet_lab_io_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const TempDir& dir, const std::string& args) {
  const std::string out = dir.file("stdout"), err = dir.file("stderr");
  const std::string cmd = "'" + kCli + "' " + args + " > '" + out + "' 2> '" + err + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(out);
  r.err = read_text_file(err);
  return r;
}

Json error_object(const RunResult& r) { return parse_json_text(r.err, "stderr"); }

}  // namespace

TEST_CASE("format_double", "[io]") {
  REQUIRE(format_double(0.1) == "0.1");
  REQUIRE(format_double(1.0) == "1");
  REQUIRE(format_double(-0.0) == "-0");
  REQUIRE(format_double(1e-300) == "1e-300");
  REQUIRE(format_double(std::nan("")) == "nan");
  REQUIRE(format_double(-HUGE_VAL) == "-inf");
  for (double x : {0.1 + 0.2, 1.0 / 3.0, 6.02214076e23, -2.5e-17}) REQUIRE(std::stod(format_double(x)) == x);
}

TEST_CASE("dump_json", "[io]") {
  Json j;
  j["b"] = 0.1;
  j["a"] = json_number(std::nan(""));
  j["c"] = Json::array({1, 2.5, "x"});
  REQUIRE(dump_json(j) == R"({"b":0.1,"a":null,"c":[1,2.5,"x"]})");
  REQUIRE(parse_json_text(dump_json(j, 2), "round trip") == j);
}

TEST_CASE("CsvWriter", "[io]") {
  CsvWriter w({"t", "y"});
  w.row({0.0, 0.25});
  w.row_strings({"1", "growing"});
  REQUIRE(w.str() == "t,y\n0,0.25\n1,growing\n");
  REQUIRE_THROWS_AS(w.row({1.0}), Error);
}

TEST_CASE("parse_config", "[io]") {
  SECTION("shipped non-resonant config") {
    const RunConfig c = load_config(config("nonresonant_sin.json"));
    REQUIRE(c.params.omega == 1.0);
    REQUIRE(c.params.period == Catch::Approx(kTwoPi * std::sqrt(2.0)).epsilon(1e-15));
    REQUIRE(c.trunc.n_keep == 48);
    REQUIRE(c.trunc.n_pad == 48);
    REQUIRE(c.psi_sign == 1.0);
    REQUIRE(std::abs(c.drive(c.params.period / 4) - 1.0) <= 1e-14);
  }
  SECTION("corrupted sign") { REQUIRE(load_config(config("corrupted_psi_sign.json")).psi_sign == -1.0); }
  SECTION("errors are config errors") {
    auto kind = [](const std::string& text) {
      try {
        parse_config(parse_json_text(text, "inline"));
      } catch (const Error& e) {
        return e.kind();
      }
      return ErrorKind::kNumeric;
    };
    REQUIRE(kind("{bad") == ErrorKind::kConfig);
    REQUIRE(kind(R"({"system": {"omega": 1}, "extra": 1})") == ErrorKind::kConfig);
    REQUIRE(kind(R"({"system": {"omega": -1, "period": 1}})") == ErrorKind::kConfig);
    REQUIRE(kind(R"({"system": {"omega": 1, "period": 1}, "kernels": {"psi_sign": 0.5}})") ==
            ErrorKind::kConfig);
  }
}

TEST_CASE("parse_state", "[io]") {
  REQUIRE(parse_state("ground", 8)(0) == Complex(1.0));
  REQUIRE(parse_state("fock:3", 8)(3) == Complex(1.0));
  const Vector c = parse_state("coherent:0.5,0.5", 16);
  REQUIRE(std::abs(c.norm() - 1.0) <= 1e-14);
  REQUIRE(std::abs(c(1) / c(0) - Complex(0.5, 0.5)) <= 1e-14);
  REQUIRE_THROWS_AS(parse_state("fock:8", 8), Error);
  REQUIRE_THROWS_AS(parse_state("squeezed", 8), Error);
}

TEST_CASE("parse_kam_problem", "[io]") {
  SECTION("missing partner block is completed") {
    const KamProblem p = parse_kam_problem(parse_json_text(
        R"({"omega": 1.618, "k_max": 1, "levels": [{"h": 0.5}, {"h": 1.5}],
            "V_blocks": [{"k": 1, "n": 0, "m": 1, "re": [[0.01]], "im": [[0.02]]}]})",
        "inline"));
    REQUIRE(p.v.blocks.count({-1, 1, 0}) == 1);
    REQUIRE(p.v.blocks.at({-1, 1, 0})(0, 0) == Complex(0.01, -0.02));
    REQUIRE(hermiticity_residual(p.v) == 0.0);
  }
  SECTION("golden problem file") {
    const KamProblem p = load_kam_problem(config("kam_golden.json"));
    REQUIRE(p.space.n_levels() == 4);
    REQUIRE(p.space.k_max() == 8);
    REQUIRE(std::abs(eps_v_norm(p.v, p.space, 2.0) - 0.01) <= 1e-15);
  }
  SECTION("bad schedule") {
    REQUIRE_THROWS_AS(parse_kam_problem(parse_json_text(
                          R"({"omega": 1, "k_max": 1, "levels": [{"h": 0.5}], "schedule": "fast"})", "inline")),
                      Error);
  }
}

TEST_CASE("cli exit codes", "[io][cli]") {
  const TempDir dir;
  SECTION("malformed config") {
    write_text_file(dir.file("bad.json"), "{bad");
    const RunResult r = run_cli(dir, "stability '" + dir.file("bad.json") + "' --periods 2 --samples 4");
    REQUIRE(r.code == 2);
    REQUIRE(error_object(r).at("error") == "config");
  }
  SECTION("zero periods") {
    const RunResult r = run_cli(dir, "stability '" + config("nonresonant_sin.json") + "' --periods 0 --samples 4");
    REQUIRE(r.code == 2);
    REQUIRE(error_object(r).contains("message"));
  }
  SECTION("unknown suite") { REQUIRE(run_cli(dir, "verify --suite everything").code == 2); }
  SECTION("resonant time for the single exponential") {
    const RunResult r =
        run_cli(dir, "propagate '" + config("resonant_sin.json") + "' --t 6.283185307179586 --form single-exp");
    REQUIRE(r.code == 3);
    REQUIRE(error_object(r).at("error") == "resonant_time");
  }
  SECTION("kam outcomes") {
    REQUIRE(run_cli(dir, "kam '" + config("kam_golden.json") + "'").code == 0);
    const RunResult r = run_cli(dir, "kam '" + config("kam_resonant.json") + "'");
    REQUIRE(r.code == 5);
    const Json result = parse_json_text(r.out, "stdout");
    REQUIRE(result.at("outcome") == "small_denominator_abort");
    REQUIRE(result.at("small_denominator").at("gap").get<double>() <= 1e-8);
  }
  SECTION("corrupted psi sign fails the appendix suite") {
    const RunResult bad = run_cli(dir, "verify --suite appendix --config '" + config("corrupted_psi_sign.json") + "'");
    REQUIRE(bad.code == 1);
    REQUIRE(bad.out.find("FAIL appendix/factored_vs_oracle") != std::string::npos);
  }
}

TEST_CASE("cli outputs", "[io][cli]") {
  const TempDir dir;
  SECTION("propagate") {
    const RunResult r = run_cli(dir, "propagate '" + config("nonresonant_sin.json") + "' --t 3.7 --s 0.4");
    REQUIRE(r.code == 0);
    const Json j = parse_json_text(r.out, "stdout");
    REQUIRE(j.at("dim") == 48);
    REQUIRE(j.at("re").size() == 48 * 48);
    REQUIRE(j.at("metadata").at("cross_form").at("factored_vs_oracle").get<double>() <= 1e-6);
    REQUIRE(j.at("metadata").at("cross_form").at("factored_vs_single_exp").get<double>() <= 1e-7);
  }
  SECTION("stability csv and sidecar") {
    const std::string csv = dir.file("s.csv");
    const RunResult r =
        run_cli(dir, "stability '" + config("nonresonant_sin.json") + "' --periods 3 --samples 2 --out-csv '" + csv + "'");
    REQUIRE(r.code == 0);
    const std::string text = read_text_file(csv);
    REQUIRE(text.rfind("t,energy_norm,mean_energy,high_mode_population\n", 0) == 0);
    REQUIRE(std::count(text.begin(), text.end(), '\n') == 1 + 3 * 2 + 1);
    const Json side = load_json(csv + ".json");
    REQUIRE(side.at("verdict") == "bounded");
    REQUIRE(side.at("classification") == "NonResonant");
  }
  SECTION("resonance-scan rows keep omega order") {
    const std::string csv = dir.file("r.csv");
    setenv("FLOQUET_LAB_THREADS", "2", 1);
    const RunResult r = run_cli(dir, "resonance-scan '" + config("zero_drive.json") +
                                         "' --omega-range 0.5:1.5 --steps 3 --periods 2 --samples 2 --out-csv '" +
                                         csv + "'");
    unsetenv("FLOQUET_LAB_THREADS");
    REQUIRE(r.code == 0);
    std::istringstream in(read_text_file(csv));
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "omega,classification,growth_exponent,sup_energy,verdict");
    const std::vector<std::string> classes = {"NonResonant", "ResonantIdentityMultiple", "NonResonant"};
    for (int i = 0; i < 3; ++i) {
      REQUIRE(std::getline(in, line));
      std::vector<std::string> cells;
      std::istringstream row(line);
      for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
      REQUIRE(cells.size() == 5);
      const double omega = 0.5 + 0.5 * i;
      REQUIRE(std::stod(cells[0]) == omega);
      REQUIRE(cells[1] == classes[static_cast<std::size_t>(i)]);
      REQUIRE(cells[2] == "0");
      // ground-state energy omega / 2
      REQUIRE(std::abs(std::stod(cells[3]) - 0.5 * omega) <= 1e-12);
      REQUIRE(cells[4] == "bounded");
    }
    REQUIRE_FALSE(std::getline(in, line));
  }
  SECTION("repeat runs are byte-identical") {
    const std::string args = "kam '" + config("kam_golden.json") + "' --out-history '" + dir.file("h.jsonl") + "'";
    const RunResult a = run_cli(dir, args);
    const std::string ha = read_text_file(dir.file("h.jsonl"));
    const RunResult b = run_cli(dir, args);
    REQUIRE(a.out == b.out);
    REQUIRE(ha == read_text_file(dir.file("h.jsonl")));
  }
}
