#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pie/cli.hpp"
#include "pie/sdp.hpp"

using json = nlohmann::ordered_json;

namespace {

std::string spec(const char* name) { return std::string(PIE_SPEC_DIR) + "/" + name + ".pde"; }

struct Run {
  int code;
  std::string out, err;
  json report;
};

// Runs pietool with --json and parses the report.
Run run(std::vector<std::string> args) {
  args.push_back("--json");
  std::ostringstream out, err;
  Run r;
  r.code = pie::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  r.report = json::parse(r.out);
  return r;
}

// The machine form without run-dependent fields.
json stable(json j) {
  j.erase("timings");
  if (j.contains("spec")) j["spec"].erase("path");
  return j;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("check: heat is admissible and consistent") {
  auto r = run({"check", spec("heat")});
  CHECK(r.code == 0);
  CHECK(stable(r.report) == json::parse(R"J({
    "command": "check",
    "spec": {"name": "heat", "digest": "64c5185b231d7b12", "dim": 2, "n": 1, "order": [2, 2], "params": {"r": "0"}},
    "check": {"mode": "rational", "admissible": [true, true], "consistent": true},
    "exit_code": 0})J"));
}

TEST_CASE("check: example1 is inconsistent with the block witness") {
  auto r = run({"check", spec("example1")});
  CHECK(r.code == 1);
  CHECK(stable(r.report) == json::parse(R"J({
    "command": "check",
    "spec": {"name": "example1", "digest": "c84c5a7e0d1ac3f6", "dim": 2, "n": 2, "order": [1, 1], "params": {}},
    "check": {"mode": "rational", "admissible": [true, true], "consistent": false,
              "witness": {"axes": [1, 2], "block_i": [1, 1], "block_j": [1, 1],
                          "K_i_block": [["0", "0"], ["1", "0"]], "K_j_block": [["0", "1"], ["0", "0"]]}},
    "exit_code": 1})J"));
}

TEST_CASE("check: float mode agrees on the bundled specs") {
  for (const char* name : {"heat", "wave", "plate", "ode"}) {
    auto r = run({"check", spec(name), "--mode", "float"});
    CHECK(r.code == 0);
    CHECK(r.report["check"]["consistent"] == true);
  }
}

TEST_CASE("check: empty terms with order 0 are trivially admissible") {
  const auto path = temp_path("pietool_trivial.pde");
  std::ofstream(path) << "name trivial\ndim 1\ndomain 0 1\nn 1\norder 0\n";
  auto r = run({"check", path});
  CHECK(r.code == 0);
  CHECK(r.report["check"]["admissible"] == json::parse("[true]"));
  std::filesystem::remove(path);
}

TEST_CASE("check: an inadmissible axis names the axis") {
  // u(0) = u(1) = 0 written twice at a: H_a + H_b Q is singular.
  const auto path = temp_path("pietool_inadmissible.pde");
  std::ofstream(path) << "name bad\ndim 1\ndomain 0 1\nn 1\norder 2\nterm 2 : [1]\n"
                         "bc 1 0 0 a : [1]\nbc 1 1 0 a : [2]\n";
  auto r = run({"convert", path});
  CHECK(r.code == 1);
  CHECK(r.report["check"]["admissible"] == json::parse("[false]"));
  CHECK(r.report["failure"]["stage"] == "check");
  CHECK(r.report["failure"]["cause"] == "inadmissible boundary conditions on axis 1");
  std::filesystem::remove(path);
}

TEST_CASE("parse errors carry line and column and exit 2") {
  const auto path = temp_path("pietool_bad.pde");
  std::ofstream(path) << "name bad\ndim 1\ndomain 0 1\nn 1\norder 2\nterm 2 : [1\n";
  auto r = run({"check", path});
  CHECK(r.code == 2);
  CHECK(r.report["failure"]["stage"] == "parse");
  CHECK(r.report["failure"]["cause"].get<std::string>().find("line 6, column 11") != std::string::npos);
  std::filesystem::remove(path);

  auto missing = run({"check", "/nonexistent/spec.pde"});
  CHECK(missing.code == 2);
  auto badparam = run({"check", spec("heat"), "--param", "r"});
  CHECK(badparam.code == 2);
}

TEST_CASE("usage errors exit 2") {
  std::ostringstream out, err;
  CHECK(pie::cli::run({}, out, err) == 2);
  CHECK(pie::cli::run({"stability", spec("ode")}, out, err) == 2);  // --k is required
  CHECK(pie::cli::run({"check", spec("ode"), "--mode", "decimal"}, out, err) == 2);
}

TEST_CASE("convert: ODE gives T = I") {
  auto r = run({"convert", spec("ode")});
  CHECK(r.code == 0);
  CHECK(r.report["pie"] == json::parse(R"J({
    "T": {"rows": 1, "cols": 1, "cells": [{"cell": "(M)", "degree": 0, "value": "[1]"}]},
    "A": {"rows": 1, "cols": 1, "cells": [{"cell": "(M)", "degree": 0, "value": "[-1]"}]}})J"));
}

TEST_CASE("convert: wave gives 2 x 2 block operators") {
  auto r = run({"convert", spec("wave"), "--param", "kappa=2"});
  CHECK(r.code == 0);
  CHECK(r.report["spec"]["params"]["kappa"] == "2");
  CHECK(r.report["pie"]["T"]["rows"] == 2);
  CHECK(r.report["pie"]["A"]["cols"] == 2);
  // T is a product of two purely integral inverses: the four kernel-kernel cells.
  CHECK(r.report["pie"]["T"]["cells"].size() == 4);
  auto f = run({"convert", spec("wave"), "--mode", "float"});
  CHECK(f.code == 0);
  CHECK(f.report["pie"]["T"]["cells"].size() == 4);
}

TEST_CASE("stability and bisect on the scalar ODE") {
  auto yes = run({"stability", spec("ode"), "--k", "0.5", "--degree", "0"});
  CHECK(yes.code == 0);
  const auto& s = yes.report["stability"];
  CHECK(s["feasible"] == true);
  CHECK(s["primal_residual"].get<double>() <= 1e-6);
  CHECK(s["min_eig"].get<double>() >= -1e-8);
  CHECK(s["replay"]["ok"] == true);
  CHECK(s["gain"].is_number());
  CHECK(yes.report["sdp"]["d_prime"] == 0);

  auto no = run({"stability", spec("ode"), "--k", "1.5", "--degree", "0"});
  CHECK(no.code == 1);
  CHECK(no.report["stability"]["feasible"] == false);
  CHECK(no.report["failure"]["stage"] == "stability");

  auto b = run({"bisect", spec("ode"), "--degree", "0", "--k-range", "0:3", "--tol", "1e-3"});
  CHECK(b.code == 0);
  const double kmax = b.report["bisect"]["k_max"].get<double>();
  CHECK(kmax <= 1.0);
  CHECK(kmax >= 1.0 - 2e-3);

  auto none = run({"bisect", spec("ode"), "--degree", "0", "--k-range", "2:3"});
  CHECK(none.code == 1);
  CHECK(none.report["bisect"]["k_max"].is_null());
  CHECK(run({"bisect", spec("ode"), "--k-range", "3"}).code == 2);
}

TEST_CASE("degree-prime below the minimum is an assembly error") {
  auto r = run({"stability", spec("heat1d"), "--k", "1", "--degree", "2", "--degree-prime", "0"});
  CHECK(r.code == 2);
  CHECK(r.report["failure"]["stage"] == "assemble");
  CHECK(r.report["failure"]["cause"].get<std::string>().find("minimal sufficient d'") != std::string::npos);
}

TEST_CASE("verify runs the suites") {
  for (const char* name : {"heat", "wave", "ode"}) {
    auto r = run({"verify", spec(name), "--seed", "3", "--trials", "4"});
    CHECK(r.code == 0);
    CHECK(r.report["verify"]["ok"] == true);
    CHECK(r.report["verify"]["trials"] == 4);
  }
  auto bad = run({"verify", spec("example1")});
  CHECK(bad.code == 1);
}

TEST_CASE("export-sdp round-trips through SDPA") {
  const auto path = temp_path("pietool_heat1d.dat-s");
  auto r = run({"export-sdp", spec("heat1d"), "--k", "2", "--degree", "0", "--sdpa", path});
  CHECK(r.code == 0);
  auto p = pie::sdp::read_sdpa(path);
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(pie::sdp::constraint_hash(p)));
  CHECK(r.report["sdp"]["hash"] == buf);
  CHECK(p.num_constraints() == r.report["sdp"]["rows"].get<int>());
  std::filesystem::remove(path);
}

TEST_CASE("reports are deterministic and --out writes the machine form") {
  const auto path = temp_path("pietool_report.json");
  std::vector<std::string> args{"stability", spec("heat1d"), "--k", "3", "--degree", "0", "--seed", "7"};
  auto a = run(args);
  auto b = run(args);
  CHECK(stable(a.report) == stable(b.report));

  args.push_back("--out");
  args.push_back(path);
  std::ostringstream out, err;
  pie::cli::run(args, out, err);
  CHECK(out.str().find("certified") != std::string::npos);
  std::ifstream in(path);
  CHECK(stable(json::parse(in)) == stable(a.report));
  std::filesystem::remove(path);
}
