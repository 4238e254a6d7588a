#include "pie/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pie/lpi.hpp"
#include "pie/pdemodel.hpp"
#include "pie/pieconvert.hpp"
#include "pie/sdp.hpp"
#include "pie/verify.hpp"

namespace pie::cli {

namespace {

using json = nlohmann::ordered_json;
using clock = std::chrono::steady_clock;

// A failure that ends the run with exit code 1 (expected negative) or 2.
struct StageError {
  std::string stage, cause;
  int code;
};

struct Common {
  std::string spec_path;
  std::vector<std::string> params;
  std::string out_path;
  bool json_only = false;
  std::string mode = "rational";
};

struct LpiFlags {
  double k = 0;
  double epsilon = 0.1;
  int degree = 1;
  int degree_prime = -1;
  std::string basis = "tensor";
  double solver_tol = 0;
  unsigned seed = 1;
  int samples = 50;
  bool no_structural = false, kernel_free_P = false, multiplier_free_R = false, symmetric_kernels = false;
};

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double seconds_since(clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); }

std::map<std::string, Rational> parse_params(const std::vector<std::string>& items) {
  std::map<std::string, Rational> out;
  for (const auto& it : items) {
    auto eq = it.find('=');
    if (eq == std::string::npos || eq == 0) throw StageError{"arguments", "--param expects name=value, got '" + it + "'", 2};
    try {
      out[it.substr(0, eq)] = parse_rational(it.substr(eq + 1));
    } catch (const std::exception& e) {
      throw StageError{"arguments", "bad value in --param '" + it + "': " + e.what(), 2};
    }
  }
  return out;
}

Mode parse_mode(const std::string& m) { return m == "float" ? Mode::Float : Mode::Rational; }

struct Loaded {
  PDESpec spec;
  std::string digest;
};

Loaded load(const Common& c, json& rep) {
  std::ifstream in(c.spec_path);
  if (!in) throw StageError{"parse", "cannot open spec file '" + c.spec_path + "'", 2};
  std::stringstream ss;
  ss << in.rdbuf();
  const auto params = parse_params(c.params);
  Loaded L;
  try {
    L.spec = parse_spec(ss.str(), params);
  } catch (const std::exception& e) {
    throw StageError{"parse", c.spec_path + ": " + e.what(), 2};
  }
  std::uint64_t h = fnv1a(ss.str());
  for (const auto& [k, v] : params) h = fnv1a(k + "=" + to_string(v) + ";", h);
  L.digest = hex64(h);
  json s;
  s["path"] = c.spec_path;
  s["name"] = L.spec.name;
  s["digest"] = L.digest;
  s["dim"] = L.spec.dim();
  s["n"] = L.spec.n;
  s["order"] = L.spec.delta;
  json p = json::object();
  for (const auto& [k, v] : L.spec.params) p[k] = to_string(v);
  s["params"] = p;
  rep["spec"] = s;
  return L;
}

// Per-axis admissibility and pairwise consistency.
bool run_check(const PDESpec& spec, Mode mode, json& rep, std::ostream& text) {
  json chk;
  bool all_adm = true;
  json adm = json::array();
  for (int i = 0; i < spec.dim(); ++i) {
    const bool ok = check_admissible(axis_bc(spec, i), mode);
    adm.push_back(ok);
    all_adm = all_adm && ok;
    text << "axis " << i + 1 << ": " << (ok ? "admissible" : "inadmissible") << "\n";
  }
  chk["mode"] = mode == Mode::Float ? "float" : "rational";
  chk["admissible"] = adm;
  if (!all_adm) {
    chk["consistent"] = nullptr;
    rep["check"] = chk;
    return false;
  }
  auto cons = check_consistent(spec);
  chk["consistent"] = cons.consistent;
  if (cons.witness) {
    const auto& w = *cons.witness;
    auto mat = [](const MatrixQ& M) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(to_string(M(r, c)));
        rows.push_back(row);
      }
      return rows;
    };
    chk["witness"] = {{"axes", {w.i, w.j}}, {"block_i", {w.k, w.p}}, {"block_j", {w.l, w.q}},
                      {"K_i_block", mat(w.Kikp)}, {"K_j_block", mat(w.Kjlq)}};
    text << "inconsistent: K^" << w.i << " block (" << w.k << "," << w.p << ") does not commute with K^" << w.j
         << " block (" << w.l << "," << w.q << ")\n";
  } else {
    text << "boundary conditions are consistent\n";
  }
  rep["check"] = chk;
  return cons.consistent;
}

void require_check(const PDESpec& spec, Mode mode, json& rep, std::ostream& text) {
  if (run_check(spec, mode, rep, text)) return;
  const auto& chk = rep["check"];
  if (chk["consistent"].is_null()) {
    for (std::size_t i = 0; i < chk["admissible"].size(); ++i)
      if (!chk["admissible"][i].get<bool>())
        throw StageError{"check", "inadmissible boundary conditions on axis " + std::to_string(i + 1), 1};
  }
  throw StageError{"check", "inconsistent boundary conditions", 1};
}

template <class S>
json op_summary(const NDPIOperator<S>& op, bool dump) {
  json j;
  j["rows"] = op.rows;
  j["cols"] = op.cols;
  json cells = json::array();
  const int N = op.dim();
  for (int c = 0; c < num_cells(N); ++c) {
    const auto& m = op.cells[c];
    if (m.is_zero()) continue;
    int deg = 0;
    for (const auto& p : m.entries()) deg = std::max(deg, total_degree(p));
    json cj = {{"cell", cell_name(c, N)}, {"degree", deg}};
    if (dump) cj["value"] = to_string(m);
    cells.push_back(cj);
  }
  j["cells"] = cells;
  return j;
}

lpi::LPIOptions lpi_options(const LpiFlags& f) {
  lpi::LPIOptions o;
  o.epsilon = f.epsilon;
  o.degree = f.degree;
  o.degree_prime = f.degree_prime;
  o.gram_basis = f.basis == "total" ? lpi::BasisKind::Total : lpi::BasisKind::Tensor;
  o.trim.structural = !f.no_structural;
  o.trim.kernel_free_P = f.kernel_free_P;
  o.trim.multiplier_free_R = f.multiplier_free_R;
  o.trim.symmetric_kernels = f.symmetric_kernels;
  return o;
}

lpi::CheckOptions check_options(const LpiFlags& f) {
  lpi::CheckOptions co;
  sdp::Options so;
  if (f.solver_tol > 0) so.tol_feas = so.tol_gap = f.solver_tol;
  co.solver = sdp::Options::from_env(so);
  co.seed = f.seed;
  co.samples = f.samples;
  return co;
}

lpi::Assembler make_assembler(const PDESpec& spec, const LpiFlags& f, json& rep, std::ostream& text) {
  require_check(spec, Mode::Rational, rep, text);
  auto sys = build_pie<Rational>(spec);
  try {
    lpi::Assembler as(sys, lpi_options(f));
    rep["sdp"] = {{"d", f.degree},
                  {"d_prime", as.degree_prime()},
                  {"basis", f.basis},
                  {"rows", as.num_rows()},
                  {"num_P", as.num_P_vars()},
                  {"size_R", sys.n * static_cast<int>(as.elems_R().size())},
                  {"size_Q", sys.n * static_cast<int>(as.elems_Q().size())}};
    return as;
  } catch (const std::invalid_argument& e) {
    throw StageError{"assemble", e.what(), 2};
  }
}

json stability_json(const lpi::StabilityResult& r, const LpiFlags& f, int dprime) {
  const auto& s = r.solution;
  json j = {{"feasible", r.feasible},
            {"k", r.k},
            {"epsilon", f.epsilon},
            {"d", f.degree},
            {"d_prime", dprime},
            {"status", sdp::to_string(s.status)},
            {"message", s.message},
            {"iterations", s.iterations},
            {"primal_residual", s.primal_residual},
            {"dual_residual", s.dual_residual},
            {"min_eig", s.min_eig}};
  if (s.status == sdp::Status::Feasible)
    j["replay"] = {{"ok", r.replay.ok},
                   {"samples", r.replay.samples},
                   {"positivity_margin", r.replay.positivity_margin},
                   {"derivative_max", r.replay.derivative_max},
                   {"symmetry_error", r.replay.symmetry_error}};
  j["gain"] = r.feasible ? json(r.gain) : json(nullptr);
  return j;
}

std::string cause_of(const lpi::StabilityResult& r) {
  switch (r.solution.status) {
    case sdp::Status::Infeasible: return "SDP infeasible (certificate verified)";
    case sdp::Status::Feasible: return "certificate replay failed";
    default: return "solver inaccurate: " + r.solution.message;
  }
}

void add_lpi_flags(CLI::App* sub, LpiFlags& f, bool with_k) {
  if (with_k) sub->add_option("--k", f.k, "decay rate to certify")->required();
  sub->add_option("--epsilon", f.epsilon, "coercivity margin")->capture_default_str();
  sub->add_option("--degree", f.degree, "monomial degree d of P")->capture_default_str();
  sub->add_option("--degree-prime", f.degree_prime, "degree d' of the Gram bases (default: smallest sufficient)");
  sub->add_option("--basis", f.basis, "kernel monomials of the Gram bases")
      ->check(CLI::IsMember({"tensor", "total"}))
      ->capture_default_str();
  sub->add_option("--solver-tol", f.solver_tol, "interior-point tolerance");
  sub->add_option("--seed", f.seed, "seed of the replay samples")->capture_default_str();
  sub->add_flag("--no-structural-trim", f.no_structural, "keep Gram rows whose contribution must vanish");
  sub->add_flag("--kernel-free-P", f.kernel_free_P, "restrict P to multipliers");
  sub->add_flag("--multiplier-free-R", f.multiplier_free_R, "restrict R to kernel rows");
  sub->add_flag("--symmetric-kernels", f.symmetric_kernels, "tie the two kernel halves of P");
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("spec", c.spec_path, "PDE spec file")->required();
  sub->add_option("--param", c.params, "override a spec parameter, name=value");
  sub->add_option("--out", c.out_path, "write the JSON report to this file");
  sub->add_flag("--json", c.json_only, "print the JSON report instead of text");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PDE to PIE conversion and LPI stability analysis"};
  app.require_subcommand(1);
  Common c;
  LpiFlags f;
  std::string k_range = "0:20";
  double tol = 1e-3;
  int trials = 10, poly_degree = 3;
  std::string sdpa_path;

  auto* check = app.add_subcommand("check", "admissibility and consistency of the boundary conditions");
  add_common(check, c);
  check->add_option("--mode", c.mode, "arithmetic")->check(CLI::IsMember({"rational", "float"}))->capture_default_str();

  auto* convert = app.add_subcommand("convert", "build the PIE operators T and A");
  add_common(convert, c);
  convert->add_option("--mode", c.mode, "arithmetic")->check(CLI::IsMember({"rational", "float"}))->capture_default_str();

  auto* stability = app.add_subcommand("stability", "certify exponential stability with rate k");
  add_common(stability, c);
  add_lpi_flags(stability, f, true);

  auto* bisect = app.add_subcommand("bisect", "largest certified rate in a range");
  add_common(bisect, c);
  add_lpi_flags(bisect, f, false);
  bisect->add_option("--k-range", k_range, "lo:hi")->capture_default_str();
  bisect->add_option("--tol", tol, "bisection tolerance")->capture_default_str();

  auto* verify = app.add_subcommand("verify", "exact-inverse, boundary and adjoint suites");
  add_common(verify, c);
  verify->add_option("--seed", f.seed, "seed of the random polynomials")->capture_default_str();
  verify->add_option("--trials", trials, "random inputs")->capture_default_str();
  verify->add_option("--degree", poly_degree, "degree of the random polynomials")->capture_default_str();

  auto* exp = app.add_subcommand("export-sdp", "write the stability SDP in SDPA format");
  add_common(exp, c);
  add_lpi_flags(exp, f, true);
  exp->add_option("--sdpa", sdpa_path, "output file")->required();

  std::vector<std::string> argv_s{"pietool"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  json rep;
  std::ostringstream text;
  int code = 0;
  const auto t0 = clock::now();
  CLI::App* sub = app.get_subcommands().front();
  rep["command"] = sub->get_name();
  try {
    auto L = load(c, rep);
    const PDESpec& spec = L.spec;
    text << "spec " << spec.name << " (" << c.spec_path << "), digest " << L.digest << "\n";
    if (sub == check) {
      code = run_check(spec, parse_mode(c.mode), rep, text) ? 0 : 1;
    } else if (sub == convert) {
      require_check(spec, parse_mode(c.mode), rep, text);
      json pie;
      if (parse_mode(c.mode) == Mode::Float) {
        auto sys = build_pie<double>(spec);
        pie = {{"T", op_summary(sys.T, true)}, {"A", op_summary(sys.A, true)}};
        text << "T:\n" << dump(sys.T) << "A:\n" << dump(sys.A);
      } else {
        auto sys = build_pie<Rational>(spec);
        pie = {{"T", op_summary(sys.T, true)}, {"A", op_summary(sys.A, true)}};
        text << "T:\n" << dump(sys.T) << "A:\n" << dump(sys.A);
      }
      rep["pie"] = pie;
    } else if (sub == stability || sub == exp) {
      auto as = make_assembler(spec, f, rep, text);
      if (sub == exp) {
        auto S = as.assemble(f.k);
        sdp::write_sdpa(S.problem, sdpa_path);
        rep["sdp"]["k"] = f.k;
        rep["sdp"]["hash"] = hex64(sdp::constraint_hash(S.problem));
        rep["sdp"]["file"] = sdpa_path;
        text << "wrote " << sdpa_path << ": " << S.problem.num_constraints() << " rows, hash "
             << rep["sdp"]["hash"].get<std::string>() << "\n";
      } else {
        auto r = lpi::check_stability(as, f.k, check_options(f));
        rep["stability"] = stability_json(r, f, as.degree_prime());
        rep["timings"]["assemble"] = r.seconds_assemble;
        rep["timings"]["solve"] = r.seconds_solve;
        text << "SDP: " << r.rows << " rows, P " << r.num_P << ", R " << r.size_R << ", Q " << r.size_Q
             << ", d = " << f.degree << ", d' = " << as.degree_prime() << "\n";
        if (r.feasible) {
          text << "certified: exponentially stable with rate k = " << f.k << ", gain estimate " << r.gain << "\n";
        } else {
          text << "not certified at k = " << f.k << ": " << cause_of(r) << "\n";
          rep["failure"] = {{"stage", "stability"}, {"cause", cause_of(r)}};
          code = 1;
        }
      }
    } else if (sub == bisect) {
      double lo = 0, hi = 0;
      {
        auto colon = k_range.find(':');
        try {
          if (colon == std::string::npos) throw std::invalid_argument("");
          lo = std::stod(k_range.substr(0, colon));
          hi = std::stod(k_range.substr(colon + 1));
        } catch (const std::exception&) {
          throw StageError{"arguments", "--k-range expects lo:hi, got '" + k_range + "'", 2};
        }
      }
      auto as = make_assembler(spec, f, rep, text);
      lpi::BisectResult b;
      try {
        b = lpi::bisect_rate(as, lo, hi, tol, check_options(f), [&](const lpi::BisectStep& st) {
          text << "  k = " << st.k << ": " << (st.certified ? "certified" : "not certified") << " ("
               << sdp::to_string(st.status) << ", " << st.iterations << " iterations)\n";
        });
      } catch (const lpi::NonMonotoneError& e) {
        throw StageError{"bisect", e.what(), 2};
      } catch (const std::invalid_argument& e) {
        throw StageError{"arguments", e.what(), 2};
      }
      json hist = json::array();
      double solve_time = 0;
      for (const auto& st : b.history) {
        hist.push_back({{"k", st.k}, {"status", sdp::to_string(st.status)}, {"certified", st.certified},
                        {"iterations", st.iterations}});
        solve_time += st.seconds;
      }
      rep["bisect"] = {{"k_range", {lo, hi}}, {"tol", tol},           {"k_max", b.any_feasible ? json(b.k_max) : json(nullptr)},
                       {"hit_upper", b.hit_upper}, {"history", hist}};
      if (b.any_feasible) rep["stability"] = stability_json(b.best, f, as.degree_prime());
      rep["timings"]["steps"] = solve_time;
      if (b.any_feasible) {
        text << "k_max = " << b.k_max << (b.hit_upper ? " (upper end of the range)" : "") << "\n";
      } else {
        text << "no rate in [" << lo << ", " << hi << "] is certified\n";
        rep["failure"] = {{"stage", "bisect"}, {"cause", "k = " + std::to_string(lo) + " not certified"}};
        code = 1;
      }
    } else if (sub == verify) {
      require_check(spec, Mode::Rational, rep, text);
      auto s = run_suite(spec, f.seed, trials, poly_degree);
      rep["verify"] = {{"seed", f.seed},
                       {"trials", s.trials},
                       {"inverse_failures", s.inverse_failures},
                       {"bc_failures", s.bc_failures},
                       {"derivative_failures", s.derivative_failures},
                       {"adjoint_discrepancy", s.adjoint_discrepancy},
                       {"ok", s.ok()}};
      text << "exact inverse: " << s.trials - s.inverse_failures << "/" << s.trials << " passed\n"
           << "boundary conditions: " << s.trials - s.bc_failures << "/" << s.trials << " passed\n"
           << "derivative operators: " << s.trials - s.derivative_failures << "/" << s.trials << " passed\n"
           << "adjoint discrepancy: " << s.adjoint_discrepancy << "\n";
      if (!s.ok()) {
        rep["failure"] = {{"stage", "verify"}, {"cause", "suite failures"}};
        code = 1;
      }
    }
  } catch (const StageError& e) {
    rep["failure"] = {{"stage", e.stage}, {"cause", e.cause}};
    text << e.stage << ": " << e.cause << "\n";
    code = e.code;
  } catch (const std::exception& e) {
    rep["failure"] = {{"stage", sub->get_name()}, {"cause", e.what()}};
    text << sub->get_name() << ": " << e.what() << "\n";
    code = 2;
  }
  rep["exit_code"] = code;
  rep["timings"]["total"] = seconds_since(t0);

  if (c.json_only) out << rep.dump(2) << "\n";
  else (code == 2 ? err : out) << text.str();
  if (!c.out_path.empty()) {
    std::ofstream o(c.out_path);
    if (!o) {
      err << "cannot write report to '" << c.out_path << "'\n";
      return 2;
    }
    o << rep.dump(2) << "\n";
  }
  return code;
}

}  // namespace pie::cli
