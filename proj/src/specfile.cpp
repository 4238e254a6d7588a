#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pie/pdemodel.hpp"

namespace pie {

namespace {

struct Token {
  std::string text;
  std::size_t col;  // 1-based
};

class SpecReader {
 public:
  SpecReader(const std::map<std::string, Rational>& overrides) : overrides_(overrides) {}

  PDESpec read(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      ++line_no_;
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      handle(line);
    }
    line_no_ = 0;
    if (!have_dim_) fail(1, "missing 'dim' declaration");
    if (static_cast<int>(spec_.box.size()) != dim_)
      fail(1, "expected " + std::to_string(dim_) + " 'domain' lines, found " + std::to_string(spec_.box.size()));
    if (!have_order_) fail(1, "missing 'order' declaration");
    for (const auto& [name, v] : overrides_)
      if (!spec_.params.count(name)) fail(1, "unknown parameter '" + name + "' in override");
    try {
      spec_.validate();
    } catch (const std::invalid_argument& e) {
      fail(1, e.what());
    }
    return spec_;
  }

 private:
  [[noreturn]] void fail(std::size_t col, const std::string& msg) const {
    if (line_no_ == 0) throw std::invalid_argument("spec: " + msg);
    throw std::invalid_argument("line " + std::to_string(line_no_) + ", column " + std::to_string(col) + ": " + msg);
  }

  static std::vector<Token> split(const std::string& s, std::size_t offset) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      if (i == s.size()) break;
      std::size_t start = i;
      while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      out.push_back({s.substr(start, i - start), offset + start + 1});
    }
    return out;
  }

  int to_int(const Token& t, int lo, int hi, const std::string& what) const {
    int v;
    try {
      std::size_t used;
      v = std::stoi(t.text, &used);
      if (used != t.text.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      fail(t.col, "expected an integer " + what + ", got '" + t.text + "'");
    }
    if (v < lo || v > hi)
      fail(t.col, what + " " + std::to_string(v) + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }

  Rational to_rational(const Token& t) const {
    try {
      return parse_polynomial_constant(t.text);
    } catch (const std::invalid_argument& e) {
      fail(t.col, e.what());
    }
  }

  Rational parse_polynomial_constant(const std::string& s) const {
    auto p = parse_polynomial(s, spec_.params);
    if (p.size() > 1 || (p.size() == 1 && p.terms()[0].first.degree() != 0))
      throw std::invalid_argument("expected a constant, got '" + s + "'");
    return p.is_zero() ? Rational(0) : p.terms()[0].second;
  }

  MatPoly<Rational> matrix(const std::string& line, std::size_t colon) const {
    std::string body = line.substr(colon + 1);
    try {
      return parse_matpoly(body, spec_.params);
    } catch (const std::invalid_argument& e) {
      std::string msg = e.what();
      std::size_t col = 1;
      if (msg.rfind("column ", 0) == 0) {
        col = std::stoul(msg.substr(7));
        msg = msg.substr(msg.find(':') + 2);
      }
      fail(colon + 1 + col, msg);
    }
  }

  static std::size_t matrix_col(const std::string& line, std::size_t colon) {
    std::size_t p = line.find_first_not_of(" \t", colon + 1);
    return (p == std::string::npos ? line.size() : p) + 1;
  }

  void require_dim(const Token& t) const {
    if (!have_dim_) fail(t.col, "'" + t.text + "' before 'dim'");
  }

  void handle(const std::string& line) {
    std::size_t colon = line.find(':');
    auto head = split(line.substr(0, colon), 0);
    if (head.empty()) {
      if (colon != std::string::npos) fail(colon + 1, "unexpected ':'");
      return;
    }
    const Token& kw = head[0];
    auto expect_args = [&](std::size_t count) {
      if (head.size() - 1 != count)
        fail(kw.col, "'" + kw.text + "' expects " + std::to_string(count) + " arguments, got " +
                         std::to_string(head.size() - 1));
    };
    auto expect_matrix = [&](bool want) {
      if (want && colon == std::string::npos) fail(line.size() + 1, "expected ': <matrix>'");
      if (!want && colon != std::string::npos) fail(colon + 1, "unexpected ':'");
    };

    if (kw.text == "name") {
      expect_matrix(false);
      expect_args(1);
      spec_.name = head[1].text;
    } else if (kw.text == "dim") {
      expect_matrix(false);
      expect_args(1);
      if (have_dim_) fail(kw.col, "duplicate 'dim'");
      dim_ = to_int(head[1], 1, kMaxAxes, "dimension");
      have_dim_ = true;
      spec_.bcs.resize(dim_);
    } else if (kw.text == "domain") {
      require_dim(kw);
      expect_matrix(false);
      expect_args(2);
      if (static_cast<int>(spec_.box.size()) == dim_) fail(kw.col, "more 'domain' lines than dimensions");
      Interval iv{to_rational(head[1]), to_rational(head[2])};
      if (!(iv.a < iv.b)) fail(head[2].col, "domain needs a < b");
      spec_.box.push_back(iv);
    } else if (kw.text == "n") {
      expect_matrix(false);
      expect_args(1);
      if (have_n_) fail(kw.col, "duplicate 'n'");
      if (!spec_.terms.empty() || any_bc_) fail(kw.col, "'n' must precede terms and boundary conditions");
      spec_.n = to_int(head[1], 1, 64, "state size");
      have_n_ = true;
    } else if (kw.text == "order") {
      require_dim(kw);
      expect_matrix(false);
      expect_args(dim_);
      if (have_order_) fail(kw.col, "duplicate 'order'");
      for (int i = 0; i < dim_; ++i) spec_.delta.push_back(to_int(head[1 + i], 0, 8, "order"));
      have_order_ = true;
    } else if (kw.text == "param") {
      expect_matrix(false);
      expect_args(2);
      const std::string& name = head[1].text;
      if (name.empty() || !(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_'))
        fail(head[1].col, "invalid parameter name '" + name + "'");
      bool var_like = name.size() >= 2 && (name[0] == 's' || name[0] == 't' || name[0] == 'e') &&
                      std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
      if (var_like) fail(head[1].col, "parameter name '" + name + "' clashes with a variable");
      if (spec_.params.count(name)) fail(head[1].col, "duplicate parameter '" + name + "'");
      Rational v = to_rational(head[2]);
      if (auto it = overrides_.find(name); it != overrides_.end()) v = it->second;
      spec_.params[name] = v;
    } else if (kw.text == "term") {
      require_dim(kw);
      if (!have_order_) fail(kw.col, "'term' before 'order'");
      expect_matrix(true);
      expect_args(dim_);
      std::vector<int> alpha;
      for (int i = 0; i < dim_; ++i) {
        int a = to_int(head[1 + i], 0, 64, "derivative index");
        if (a > spec_.delta[i])
          fail(head[1 + i].col, "alpha_" + std::to_string(i + 1) + " = " + std::to_string(a) +
                                    " exceeds the order " + std::to_string(spec_.delta[i]));
        alpha.push_back(a);
      }
      auto A = matrix(line, colon);
      if (A.rows() != spec_.n || A.cols() != spec_.n) fail(matrix_col(line, colon), "term matrix must be n x n");
      for (int i = 0; i < kMaxAxes; ++i)
        if (has_var(A, theta_var(i)) || has_var(A, eta_var(i)) || (i >= dim_ && has_var(A, s_var(i))))
          fail(matrix_col(line, colon), "term coefficients may only depend on s1..s" + std::to_string(dim_));
      auto& slot = spec_.terms[alpha];
      slot = slot.rows() ? slot + A : A;
    } else if (kw.text == "bc") {
      require_dim(kw);
      if (!have_order_) fail(kw.col, "'bc' before 'order'");
      expect_matrix(true);
      expect_args(4);
      int axis = to_int(head[1], 1, dim_, "axis") - 1;
      int d = spec_.delta[axis];
      if (d == 0) fail(head[1].col, "axis " + head[1].text + " has order 0 and takes no boundary conditions");
      int j = to_int(head[2], 0, d - 1, "row");
      int k = to_int(head[3], 0, d - 1, "derivative");
      const std::string& side = head[4].text;
      if (side != "a" && side != "b") fail(head[4].col, "side must be 'a' or 'b'");
      auto M = matrix(line, colon);
      if (M.rows() != spec_.n || M.cols() != spec_.n) fail(matrix_col(line, colon), "boundary matrix must be n x n");
      MatrixQ c(spec_.n, spec_.n);
      for (int r = 0; r < spec_.n; ++r)
        for (int q = 0; q < spec_.n; ++q) {
          const auto& p = M(r, q);
          if (p.size() > 1 || (p.size() == 1 && p.terms()[0].first.degree() != 0))
            fail(matrix_col(line, colon), "boundary matrices must be constant");
          c(r, q) = p.is_zero() ? Rational(0) : p.terms()[0].second;
        }
      auto& g = side == "a" ? spec_.bcs[axis].B : spec_.bcs[axis].C;
      g.resize(d);
      for (auto& row : g) row.resize(d);
      MatrixQ& target = g[j][k];
      target = target.size() ? MatrixQ(target + c) : c;
      any_bc_ = true;
    } else {
      fail(kw.col, "unknown keyword '" + kw.text + "'");
    }
  }

  const std::map<std::string, Rational>& overrides_;
  PDESpec spec_;
  std::size_t line_no_ = 0;
  int dim_ = 0;
  bool have_dim_ = false, have_n_ = false, have_order_ = false, any_bc_ = false;
};

}  // namespace

PDESpec parse_spec(const std::string& text, const std::map<std::string, Rational>& overrides) {
  return SpecReader(overrides).read(text);
}

PDESpec load_spec(const std::string& path, const std::map<std::string, Rational>& overrides) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_spec(ss.str(), overrides);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

}  // namespace pie
