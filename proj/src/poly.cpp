#include "pie/poly.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace pie {

std::string var_name(VarId v) {
  static const char kPrefix[] = {'s', 't', 'e'};
  return kPrefix[static_cast<int>(v.kind)] + std::to_string(v.axis + 1);
}

std::string ScalarTraits<double>::str(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

class PolyParser {
 public:
  PolyParser(std::string_view text, const std::map<std::string, Rational>& params)
      : s_(text), params_(params) {}

  Polynomial<Rational> parse() {
    auto p = expr();
    skip_ws();
    if (pos_ < s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw std::invalid_argument("column " + std::to_string(pos_ + 1) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial<Rational> expr() {
    auto p = term();
    for (;;) {
      if (accept('+')) p = p + term();
      else if (accept('-')) p = p - term();
      else return p;
    }
  }

  Polynomial<Rational> term() {
    auto p = unary();
    for (;;) {
      if (accept('*')) {
        p = p * unary();
      } else if (accept('/')) {
        std::size_t at = pos_;
        auto d = unary();
        if (d.is_zero()) {
          pos_ = at;
          fail("division by zero");
        }
        if (d.size() != 1 || d.terms()[0].first.degree() != 0) {
          pos_ = at;
          fail("division by a non-constant expression");
        }
        p = scale(p, Rational(1) / d.terms()[0].second);
      } else {
        return p;
      }
    }
  }

  Polynomial<Rational> unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Polynomial<Rational> power() {
    auto base = atom();
    if (accept('^')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) fail("expected a nonnegative integer exponent");
      int e = std::stoi(std::string(s_.substr(start, pos_ - start)));
      Polynomial<Rational> r(Rational(1));
      for (int k = 0; k < e; ++k) r = r * base;
      return r;
    }
    return base;
  }

  Polynomial<Rational> atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto p = expr();
      if (!accept(')')) fail("expected ')'");
      return p;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
        ++pos_;
      try {
        return Polynomial<Rational>(parse_rational(s_.substr(start, pos_ - start)));
      } catch (const std::invalid_argument&) {
        pos_ = start;
        fail("malformed number");
      }
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      std::string name(s_.substr(start, pos_ - start));
      if (auto it = params_.find(name); it != params_.end())
        return Polynomial<Rational>(it->second);
      if (name.size() >= 2 && (name[0] == 's' || name[0] == 't' || name[0] == 'e') &&
          std::all_of(name.begin() + 1, name.end(), [](char ch) { return std::isdigit(ch); })) {
        int axis = std::stoi(name.substr(1)) - 1;
        if (axis < 0 || axis >= kMaxAxes) {
          pos_ = start;
          fail("variable axis out of range in '" + name + "'");
        }
        VarKind k = name[0] == 's' ? VarKind::S : name[0] == 't' ? VarKind::THETA : VarKind::ETA;
        return Polynomial<Rational>::variable({axis, k});
      }
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view s_;
  const std::map<std::string, Rational>& params_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial<Rational> parse_polynomial(std::string_view text,
                                      const std::map<std::string, Rational>& params) {
  return PolyParser(text, params).parse();
}

MatPoly<Rational> parse_matpoly(std::string_view text,
                                const std::map<std::string, Rational>& params) {
  std::size_t lb = text.find_first_not_of(" \t");
  if (lb == std::string_view::npos) throw std::invalid_argument("column 1: empty matrix");
  if (text[lb] != '[') {
    MatPoly<Rational> m(1, 1);
    m(0, 0) = parse_polynomial(text, params);
    return m;
  }
  std::size_t rb = text.find_last_not_of(" \t");
  if (text[rb] != ']')
    throw std::invalid_argument("column " + std::to_string(rb + 1) + ": expected ']'");

  std::vector<std::vector<Polynomial<Rational>>> rows(1);
  int depth = 0;
  std::size_t start = lb + 1;
  auto flush = [&](std::size_t end) {
    auto cell = text.substr(start, end - start);
    try {
      rows.back().push_back(parse_polynomial(cell, params));
    } catch (const std::invalid_argument& e) {
      // Re-anchor the column to the full matrix text.
      std::string msg = e.what();
      std::size_t col = 0;
      if (msg.rfind("column ", 0) == 0) col = std::stoul(msg.substr(7));
      auto colon = msg.find(':');
      throw std::invalid_argument("column " + std::to_string(start + col) +
                                  (colon == std::string::npos ? ": " + msg : msg.substr(colon)));
    }
    start = end + 1;
  };
  for (std::size_t i = lb + 1; i < rb; ++i) {
    char c = text[i];
    if (c == '(') ++depth;
    else if (c == ')') --depth;
    else if (depth == 0 && (c == ',' || c == ';')) {
      flush(i);
      if (c == ';') rows.emplace_back();
    }
  }
  flush(rb);
  std::size_t cols = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != cols) throw std::invalid_argument("column " + std::to_string(lb + 1) + ": ragged matrix rows");
  MatPoly<Rational> m(static_cast<int>(rows.size()), static_cast<int>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) m(int(i), int(j)) = rows[i][j];
  return m;
}

}  // namespace pie
