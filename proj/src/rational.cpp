#include "pie/rational.hpp"

#include <cctype>
#include <stdexcept>

namespace pie {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

Rational ten_pow(long e) {
  Rational r = 1;
  for (long i = 0; i < e; ++i) r *= 10;
  return r;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  std::string_view s = text;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) throw std::invalid_argument("empty number");

  bool neg = false;
  if (s.front() == '+' || s.front() == '-') {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  Rational value;
  auto slash = s.find('/');
  if (slash != std::string_view::npos) {
    auto num = s.substr(0, slash), den = s.substr(slash + 1);
    if (!all_digits(num) || !all_digits(den))
      throw std::invalid_argument("malformed rational '" + std::string(text) + "'");
    Rational d{std::string(den)};
    if (d == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
    value = Rational{std::string(num)} / d;
  } else {
    long exp10 = 0;
    auto epos = s.find_first_of("eE");
    if (epos != std::string_view::npos) {
      auto es = s.substr(epos + 1);
      bool eneg = false;
      if (!es.empty() && (es.front() == '+' || es.front() == '-')) {
        eneg = es.front() == '-';
        es.remove_prefix(1);
      }
      if (!all_digits(es) || es.size() > 6)
        throw std::invalid_argument("malformed exponent in '" + std::string(text) + "'");
      exp10 = std::stol(std::string(es));
      if (eneg) exp10 = -exp10;
      s = s.substr(0, epos);
    }
    auto dot = s.find('.');
    std::string digits;
    long frac = 0;
    if (dot == std::string_view::npos) {
      digits = std::string(s);
    } else {
      digits = std::string(s.substr(0, dot)) + std::string(s.substr(dot + 1));
      frac = static_cast<long>(s.size() - dot - 1);
    }
    if (!all_digits(digits))
      throw std::invalid_argument("malformed number '" + std::string(text) + "'");
    value = Rational{digits};
    long e = exp10 - frac;
    if (e > 0) value *= ten_pow(e);
    if (e < 0) value /= ten_pow(-e);
  }
  return neg ? Rational(-value) : value;
}

std::string to_string(const Rational& r) { return r.str(); }

Rational rational_pow(const Rational& base, int exponent) {
  Rational r = 1;
  for (int i = 0; i < exponent; ++i) r *= base;
  return r;
}

Rational factorial(int k) {
  Rational r = 1;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

MatrixQ to_rational(const Eigen::MatrixXd& m) {
  MatrixQ q(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) q(i, j) = Rational(m(i, j));
  return q;
}

Eigen::MatrixXd to_double(const MatrixQ& m) {
  Eigen::MatrixXd d(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) d(i, j) = to_double(m(i, j));
  return d;
}

}  // namespace pie
