#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pie/rational.hpp"

namespace pie {

inline constexpr int kMaxAxes = 4;
inline constexpr int kNumSlots = 3 * kMaxAxes;

enum class VarKind : std::uint8_t { S = 0, THETA = 1, ETA = 2 };

// Variable s_i, theta_i or eta_i. Axes are 0-based here; the text form is
// 1-based ("s1", "t1", "e1").
struct VarId {
  int axis = 0;
  VarKind kind = VarKind::S;

  int slot() const { return 3 * axis + static_cast<int>(kind); }
  static VarId from_slot(int slot) { return {slot / 3, static_cast<VarKind>(slot % 3)}; }
  bool operator==(const VarId&) const = default;
};

inline VarId s_var(int axis) { return {axis, VarKind::S}; }
inline VarId theta_var(int axis) { return {axis, VarKind::THETA}; }
inline VarId eta_var(int axis) { return {axis, VarKind::ETA}; }

std::string var_name(VarId v);

class Monomial {
 public:
  Monomial() { e_.fill(0); }

  int operator[](int slot) const { return e_[slot]; }
  int exponent(VarId v) const { return e_[v.slot()]; }
  int degree() const { return deg_; }

  void set(int slot, int power) {
    if (power < 0 || power > 255) throw std::out_of_range("monomial exponent out of range");
    deg_ = static_cast<std::uint16_t>(deg_ - e_[slot] + power);
    e_[slot] = static_cast<std::uint8_t>(power);
  }
  void set(VarId v, int power) { set(v.slot(), power); }

  friend Monomial operator*(const Monomial& a, const Monomial& b) {
    Monomial m;
    for (int i = 0; i < kNumSlots; ++i) m.set(i, a.e_[i] + b.e_[i]);
    return m;
  }
  bool operator==(const Monomial& o) const { return e_ == o.e_; }
  bool operator!=(const Monomial& o) const { return e_ != o.e_; }
  // Graded lexicographic: lower total degree first, ties broken so that
  // s1 > t1 > e1 > s2 > ... (larger leading exponent first).
  bool operator<(const Monomial& o) const {
    if (deg_ != o.deg_) return deg_ < o.deg_;
    return e_ > o.e_;
  }

  const std::array<std::uint8_t, kNumSlots>& exponents() const { return e_; }

 private:
  std::array<std::uint8_t, kNumSlots> e_;
  std::uint16_t deg_ = 0;
};

template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static bool is_zero(double x) { return x == 0.0; }
  static double one() { return 1.0; }
  static double from_rational(const Rational& r) { return to_double(r); }
  static double scale(double x, const Rational& r) { return x * to_double(r); }
  static bool negative(double x) { return x < 0; }
  static std::string str(double x);
  static double sum(const std::pair<Monomial, double>* b, const std::pair<Monomial, double>* e) {
    double s = 0;
    for (; b != e; ++b) s += b->second;
    return s;
  }
};

template <>
struct ScalarTraits<Rational> {
  static bool is_zero(const Rational& x) { return x == 0; }
  static Rational one() { return 1; }
  static Rational from_rational(const Rational& r) { return r; }
  static Rational scale(const Rational& x, const Rational& r) { return x * r; }
  static bool negative(const Rational& x) { return x < 0; }
  static std::string str(const Rational& x) { return to_string(x); }
  static Rational sum(const std::pair<Monomial, Rational>* b,
                      const std::pair<Monomial, Rational>* e) {
    Rational s = 0;
    for (; b != e; ++b) s += b->second;
    return s;
  }
};

// A bound of definite integration, or a substitution value: either a constant
// or a variable.
struct Bound {
  std::variant<Rational, VarId> value;

  Bound(const Rational& r) : value(r) {}
  Bound(int r) : value(Rational(r)) {}
  Bound(VarId v) : value(v) {}
  bool is_var() const { return std::holds_alternative<VarId>(value); }
  VarId var() const { return std::get<VarId>(value); }
  const Rational& constant() const { return std::get<Rational>(value); }
};

// Maps each variable slot to a target slot (identity by default).
struct VarMap {
  std::array<std::int8_t, kNumSlots> to;
  VarMap() {
    for (int i = 0; i < kNumSlots; ++i) to[i] = static_cast<std::int8_t>(i);
  }
  VarMap& map(VarId from, VarId target) {
    to[from.slot()] = static_cast<std::int8_t>(target.slot());
    return *this;
  }
};

// Sparse multivariate polynomial; terms are kept sorted with no zero entries,
// so equality is term-list equality.
template <class S>
class Polynomial {
 public:
  using Scalar = S;
  using Term = std::pair<Monomial, S>;
  using Traits = ScalarTraits<S>;

  Polynomial() = default;
  explicit Polynomial(const S& c) {
    if (!Traits::is_zero(c)) terms_.emplace_back(Monomial{}, c);
  }

  static Polynomial from_terms(std::vector<Term> terms) {
    std::sort(terms.begin(), terms.end(),
              [](const Term& a, const Term& b) { return a.first < b.first; });
    Polynomial p;
    p.terms_.reserve(terms.size());
    for (std::size_t i = 0; i < terms.size();) {
      std::size_t j = i + 1;
      while (j < terms.size() && terms[j].first == terms[i].first) ++j;
      if (j == i + 1) {
        if (!Traits::is_zero(terms[i].second)) p.terms_.push_back(std::move(terms[i]));
      } else {
        S c = Traits::sum(terms.data() + i, terms.data() + j);
        if (!Traits::is_zero(c)) p.terms_.emplace_back(terms[i].first, std::move(c));
      }
      i = j;
    }
    return p;
  }

  static Polynomial monomial(const Monomial& m, const S& c) {
    Polynomial p;
    if (!Traits::is_zero(c)) p.terms_.emplace_back(m, c);
    return p;
  }

  static Polynomial variable(VarId v, int power = 1) {
    Monomial m;
    m.set(v, power);
    return monomial(m, Traits::one());
  }

  const std::vector<Term>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  bool operator==(const Polynomial& o) const { return terms_ == o.terms_; }
  bool operator!=(const Polynomial& o) const { return !(*this == o); }

  // Coefficient of monomial m (zero if absent).
  S coeff(const Monomial& m) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), m,
                               [](const Term& t, const Monomial& x) { return t.first < x; });
    if (it != terms_.end() && it->first == m) return it->second;
    return S{};
  }

  Polynomial& operator+=(const Polynomial& o) { return *this = *this + o; }
  Polynomial& operator-=(const Polynomial& o) { return *this = *this - o; }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) { return merge(a, b, false); }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return merge(a, b, true); }
  friend Polynomial operator-(const Polynomial& a) {
    Polynomial r = a;
    for (auto& t : r.terms_) t.second = -t.second;
    return r;
  }

 private:
  static Polynomial merge(const Polynomial& a, const Polynomial& b, bool subtract) {
    Polynomial r;
    r.terms_.reserve(a.terms_.size() + b.terms_.size());
    auto i = a.terms_.begin(), j = b.terms_.begin();
    while (i != a.terms_.end() || j != b.terms_.end()) {
      if (j == b.terms_.end() || (i != a.terms_.end() && i->first < j->first)) {
        r.terms_.push_back(*i++);
      } else if (i == a.terms_.end() || j->first < i->first) {
        r.terms_.emplace_back(j->first, subtract ? S(-j->second) : j->second);
        ++j;
      } else {
        S c = subtract ? S(i->second - j->second) : S(i->second + j->second);
        if (!Traits::is_zero(c)) r.terms_.emplace_back(i->first, std::move(c));
        ++i;
        ++j;
      }
    }
    return r;
  }

  std::vector<Term> terms_;
};

template <class A, class B>
using product_t = decltype(std::declval<A>() * std::declval<B>());

template <class A, class B>
Polynomial<product_t<A, B>> operator*(const Polynomial<A>& p, const Polynomial<B>& q) {
  using R = product_t<A, B>;
  std::vector<typename Polynomial<R>::Term> t;
  t.reserve(p.size() * q.size());
  for (const auto& [ma, ca] : p.terms())
    for (const auto& [mb, cb] : q.terms()) t.emplace_back(ma * mb, ca * cb);
  return Polynomial<R>::from_terms(std::move(t));
}

template <class S>
Polynomial<S> scale(const Polynomial<S>& p, const Rational& r) {
  if (r == 0) return {};
  std::vector<typename Polynomial<S>::Term> t;
  t.reserve(p.size());
  for (const auto& [m, c] : p.terms()) t.emplace_back(m, ScalarTraits<S>::scale(c, r));
  return Polynomial<S>::from_terms(std::move(t));
}

template <class S>
Polynomial<S> constant_poly(const Rational& r) {
  return Polynomial<S>(ScalarTraits<S>::from_rational(r));
}

template <class S>
bool has_var(const Polynomial<S>& p, VarId v) {
  for (const auto& t : p.terms())
    if (t.first.exponent(v) > 0) return true;
  return false;
}

template <class S>
int max_degree(const Polynomial<S>& p, VarId v) {
  int d = 0;
  for (const auto& t : p.terms()) d = std::max(d, t.first.exponent(v));
  return d;
}

template <class S>
int total_degree(const Polynomial<S>& p) {
  int d = 0;
  for (const auto& t : p.terms()) d = std::max(d, t.first.degree());
  return d;
}

template <class S>
Polynomial<S> remap(const Polynomial<S>& p, const VarMap& vm) {
  std::vector<typename Polynomial<S>::Term> t;
  t.reserve(p.size());
  for (const auto& [m, c] : p.terms()) {
    Monomial out;
    for (int i = 0; i < kNumSlots; ++i)
      if (m[i]) out.set(vm.to[i], out[vm.to[i]] + m[i]);
    t.emplace_back(out, c);
  }
  return Polynomial<S>::from_terms(std::move(t));
}

template <class S>
Polynomial<S> rename(const Polynomial<S>& p, VarId from, VarId to) {
  return remap(p, VarMap().map(from, to));
}

template <class S>
Polynomial<S> swap_vars(const Polynomial<S>& p, VarId a, VarId b) {
  return remap(p, VarMap().map(a, b).map(b, a));
}

// Evaluate var at a constant or rename it to another variable.
template <class S>
Polynomial<S> substitute(const Polynomial<S>& p, VarId v, const Bound& value) {
  if (value.is_var()) return rename(p, v, value.var());
  const Rational& x = value.constant();
  std::vector<typename Polynomial<S>::Term> t;
  t.reserve(p.size());
  for (const auto& [m, c] : p.terms()) {
    int e = m.exponent(v);
    Monomial out = m;
    out.set(v, 0);
    if (e == 0) t.emplace_back(out, c);
    else t.emplace_back(out, ScalarTraits<S>::scale(c, rational_pow(x, e)));
  }
  return Polynomial<S>::from_terms(std::move(t));
}

template <class S>
Polynomial<S> differentiate(const Polynomial<S>& p, VarId v, int order = 1) {
  if (order < 0) throw std::invalid_argument("negative derivative order");
  std::vector<typename Polynomial<S>::Term> t;
  for (const auto& [m, c] : p.terms()) {
    int e = m.exponent(v);
    if (e < order) continue;
    Rational f = 1;
    for (int k = 0; k < order; ++k) f *= e - k;
    Monomial out = m;
    out.set(v, e - order);
    t.emplace_back(out, ScalarTraits<S>::scale(c, f));
  }
  return Polynomial<S>::from_terms(std::move(t));
}

// Definite integral over var from lo to hi; the bounds may be constants or
// other variables, and the result no longer contains var.
template <class S>
Polynomial<S> integrate(const Polynomial<S>& p, VarId v, const Bound& lo, const Bound& hi) {
  if ((lo.is_var() && lo.var() == v) || (hi.is_var() && hi.var() == v))
    throw std::invalid_argument("integration bound equals the integration variable");
  std::vector<typename Polynomial<S>::Term> t;
  t.reserve(2 * p.size());
  auto eval_at = [&](const Monomial& rest, int power, const S& c, const Bound& b, bool negate) {
    Rational f(1, power);
    if (negate) f = -f;
    if (b.is_var()) {
      Monomial out = rest;
      out.set(b.var(), out.exponent(b.var()) + power);
      t.emplace_back(out, ScalarTraits<S>::scale(c, f));
    } else {
      Rational w = f * rational_pow(b.constant(), power);
      if (w != 0) t.emplace_back(rest, ScalarTraits<S>::scale(c, w));
    }
  };
  for (const auto& [m, c] : p.terms()) {
    int e = m.exponent(v);
    Monomial rest = m;
    rest.set(v, 0);
    eval_at(rest, e + 1, c, hi, false);
    eval_at(rest, e + 1, c, lo, true);
  }
  return Polynomial<S>::from_terms(std::move(t));
}

template <class S>
double evaluate(const Polynomial<S>& p, const std::array<double, kNumSlots>& x) {
  double s = 0;
  for (const auto& [m, c] : p.terms()) {
    double term;
    if constexpr (std::is_same_v<S, double>) term = c;
    else term = to_double(c);
    for (int i = 0; i < kNumSlots; ++i)
      for (int k = 0; k < m[i]; ++k) term *= x[i];
    s += term;
  }
  return s;
}

template <class T, class S, class F>
Polynomial<T> convert(const Polynomial<S>& p, F f) {
  std::vector<typename Polynomial<T>::Term> t;
  t.reserve(p.size());
  for (const auto& [m, c] : p.terms()) t.emplace_back(m, f(c));
  return Polynomial<T>::from_terms(std::move(t));
}

inline Polynomial<double> to_double(const Polynomial<Rational>& p) {
  return convert<double>(p, [](const Rational& r) { return to_double(r); });
}

template <class S>
std::string to_string(const Polynomial<S>& p) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    bool neg = ScalarTraits<S>::negative(c);
    S mag = neg ? S(-c) : c;
    if (first) out += neg ? "-" : "";
    else out += neg ? " - " : " + ";
    first = false;
    bool unit = m.degree() > 0 && mag == ScalarTraits<S>::one();
    if (!unit) out += ScalarTraits<S>::str(mag);
    for (int i = 0; i < kNumSlots; ++i) {
      if (!m[i]) continue;
      if (!unit) out += " * ";
      unit = false;
      out += var_name(VarId::from_slot(i));
      if (m[i] > 1) out += "^" + std::to_string(m[i]);
    }
  }
  return out;
}

// Parses "c * s1^a * t1^b + ..." style expressions with +, -, *, /, ^,
// parentheses, exact numbers and named parameters. Errors carry the column.
Polynomial<Rational> parse_polynomial(std::string_view text,
                                      const std::map<std::string, Rational>& params = {});

// ---------------------------------------------------------------------------
// Matrices of polynomials.

template <class S>
class MatPoly {
 public:
  using Scalar = S;
  MatPoly() = default;
  MatPoly(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols) {}

  static MatPoly identity(int n) {
    MatPoly m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = Polynomial<S>(ScalarTraits<S>::one());
    return m;
  }
  static MatPoly constant(const MatrixQ& c) {
    MatPoly m(static_cast<int>(c.rows()), static_cast<int>(c.cols()));
    for (int i = 0; i < m.rows_; ++i)
      for (int j = 0; j < m.cols_; ++j) m(i, j) = constant_poly<S>(c(i, j));
    return m;
  }
  static MatPoly scalar(const Polynomial<S>& p, int n) {
    MatPoly m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = p;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Polynomial<S>& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  const Polynomial<S>& operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }
  const std::vector<Polynomial<S>>& entries() const { return data_; }

  bool is_zero() const {
    for (const auto& p : data_)
      if (!p.is_zero()) return false;
    return true;
  }
  bool operator==(const MatPoly& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }
  bool operator!=(const MatPoly& o) const { return !(*this == o); }

  template <class F>
  auto map(F f) const {
    using P = decltype(f(std::declval<const Polynomial<S>&>()));
    MatPoly<typename P::Scalar> r(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) r(i, j) = f((*this)(i, j));
    return r;
  }

  MatPoly& operator+=(const MatPoly& o) { return *this = *this + o; }

  friend MatPoly operator+(const MatPoly& a, const MatPoly& b) {
    check_same(a, b);
    MatPoly r(a.rows_, a.cols_);
    for (std::size_t k = 0; k < a.data_.size(); ++k) r.data_[k] = a.data_[k] + b.data_[k];
    return r;
  }
  friend MatPoly operator-(const MatPoly& a, const MatPoly& b) {
    check_same(a, b);
    MatPoly r(a.rows_, a.cols_);
    for (std::size_t k = 0; k < a.data_.size(); ++k) r.data_[k] = a.data_[k] - b.data_[k];
    return r;
  }
  friend MatPoly operator-(const MatPoly& a) {
    MatPoly r(a.rows_, a.cols_);
    for (std::size_t k = 0; k < a.data_.size(); ++k) r.data_[k] = -a.data_[k];
    return r;
  }

 private:
  static void check_same(const MatPoly& a, const MatPoly& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
      throw std::invalid_argument("matrix polynomial shape mismatch");
  }

  int rows_ = 0, cols_ = 0;
  std::vector<Polynomial<S>> data_;
};

template <class A, class B>
MatPoly<product_t<A, B>> operator*(const MatPoly<A>& a, const MatPoly<B>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix polynomial inner dimension mismatch");
  MatPoly<product_t<A, B>> r(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      Polynomial<product_t<A, B>> s;
      for (int k = 0; k < a.cols(); ++k) {
        if (a(i, k).is_zero() || b(k, j).is_zero()) continue;
        s += a(i, k) * b(k, j);
      }
      r(i, j) = std::move(s);
    }
  return r;
}

template <class A, class B>
MatPoly<product_t<A, B>> operator*(const Polynomial<A>& p, const MatPoly<B>& b) {
  return b.map([&](const Polynomial<B>& e) { return p * e; });
}

template <class S>
MatPoly<S> scale(const MatPoly<S>& m, const Rational& r) {
  return m.map([&](const Polynomial<S>& p) { return scale(p, r); });
}

template <class S>
MatPoly<S> transpose(const MatPoly<S>& m) {
  MatPoly<S> r(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r(j, i) = m(i, j);
  return r;
}

template <class S>
MatPoly<S> remap(const MatPoly<S>& m, const VarMap& vm) {
  return m.map([&](const Polynomial<S>& p) { return remap(p, vm); });
}

template <class S>
MatPoly<S> rename(const MatPoly<S>& m, VarId from, VarId to) {
  return remap(m, VarMap().map(from, to));
}

template <class S>
MatPoly<S> swap_vars(const MatPoly<S>& m, VarId a, VarId b) {
  return remap(m, VarMap().map(a, b).map(b, a));
}

template <class S>
MatPoly<S> substitute(const MatPoly<S>& m, VarId v, const Bound& value) {
  return m.map([&](const Polynomial<S>& p) { return substitute(p, v, value); });
}

template <class S>
MatPoly<S> differentiate(const MatPoly<S>& m, VarId v, int order = 1) {
  return m.map([&](const Polynomial<S>& p) { return differentiate(p, v, order); });
}

template <class S>
MatPoly<S> integrate(const MatPoly<S>& m, VarId v, const Bound& lo, const Bound& hi) {
  return m.map([&](const Polynomial<S>& p) { return integrate(p, v, lo, hi); });
}

template <class S>
bool has_var(const MatPoly<S>& m, VarId v) {
  for (const auto& p : m.entries())
    if (has_var(p, v)) return true;
  return false;
}

template <class S>
int max_degree(const MatPoly<S>& m, VarId v) {
  int d = 0;
  for (const auto& p : m.entries()) d = std::max(d, max_degree(p, v));
  return d;
}

inline MatPoly<double> to_double(const MatPoly<Rational>& m) {
  return m.map([](const Polynomial<Rational>& p) { return to_double(p); });
}

template <class S>
std::string to_string(const MatPoly<S>& m) {
  std::string out = "[";
  for (int i = 0; i < m.rows(); ++i) {
    if (i) out += "; ";
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out += ", ";
      out += to_string(m(i, j));
    }
  }
  return out + "]";
}

// Parses "[p11, p12; p21, p22]" (a bare polynomial is read as 1x1).
MatPoly<Rational> parse_matpoly(std::string_view text,
                                const std::map<std::string, Rational>& params = {});

}  // namespace pie
