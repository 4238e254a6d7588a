#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pie/poly.hpp"

namespace pie {

// Sparse affine form c0 + sum_v w_v x_v over decision-variable ids. Products
// with plain doubles are allowed; products of two affine forms are not.
struct Affine {
  double c0 = 0.0;
  std::vector<std::pair<int, double>> w;  // sorted by id, no zero weights

  Affine() = default;
  Affine(double c) : c0(c) {}
  static Affine variable(int id, double weight = 1.0) {
    Affine a;
    if (weight != 0.0) a.w.emplace_back(id, weight);
    return a;
  }

  bool is_zero() const { return c0 == 0.0 && w.empty(); }
  bool is_constant() const { return w.empty(); }
  bool operator==(const Affine&) const = default;

  double eval(const std::vector<double>& x) const {
    double s = c0;
    for (const auto& [id, v] : w) s += v * x[id];
    return s;
  }
};

Affine operator+(const Affine& a, const Affine& b);
Affine operator-(const Affine& a, const Affine& b);
Affine operator-(const Affine& a);
Affine operator*(const Affine& a, double s);
inline Affine operator*(double s, const Affine& a) { return a * s; }

template <>
struct ScalarTraits<Affine> {
  static bool is_zero(const Affine& x) { return x.is_zero(); }
  static Affine one() { return Affine(1.0); }
  static Affine from_rational(const Rational& r) { return Affine(to_double(r)); }
  static Affine scale(const Affine& x, const Rational& r) { return x * to_double(r); }
  static bool negative(const Affine&) { return false; }
  static std::string str(const Affine& x);
  static Affine sum(const std::pair<Monomial, Affine>* b, const std::pair<Monomial, Affine>* e);
};

using AffinePoly = Polynomial<Affine>;

Polynomial<double> evaluate_affine(const AffinePoly& p, const std::vector<double>& x);
MatPoly<double> evaluate_affine(const MatPoly<Affine>& m, const std::vector<double>& x);

}  // namespace pie
