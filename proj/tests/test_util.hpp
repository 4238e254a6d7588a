#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pie/pdemodel.hpp"
#include "pie/pialg.hpp"
#include "pie/poly.hpp"

namespace testutil {

inline pie::Rational random_rational(std::mt19937& rng) {
  std::uniform_int_distribution<int> num(-6, 6), den(1, 4);
  return pie::Rational(num(rng), den(rng));
}

inline pie::Polynomial<pie::Rational> random_poly_in(std::mt19937& rng, const std::vector<pie::VarId>& vars,
                                                     int degree, int terms = 5) {
  using namespace pie;
  std::vector<Polynomial<Rational>::Term> t;
  std::uniform_int_distribution<int> pick(0, static_cast<int>(vars.size()) - 1);
  std::uniform_int_distribution<int> deg(0, degree);
  for (int k = 0; k < terms; ++k) {
    Monomial m;
    int d = deg(rng);
    for (int j = 0; j < d; ++j) {
      auto v = vars[pick(rng)];
      m.set(v, m.exponent(v) + 1);
    }
    t.emplace_back(m, random_rational(rng));
  }
  return Polynomial<Rational>::from_terms(std::move(t));
}

// Random polynomial in s_i, t_i for the first `axes` axes.
inline pie::Polynomial<pie::Rational> random_poly(std::mt19937& rng, int axes, int degree, int terms = 5) {
  std::vector<pie::VarId> vars;
  for (int i = 0; i < axes; ++i) {
    vars.push_back(pie::s_var(i));
    vars.push_back(pie::theta_var(i));
  }
  return random_poly_in(rng, vars, degree, terms);
}

inline pie::MatPoly<pie::Rational> random_matpoly(std::mt19937& rng, int r, int c, int axes, int degree) {
  pie::MatPoly<pie::Rational> m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = random_poly(rng, axes, degree, 3);
  return m;
}

inline std::vector<pie::Interval> unit_box(int N) { return std::vector<pie::Interval>(N); }

// Random operator whose cells respect the variable support of their kind.
inline pie::NDPIOperator<pie::Rational> random_op(std::mt19937& rng, const std::vector<pie::Interval>& box, int m,
                                                  int n, int degree, double density = 0.7) {
  using namespace pie;
  const int N = static_cast<int>(box.size());
  NDPIOperator<Rational> op(box, m, n);
  std::bernoulli_distribution keep(density);
  for (int c = 0; c < num_cells(N); ++c) {
    if (!keep(rng)) continue;
    std::vector<VarId> vars;
    for (int i = 0; i < N; ++i) {
      vars.push_back(s_var(i));
      if (cell_kind(c, i) != CellKind::MULT) vars.push_back(theta_var(i));
    }
    MatPoly<Rational> cell(m, n);
    for (int r = 0; r < m; ++r)
      for (int k = 0; k < n; ++k) cell(r, k) = random_poly_in(rng, vars, degree, 3);
    op.cells[c] = cell;
  }
  return op;
}

inline pie::PI1Params<pie::Rational> random_pi1(std::mt19937& rng, int axis, pie::Interval iv, int m, int n,
                                                int degree) {
  using namespace pie;
  auto p = PI1Params<Rational>::zero(axis, iv, m, n);
  for (int r = 0; r < m; ++r)
    for (int k = 0; k < n; ++k) {
      p.R0(r, k) = random_poly_in(rng, {s_var(axis)}, degree, 2);
      p.R1(r, k) = random_poly_in(rng, {s_var(axis), theta_var(axis)}, degree, 3);
      p.R2(r, k) = random_poly_in(rng, {s_var(axis), theta_var(axis)}, degree, 3);
    }
  return p;
}

inline std::vector<pie::Polynomial<pie::Rational>> random_polyvec(std::mt19937& rng, int n, int N, int degree) {
  std::vector<pie::VarId> vars;
  for (int i = 0; i < N; ++i) vars.push_back(pie::s_var(i));
  std::vector<pie::Polynomial<pie::Rational>> v;
  for (int k = 0; k < n; ++k) v.push_back(random_poly_in(rng, vars, degree, 4));
  return v;
}

// Random admissible spec with diagonal BC blocks (hence consistent): every
// state component carries its own random scalar boundary conditions.
inline pie::PDESpec random_spec(std::mt19937& rng, int N, int n, const std::vector<int>& delta, bool random_box = false) {
  using namespace pie;
  std::vector<Interval> box(N);
  std::uniform_int_distribution<int> ends(-2, 2), width(1, 3);
  if (random_box)
    for (auto& iv : box) {
      iv.a = Rational(ends(rng), 2);
      iv.b = iv.a + Rational(width(rng), 2);
    }
  PDESpec spec = make_spec(box, n, delta);
  std::uniform_int_distribution<int> small(-2, 2);
  std::bernoulli_distribution sparse(0.5);
  for (int i = 0; i < N; ++i) {
    const int d = delta[i];
    for (;;) {
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
          spec.bcs[i].B[j][k] = MatrixQ::Zero(n, n);
          spec.bcs[i].C[j][k] = MatrixQ::Zero(n, n);
          for (int c = 0; c < n; ++c) {
            if (sparse(rng)) spec.bcs[i].B[j][k](c, c) = small(rng);
            if (sparse(rng)) spec.bcs[i].C[j][k](c, c) = small(rng);
          }
        }
      if (d == 0 || check_admissible(axis_bc(spec, i))) break;
    }
  }
  return spec;
}

// 20-point Gauss-Legendre rule, computed independently of the library.
inline double gauss_integral(const std::function<double(double)>& f, double a, double b) {
  const int n = 20;
  double sum = 0;
  for (int i = 1; i <= n; ++i) {
    double x = std::cos(M_PI * (i - 0.25) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1);
    double w = 2 / ((1 - x * x) * dp * dp);
    sum += w * f(0.5 * (b - a) * x + 0.5 * (a + b));
  }
  return 0.5 * (b - a) * sum;
}

}  // namespace testutil
