#pragma once

#include <vector>

#include "pie/pdemodel.hpp"
#include "pie/pialg.hpp"

namespace pie {

template <class S>
using MatrixS = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
struct PIESystem {
  NDPIOperator<S> T, A;
  std::vector<int> delta;
  int n = 1;
};

namespace detail {

// Row vector of blocks z^k/k! I_n (k = 0..d-1), differentiated j times in s,
// and column vector of blocks z^(d-1-k)/(d-1-k)! I_n.
template <class S>
MatPoly<S> first_row(VarId s, const Rational& a, int d, int n, int j) {
  MatPoly<S> e(n, d * n);
  auto z = Polynomial<S>::variable(s) - constant_poly<S>(a);
  for (int k = 0; k < d; ++k) {
    Polynomial<S> p(ScalarTraits<S>::one());
    for (int t = 0; t < k; ++t) p = p * z;
    p = differentiate(scale(p, Rational(1) / factorial(k)), s, j);
    for (int i = 0; i < n; ++i) e(i, k * n + i) = p;
  }
  return e;
}

template <class S>
MatPoly<S> last_col(VarId theta, const Rational& b, int d, int n) {
  MatPoly<S> e(d * n, n);
  auto z = constant_poly<S>(b) - Polynomial<S>::variable(theta);
  for (int k = 0; k < d; ++k) {
    int pw = d - 1 - k;
    Polynomial<S> p(ScalarTraits<S>::one());
    for (int t = 0; t < pw; ++t) p = p * z;
    p = scale(p, Rational(1) / factorial(pw));
    for (int i = 0; i < n; ++i) e(k * n + i, i) = p;
  }
  return e;
}

template <class S>
MatPoly<S> to_matpoly(const MatrixS<S>& K) {
  MatPoly<S> m(static_cast<int>(K.rows()), static_cast<int>(K.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = Polynomial<S>(K(i, j));
  return m;
}

}  // namespace detail

// j-th s-derivative of the inverse kernels of d^d on one axis; j = 0 gives T_i,
// j = d the identity.
template <class S>
PI1Params<S> build_Aij(int axis, const MatrixS<S>& K, int d, int j, Interval iv, int n) {
  if (j < 0 || j > d) throw std::invalid_argument("build_Aij: derivative index out of range");
  if (K.rows() != d * n || K.cols() != d * n) throw std::invalid_argument("build_Aij: K has the wrong size");
  if (j == d) return PI1Params<S>::identity(axis, iv, n);
  const VarId s = s_var(axis), th = theta_var(axis);
  auto low_rank = detail::first_row<S>(s, iv.a, d, n, j) * detail::to_matpoly<S>(K) *
                  detail::last_col<S>(th, iv.b, d, n);
  Polynomial<S> volterra(ScalarTraits<S>::one());
  auto diff = Polynomial<S>::variable(s) - Polynomial<S>::variable(th);
  for (int t = 0; t < d - j - 1; ++t) volterra = volterra * diff;
  volterra = scale(volterra, Rational(1) / factorial(d - j - 1));
  auto P = PI1Params<S>::zero(axis, iv, n, n);
  P.R1 = MatPoly<S>::scalar(volterra, n) - low_rank;
  P.R2 = -low_rank;
  return P;
}

template <class S>
PI1Params<S> build_T1(int axis, const MatrixS<S>& K, int d, Interval iv, int n) {
  return build_Aij<S>(axis, K, d, 0, iv, n);
}

// Per-axis K matrices in the requested arithmetic.
template <class S>
std::vector<MatrixS<S>> axis_K(const PDESpec& spec) {
  std::vector<MatrixS<S>> out;
  for (int i = 0; i < spec.dim(); ++i) {
    auto bc = axis_bc(spec, i);
    if constexpr (std::is_same_v<S, Rational>) out.push_back(compute_K(bc));
    else out.push_back(compute_K_float(bc));
  }
  return out;
}

// Product over axes (axis N applied last is leftmost: T_N o ... o T_1).
template <class S>
NDPIOperator<S> axis_product(const std::vector<PI1Params<S>>& factors, const std::vector<Interval>& box) {
  NDPIOperator<S> out = lift(factors.front(), box);
  for (std::size_t i = 1; i < factors.size(); ++i) out = compose_nd(lift(factors[i], box), out);
  return out;
}

// Throws std::domain_error on inadmissible or inconsistent boundary conditions.
template <class S>
PIESystem<S> build_pie(const PDESpec& spec) {
  auto cons = check_consistent(spec);
  if (!cons.consistent) {
    const auto& w = *cons.witness;
    throw std::domain_error("boundary conditions of axes " + std::to_string(w.i) + " and " + std::to_string(w.j) +
                            " are inconsistent (K^" + std::to_string(w.i) + " block (" + std::to_string(w.k) + "," +
                            std::to_string(w.p) + ") does not commute with K^" + std::to_string(w.j) + " block (" +
                            std::to_string(w.l) + "," + std::to_string(w.q) + "))");
  }
  const int N = spec.dim(), n = spec.n;
  auto K = axis_K<S>(spec);
  PIESystem<S> sys;
  sys.delta = spec.delta;
  sys.n = n;

  std::vector<PI1Params<S>> tf;
  for (int i = 0; i < N; ++i) tf.push_back(build_T1<S>(i, K[i], spec.delta[i], spec.box[i], n));
  sys.T = axis_product(tf, spec.box);

  sys.A = NDPIOperator<S>(spec.box, n, n);
  for (const auto& [alpha, Aa] : spec.terms) {
    std::vector<PI1Params<S>> f;
    for (int i = 0; i < N; ++i) f.push_back(build_Aij<S>(i, K[i], spec.delta[i], alpha[i], spec.box[i], n));
    MatPoly<S> M;
    if constexpr (std::is_same_v<S, Rational>) M = Aa;
    else M = to_double(Aa);
    sys.A = sys.A + compose_nd(NDPIOperator<S>::multiplier(spec.box, M), axis_product(f, spec.box));
  }
  return sys;
}

extern template PIESystem<Rational> build_pie<Rational>(const PDESpec&);
extern template PIESystem<double> build_pie<double>(const PDESpec&);

}  // namespace pie
