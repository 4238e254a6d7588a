#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "pie/pdemodel.hpp"
#include "pie/pialg.hpp"

namespace pie {

template <class S>
using PolyVec = std::vector<Polynomial<S>>;

// Symbolic action of a PI operator on a vector of polynomials in s.
template <class S>
PolyVec<S> apply_exact(const NDPIOperator<S>& op, const PolyVec<S>& v) {
  if (static_cast<int>(v.size()) != op.cols) throw std::invalid_argument("apply_exact: vector length mismatch");
  const int N = op.dim();
  for (const auto& p : v)
    for (int i = 0; i < kMaxAxes; ++i)
      if (has_var(p, theta_var(i)) || has_var(p, eta_var(i)) || (i >= N && has_var(p, s_var(i))))
        throw std::invalid_argument("apply_exact: input must depend on s1..sN only");
  PolyVec<S> out(op.rows);
  for (int c = 0; c < num_cells(N); ++c) {
    const auto& cell = op.cells[c];
    if (cell.is_zero()) continue;
    VarMap vm;
    for (int i = 0; i < N; ++i)
      if (cell_kind(c, i) != CellKind::MULT) vm.map(s_var(i), theta_var(i));
    PolyVec<S> vr(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) vr[j] = remap(v[j], vm);
    for (int r = 0; r < op.rows; ++r) {
      Polynomial<S> acc;
      for (int j = 0; j < op.cols; ++j)
        if (!cell(r, j).is_zero() && !vr[j].is_zero()) acc += cell(r, j) * vr[j];
      for (int i = 0; i < N && !acc.is_zero(); ++i) {
        auto k = cell_kind(c, i);
        if (k == CellKind::LOWER) acc = integrate(acc, theta_var(i), op.box[i].a, s_var(i));
        else if (k == CellKind::UPPER) acc = integrate(acc, theta_var(i), s_var(i), op.box[i].b);
      }
      out[r] += acc;
    }
  }
  return out;
}

template <class S>
PolyVec<S> differentiate(const PolyVec<S>& v, const std::vector<int>& alpha) {
  PolyVec<S> out = v;
  for (auto& p : out)
    for (std::size_t i = 0; i < alpha.size(); ++i) p = differentiate(p, s_var(static_cast<int>(i)), alpha[i]);
  return out;
}

struct BCResidual {
  int axis;  // 0-based
  int row;   // constraint index j
  PolyVec<Rational> value;
  bool is_zero() const {
    for (const auto& p : value)
      if (!p.is_zero()) return false;
    return true;
  }
};

// One entry per boundary row: sum_k B_jk (d^k u)(a) + C_jk (d^k u)(b).
std::vector<BCResidual> bc_residual(const PDESpec& spec, const PolyVec<Rational>& u);
bool bc_satisfied(const PDESpec& spec, const PolyVec<Rational>& u);

// ---------------------------------------------------------------------------
// Quadrature.

struct GaussRule {
  std::vector<double> x, w;  // on [-1, 1]
};

const GaussRule& gauss_legendre(int q);

// Evaluates a matrix polynomial at points given by the 12 variable slots.
class MatPolyEvaluator {
 public:
  MatPolyEvaluator() = default;
  explicit MatPolyEvaluator(const MatPoly<double>& m);
  bool is_zero() const { return terms_.empty(); }
  void eval(const std::array<double, kNumSlots>& x, Eigen::MatrixXd& out) const;

 private:
  struct Term {
    double c;
    int entry;
    std::vector<std::pair<int, int>> factors;  // (slot, power)
  };
  int rows_ = 0, cols_ = 0;
  std::vector<Term> terms_;
};

// Tensor Gauss-Legendre grid on a box; values[k] is an m x p sample matrix at
// node k (p columns = p functions sampled at once). Axis 1 varies fastest.
struct QuadGrid {
  std::vector<Interval> box;
  int q = 0;
  std::vector<std::vector<double>> nodes, weights;
  std::vector<Eigen::MatrixXd> values;

  int dim() const { return static_cast<int>(box.size()); }
  int size() const;
  std::vector<double> point(int k) const;
  double weight(int k) const;
};

QuadGrid make_grid(const std::vector<Interval>& box, int q);

// f(x) returns an m x p matrix for a point x (length N).
using GridFunction = std::function<Eigen::MatrixXd(const std::vector<double>&)>;

QuadGrid sample(const std::vector<Interval>& box, int q, const GridFunction& f);

// Applies op to f at every node of the order-q grid: multipliers pointwise,
// kernels by order-q Gauss rules on [a_i, s_i] and [s_i, b_i] per output node.
QuadGrid apply_quadrature(const NDPIOperator<double>& op, const GridFunction& f, int q = 10);

// Matrix of L2 inner products between the columns of two sampled grids.
Eigen::MatrixXd inner_products(const QuadGrid& u, const QuadGrid& v);
double inner(const QuadGrid& u, const QuadGrid& v);

GridFunction as_grid_function(const PolyVec<double>& v);

struct NormEstimate {
  double value = 0;
  bool converged = false;
  int iterations = 0;
};

// Operator 2-norm by power iteration on G^T G, with G the Galerkin matrix of
// op on an orthonormal Legendre basis of q polynomials per axis.
NormEstimate opnorm_estimate(const NDPIOperator<double>& op, int q = 10, int iters = 1000);

// ---------------------------------------------------------------------------
// Spec-level suite: for random polynomial v of degree <= `degree`,
// D^delta(T v) = v, T v meets the boundary conditions, and the per-alpha
// operators return D^alpha(T v), all in exact arithmetic; plus the adjoint
// identity <T v, w> = <v, T* w> under quadrature.
struct SuiteReport {
  int trials = 0;
  int inverse_failures = 0;
  int bc_failures = 0;
  int derivative_failures = 0;
  double adjoint_discrepancy = 0;  // max |<Tv,w> - <v,T*w>| / (1 + |<Tv,w>|)
  bool ok() const {
    return inverse_failures == 0 && bc_failures == 0 && derivative_failures == 0 && adjoint_discrepancy <= 1e-9;
  }
};

SuiteReport run_suite(const PDESpec& spec, unsigned seed, int trials = 10, int degree = 3);

}  // namespace pie
