#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pie/pialg.hpp"
#include "pie/poly.hpp"

namespace pie {

enum class Mode { Rational, Float };

// Boundary matrices of one axis. B[j][k], C[j][k] are n x n; row j indexes the
// constraint, column k the derivative order.
struct AxisBCSpec {
  std::vector<std::vector<MatrixQ>> B, C;
};

struct PDESpec {
  std::string name;
  std::vector<Interval> box;
  int n = 1;
  std::vector<int> delta;
  std::map<std::vector<int>, MatPoly<Rational>> terms;  // alpha -> A_alpha(s)
  std::vector<AxisBCSpec> bcs;
  std::map<std::string, Rational> params;

  int dim() const { return static_cast<int>(box.size()); }
  // Fills absent BC blocks with zeros and checks shapes and index ranges.
  void validate();
};

PDESpec make_spec(std::vector<Interval> box, int n, std::vector<int> delta);

struct AxisBC {
  int axis = 0;
  int d = 0, n = 1;
  Interval iv;
  MatrixQ Ha, Hb;
};

AxisBC axis_bc(const PDESpec& spec, int axis);

// Block upper-triangular Q(z) with (j,k) block z^(k-j)/(k-j)! I_n.
template <class T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> build_Q(const T& z, int d, int n) {
  using M = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  M q = M::Zero(d * n, d * n);
  T term = T(1);
  for (int p = 0; p < d; ++p) {
    if (p > 0) term = term * z / T(p);
    for (int j = 0; j + p < d; ++j)
      for (int i = 0; i < n; ++i) q(j * n + i, (j + p) * n + i) = term;
  }
  return q;
}

// Exact solve of A X = B by Gauss-Jordan elimination; nullopt if singular.
std::optional<MatrixQ> solve_exact(const MatrixQ& A, const MatrixQ& B);
Rational determinant_exact(MatrixQ A);

// Reciprocal 2-norm condition number.
double rcond(const Eigen::MatrixXd& m);
inline constexpr double kRcondThreshold = 1e-10;

bool check_admissible(const AxisBC& bc, Mode mode = Mode::Rational);

// K = (Ha + Hb Q(b-a))^-1 Hb; throws std::domain_error if inadmissible.
MatrixQ compute_K(const AxisBC& bc);
Eigen::MatrixXd compute_K_float(const AxisBC& bc);

struct ConsistencyWitness {
  int i, j;     // axes, 1-based
  int k, p;     // block of K^i, 1-based
  int l, q;     // block of K^j, 1-based
  MatrixQ Kikp, Kjlq;
};

struct ConsistencyResult {
  bool consistent = true;
  std::optional<ConsistencyWitness> witness;
};

ConsistencyResult check_consistent(const std::vector<MatrixQ>& K, int n);
ConsistencyResult check_consistent(const PDESpec& spec);

// Spec file reader. `overrides` replaces declared parameter values.
PDESpec parse_spec(const std::string& text, const std::map<std::string, Rational>& overrides = {});
PDESpec load_spec(const std::string& path, const std::map<std::string, Rational>& overrides = {});

}  // namespace pie
