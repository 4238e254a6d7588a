#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pie/affine.hpp"
#include "pie/pialg.hpp"
#include "pie/pieconvert.hpp"
#include "pie/sdp.hpp"

namespace pie::lpi {

inline int mu(int d) { return d * d + 4 * d + 3; }

// Row of the univariate basis: s^ps theta^pt placed in one part.
struct AxisElement {
  CellKind kind;
  int ps, pt;
};

// Kernel monomials s^a theta^b with a + b <= d (Total, mu(d) elements per
// axis) or with a, b <= d each (Tensor).
enum class BasisKind : std::uint8_t { Total, Tensor };

// Z_d on every axis and its tensor product. Elements are numbered with axis 0
// varying fastest.
struct MonomialBasis {
  int degree = 0;
  BasisKind kind = BasisKind::Total;
  int dim = 0;
  std::vector<AxisElement> axis;

  int mu() const { return static_cast<int>(axis.size()); }
  int size() const;
  std::vector<int> digits(int e) const;
  int cell(int e) const;
  int mult_mask(int e) const;
  Monomial monomial(int e) const;
};

MonomialBasis build_basis(int d, int dim, BasisKind kind = BasisKind::Total);

// (I_n (x) Z) restricted to `elems` (all elements when empty): an
// (n |elems|) x n operator, rows ordered (i, element).
NDPIOperator<Rational> basis_operator(const MonomialBasis& B, const std::vector<Interval>& box, int n,
                                      const std::vector<int>& elems = {});

// M[P](I_n (x) Z): entry (i, j) of the cell of element e carries variable
// first_var + (i n + j) |elems| + position of e.
NDPIOperator<Affine> parameterize_P(const MonomialBasis& B, const std::vector<Interval>& box, int n,
                                    int first_var = 0, const std::vector<int>& elems = {});

// Variable id of entry (p, q) of a symmetric decision matrix.
inline int sym_index(int p, int q) { return p <= q ? q * (q + 1) / 2 + p : p * (p + 1) / 2 + q; }

// (I_n (x) Z)* M[X] (I_n (x) Z) with X symmetric, X_pq = variable first_var + sym_index(p, q).
NDPIOperator<Affine> gram_operator(const MonomialBasis& B, const std::vector<Interval>& box, int n,
                                   int first_var = 0, const std::vector<int>& elems = {});

// Basis trimming. `structural` drops only elements whose Gram contribution is
// forced to vanish, so it never changes feasibility.
struct Trim {
  bool structural = true;
  bool kernel_free_P = false;
  bool multiplier_free_R = false;
  bool symmetric_kernels = false;
};

struct LPIOptions {
  double epsilon = 0.1;
  int degree = 1;
  int degree_prime = -1;  // < 0: smallest d' with 2d'+1 >= the LHS degree
  BasisKind gram_basis = BasisKind::Tensor;
  Trim trim;
};

enum class Group : std::uint8_t { Symmetry = 0, Positivity = 1, Derivative = 2 };
std::string to_string(Group g);

struct RowKey {
  Group group;
  int cell;
  Monomial mono;
  int i, j;
};

struct StabilitySDP {
  sdp::SDPProblem problem;  // blocks: 0 = P (free), 1 = R, 2 = Q
  std::vector<RowKey> rows;
  double k = 0, epsilon = 0;
  int d = 0, dprime = 0, n = 0, dim = 0;
  int num_P = 0, size_R = 0, size_Q = 0;
};

// k-independent part of the assembly; assemble(k) only rescales one group.
class Assembler {
 public:
  Assembler(const PIESystem<Rational>& sys, LPIOptions opt);
  Assembler(const NDPIOperator<Rational>& T, const NDPIOperator<Rational>& A, LPIOptions opt);

  StabilitySDP assemble(double k) const;

  const LPIOptions& options() const { return opt_; }
  int degree_prime() const { return dprime_; }
  int min_degree_prime() const { return min_dprime_; }
  int lhs_degree() const { return lhs_degree_; }
  const MonomialBasis& basis_P() const { return BP_; }
  const MonomialBasis& basis_gram() const { return BG_; }
  const std::vector<int>& elems_P() const { return eP_; }
  const std::vector<int>& elems_R() const { return eR_; }
  const std::vector<int>& elems_Q() const { return eQ_; }
  int num_P_vars() const { return nPvars_; }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const NDPIOperator<Rational>& T() const { return T_; }
  const NDPIOperator<Rational>& A() const { return A_; }

  // P operator from the free block of a solution.
  NDPIOperator<double> recover_P(const std::vector<double>& x) const;
  NDPIOperator<double> recover_P(const sdp::SDPSolution& sol) const;

 private:
  void build();

  NDPIOperator<Rational> T_, A_;
  LPIOptions opt_;
  int n_ = 0, N_ = 0;
  int dprime_ = 0, min_dprime_ = 0, lhs_degree_ = 0;
  MonomialBasis BP_, BG_;
  std::vector<int> eP_, eR_, eQ_;
  std::vector<int> var_of_;  // P basis slot (i, j, e) -> variable id
  int nPvars_ = 0;
  std::vector<RowKey> rows_;
  std::vector<double> rhs_;
  std::vector<sdp::Entry> base_, kpart_;
};

// Convenience wrapper: one-shot assembly at a fixed k.
StabilitySDP assemble(const NDPIOperator<Rational>& T, const NDPIOperator<Rational>& A, double k, double epsilon,
                      int d, int dprime = -1);

// Quadrature re-check of the operator inequalities on random unit-norm v.
struct Replay {
  double positivity_margin = 0;  // min <v, T*P v> - eps^2 |Tv|^2
  double derivative_max = 0;     // max <v, (P*A + A*P + 2k P*T) v>
  double symmetry_error = 0;     // max |<v, (P*T - T*P) v'>|
  int samples = 0;
  bool ok = false;
};

Replay replay_certificate(const NDPIOperator<double>& T, const NDPIOperator<double>& A,
                          const NDPIOperator<double>& P, double k, double epsilon, int samples = 50,
                          unsigned seed = 1, int q = 12);

struct StabilityResult {
  bool feasible = false;  // solver Feasible and replay passed
  double k = 0;
  sdp::SDPSolution solution;
  Replay replay;
  double gain = 0;  // sqrt(|P*T|) / eps, 0 when not feasible
  double seconds_assemble = 0, seconds_solve = 0;
  int rows = 0, num_P = 0, size_R = 0, size_Q = 0;
};

struct CheckOptions {
  sdp::Options solver;
  bool replay = true;
  bool gain = true;
  int samples = 50;
  unsigned seed = 1;
};

StabilityResult check_stability(const Assembler& as, double k, const CheckOptions& opt = {});

struct BisectStep {
  double k;
  sdp::Status status;
  bool certified;
  int iterations;
  double seconds;
  double primal_residual = 0, min_eig = 0;
  bool replay_ok = false;
};

struct BisectResult {
  double k_max = 0;
  bool any_feasible = false;  // false: not even k_lo was certified
  bool hit_upper = false;     // k_hi itself was certified
  std::vector<BisectStep> history;
  StabilityResult best;  // last certified check
};

class NonMonotoneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bisection on k assuming downward-closed feasibility. Throws NonMonotoneError
// when a certified k lies above one the solver proved infeasible.
BisectResult bisect_rate(const Assembler& as, double k_lo, double k_hi, double tol, const CheckOptions& opt = {},
                         const std::function<void(const BisectStep&)>& progress = {});

}  // namespace pie::lpi
