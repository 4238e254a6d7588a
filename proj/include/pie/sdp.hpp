#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pie::sdp {

enum class BlockKind { PSD, FREE };

struct Block {
  BlockKind kind = BlockKind::PSD;
  int size = 0;
};

// One nonzero of a constraint or objective matrix. For PSD blocks i <= j
// (0-based) and the entry stands for both (i,j) and (j,i), so that
// <A, X> = sum_p A_pp X_pp + 2 sum_{p<q} A_pq X_pq. For FREE blocks i == j is
// the variable index.
struct Entry {
  int row;  // constraint index; ignored for objective entries
  int block;
  int i, j;
  double v;
};

// min <C, X> s.t. <A_r, X> = b_r, X in PSD^n1 x ... x R^f.
struct SDPProblem {
  std::vector<Block> blocks;
  std::vector<double> b;
  std::vector<Entry> A;
  std::vector<Entry> C;

  int num_constraints() const { return static_cast<int>(b.size()); }
  int add_block(BlockKind kind, int size) {
    blocks.push_back({kind, size});
    return static_cast<int>(blocks.size()) - 1;
  }
  int add_row(double rhs) {
    b.push_back(rhs);
    return static_cast<int>(b.size()) - 1;
  }
  // Accumulates into row r; (i, j) is reordered to the upper triangle.
  void add(int r, int block, int i, int j, double v);
  void add_objective(int block, int i, int j, double v);
  void validate() const;
  // Merges duplicate entries and drops exact zeros; order is (row, block, i, j).
  void normalize();
};

enum class Status { Feasible, Infeasible, Inaccurate, MaxIter };
std::string to_string(Status s);

struct Options {
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  int max_iter = 200;
  double step = 0.98;
  int verbose = 0;
  // Pure feasibility problems are solved as min t s.t. A(X + tI) = b.
  bool phase_one = true;
  // Stop as soon as a primal-feasible iterate has objective below this.
  double stop_below = -std::numeric_limits<double>::infinity();
  // Problems whose dense m x m working matrices would exceed this are refused.
  double max_bytes = 4e9;
  // Applies PIE_SOLVER_TOL / PIE_SOLVER_MAXITER / PIE_SOLVER_VERBOSE / PIE_SOLVER_MAX_BYTES.
  static Options from_env(Options base);
  static Options from_env() { return from_env(Options{}); }
};

struct SDPSolution {
  Status status = Status::Inaccurate;
  std::vector<Eigen::MatrixXd> X;  // per block; FREE blocks are f x 1
  Eigen::VectorXd y;
  double primal_residual = 0;  // max |<A_r,X> - b_r| on the original rows
  double dual_residual = 0;
  double gap = 0;
  double objective = 0;
  double min_eig = 0;  // over PSD blocks
  int iterations = 0;
  int rows_dropped = 0;  // dependent rows removed in presolve
  std::string message;
  std::vector<std::string> log;
};

SDPSolution solve(const SDPProblem& p, const Options& opts = {});

// Independent checks of a returned point.
double max_equality_residual(const SDPProblem& p, const std::vector<Eigen::MatrixXd>& X);
double min_psd_eigenvalue(const SDPProblem& p, const std::vector<Eigen::MatrixXd>& X);

// Farkas ray for primal infeasibility: b'y > 0 with -A'y in the dual cone.
// Returns the normalized violation (0 for an exact certificate).
double infeasibility_certificate_error(const SDPProblem& p, const Eigen::VectorXd& y);

// SDPA sparse text format. PSD blocks keep their size, FREE blocks of size f
// become diagonal blocks of size 2f (x = x+ - x-) announced by a "*free-pairs"
// comment so that read_sdpa restores them.
void write_sdpa(const SDPProblem& p, std::ostream& out);
void write_sdpa(const SDPProblem& p, const std::string& path);
SDPProblem read_sdpa(std::istream& in);
SDPProblem read_sdpa(const std::string& path);

// FNV-1a over the normalized constraint data (bitwise on doubles).
std::uint64_t constraint_hash(const SDPProblem& p);

}  // namespace pie::sdp
