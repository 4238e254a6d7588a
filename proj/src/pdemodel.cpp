#include "pie/pdemodel.hpp"

#include <Eigen/SVD>
#include <stdexcept>

namespace pie {

PDESpec make_spec(std::vector<Interval> box, int n, std::vector<int> delta) {
  PDESpec s;
  s.box = std::move(box);
  s.n = n;
  s.delta = std::move(delta);
  s.bcs.resize(s.box.size());
  s.validate();
  return s;
}

void PDESpec::validate() {
  const int N = dim();
  if (N < 1 || N > kMaxAxes) throw std::invalid_argument("dimension must be between 1 and " + std::to_string(kMaxAxes));
  if (n < 1) throw std::invalid_argument("state size must be positive");
  if (static_cast<int>(delta.size()) != N) throw std::invalid_argument("order vector length differs from dimension");
  for (int i = 0; i < N; ++i) {
    if (!(box[i].a < box[i].b)) throw std::invalid_argument("axis " + std::to_string(i + 1) + ": need a < b");
    if (delta[i] < 0) throw std::invalid_argument("negative derivative order");
  }
  for (const auto& [alpha, A] : terms) {
    if (static_cast<int>(alpha.size()) != N) throw std::invalid_argument("term multi-index has wrong length");
    for (int i = 0; i < N; ++i)
      if (alpha[i] < 0 || alpha[i] > delta[i]) throw std::invalid_argument("term multi-index exceeds the order vector");
    if (A.rows() != n || A.cols() != n) throw std::invalid_argument("term coefficient must be n x n");
    for (int i = 0; i < kMaxAxes; ++i)
      if (has_var(A, theta_var(i)) || has_var(A, eta_var(i)) || (i >= N && has_var(A, s_var(i))))
        throw std::invalid_argument("term coefficients may only depend on s1..sN");
  }
  bcs.resize(N);
  for (int i = 0; i < N; ++i) {
    int d = delta[i];
    auto fix = [&](std::vector<std::vector<MatrixQ>>& g) {
      if (static_cast<int>(g.size()) > d) throw std::invalid_argument("boundary row index out of range");
      g.resize(d);
      for (auto& row : g) {
        if (static_cast<int>(row.size()) > d) throw std::invalid_argument("boundary derivative index out of range");
        row.resize(d);
        for (auto& m : row) {
          if (m.size() == 0) m = MatrixQ::Zero(n, n);
          if (m.rows() != n || m.cols() != n) throw std::invalid_argument("boundary matrix must be n x n");
        }
      }
    };
    fix(bcs[i].B);
    fix(bcs[i].C);
  }
}

AxisBC axis_bc(const PDESpec& spec, int axis) {
  AxisBC bc;
  bc.axis = axis;
  bc.d = spec.delta[axis];
  bc.n = spec.n;
  bc.iv = spec.box[axis];
  int m = bc.d * bc.n;
  bc.Ha = MatrixQ::Zero(m, m);
  bc.Hb = MatrixQ::Zero(m, m);
  const auto& g = spec.bcs[axis];
  for (int j = 0; j < bc.d; ++j)
    for (int k = 0; k < bc.d; ++k) {
      bc.Ha.block(j * bc.n, k * bc.n, bc.n, bc.n) = g.B[j][k];
      bc.Hb.block(j * bc.n, k * bc.n, bc.n, bc.n) = g.C[j][k];
    }
  return bc;
}

std::optional<MatrixQ> solve_exact(const MatrixQ& A, const MatrixQ& B) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n) throw std::invalid_argument("solve_exact: dimension mismatch");
  MatrixQ M(n, n + B.cols());
  M << A, B;
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    while (piv < n && M(piv, c) == 0) ++piv;
    if (piv == n) return std::nullopt;
    if (piv != c) M.row(piv).swap(M.row(c));
    Rational inv = Rational(1) / M(c, c);
    M.row(c) *= inv;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c || M(r, c) == 0) continue;
      Rational f = M(r, c);
      M.row(r) -= f * M.row(c);
    }
  }
  return MatrixQ(M.rightCols(B.cols()));
}

Rational determinant_exact(MatrixQ M) {
  const Eigen::Index n = M.rows();
  Rational det = 1;
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    while (piv < n && M(piv, c) == 0) ++piv;
    if (piv == n) return 0;
    if (piv != c) {
      M.row(piv).swap(M.row(c));
      det = -det;
    }
    det *= M(c, c);
    for (Eigen::Index r = c + 1; r < n; ++r) {
      if (M(r, c) == 0) continue;
      Rational f = M(r, c) / M(c, c);
      M.row(r) -= f * M.row(c);
    }
  }
  return det;
}

double rcond(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(0) == 0.0) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

namespace {

MatrixQ boundary_matrix(const AxisBC& bc) {
  if (bc.Ha.rows() != bc.Ha.cols() || bc.Hb.rows() != bc.Hb.cols() || bc.Ha.rows() != bc.Hb.rows() ||
      bc.Ha.rows() != bc.d * bc.n)
    throw std::invalid_argument("boundary matrices have inconsistent dimensions");
  return bc.Ha + bc.Hb * build_Q<Rational>(bc.iv.b - bc.iv.a, bc.d, bc.n);
}

}  // namespace

bool check_admissible(const AxisBC& bc, Mode mode) {
  MatrixQ H = boundary_matrix(bc);
  if (bc.d == 0) return true;
  if (mode == Mode::Rational) return determinant_exact(H) != 0;
  return rcond(to_double(H)) > kRcondThreshold;
}

MatrixQ compute_K(const AxisBC& bc) {
  auto K = solve_exact(boundary_matrix(bc), bc.Hb);
  if (!K) throw std::domain_error("axis " + std::to_string(bc.axis + 1) + ": boundary conditions are not admissible");
  return *K;
}

Eigen::MatrixXd compute_K_float(const AxisBC& bc) {
  Eigen::MatrixXd H = to_double(boundary_matrix(bc));
  if (bc.d > 0 && rcond(H) <= kRcondThreshold)
    throw std::domain_error("axis " + std::to_string(bc.axis + 1) + ": boundary conditions are not admissible");
  return H.fullPivLu().solve(to_double(bc.Hb));
}

ConsistencyResult check_consistent(const std::vector<MatrixQ>& K, int n) {
  const int N = static_cast<int>(K.size());
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      int di = static_cast<int>(K[i].rows()) / n, dj = static_cast<int>(K[j].rows()) / n;
      for (int k = 0; k < di; ++k)
        for (int p = 0; p < di; ++p) {
          MatrixQ X = K[i].block(k * n, p * n, n, n);
          for (int l = 0; l < dj; ++l)
            for (int q = 0; q < dj; ++q) {
              MatrixQ Y = K[j].block(l * n, q * n, n, n);
              if (MatrixQ(X * Y) != MatrixQ(Y * X))
                return {false, ConsistencyWitness{i + 1, j + 1, k + 1, p + 1, l + 1, q + 1, X, Y}};
            }
        }
    }
  return {};
}

ConsistencyResult check_consistent(const PDESpec& spec) {
  std::vector<MatrixQ> K;
  for (int i = 0; i < spec.dim(); ++i) K.push_back(compute_K(axis_bc(spec, i)));
  return check_consistent(K, spec.n);
}

}  // namespace pie
