#include "pie/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <Eigen/Sparse>

namespace pie::sdp {

void SDPProblem::add(int r, int block, int i, int j, double v) {
  if (i > j) std::swap(i, j);
  A.push_back({r, block, i, j, v});
}

void SDPProblem::add_objective(int block, int i, int j, double v) {
  if (i > j) std::swap(i, j);
  C.push_back({-1, block, i, j, v});
}

void SDPProblem::validate() const {
  auto check = [&](const Entry& e, bool objective) {
    if (e.block < 0 || e.block >= static_cast<int>(blocks.size())) throw std::invalid_argument("sdp: block index out of range");
    if (!objective && (e.row < 0 || e.row >= num_constraints())) throw std::invalid_argument("sdp: row index out of range");
    const Block& bl = blocks[e.block];
    if (e.i < 0 || e.j >= bl.size || e.i > e.j) throw std::invalid_argument("sdp: entry index out of range");
    if (bl.kind == BlockKind::FREE && e.i != e.j) throw std::invalid_argument("sdp: free block entries must have i == j");
    if (!std::isfinite(e.v)) throw std::invalid_argument("sdp: non-finite coefficient");
  };
  for (const auto& e : A) check(e, false);
  for (const auto& e : C) check(e, true);
  for (double v : b)
    if (!std::isfinite(v)) throw std::invalid_argument("sdp: non-finite right-hand side");
  for (const auto& bl : blocks)
    if (bl.size < 0) throw std::invalid_argument("sdp: negative block size");
}

namespace {

void merge_entries(std::vector<Entry>& es) {
  std::sort(es.begin(), es.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.row, a.block, a.i, a.j) < std::tie(b.row, b.block, b.i, b.j);
  });
  std::vector<Entry> out;
  for (const auto& e : es) {
    if (!out.empty() && out.back().row == e.row && out.back().block == e.block && out.back().i == e.i &&
        out.back().j == e.j)
      out.back().v += e.v;
    else
      out.push_back(e);
  }
  std::erase_if(out, [](const Entry& e) { return e.v == 0.0; });
  es = std::move(out);
}

}  // namespace

void SDPProblem::normalize() {
  merge_entries(A);
  merge_entries(C);
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Feasible: return "Feasible";
    case Status::Infeasible: return "Infeasible";
    case Status::Inaccurate: return "Inaccurate";
    case Status::MaxIter: return "MaxIter";
  }
  return "?";
}

Options Options::from_env(Options o) {
  if (const char* v = std::getenv("PIE_SOLVER_TOL")) {
    o.tol_feas = o.tol_gap = std::stod(v);
  }
  if (const char* v = std::getenv("PIE_SOLVER_MAXITER")) o.max_iter = std::stoi(v);
  if (const char* v = std::getenv("PIE_SOLVER_VERBOSE")) o.verbose = std::stoi(v);
  if (const char* v = std::getenv("PIE_SOLVER_MAX_BYTES")) o.max_bytes = std::stod(v);
  return o;
}

// ---------------------------------------------------------------------------
// Independent checks.

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double entry_dot(const Entry& e, const MatrixXd& X) {
  return e.i == e.j ? e.v * X(e.i, e.j) : e.v * (X(e.i, e.j) + X(e.j, e.i));
}

double free_value(const Entry& e, const MatrixXd& X) { return e.v * X(e.i, 0); }

}  // namespace

double max_equality_residual(const SDPProblem& p, const std::vector<MatrixXd>& X) {
  std::vector<double> lhs(p.b.size(), 0.0);
  for (const auto& e : p.A) {
    const auto& bl = p.blocks[e.block];
    lhs[e.row] += bl.kind == BlockKind::PSD ? entry_dot(e, X[e.block]) : free_value(e, X[e.block]);
  }
  double r = 0;
  for (std::size_t i = 0; i < lhs.size(); ++i) r = std::max(r, std::abs(lhs[i] - p.b[i]));
  return r;
}

double min_psd_eigenvalue(const SDPProblem& p, const std::vector<MatrixXd>& X) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    if (p.blocks[k].kind != BlockKind::PSD || p.blocks[k].size == 0) continue;
    MatrixXd S = 0.5 * (X[k] + X[k].transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
    m = std::min(m, es.eigenvalues()(0));
  }
  return m;
}

double infeasibility_certificate_error(const SDPProblem& p, const VectorXd& y) {
  double by = 0;
  for (std::size_t i = 0; i < p.b.size(); ++i) by += p.b[i] * y(i);
  if (!(by > 0)) return std::numeric_limits<double>::infinity();
  std::vector<MatrixXd> S(p.blocks.size());
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    S[k] = MatrixXd::Zero(p.blocks[k].size, p.blocks[k].kind == BlockKind::PSD ? p.blocks[k].size : 1);
  for (const auto& e : p.A) {
    double w = -e.v * y(e.row) / by;
    if (p.blocks[e.block].kind == BlockKind::FREE) {
      S[e.block](e.i, 0) += w;
    } else {
      S[e.block](e.i, e.j) += w;
      if (e.i != e.j) S[e.block](e.j, e.i) += w;
    }
  }
  double err = 0;
  for (std::size_t k = 0; k < p.blocks.size(); ++k) {
    if (S[k].size() == 0) continue;
    if (p.blocks[k].kind == BlockKind::FREE) {
      err = std::max(err, S[k].cwiseAbs().maxCoeff());
    } else {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(S[k], Eigen::EigenvaluesOnly);
      err = std::max(err, -es.eigenvalues()(0));
    }
  }
  return err;
}

// ---------------------------------------------------------------------------
// Interior-point method on the homogeneous self-dual embedding
//   A x - b tau = 0,  -A'y - z + c tau = 0,  b'y - c'x - kappa = 0,
// with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.

namespace {

struct SymEntry {
  int p, q;
  double v;
};

struct PsdBlock {
  int orig;              // index in SDPProblem::blocks
  int n;
  std::vector<int> idx;  // kept indices of the original block
  std::vector<int> rows;                     // rows touching this block, ascending
  std::vector<std::vector<SymEntry>> entry;  // parallel to rows
  MatrixXd C;
};

struct Work {
  int m = 0;
  std::vector<PsdBlock> psd;
  MatrixXd Af;  // m x f (all free variables, concatenated)
  VectorXd cf;
  VectorXd b;
  std::vector<std::pair<int, int>> free_cols;  // (block, index) of each kept free column
  std::vector<int> row_orig;                   // presolved row -> original row
  VectorXd row_scale;                          // presolved row = scale * original row
  int dropped = 0;
  // Facial reduction: rounds of (original row, sign) whose diagonal entries
  // forced indices to zero.
  std::vector<std::vector<std::pair<int, double>>> reductions;
  std::vector<std::vector<int>> zeroed;  // per original block: 0 kept, else round + 1
};

// A applied to per-block matrices.
VectorXd apply_A(const Work& w, const std::vector<MatrixXd>& X, const VectorXd* xf) {
  VectorXd r = VectorXd::Zero(w.m);
  for (std::size_t k = 0; k < w.psd.size(); ++k) {
    const auto& B = w.psd[k];
    for (std::size_t t = 0; t < B.rows.size(); ++t) {
      double s = 0;
      for (const auto& e : B.entry[t]) s += e.p == e.q ? e.v * X[k](e.p, e.q) : e.v * (X[k](e.p, e.q) + X[k](e.q, e.p));
      r(B.rows[t]) += s;
    }
  }
  if (xf && w.Af.cols()) r += w.Af * *xf;
  return r;
}

// sum_i y_i A_i per PSD block.
std::vector<MatrixXd> apply_At(const Work& w, const VectorXd& y) {
  std::vector<MatrixXd> out;
  for (const auto& B : w.psd) {
    MatrixXd S = MatrixXd::Zero(B.n, B.n);
    for (std::size_t t = 0; t < B.rows.size(); ++t) {
      double yi = y(B.rows[t]);
      if (yi == 0.0) continue;
      for (const auto& e : B.entry[t]) {
        S(e.p, e.q) += e.v * yi;
        if (e.p != e.q) S(e.q, e.p) += e.v * yi;
      }
    }
    out.push_back(std::move(S));
  }
  return out;
}

double dot(const MatrixXd& a, const MatrixXd& b) { return (a.array() * b.array()).sum(); }

struct PresolveResult {
  Work w;
  bool infeasible = false;
  VectorXd ray;  // in original rows
  std::string message;
};

// A row with zero right-hand side whose live entries are PSD diagonal entries
// of one sign forces those diagonals, hence their rows and columns, to vanish.
// Repeated until no row qualifies; zeroed indices are removed from q.
void facial_reduction(SDPProblem& q, Work& w) {
  w.zeroed.assign(q.blocks.size(), {});
  for (std::size_t k = 0; k < q.blocks.size(); ++k) w.zeroed[k].assign(q.blocks[k].size, 0);
  std::vector<std::size_t> start(q.num_constraints() + 1, 0);
  for (const auto& e : q.A) ++start[e.row + 1];
  for (int r = 0; r < q.num_constraints(); ++r) start[r + 1] += start[r];
  auto dead = [&](const Entry& e) {
    return q.blocks[e.block].kind == BlockKind::PSD && (w.zeroed[e.block][e.i] || w.zeroed[e.block][e.j]);
  };
  std::vector<char> used(q.num_constraints(), 0);
  for (;;) {
    std::vector<std::pair<int, double>> round;
    std::vector<std::pair<int, int>> mark;
    for (int r = 0; r < q.num_constraints(); ++r) {
      if (used[r] || q.b[r] != 0.0) continue;
      int sign = 0;
      bool ok = true;
      std::vector<std::pair<int, int>> diag;
      for (std::size_t t = start[r]; t < start[r + 1] && ok; ++t) {
        const Entry& e = q.A[t];
        if (dead(e)) continue;
        if (q.blocks[e.block].kind != BlockKind::PSD || e.i != e.j) {
          ok = false;
          break;
        }
        int s = e.v > 0 ? 1 : -1;
        if (sign && s != sign) ok = false;
        sign = s;
        diag.emplace_back(e.block, e.i);
      }
      if (!ok || diag.empty()) continue;
      used[r] = 1;
      round.emplace_back(r, -sign);
      mark.insert(mark.end(), diag.begin(), diag.end());
    }
    if (round.empty()) break;
    for (auto [k, i] : mark) w.zeroed[k][i] = static_cast<int>(w.reductions.size()) + 1;
    w.reductions.push_back(std::move(round));
  }
  if (w.reductions.empty()) return;
  std::vector<std::vector<int>> map(q.blocks.size());
  for (std::size_t k = 0; k < q.blocks.size(); ++k) {
    if (q.blocks[k].kind != BlockKind::PSD) continue;
    map[k].assign(q.blocks[k].size, -1);
    int n = 0;
    for (int i = 0; i < q.blocks[k].size; ++i)
      if (!w.zeroed[k][i]) map[k][i] = n++;
    q.blocks[k].size = n;
  }
  auto compact = [&](std::vector<Entry>& es) {
    std::vector<Entry> out;
    for (auto e : es) {
      if (dead(e)) continue;
      if (q.blocks[e.block].kind == BlockKind::PSD) {
        e.i = map[e.block][e.i];
        e.j = map[e.block][e.j];
      }
      out.push_back(e);
    }
    es = std::move(out);
  };
  compact(q.A);
  compact(q.C);
}

// Slack -A'y / b'y per block (FREE blocks as columns).
std::vector<MatrixXd> ray_slack(const SDPProblem& p, const VectorXd& y) {
  double by = 0;
  for (std::size_t i = 0; i < p.b.size(); ++i) by += p.b[i] * y(i);
  std::vector<MatrixXd> S(p.blocks.size());
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    S[k] = MatrixXd::Zero(p.blocks[k].size, p.blocks[k].kind == BlockKind::PSD ? p.blocks[k].size : 1);
  for (const auto& e : p.A) {
    double v = -e.v * y(e.row) / by;
    if (p.blocks[e.block].kind == BlockKind::FREE) {
      S[e.block](e.i, 0) += v;
    } else {
      S[e.block](e.i, e.j) += v;
      if (e.i != e.j) S[e.block](e.j, e.i) += v;
    }
  }
  return S;
}

double min_eig_on(const MatrixXd& S, const std::vector<int>& idx) {
  if (idx.empty()) return std::numeric_limits<double>::infinity();
  MatrixXd sub(idx.size(), idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t c = 0; c < idx.size(); ++c) sub(a, c) = S(idx[a], idx[c]);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sub, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// A ray of the reduced problem only certifies the face. Adding the reducing
// rows, latest round first, with growing weight makes the slack PSD on the
// removed indices as well.
void repair_ray(const SDPProblem& p, const Work& w, VectorXd& y) {
  const int R = static_cast<int>(w.reductions.size());
  for (int round = R; round >= 1; --round) {
    auto subset = [&](std::size_t k, int from) {
      std::vector<int> idx;
      for (int i = 0; i < p.blocks[k].size; ++i)
        if (w.zeroed[k][i] == 0 || w.zeroed[k][i] >= from) idx.push_back(i);
      return idx;
    };
    auto lam = [&](const VectorXd& yy, int from) {
      auto S = ray_slack(p, yy);
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < p.blocks.size(); ++k)
        if (p.blocks[k].kind == BlockKind::PSD && p.blocks[k].size) m = std::min(m, min_eig_on(S[k], subset(k, from)));
      return m;
    };
    const double ref = std::min(0.0, lam(y, round + 1));
    if (lam(y, round) >= ref - 1e-10) continue;
    VectorXd dir = VectorXd::Zero(y.size());
    for (auto [r, sgn] : w.reductions[round - 1]) dir(r) = sgn;
    double by = 0;
    for (std::size_t i = 0; i < p.b.size(); ++i) by += p.b[i] * y(i);
    for (double t = 1e-8; t < 1e16; t *= 4) {
      VectorXd yt = y + t * by * dir;
      if (lam(yt, round) >= ref - 1e-10) {
        y = yt;
        break;
      }
    }
  }
}

PresolveResult presolve(const SDPProblem& p) {
  PresolveResult res;
  SDPProblem q = p;
  q.normalize();
  const int m0 = q.num_constraints();
  facial_reduction(q, res.w);

  // Column layout for the row Gram matrix: svec with sqrt(2) off-diagonal weights.
  std::vector<long> offset(q.blocks.size() + 1, 0);
  for (std::size_t k = 0; k < q.blocks.size(); ++k) {
    long n = q.blocks[k].size;
    offset[k + 1] = offset[k] + (q.blocks[k].kind == BlockKind::PSD ? n * (n + 1) / 2 : n);
  }
  auto col = [&](const Entry& e) -> long {
    if (q.blocks[e.block].kind == BlockKind::FREE) return offset[e.block] + e.i;
    long n = q.blocks[e.block].size;
    return offset[e.block] + e.i * n - e.i * (e.i - 1) / 2 + (e.j - e.i);
  };
  auto weight = [&](const Entry& e) {
    return q.blocks[e.block].kind == BlockKind::PSD && e.i != e.j ? e.v * std::sqrt(2.0) : e.v;
  };

  VectorXd norm = VectorXd::Zero(m0);
  for (const auto& e : q.A) norm(e.row) += weight(e) * weight(e);
  std::vector<int> live;
  for (int r = 0; r < m0; ++r) {
    if (norm(r) > 0) {
      live.push_back(r);
    } else if (q.b[r] != 0.0) {
      res.infeasible = true;
      res.ray = VectorXd::Zero(m0);
      res.ray(r) = q.b[r] > 0 ? 1 : -1;
      res.message = "constraint " + std::to_string(r) + " has no variables but a nonzero right-hand side";
      return res;
    }
  }
  VectorXd scale = VectorXd::Zero(m0);
  for (int r : live) scale(r) = 1.0 / std::sqrt(norm(r));

  // Rank-revealing pivoted Cholesky of the scaled row Gram matrix.
  const int ml = static_cast<int>(live.size());
  std::vector<int> pos(m0, -1);
  for (int i = 0; i < ml; ++i) pos[live[i]] = i;
  Eigen::SparseMatrix<double, Eigen::RowMajor> As(ml, offset.back());
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (const auto& e : q.A)
      if (pos[e.row] >= 0) trip.emplace_back(pos[e.row], col(e), weight(e) * scale(e.row));
    As.setFromTriplets(trip.begin(), trip.end());
  }
  MatrixXd G = MatrixXd(As * As.transpose());
  std::vector<int> perm(ml);
  for (int i = 0; i < ml; ++i) perm[i] = i;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> L =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(ml, ml);
  VectorXd d = G.diagonal();
  int rank = 0;
  const double tol = 1e-12;
  for (; rank < ml; ++rank) {
    int piv = rank;
    for (int i = rank + 1; i < ml; ++i)
      if (d(perm[i]) > d(perm[piv])) piv = i;
    if (d(perm[piv]) <= tol) break;
    std::swap(perm[rank], perm[piv]);
    const int r = perm[rank];
    const double lrr = std::sqrt(d(r));
    L(r, rank) = lrr;
    for (int i = rank + 1; i < ml; ++i) {
      const int ri = perm[i];
      double s = G(ri, r) - L.row(ri).head(rank).dot(L.row(r).head(rank));
      L(ri, rank) = s / lrr;
      d(ri) -= L(ri, rank) * L(ri, rank);
    }
  }
  std::vector<int> keep(perm.begin(), perm.begin() + rank);
  std::sort(keep.begin(), keep.end());

  // Dependent rows must be consistent with the kept ones.
  if (rank < ml) {
    MatrixXd Lk(rank, rank);
    for (int i = 0; i < rank; ++i)
      for (int t = 0; t < rank; ++t) Lk(i, t) = L(perm[i], t);
    VectorXd bk(rank);
    for (int i = 0; i < rank; ++i) bk(i) = q.b[live[perm[i]]] * scale(live[perm[i]]);
    for (int i = rank; i < ml; ++i) {
      const int ri = perm[i];
      VectorXd gi(rank);
      for (int t = 0; t < rank; ++t) gi(t) = G(ri, perm[t]);
      VectorXd lambda = Lk.transpose().triangularView<Eigen::Upper>().solve(Lk.triangularView<Eigen::Lower>().solve(gi));
      double bi = q.b[live[ri]] * scale(live[ri]);
      double mismatch = bi - lambda.dot(bk);
      if (std::abs(mismatch) > 1e-9 * (1 + std::abs(bi) + lambda.cwiseAbs().dot(bk.cwiseAbs()))) {
        res.infeasible = true;
        res.ray = VectorXd::Zero(m0);
        double sgn = mismatch > 0 ? 1 : -1;
        res.ray(live[ri]) = sgn * scale(live[ri]);
        for (int t = 0; t < rank; ++t) res.ray(live[perm[t]]) -= sgn * lambda(t) * scale(live[perm[t]]);
        res.message = "constraint " + std::to_string(live[ri]) + " contradicts a combination of other constraints";
        return res;
      }
    }
  }

  Work& w = res.w;
  w.m = rank;
  w.dropped = m0 - rank;
  std::vector<int> newrow(m0, -1);
  for (int i = 0; i < rank; ++i) {
    newrow[live[keep[i]]] = i;
    w.row_orig.push_back(live[keep[i]]);
  }
  w.row_scale.resize(rank);
  w.b.resize(rank);
  for (int i = 0; i < rank; ++i) {
    w.row_scale(i) = scale(w.row_orig[i]);
    w.b(i) = q.b[w.row_orig[i]] * w.row_scale(i);
  }

  std::vector<int> psd_index(q.blocks.size(), -1);
  int nfree = 0;
  std::vector<int> free_offset(q.blocks.size(), 0);
  for (std::size_t k = 0; k < q.blocks.size(); ++k) {
    if (q.blocks[k].kind == BlockKind::PSD) {
      if (q.blocks[k].size == 0) continue;
      psd_index[k] = static_cast<int>(w.psd.size());
      PsdBlock B;
      B.orig = static_cast<int>(k);
      B.n = q.blocks[k].size;
      for (int i = 0; i < p.blocks[k].size; ++i)
        if (res.w.zeroed.empty() || !res.w.zeroed[k][i]) B.idx.push_back(i);
      B.C = MatrixXd::Zero(B.n, B.n);
      w.psd.push_back(std::move(B));
    } else {
      free_offset[k] = nfree;
      nfree += q.blocks[k].size;
    }
  }
  MatrixXd Af = MatrixXd::Zero(rank, nfree);
  VectorXd cf = VectorXd::Zero(nfree);
  std::vector<std::map<int, std::vector<SymEntry>>> rows(w.psd.size());
  for (const auto& e : q.A) {
    int r = newrow[e.row];
    if (r < 0) continue;
    double v = e.v * w.row_scale(r);
    if (q.blocks[e.block].kind == BlockKind::FREE) Af(r, free_offset[e.block] + e.i) += v;
    else rows[psd_index[e.block]][r].push_back({e.i, e.j, v});
  }
  for (std::size_t k = 0; k < w.psd.size(); ++k)
    for (auto& [r, es] : rows[k]) {
      w.psd[k].rows.push_back(r);
      w.psd[k].entry.push_back(std::move(es));
    }
  for (const auto& e : q.C) {
    if (q.blocks[e.block].kind == BlockKind::FREE) {
      cf(free_offset[e.block] + e.i) += e.v;
    } else if (psd_index[e.block] >= 0) {
      auto& C = w.psd[psd_index[e.block]].C;
      C(e.i, e.j) += e.v;
      if (e.i != e.j) C(e.j, e.i) += e.v;
    }
  }

  // Free columns: drop zero and linearly dependent ones (their value is fixed
  // to 0, valid when the objective is consistent with the dependency).
  std::vector<std::pair<int, int>> all_cols;
  for (std::size_t k = 0; k < q.blocks.size(); ++k)
    if (q.blocks[k].kind == BlockKind::FREE)
      for (int i = 0; i < q.blocks[k].size; ++i) all_cols.emplace_back(static_cast<int>(k), i);
  std::vector<int> kept_cols;
  if (nfree > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Af);
    qr.setThreshold(1e-12);
    const int fr = static_cast<int>(qr.rank());
    for (int i = 0; i < fr; ++i) kept_cols.push_back(qr.colsPermutation().indices()(i));
    std::sort(kept_cols.begin(), kept_cols.end());
    if (fr < nfree && cf.norm() > 0) {
      MatrixXd Ak(rank, fr);
      VectorXd ck(fr);
      for (int i = 0; i < fr; ++i) {
        Ak.col(i) = Af.col(kept_cols[i]);
        ck(i) = cf(kept_cols[i]);
      }
      for (int j = 0; j < nfree; ++j) {
        if (std::binary_search(kept_cols.begin(), kept_cols.end(), j)) continue;
        VectorXd mu = Ak.colPivHouseholderQr().solve(Af.col(j));
        if (std::abs(cf(j) - mu.dot(ck)) > 1e-9 * (1 + std::abs(cf(j))))
          res.message = "free variable direction with unbounded objective";
      }
    }
  }
  w.Af.resize(rank, kept_cols.size());
  w.cf.resize(kept_cols.size());
  for (std::size_t i = 0; i < kept_cols.size(); ++i) {
    w.Af.col(i) = Af.col(kept_cols[i]);
    w.cf(i) = cf(kept_cols[i]);
    w.free_cols.push_back(all_cols[kept_cols[i]]);
  }
  return res;
}

struct Scaling {
  MatrixXd R, Rit, W;  // W = R R', Rit = R^{-T}
  VectorXd lambda;
};

bool nt_scaling(const MatrixXd& X, const MatrixXd& Z, Scaling& s) {
  Eigen::LLT<MatrixXd> lx(X), lz(Z);
  if (lx.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
  MatrixXd Lx = lx.matrixL(), Lz = lz.matrixL();
  Eigen::BDCSVD<MatrixXd> svd(Lz.transpose() * Lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
  s.lambda = svd.singularValues();
  if (s.lambda.minCoeff() <= 0) return false;
  VectorXd isq = s.lambda.cwiseSqrt().cwiseInverse();
  s.R = Lx * svd.matrixV() * isq.asDiagonal();
  s.Rit = Lz * svd.matrixU() * isq.asDiagonal();
  s.W = s.R * s.R.transpose();
  return true;
}

// Largest alpha with lambda + alpha * D PSD (lambda diagonal).
double max_step(const VectorXd& lambda, const MatrixXd& D) {
  VectorXd isq = lambda.cwiseSqrt().cwiseInverse();
  MatrixXd S = isq.asDiagonal() * D * isq.asDiagonal();
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
  double mn = es.eigenvalues()(0);
  return mn < 0 ? -1.0 / mn : std::numeric_limits<double>::infinity();
}

class Solver {
 public:
  Solver(const SDPProblem& p, Work w, const Options& o) : prob_(p), w_(std::move(w)), opt_(o) {}

  SDPSolution run();

 private:
  struct Dir {
    std::vector<MatrixXd> dX, dZ;
    VectorXd dy, dxf;
    double dtau = 0, dkappa = 0;
  };

  void form_schur();
  void factor();
  void solve_saddle(const VectorXd& r1, const VectorXd& r2, VectorXd& dy, VectorXd& dxf) const;
  Dir direction(double sigma, const std::vector<MatrixXd>* corr, double corr_tk);
  double step_to_boundary(const Dir& d) const;
  void log(const std::string& line, SDPSolution& sol) const {
    sol.log.push_back(line);
    if (opt_.verbose) std::fprintf(stderr, "%s\n", line.c_str());
  }
  SDPSolution finish(Status st, const std::string& msg, SDPSolution sol, bool use_ray) const;

  const SDPProblem& prob_;
  Work w_;
  Options opt_;

  std::vector<MatrixXd> X_, Z_;
  VectorXd y_, xf_;
  double tau_ = 1, kappa_ = 1;

  // Per-iteration data.
  std::vector<Scaling> sc_;
  VectorXd rp_, rdf_;
  std::vector<MatrixXd> Rd_;
  double rg_ = 0, mu_ = 0;
  MatrixXd M_;
  Eigen::LLT<MatrixXd> Mfac_;
  Eigen::LLT<MatrixXd> Sfac_;
  MatrixXd MinvAf_;
  // tau-direction part, independent of sigma.
  VectorXd dy1_, dxf1_;
  std::vector<MatrixXd> dX1_;
  double cx1_ = 0;
};

void Solver::form_schur() {
  const int m = w_.m;
  M_ = MatrixXd::Zero(m, m);
  for (std::size_t k = 0; k < w_.psd.size(); ++k) {
    const auto& B = w_.psd[k];
    const MatrixXd& W = sc_[k].W;
    const int nr = static_cast<int>(B.rows.size());
    std::vector<int> loc(B.n, -1);
    for (int t = 0; t < nr; ++t) {
      const auto& es = B.entry[t];
      std::vector<int> idx;
      for (const auto& e : es) {
        for (int v : {e.p, e.q})
          if (loc[v] < 0) {
            loc[v] = static_cast<int>(idx.size());
            idx.push_back(v);
          }
      }
      MatrixXd T = MatrixXd::Zero(idx.size(), B.n);
      for (const auto& e : es) {
        T.row(loc[e.p]) += e.v * W.row(e.q);
        if (e.p != e.q) T.row(loc[e.q]) += e.v * W.row(e.p);
      }
      MatrixXd Wc(B.n, idx.size());
      for (std::size_t c = 0; c < idx.size(); ++c) Wc.col(c) = W.col(idx[c]);
      MatrixXd G = Wc * T;  // W A_t W
      for (int v : idx) loc[v] = -1;
      const int rt = B.rows[t];
      for (int u = t; u < nr; ++u) {
        double s = 0;
        for (const auto& e : B.entry[u]) s += e.p == e.q ? e.v * G(e.p, e.q) : 2 * e.v * G(e.p, e.q);
        M_(B.rows[u], rt) += s;
      }
    }
  }
  M_.triangularView<Eigen::StrictlyUpper>() = M_.transpose();
}

void Solver::factor() {
  MatrixXd Mt = M_;
  if (w_.Af.cols()) Mt.noalias() += w_.Af * w_.Af.transpose();
  double ridge = 0;
  const double dmax = std::max(1.0, Mt.diagonal().maxCoeff());
  for (int attempt = 0; attempt < 8; ++attempt) {
    Mfac_.compute(ridge > 0 ? MatrixXd(Mt + ridge * MatrixXd::Identity(w_.m, w_.m)) : Mt);
    if (Mfac_.info() == Eigen::Success) break;
    ridge = ridge == 0 ? 1e-14 * dmax : ridge * 100;
  }
  if (w_.Af.cols()) {
    MinvAf_ = Mfac_.solve(w_.Af);
    MatrixXd S = w_.Af.transpose() * MinvAf_;
    Sfac_.compute(S);
    if (Sfac_.info() != Eigen::Success)
      Sfac_.compute(S + 1e-14 * std::max(1.0, S.diagonal().maxCoeff()) * MatrixXd::Identity(S.rows(), S.cols()));
  }
}

// [M Af; Af' 0] [dy; dxf] = [r1; r2] via M + Af Af' (same solution).
void Solver::solve_saddle(const VectorXd& r1, const VectorXd& r2, VectorXd& dy, VectorXd& dxf) const {
  if (w_.Af.cols() == 0) {
    dy = Mfac_.solve(r1);
    dxf.resize(0);
    return;
  }
  VectorXd rhs = r1 + w_.Af * r2;
  VectorXd u = Mfac_.solve(rhs);
  dxf = Sfac_.solve(w_.Af.transpose() * u - r2);
  dy = u - MinvAf_ * dxf;
}

Solver::Dir Solver::direction(double sigma, const std::vector<MatrixXd>* corr, double corr_tk) {
  const double eta = 1 - sigma;
  const std::size_t nb = w_.psd.size();
  std::vector<MatrixXd> rc(nb), WRdW(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const auto& s = sc_[k];
    const int n = w_.psd[k].n;
    MatrixXd r = MatrixXd::Zero(n, n);
    r.diagonal() = -s.lambda.cwiseAbs2();
    r.diagonal().array() += sigma * mu_;
    if (corr) r -= (*corr)[k];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r(i, j) *= 2.0 / (s.lambda(i) + s.lambda(j));
    rc[k] = s.R * r * s.R.transpose();
    WRdW[k] = s.W * Rd_[k] * s.W;
  }
  const double h = sigma * mu_ - tau_ * kappa_ - corr_tk;
  VectorXd r1 = eta * rp_ - apply_A(w_, rc, nullptr) - eta * apply_A(w_, WRdW, nullptr);
  VectorXd r2 = -eta * rdf_;
  VectorXd dy0, dxf0;
  solve_saddle(r1, r2, dy0, dxf0);
  auto Aty0 = apply_At(w_, dy0);
  std::vector<MatrixXd> dX0(nb);
  double cx0 = dxf0.size() ? w_.cf.dot(dxf0) : 0.0;
  for (std::size_t k = 0; k < nb; ++k) {
    dX0[k] = rc[k] + sc_[k].W * Aty0[k] * sc_[k].W + eta * WRdW[k];
    cx0 += dot(w_.psd[k].C, dX0[k]);
  }
  const double num = eta * rg_ - w_.b.dot(dy0) + cx0 + h / tau_;
  const double den = w_.b.dot(dy1_) - cx1_ + kappa_ / tau_;
  Dir d;
  d.dtau = num / den;
  d.dy = dy0 + d.dtau * dy1_;
  d.dxf = dxf0.size() ? VectorXd(dxf0 + d.dtau * dxf1_) : VectorXd();
  d.dkappa = (h - kappa_ * d.dtau) / tau_;
  auto Aty = apply_At(w_, d.dy);
  d.dX.resize(nb);
  d.dZ.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    d.dX[k] = dX0[k] + d.dtau * dX1_[k];
    d.dZ[k] = -Aty[k] + d.dtau * w_.psd[k].C - eta * Rd_[k];
  }
  return d;
}

double Solver::step_to_boundary(const Dir& d) const {
  double a = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < w_.psd.size(); ++k) {
    const auto& s = sc_[k];
    a = std::min(a, max_step(s.lambda, s.Rit.transpose() * d.dX[k] * s.Rit));
    a = std::min(a, max_step(s.lambda, s.R.transpose() * d.dZ[k] * s.R));
  }
  if (d.dtau < 0) a = std::min(a, -tau_ / d.dtau);
  if (d.dkappa < 0) a = std::min(a, -kappa_ / d.dkappa);
  return a;
}

SDPSolution Solver::finish(Status st, const std::string& msg, SDPSolution sol, bool use_ray) const {
  sol.status = st;
  sol.message = msg;
  sol.rows_dropped = w_.dropped;
  // Map back to the original variables.
  sol.X.assign(prob_.blocks.size(), MatrixXd());
  for (std::size_t k = 0; k < prob_.blocks.size(); ++k) {
    const auto& bl = prob_.blocks[k];
    sol.X[k] = bl.kind == BlockKind::PSD ? MatrixXd::Zero(bl.size, bl.size) : MatrixXd::Zero(bl.size, 1);
  }
  const double t = use_ray ? 1.0 : tau_;
  for (std::size_t k = 0; k < w_.psd.size(); ++k) {
    const auto& idx = w_.psd[k].idx;
    auto& Xo = sol.X[w_.psd[k].orig];
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t c = 0; c < idx.size(); ++c) Xo(idx[a], idx[c]) = X_[k](a, c) / t;
  }
  for (std::size_t i = 0; i < w_.free_cols.size(); ++i) sol.X[w_.free_cols[i].first](w_.free_cols[i].second, 0) = xf_(i) / t;
  sol.y = VectorXd::Zero(prob_.num_constraints());
  for (int i = 0; i < w_.m; ++i) sol.y(w_.row_orig[i]) = y_(i) * w_.row_scale(i) / t;
  sol.primal_residual = max_equality_residual(prob_, sol.X);
  sol.min_eig = min_psd_eigenvalue(prob_, sol.X);
  double obj = 0;
  for (const auto& e : prob_.C)
    obj += prob_.blocks[e.block].kind == BlockKind::PSD ? entry_dot(e, sol.X[e.block]) : free_value(e, sol.X[e.block]);
  sol.objective = obj;
  return sol;
}

SDPSolution Solver::run() {
  SDPSolution sol;
  const std::size_t nb = w_.psd.size();
  const int f = static_cast<int>(w_.Af.cols());
  X_.clear();
  Z_.clear();
  for (const auto& B : w_.psd) {
    X_.push_back(MatrixXd::Identity(B.n, B.n));
    Z_.push_back(MatrixXd::Identity(B.n, B.n));
  }
  y_ = VectorXd::Zero(w_.m);
  xf_ = VectorXd::Zero(f);
  double nu = 1;
  for (const auto& B : w_.psd) nu += B.n;
  double cnorm = w_.cf.size() ? w_.cf.cwiseAbs().maxCoeff() : 0.0;
  bool zero_objective = w_.cf.size() == 0 || w_.cf.isZero(0);
  for (const auto& B : w_.psd) {
    if (B.C.size()) cnorm = std::max(cnorm, B.C.cwiseAbs().maxCoeff());
    zero_objective = zero_objective && B.C.isZero(0);
  }
  const double bnorm = w_.b.size() ? w_.b.cwiseAbs().maxCoeff() : 0.0;
  int stall = 0;
  double last_mu = std::numeric_limits<double>::infinity();

  // Iterate with the smallest max(pres, dres, gap); returned when the method
  // breaks down later on.
  struct Best {
    std::vector<MatrixXd> X;
    VectorXd y, xf;
    double tau = 1, merit = std::numeric_limits<double>::infinity();
    int it = -1;
    double dres = 0, gap = 0;
  } best;
  auto fail = [&](Status st, const std::string& msg) {
    if (best.it >= 0) {
      X_ = best.X;
      y_ = best.y;
      xf_ = best.xf;
      tau_ = best.tau;
      sol.dual_residual = best.dres;
      sol.gap = best.gap;
      return finish(st, msg + "; best iterate " + std::to_string(best.it), sol, false);
    }
    return finish(st, msg, sol, false);
  };

  for (int it = 0;; ++it) {
    // Residuals.
    rp_ = w_.b * tau_ - apply_A(w_, X_, &xf_);
    auto Aty = apply_At(w_, y_);
    Rd_.resize(nb);
    double pobj = f ? w_.cf.dot(xf_) : 0.0, dres = 0, xz = 0;
    for (std::size_t k = 0; k < nb; ++k) {
      Rd_[k] = Aty[k] + Z_[k] - w_.psd[k].C * tau_;
      pobj += dot(w_.psd[k].C, X_[k]);
      dres = std::max(dres, Rd_[k].cwiseAbs().maxCoeff());
      xz += dot(X_[k], Z_[k]);
    }
    rdf_ = f ? VectorXd(w_.Af.transpose() * y_ - w_.cf * tau_) : VectorXd();
    if (f) dres = std::max(dres, rdf_.cwiseAbs().maxCoeff());
    const double dobj = w_.b.dot(y_);
    rg_ = kappa_ - dobj + pobj;
    mu_ = (xz + tau_ * kappa_) / nu;

    const double pres_rel = (rp_.size() ? rp_.cwiseAbs().maxCoeff() : 0.0) / tau_ / (1 + bnorm);
    const double dres_rel = dres / tau_ / (1 + cnorm);
    const double gap_rel = std::abs(pobj - dobj) / tau_ / (1 + std::abs(pobj / tau_));
    sol.iterations = it;
    sol.dual_residual = dres_rel;
    sol.gap = gap_rel;
    if (const double merit = std::max({pres_rel, dres_rel, gap_rel}); merit < best.merit) {
      best.X = X_;
      best.y = y_;
      best.xf = xf_;
      best.tau = tau_;
      best.merit = merit;
      best.it = it;
      best.dres = dres_rel;
      best.gap = gap_rel;
    }

    char buf[200];
    std::snprintf(buf, sizeof buf, "%3d  pres %.3e  dres %.3e  gap %.3e  mu %.3e  tau %.3e  kappa %.3e", it, pres_rel,
                  dres_rel, gap_rel, mu_, tau_, kappa_);
    log(buf, sol);

    if (pres_rel <= opt_.tol_feas && (zero_objective || (dres_rel <= opt_.tol_feas && gap_rel <= opt_.tol_gap))) {
      auto out = finish(Status::Feasible, "converged", sol, false);
      if (out.primal_residual <= 1e-6 && out.min_eig >= -1e-8) return out;
      out.status = Status::Inaccurate;
      out.message = "converged point fails the independent check";
      return out;
    }
    if (pres_rel <= std::max(opt_.tol_feas, 1e-8) && pobj / tau_ < opt_.stop_below) {
      auto out = finish(Status::Feasible, "objective below target", sol, false);
      if (out.primal_residual <= 1e-6) return out;
    }
    if (dobj > 0) {
      double ray_res = 0;
      for (std::size_t k = 0; k < nb; ++k)
        ray_res = std::max(ray_res, (Aty[k] + Z_[k]).cwiseAbs().maxCoeff());
      if (f) ray_res = std::max(ray_res, (w_.Af.transpose() * y_).cwiseAbs().maxCoeff());
      if (ray_res / dobj <= opt_.tol_feas) {
        auto out = finish(Status::Infeasible, "primal infeasibility certificate", sol, true);
        VectorXd yr = out.y / out.y.dot(Eigen::Map<const VectorXd>(prob_.b.data(), prob_.b.size()));
        repair_ray(prob_, w_, yr);
        if (infeasibility_certificate_error(prob_, yr) <= 1e-6) {
          out.y = yr;
          return out;
        }
      }
    }
    if (it >= opt_.max_iter) return fail(Status::MaxIter, "iteration limit reached");

    // Scaling and Schur complement.
    sc_.resize(nb);
    for (std::size_t k = 0; k < nb; ++k)
      if (!nt_scaling(X_[k], Z_[k], sc_[k])) return fail(Status::Inaccurate, "lost positive definiteness");
    form_schur();
    factor();
    if (!M_.allFinite()) return fail(Status::Inaccurate, "non-finite Schur complement");

    // Tau column.
    {
      std::vector<MatrixXd> WCW(nb);
      for (std::size_t k = 0; k < nb; ++k) WCW[k] = sc_[k].W * w_.psd[k].C * sc_[k].W;
      VectorXd r1 = w_.b + apply_A(w_, WCW, nullptr);
      VectorXd r2 = f ? w_.cf : VectorXd();
      solve_saddle(r1, r2, dy1_, dxf1_);
      auto A1 = apply_At(w_, dy1_);
      dX1_.resize(nb);
      cx1_ = f ? w_.cf.dot(dxf1_) : 0.0;
      for (std::size_t k = 0; k < nb; ++k) {
        dX1_[k] = sc_[k].W * A1[k] * sc_[k].W - WCW[k];
        cx1_ += dot(w_.psd[k].C, dX1_[k]);
      }
    }

    // Predictor.
    Dir aff = direction(0.0, nullptr, 0.0);
    double a_aff = std::min(1.0, step_to_boundary(aff));
    double sigma = std::pow(1 - a_aff, 3);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector with the second-order term in scaled coordinates.
    std::vector<MatrixXd> corr(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      MatrixXd dx = sc_[k].Rit.transpose() * aff.dX[k] * sc_[k].Rit;
      MatrixXd dz = sc_[k].R.transpose() * aff.dZ[k] * sc_[k].R;
      corr[k] = 0.5 * (dx * dz + dz * dx);
    }
    Dir d = direction(sigma, &corr, aff.dtau * aff.dkappa);
    double alpha = std::min(1.0, opt_.step * step_to_boundary(d));
    if (!std::isfinite(alpha) || !(alpha > 0)) return fail(Status::Inaccurate, "no admissible step");

    // Rounding can leave a nearly singular update indefinite; back off.
    std::vector<MatrixXd> Xn(nb), Zn(nb);
    for (int bt = 0;; ++bt) {
      bool pd = true;
      for (std::size_t k = 0; k < nb && pd; ++k) {
        Xn[k] = X_[k] + alpha * d.dX[k];
        Zn[k] = Z_[k] + alpha * d.dZ[k];
        Xn[k] = 0.5 * (Xn[k] + Xn[k].transpose());
        Zn[k] = 0.5 * (Zn[k] + Zn[k].transpose());
        pd = Eigen::LLT<MatrixXd>(Xn[k]).info() == Eigen::Success && Eigen::LLT<MatrixXd>(Zn[k]).info() == Eigen::Success;
      }
      if (pd) break;
      if (bt == 30) return fail(Status::Inaccurate, "no positive definite step");
      alpha *= 0.7;
    }
    X_.swap(Xn);
    Z_.swap(Zn);
    y_ += alpha * d.dy;
    if (f) xf_ += alpha * d.dxf;
    tau_ += alpha * d.dtau;
    kappa_ += alpha * d.dkappa;

    std::snprintf(buf, sizeof buf, "     alpha %.4f  sigma %.4f", alpha, sigma);
    log(buf, sol);

    if (alpha < 1e-8) {
      if (++stall >= 3) return fail(Status::Inaccurate, "step length collapsed");
    } else {
      stall = 0;
    }
    if (mu_ < 1e-30 && mu_ >= last_mu) return fail(Status::Inaccurate, "no progress");
    last_mu = mu_;
  }
}

SDPSolution solve_direct(const SDPProblem& p, const Options& opts) {
  auto pre = presolve(p);
  if (pre.infeasible) {
    SDPSolution sol;
    sol.status = Status::Infeasible;
    sol.message = "presolve: " + pre.message;
    sol.y = pre.ray;
    sol.X.clear();
    for (const auto& bl : p.blocks)
      sol.X.push_back(bl.kind == BlockKind::PSD ? MatrixXd::Zero(bl.size, bl.size) : MatrixXd::Zero(bl.size, 1));
    sol.primal_residual = max_equality_residual(p, sol.X);
    sol.min_eig = min_psd_eigenvalue(p, sol.X);
    return sol;
  }
  if (pre.w.m == 0 && pre.w.psd.empty() && pre.w.Af.cols() == 0) {
    SDPSolution sol;
    sol.status = Status::Feasible;
    sol.message = "trivial problem";
    for (const auto& bl : p.blocks)
      sol.X.push_back(bl.kind == BlockKind::PSD ? MatrixXd::Zero(bl.size, bl.size) : MatrixXd::Zero(bl.size, 1));
    sol.y = VectorXd::Zero(p.num_constraints());
    sol.primal_residual = max_equality_residual(p, sol.X);
    return sol;
  }
  Solver s(p, std::move(pre.w), opts);
  auto sol = s.run();
  if (!pre.message.empty() && sol.message.find(pre.message) == std::string::npos) sol.message += "; " + pre.message;
  return sol;
}

// Feasibility problems rarely have an interior: after facial reduction the
// problem min t s.t. A(Y) - t A(I) = b, Y PSD, t >= -1 is solved instead.
// X = Y - tI is feasible once t <= 0, and a positive optimum yields a Farkas ray.
SDPSolution solve_phase_one(const SDPProblem& p, const Options& opts) {
  SDPProblem q = p;
  q.normalize();
  Work fr;
  facial_reduction(q, fr);
  const int m = q.num_constraints();
  const int nb = static_cast<int>(q.blocks.size());
  std::vector<double> trace(m, 0.0);
  for (const auto& e : q.A)
    if (q.blocks[e.block].kind == BlockKind::PSD && e.i == e.j) trace[e.row] += e.v;
  SDPProblem a = q;
  const int tb = a.add_block(BlockKind::FREE, 1);
  const int sb = a.add_block(BlockKind::PSD, 1);
  for (int r = 0; r < m; ++r)
    if (trace[r] != 0.0) a.add(r, tb, 0, 0, -trace[r]);
  const int br = a.add_row(-1.0);
  a.add(br, tb, 0, 0, 1.0);
  a.add(br, sb, 0, 0, -1.0);
  a.add_objective(tb, 0, 0, 1.0);
  Options o = opts;
  o.stop_below = -1e-6;
  // t* = 0 exactly when the reduced problem still lacks an interior, and then
  // -t is the smallest eigenvalue of the returned X.
  o.tol_gap = std::min(o.tol_gap, 1e-11);
  o.tol_feas = std::min(o.tol_feas, 1e-10);
  SDPSolution sa = solve_direct(a, o);

  SDPSolution sol;
  sol.iterations = sa.iterations;
  sol.rows_dropped = sa.rows_dropped;
  sol.log = std::move(sa.log);
  sol.dual_residual = sa.dual_residual;
  sol.gap = sa.gap;
  const double t = sa.X.empty() ? 0.0 : sa.X[tb](0, 0);
  // X = Y - shift I on the kept indices.
  auto point = [&](double shift) {
    std::vector<MatrixXd> X(nb);
    for (int k = 0; k < nb; ++k) {
      const auto& bl = p.blocks[k];
      if (bl.kind == BlockKind::FREE) {
        X[k] = sa.X.empty() ? MatrixXd::Zero(bl.size, 1) : sa.X[k];
        continue;
      }
      X[k] = MatrixXd::Zero(bl.size, bl.size);
      if (sa.X.empty()) continue;
      std::vector<int> idx;
      for (int i = 0; i < bl.size; ++i)
        if (fr.zeroed.empty() || !fr.zeroed[k][i]) idx.push_back(i);
      for (std::size_t u = 0; u < idx.size(); ++u)
        for (std::size_t v = 0; v < idx.size(); ++v) X[k](idx[u], idx[v]) = sa.X[k](u, v) - (u == v ? shift : 0.0);
    }
    return X;
  };
  sol.X = point(t);
  sol.primal_residual = max_equality_residual(p, sol.X);
  sol.min_eig = min_psd_eigenvalue(p, sol.X);
  bool within_tol = false;
  if (!sa.X.empty() && t > 0 && sol.min_eig < -1e-8) {
    // Trade eigenvalue deficit for equality residual: the smallest shift that
    // keeps every block above -1e-8/2.
    const double shift = std::max(0.0, sol.min_eig + t - 0.5e-8);
    if (shift < t) {
      auto X = point(shift);
      const double res = max_equality_residual(p, X), me = min_psd_eigenvalue(p, X);
      if (res <= 1e-6 && me >= -1e-8) {
        sol.X = std::move(X);
        sol.primal_residual = res;
        sol.min_eig = me;
        within_tol = true;
      }
    }
  }
  sol.y = sa.y.size() ? VectorXd(sa.y.head(m)) : VectorXd::Zero(m);

  auto certify = [&](VectorXd y) {
    double by = 0;
    for (int r = 0; r < m; ++r) by += p.b[r] * y(r);
    if (!(by > 0)) return false;
    y /= by;
    repair_ray(p, fr, y);
    if (infeasibility_certificate_error(p, y) > 1e-6) return false;
    sol.y = y;
    return true;
  };
  if (sa.status != Status::Infeasible && !sa.X.empty() && sol.primal_residual <= 1e-6 && sol.min_eig >= -1e-8) {
    // The verdict rests on the independent check of the returned point.
    sol.status = Status::Feasible;
    sol.message = within_tol ? "point within tolerance (phase one t = " + std::to_string(t) + ")"
                  : sa.status == Status::Feasible ? "converged"
                                                  : "verified point (" + sa.message + ")";
  } else if (t > 0 || sa.status == Status::Infeasible) {
    // A positive optimum t: the dual solution restricted to the original rows
    // is the ray. An infeasible phase-one problem can only come from the free
    // columns, whose ray is the phase-one ray itself.
    if (certify(sol.y)) {
      sol.status = Status::Infeasible;
      sol.message = "primal infeasibility certificate";
    } else {
      sol.status = Status::Inaccurate;
      sol.message = "phase one ended at t = " + std::to_string(t) + " without a valid certificate";
    }
  } else {
    sol.status = sa.status;
    sol.message = sa.message;
  }
  int removed = 0;
  for (const auto& z : fr.zeroed)
    for (int v : z) removed += v != 0;
  if (removed) sol.message += "; facial reduction fixed " + std::to_string(removed) + " indices to zero";
  return sol;
}

}  // namespace

SDPSolution solve(const SDPProblem& p, const Options& opts) {
  p.validate();
  // Row Gram matrix for presolve plus the Schur complement.
  const double m = p.num_constraints();
  const double bytes = 2 * 8 * m * m;
  if (bytes > opts.max_bytes) {
    SDPSolution s;
    s.status = Status::Inaccurate;
    std::ostringstream msg;
    msg << "not attempted: " << p.num_constraints() << " rows need about " << bytes / 1e9
        << " GB of dense working memory (limit " << opts.max_bytes / 1e9 << " GB)";
    s.message = msg.str();
    return s;
  }
  bool feasibility = opts.phase_one;
  for (const auto& e : p.C) feasibility = feasibility && e.v == 0.0;
  bool has_psd = false;
  for (const auto& bl : p.blocks) has_psd = has_psd || (bl.kind == BlockKind::PSD && bl.size > 0);
  return feasibility && has_psd ? solve_phase_one(p, opts) : solve_direct(p, opts);
}

}  // namespace pie::sdp
