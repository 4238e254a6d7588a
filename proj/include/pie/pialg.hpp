#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pie/poly.hpp"

namespace pie {

// Per-axis role of a cell: multiplier, kernel on theta <= s, kernel on theta > s.
enum class CellKind : std::uint8_t { MULT = 0, LOWER = 1, UPPER = 2 };

struct Interval {
  Rational a = 0, b = 1;
  bool operator==(const Interval&) const = default;
};

inline int num_cells(int dim) {
  int n = 1;
  for (int i = 0; i < dim; ++i) n *= 3;
  return n;
}

inline int pow3(int axis) { return num_cells(axis); }

inline CellKind cell_kind(int code, int axis) {
  return static_cast<CellKind>((code / pow3(axis)) % 3);
}

inline int with_kind(int code, int axis, CellKind k) {
  int p = pow3(axis);
  return code - static_cast<int>(cell_kind(code, axis)) * p + static_cast<int>(k) * p;
}

inline CellKind mirror(CellKind k) {
  return k == CellKind::LOWER ? CellKind::UPPER : k == CellKind::UPPER ? CellKind::LOWER : k;
}

inline int mirror_cell(int code, int dim) {
  for (int i = 0; i < dim; ++i) code = with_kind(code, i, mirror(cell_kind(code, i)));
  return code;
}

inline int multiplier_mask(int code, int dim) {
  int m = 0;
  for (int i = 0; i < dim; ++i)
    if (cell_kind(code, i) == CellKind::MULT) m |= 1 << i;
  return m;
}

inline std::string cell_name(int code, int dim) {
  static const char kName[] = {'M', 'L', 'U'};
  std::string s = "(";
  for (int i = 0; i < dim; ++i) {
    if (i) s += ",";
    s += kName[static_cast<int>(cell_kind(code, i))];
  }
  return s + ")";
}

template <class S>
struct PI1Params {
  int axis = 0;
  Interval iv;
  MatPoly<S> R0, R1, R2;

  int rows() const { return R0.rows(); }
  int cols() const { return R0.cols(); }
  const MatPoly<S>& part(CellKind k) const {
    return k == CellKind::MULT ? R0 : k == CellKind::LOWER ? R1 : R2;
  }
  MatPoly<S>& part(CellKind k) { return k == CellKind::MULT ? R0 : k == CellKind::LOWER ? R1 : R2; }

  static PI1Params zero(int axis, Interval iv, int m, int n) {
    return {axis, iv, MatPoly<S>(m, n), MatPoly<S>(m, n), MatPoly<S>(m, n)};
  }
  static PI1Params identity(int axis, Interval iv, int n) {
    auto p = zero(axis, iv, n, n);
    p.R0 = MatPoly<S>::identity(n);
    return p;
  }
  bool operator==(const PI1Params& o) const {
    return axis == o.axis && iv == o.iv && R0 == o.R0 && R1 == o.R1 && R2 == o.R2;
  }
};

// Matrix-valued ND 3-PI operator in canonical form: one matrix polynomial per
// cell c in {MULT, LOWER, UPPER}^N, indexed by the base-3 code sum_i c_i 3^i.
template <class S>
struct NDPIOperator {
  std::vector<Interval> box;
  int rows = 0, cols = 0;
  std::vector<MatPoly<S>> cells;

  NDPIOperator() = default;
  NDPIOperator(std::vector<Interval> b, int m, int n)
      : box(std::move(b)), rows(m), cols(n), cells(num_cells(static_cast<int>(box.size())), MatPoly<S>(m, n)) {}

  int dim() const { return static_cast<int>(box.size()); }
  MatPoly<S>& cell(int code) { return cells[code]; }
  const MatPoly<S>& cell(int code) const { return cells[code]; }

  static NDPIOperator multiplier(std::vector<Interval> b, const MatPoly<S>& m) {
    NDPIOperator op(std::move(b), m.rows(), m.cols());
    op.cells[0] = m;
    return op;
  }
  static NDPIOperator identity(std::vector<Interval> b, int n) {
    return multiplier(std::move(b), MatPoly<S>::identity(n));
  }

  bool is_zero() const {
    for (const auto& c : cells)
      if (!c.is_zero()) return false;
    return true;
  }
};

template <class S>
using SumOfProducts = std::vector<std::vector<PI1Params<S>>>;

namespace detail {

enum class BoundRef : std::uint8_t { A, B, S, THETA };

struct AxisOption {
  CellKind out;
  bool integrate;
  BoundRef lo, hi;
};

// Contribution pattern of one axis when composing a Q-cell of kind q with an
// R-cell of kind r. Kernel-kernel pairs integrate over the dummy eta.
inline std::vector<AxisOption> axis_options(CellKind q, CellKind r) {
  using K = CellKind;
  using B = BoundRef;
  if (q == K::MULT) return {{r, false, B::A, B::A}};
  if (r == K::MULT) return {{q, false, B::A, B::A}};
  if (q == K::LOWER && r == K::LOWER) return {{K::LOWER, true, B::THETA, B::S}};
  if (q == K::LOWER && r == K::UPPER)
    return {{K::LOWER, true, B::A, B::THETA}, {K::UPPER, true, B::A, B::S}};
  if (q == K::UPPER && r == K::LOWER)
    return {{K::LOWER, true, B::S, B::B}, {K::UPPER, true, B::THETA, B::B}};
  return {{K::UPPER, true, B::S, B::THETA}};
}

inline Bound resolve(BoundRef b, int axis, const Interval& iv) {
  switch (b) {
    case BoundRef::A: return iv.a;
    case BoundRef::B: return iv.b;
    case BoundRef::S: return s_var(axis);
    default: return theta_var(axis);
  }
}

// Composes one Q cell with one R cell over the listed axes; emit(out_kinds, P)
// receives each resulting contribution.
template <class A, class B, class F>
void compose_cells(const MatPoly<A>& q, const std::vector<CellKind>& qk, const MatPoly<B>& r,
                   const std::vector<CellKind>& rk, const std::vector<int>& axes,
                   const std::vector<Interval>& ivs, F&& emit) {
  using R = product_t<A, B>;
  VarMap qm, rm;
  std::vector<std::vector<AxisOption>> opts(axes.size());
  for (std::size_t t = 0; t < axes.size(); ++t) {
    int ax = axes[t];
    opts[t] = axis_options(qk[t], rk[t]);
    bool qker = qk[t] != CellKind::MULT, rker = rk[t] != CellKind::MULT;
    if (qker && rker) {
      qm.map(theta_var(ax), eta_var(ax));
      rm.map(s_var(ax), eta_var(ax));
    } else if (qker) {
      rm.map(s_var(ax), theta_var(ax));
    }
  }
  MatPoly<R> prod = remap(q, qm) * remap(r, rm);
  if (prod.is_zero()) return;

  std::vector<CellKind> out(axes.size());
  std::function<void(std::size_t, const MatPoly<R>&)> rec = [&](std::size_t t, const MatPoly<R>& p) {
    if (t == axes.size()) {
      if (!p.is_zero()) emit(out, p);
      return;
    }
    for (const auto& o : opts[t]) {
      out[t] = o.out;
      if (!o.integrate) {
        rec(t + 1, p);
      } else {
        int ax = axes[t];
        rec(t + 1, integrate(p, eta_var(ax), resolve(o.lo, ax, ivs[t]), resolve(o.hi, ax, ivs[t])));
      }
    }
  };
  rec(0, prod);
}

template <class S>
void check_compatible(const NDPIOperator<S>& a, const NDPIOperator<S>& b) {
  if (a.box != b.box) throw std::invalid_argument("PI operators are defined on different boxes");
  if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument("PI operator shape mismatch");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Univariate operations.

template <class A, class B>
PI1Params<product_t<A, B>> compose1d(const PI1Params<A>& Q, const PI1Params<B>& R,
                                     const std::vector<VarId>& bystanders = {}) {
  if (Q.axis != R.axis || !(Q.iv == R.iv)) throw std::invalid_argument("compose1d: interval mismatch");
  if (Q.cols() != R.rows()) throw std::invalid_argument("compose1d: inner dimension mismatch");
  for (const auto& v : bystanders)
    if (v.axis == Q.axis) throw std::invalid_argument("compose1d: bystander on the composition axis");
  using T = product_t<A, B>;
  auto P = PI1Params<T>::zero(Q.axis, Q.iv, Q.rows(), R.cols());
  const CellKind kinds[] = {CellKind::MULT, CellKind::LOWER, CellKind::UPPER};
  for (CellKind qk : kinds)
    for (CellKind rk : kinds) {
      if (Q.part(qk).is_zero() || R.part(rk).is_zero()) continue;
      detail::compose_cells(Q.part(qk), {qk}, R.part(rk), {rk}, {Q.axis}, {Q.iv},
                            [&](const std::vector<CellKind>& out, const MatPoly<T>& p) {
                              P.part(out[0]) += p;
                            });
    }
  return P;
}

template <class S>
PI1Params<S> adjoint1d(const PI1Params<S>& R) {
  PI1Params<S> P{R.axis, R.iv, transpose(R.R0), {}, {}};
  P.R1 = transpose(swap_vars(R.R2, s_var(R.axis), theta_var(R.axis)));
  P.R2 = transpose(swap_vars(R.R1, s_var(R.axis), theta_var(R.axis)));
  return P;
}

// ---------------------------------------------------------------------------
// ND operations.

template <class S>
NDPIOperator<S> operator+(const NDPIOperator<S>& a, const NDPIOperator<S>& b) {
  detail::check_compatible(a, b);
  NDPIOperator<S> r = a;
  for (std::size_t c = 0; c < r.cells.size(); ++c) r.cells[c] = a.cells[c] + b.cells[c];
  return r;
}

template <class S>
NDPIOperator<S> operator-(const NDPIOperator<S>& a, const NDPIOperator<S>& b) {
  detail::check_compatible(a, b);
  NDPIOperator<S> r = a;
  for (std::size_t c = 0; c < r.cells.size(); ++c) r.cells[c] = a.cells[c] - b.cells[c];
  return r;
}

template <class S>
NDPIOperator<S> operator-(const NDPIOperator<S>& a) {
  NDPIOperator<S> r = a;
  for (auto& c : r.cells) c = -c;
  return r;
}

template <class S>
NDPIOperator<S> add_nd(const NDPIOperator<S>& a, const NDPIOperator<S>& b) {
  return a + b;
}

template <class S>
NDPIOperator<S> scale_nd(const NDPIOperator<S>& a, const Rational& lambda) {
  NDPIOperator<S> r = a;
  for (auto& c : r.cells) c = scale(c, lambda);
  return r;
}

template <class A, class B>
NDPIOperator<product_t<A, B>> compose_nd(const NDPIOperator<A>& Q, const NDPIOperator<B>& R) {
  if (Q.box != R.box) throw std::invalid_argument("compose_nd: box mismatch");
  if (Q.cols != R.rows) throw std::invalid_argument("compose_nd: inner dimension mismatch");
  using T = product_t<A, B>;
  const int N = Q.dim();
  NDPIOperator<T> P(Q.box, Q.rows, R.cols);
  std::vector<int> axes(N);
  for (int i = 0; i < N; ++i) axes[i] = i;
  std::vector<CellKind> qk(N), rk(N);
  std::vector<std::vector<typename Polynomial<T>::Term>> scratch;
  for (int cq = 0; cq < num_cells(N); ++cq) {
    if (Q.cells[cq].is_zero()) continue;
    for (int i = 0; i < N; ++i) qk[i] = cell_kind(cq, i);
    for (int cr = 0; cr < num_cells(N); ++cr) {
      if (R.cells[cr].is_zero()) continue;
      for (int i = 0; i < N; ++i) rk[i] = cell_kind(cr, i);
      detail::compose_cells(Q.cells[cq], qk, R.cells[cr], rk, axes, Q.box,
                            [&](const std::vector<CellKind>& out, const MatPoly<T>& p) {
                              int code = 0;
                              for (int i = 0; i < N; ++i) code += static_cast<int>(out[i]) * pow3(i);
                              P.cells[code] += p;
                            });
    }
  }
  return P;
}

template <class S>
NDPIOperator<S> adjoint_nd(const NDPIOperator<S>& R) {
  const int N = R.dim();
  NDPIOperator<S> P(R.box, R.cols, R.rows);
  for (int c = 0; c < num_cells(N); ++c) {
    if (R.cells[c].is_zero()) continue;
    VarMap vm;
    for (int i = 0; i < N; ++i)
      if (cell_kind(c, i) != CellKind::MULT) vm.map(s_var(i), theta_var(i)).map(theta_var(i), s_var(i));
    P.cells[mirror_cell(c, N)] = transpose(remap(R.cells[c], vm));
  }
  return P;
}

template <class S>
bool op_equal(const NDPIOperator<S>& a, const NDPIOperator<S>& b) {
  return a.box == b.box && a.rows == b.rows && a.cols == b.cols && a.cells == b.cells;
}

// Places 1D parameters on their axis with identity action on all other axes.
template <class S>
NDPIOperator<S> lift(const PI1Params<S>& p, const std::vector<Interval>& box) {
  if (p.axis < 0 || p.axis >= static_cast<int>(box.size()) || !(box[p.axis] == p.iv))
    throw std::invalid_argument("lift: axis or interval does not match the box");
  NDPIOperator<S> op(box, p.rows(), p.cols());
  for (CellKind k : {CellKind::MULT, CellKind::LOWER, CellKind::UPPER})
    op.cells[with_kind(0, p.axis, k)] = p.part(k);
  return op;
}

template <class S>
NDPIOperator<S> canonicalize(const SumOfProducts<S>& sop, const std::vector<Interval>& box) {
  const int N = static_cast<int>(box.size());
  if (sop.empty()) throw std::invalid_argument("canonicalize: empty sum of products");
  NDPIOperator<S> out;
  bool first = true;
  for (const auto& term : sop) {
    if (static_cast<int>(term.size()) != N)
      throw std::invalid_argument("canonicalize: term does not have one factor per axis");
    for (int i = 0; i < N; ++i)
      if (!(term[i].iv == box[i])) throw std::invalid_argument("canonicalize: interval mismatch");
    int m = term.front().rows(), n = term.back().cols();
    for (int i = 0; i + 1 < N; ++i)
      if (term[i].cols() != term[i + 1].rows()) throw std::invalid_argument("canonicalize: shape mismatch");
    if (first) {
      out = NDPIOperator<S>(box, m, n);
      first = false;
    } else if (out.rows != m || out.cols != n) {
      throw std::invalid_argument("canonicalize: terms have different shapes");
    }
    for (int c = 0; c < num_cells(N); ++c) {
      MatPoly<S> acc = term[0].part(cell_kind(c, 0));
      for (int i = 1; i < N && !acc.is_zero(); ++i) acc = acc * term[i].part(cell_kind(c, i));
      if (!acc.is_zero()) out.cells[c] += acc;
    }
  }
  return out;
}

// Kernels indexed by alpha in {-1,+1}^N (-1 = lower, +1 = upper).
template <class S>
NDPIOperator<S> from_semiseparable(const std::map<std::vector<int>, MatPoly<S>>& kernels,
                                   const MatPoly<S>& mult, const std::vector<Interval>& box) {
  const int N = static_cast<int>(box.size());
  NDPIOperator<S> op(box, mult.rows(), mult.cols());
  op.cells[0] = mult;
  for (const auto& [alpha, K] : kernels) {
    if (static_cast<int>(alpha.size()) != N) throw std::invalid_argument("from_semiseparable: bad sign pattern");
    int code = 0;
    for (int i = 0; i < N; ++i) {
      if (alpha[i] != -1 && alpha[i] != 1) throw std::invalid_argument("from_semiseparable: bad sign pattern");
      code = with_kind(code, i, alpha[i] < 0 ? CellKind::LOWER : CellKind::UPPER);
    }
    if (K.rows() != op.rows || K.cols() != op.cols) throw std::invalid_argument("from_semiseparable: shape mismatch");
    op.cells[code] = K;
  }
  return op;
}

template <class S>
int max_degree(const NDPIOperator<S>& op, VarId v) {
  int d = 0;
  for (const auto& c : op.cells) d = std::max(d, max_degree(c, v));
  return d;
}

template <class T, class S, class F>
NDPIOperator<T> convert_op(const NDPIOperator<S>& op, F f) {
  NDPIOperator<T> r(op.box, op.rows, op.cols);
  for (std::size_t c = 0; c < op.cells.size(); ++c)
    r.cells[c] = op.cells[c].map([&](const Polynomial<S>& p) { return convert<T>(p, f); });
  return r;
}

inline NDPIOperator<double> to_double(const NDPIOperator<Rational>& op) {
  return convert_op<double>(op, [](const Rational& r) { return to_double(r); });
}

// "cell (L,U): <poly>" lines for every nonzero cell.
template <class S>
std::string dump(const NDPIOperator<S>& op) {
  std::string out;
  const int N = op.dim();
  for (int c = 0; c < num_cells(N); ++c) {
    const auto& m = op.cells[c];
    if (m.is_zero()) continue;
    out += "cell " + cell_name(c, N) + ": ";
    out += (m.rows() == 1 && m.cols() == 1) ? to_string(m(0, 0)) : to_string(m);
    out += "\n";
  }
  if (out.empty()) out = "zero\n";
  return out;
}

}  // namespace pie
