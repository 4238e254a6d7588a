#include "pie/lpi.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "pie/verify.hpp"

namespace pie::lpi {

// ---------------------------------------------------------------------------
// Basis.

int MonomialBasis::size() const {
  int s = 1;
  for (int t = 0; t < dim; ++t) s *= mu();
  return s;
}

std::vector<int> MonomialBasis::digits(int e) const {
  std::vector<int> d(dim);
  for (int t = 0; t < dim; ++t) {
    d[t] = e % mu();
    e /= mu();
  }
  return d;
}

int MonomialBasis::cell(int e) const {
  int c = 0;
  for (int t = 0; t < dim; ++t) {
    c += static_cast<int>(axis[e % mu()].kind) * pow3(t);
    e /= mu();
  }
  return c;
}

int MonomialBasis::mult_mask(int e) const { return multiplier_mask(cell(e), dim); }

Monomial MonomialBasis::monomial(int e) const {
  Monomial m;
  for (int t = 0; t < dim; ++t) {
    const auto& a = axis[e % mu()];
    e /= mu();
    m.set(s_var(t), a.ps);
    m.set(theta_var(t), a.pt);
  }
  return m;
}

MonomialBasis build_basis(int d, int dim, BasisKind kind) {
  if (d < 0) throw std::invalid_argument("build_basis: negative degree");
  if (dim < 1 || dim > kMaxAxes) throw std::invalid_argument("build_basis: unsupported dimension");
  MonomialBasis B;
  B.degree = d;
  B.dim = dim;
  B.kind = kind;
  for (int p = 0; p <= d; ++p) B.axis.push_back({CellKind::MULT, p, 0});
  const bool tensor = kind == BasisKind::Tensor;
  for (CellKind k : {CellKind::LOWER, CellKind::UPPER})
    for (int t = 0; t <= (tensor ? 2 * d : d); ++t)
      for (int ps = t; ps >= 0; --ps)
        if (ps <= d && t - ps <= d) B.axis.push_back({k, ps, t - ps});
  return B;
}

namespace {

std::vector<int> all_elems(const MonomialBasis& B, const std::vector<int>& elems) {
  if (!elems.empty()) return elems;
  std::vector<int> e(B.size());
  for (int i = 0; i < B.size(); ++i) e[i] = i;
  return e;
}

void check_box(const MonomialBasis& B, const std::vector<Interval>& box) {
  if (static_cast<int>(box.size()) != B.dim) throw std::invalid_argument("basis dimension does not match the box");
}

}  // namespace

NDPIOperator<Rational> basis_operator(const MonomialBasis& B, const std::vector<Interval>& box, int n,
                                      const std::vector<int>& elems) {
  check_box(B, box);
  auto es = all_elems(B, elems);
  const int E = static_cast<int>(es.size());
  NDPIOperator<Rational> Z(box, n * E, n);
  for (int i = 0; i < n; ++i)
    for (int x = 0; x < E; ++x)
      Z.cells[B.cell(es[x])](i * E + x, i) = Polynomial<Rational>::monomial(B.monomial(es[x]), Rational(1));
  return Z;
}

NDPIOperator<Affine> parameterize_P(const MonomialBasis& B, const std::vector<Interval>& box, int n, int first_var,
                                    const std::vector<int>& elems) {
  check_box(B, box);
  auto es = all_elems(B, elems);
  const int E = static_cast<int>(es.size());
  NDPIOperator<Affine> P(box, n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int x = 0; x < E; ++x)
        P.cells[B.cell(es[x])](i, j) +=
            AffinePoly::monomial(B.monomial(es[x]), Affine::variable(first_var + (i * n + j) * E + x));
  return P;
}

NDPIOperator<Affine> gram_operator(const MonomialBasis& B, const std::vector<Interval>& box, int n, int first_var,
                                   const std::vector<int>& elems) {
  auto Z = to_double(basis_operator(B, box, n, elems));
  const int m = Z.rows;
  MatPoly<Affine> X(m, m);
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < m; ++q) X(p, q) = AffinePoly(Affine::variable(first_var + sym_index(p, q)));
  auto XZ = compose_nd(NDPIOperator<Affine>::multiplier(box, X), Z);
  return compose_nd(adjoint_nd(Z), XZ);
}

std::string to_string(Group g) {
  switch (g) {
    case Group::Symmetry: return "symmetry";
    case Group::Positivity: return "positivity";
    default: return "derivative";
  }
}

// ---------------------------------------------------------------------------
// Assembly.

namespace {

constexpr int kExpBits = 6;

std::uint64_t pack(const Monomial& m, int N) {
  std::uint64_t code = 0;
  for (int t = 0; t < N; ++t) {
    int es = m.exponent(s_var(t)), et = m.exponent(theta_var(t));
    if (es >= 64 || et >= 64 || m.exponent(eta_var(t)) != 0)
      throw std::runtime_error("lpi: monomial exponent out of range");
    code |= static_cast<std::uint64_t>(es) << (2 * kExpBits * t);
    code |= static_cast<std::uint64_t>(et) << (2 * kExpBits * t + kExpBits);
  }
  return code;
}

Monomial unpack(std::uint64_t code, int N) {
  Monomial m;
  for (int t = 0; t < N; ++t) {
    m.set(s_var(t), static_cast<int>((code >> (2 * kExpBits * t)) & 63));
    m.set(theta_var(t), static_cast<int>((code >> (2 * kExpBits * t + kExpBits)) & 63));
  }
  return m;
}

// Swaps s and theta exponents on the kernel axes of a cell.
std::uint64_t mirror_mono(std::uint64_t code, int cell, int N) {
  for (int t = 0; t < N; ++t) {
    if (cell_kind(cell, t) == CellKind::MULT) continue;
    const int sh = 2 * kExpBits * t;
    std::uint64_t es = (code >> sh) & 63, et = (code >> (sh + kExpBits)) & 63;
    code &= ~(std::uint64_t{4095} << sh);
    code |= (et << sh) | (es << (sh + kExpBits));
  }
  return code;
}

struct Key {
  std::uint64_t mono;
  int group, cell, i, j;
  bool operator==(const Key&) const = default;
};

struct KeyHash {
  std::size_t operator()(const Key& k) const {
    std::uint64_t h = k.mono * 0x9E3779B97F4A7C15ull;
    h ^= (static_cast<std::uint64_t>(k.group) << 56) ^ (static_cast<std::uint64_t>(k.cell) << 40) ^
         (static_cast<std::uint64_t>(k.i) << 20) ^ static_cast<std::uint64_t>(k.j);
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ull);
  }
};

Key mirror_key(const Key& k, int N) { return {mirror_mono(k.mono, k.cell, N), k.group, mirror_cell(k.cell, N), k.j, k.i}; }

// Order on (cell, mono, i, j) deciding which row of a mirrored pair is kept.
bool key_less(const Key& a, const Key& b) {
  if (a.cell != b.cell) return a.cell < b.cell;
  if (a.mono != b.mono) return a.mono < b.mono;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}

class RowTable {
 public:
  explicit RowTable(int N) : N_(N) {}
  int get(const Key& k) {
    auto [it, fresh] = index_.try_emplace(k, static_cast<int>(keys_.size()));
    if (fresh) keys_.push_back(k);
    return it->second;
  }
  const std::vector<Key>& keys() const { return keys_; }

 private:
  int N_;
  std::unordered_map<Key, int, KeyHash> index_;
  std::vector<Key> keys_;
};

std::set<int> cell_masks(const NDPIOperator<Rational>& op) {
  std::set<int> m;
  for (int c = 0; c < num_cells(op.dim()); ++c)
    if (!op.cells[c].is_zero()) m.insert(multiplier_mask(c, op.dim()));
  return m;
}

bool below(int mask, const std::set<int>& masks) {
  for (int M : masks)
    if ((mask & ~M) == 0) return true;
  return false;
}

// Largest total degree in (s_i, theta_i) over axes; Gram kernels built from
// total-degree-d' monomials reach exactly total degree 2d'+1 per axis.
// Largest degree per axis (s and theta together) or per variable.
int op_degree(const NDPIOperator<Rational>& op, BasisKind kind) {
  int d = 0;
  for (const auto& c : op.cells)
    for (const auto& p : c.entries())
      for (const auto& [m, v] : p.terms())
        for (int t = 0; t < op.dim(); ++t) {
          const int a = m.exponent(s_var(t)), b = m.exponent(theta_var(t));
          d = std::max(d, kind == BasisKind::Total ? a + b : std::max(a, b));
        }
  return d;
}

// Per-axis Gram table: for basis rows (p, q), the terms of Z_p* Z_q by part.
struct AxisTerm {
  std::uint64_t mono;
  double v;
};

using GramTable = std::vector<std::array<std::vector<AxisTerm>, 3>>;  // index p * mu + q

GramTable axis_gram(const MonomialBasis& B, int axis, const Interval& iv) {
  const int m = B.mu();
  auto z = [&](int p) {
    auto Z = PI1Params<Rational>::zero(axis, iv, 1, 1);
    Monomial mono;
    mono.set(s_var(axis), B.axis[p].ps);
    mono.set(theta_var(axis), B.axis[p].pt);
    Z.part(B.axis[p].kind)(0, 0) = Polynomial<Rational>::monomial(mono, Rational(1));
    return Z;
  };
  GramTable G(m * m);
  for (int p = 0; p < m; ++p) {
    auto Zp = adjoint1d(z(p));
    for (int q = 0; q < m; ++q) {
      auto P = compose1d(Zp, z(q));
      for (CellKind k : {CellKind::MULT, CellKind::LOWER, CellKind::UPPER}) {
        for (const auto& [mono, c] : P.part(k)(0, 0).terms()) {
          int es = mono.exponent(s_var(axis)), et = mono.exponent(theta_var(axis));
          std::uint64_t code = (static_cast<std::uint64_t>(es) << (2 * kExpBits * axis)) |
                               (static_cast<std::uint64_t>(et) << (2 * kExpBits * axis + kExpBits));
          G[p * m + q][static_cast<int>(k)].push_back({code, to_double(c)});
        }
      }
    }
  }
  return G;
}

}  // namespace

Assembler::Assembler(const PIESystem<Rational>& sys, LPIOptions opt) : Assembler(sys.T, sys.A, opt) {}

Assembler::Assembler(const NDPIOperator<Rational>& T, const NDPIOperator<Rational>& A, LPIOptions opt)
    : T_(T), A_(A), opt_(opt) {
  if (T.box != A.box || T.rows != T.cols || A.rows != T.rows || A.cols != T.cols)
    throw std::invalid_argument("lpi: T and A must be square operators of the same shape on the same box");
  if (!(opt.epsilon > 0)) throw std::invalid_argument("lpi: epsilon must be positive");
  if (opt.degree < 0) throw std::invalid_argument("lpi: negative degree");
  build();
}

void Assembler::build() {
  N_ = T_.dim();
  n_ = T_.rows;
  const int N = N_, n = n_;
  BP_ = build_basis(opt_.degree, N);

  const int full_mask = (1 << N) - 1;
  for (int e = 0; e < BP_.size(); ++e)
    if (!opt_.trim.kernel_free_P || BP_.mult_mask(e) == full_mask) eP_.push_back(e);
  const int EP = static_cast<int>(eP_.size());

  // Variable ids per (i, j, element); symmetric kernels tie each upper-kernel
  // element to the lower one with the same monomial.
  std::vector<int> pos(BP_.size(), -1);
  for (int x = 0; x < EP; ++x) pos[eP_[x]] = x;
  const int K = (opt_.degree + 1) * (opt_.degree + 2) / 2;
  auto canonical = [&](int e) {
    auto dg = BP_.digits(e);
    int out = 0, pw = 1;
    for (int t = 0; t < N; ++t) {
      int dt = dg[t];
      if (opt_.trim.symmetric_kernels && BP_.axis[dt].kind == CellKind::UPPER) dt -= K;
      out += dt * pw;
      pw *= BP_.mu();
    }
    return out;
  };
  var_of_.assign(n * n * EP, -1);
  {
    std::map<std::tuple<int, int, int>, int> ids;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int x = 0; x < EP; ++x) {
          auto key = std::make_tuple(i, j, canonical(eP_[x]));
          auto [it, fresh] = ids.try_emplace(key, static_cast<int>(ids.size()));
          var_of_[(i * n + j) * EP + x] = it->second;
        }
    nPvars_ = static_cast<int>(ids.size());
  }

  // Exact per-variable images: X_v = T* E_v, Y_v = A* E_v.
  const auto Tt = adjoint_nd(T_), At = adjoint_nd(A_);
  std::vector<NDPIOperator<Rational>> E(nPvars_, NDPIOperator<Rational>(T_.box, n, n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int x = 0; x < EP; ++x)
        E[var_of_[(i * n + j) * EP + x]].cells[BP_.cell(eP_[x])](i, j) +=
            Polynomial<Rational>::monomial(BP_.monomial(eP_[x]), Rational(1));
  std::vector<NDPIOperator<Rational>> X(nPvars_), Y(nPvars_);
  lhs_degree_ = 0;
  for (int v = 0; v < nPvars_; ++v) {
    X[v] = compose_nd(Tt, E[v]);
    Y[v] = compose_nd(At, E[v]);
    lhs_degree_ = std::max({lhs_degree_, op_degree(X[v], opt_.gram_basis), op_degree(Y[v], opt_.gram_basis)});
  }
  const auto TT = compose_nd(Tt, T_);
  lhs_degree_ = std::max(lhs_degree_, op_degree(TT, opt_.gram_basis));

  min_dprime_ = std::max(0, lhs_degree_ / 2);  // smallest d' with 2d'+1 >= degree
  if (opt_.degree_prime >= 0) {
    if (opt_.degree_prime < min_dprime_)
      throw std::invalid_argument("degree-prime " + std::to_string(opt_.degree_prime) +
                                  " cannot match left-hand sides of degree " + std::to_string(lhs_degree_) +
                                  "; the minimal sufficient d' is " + std::to_string(min_dprime_));
    dprime_ = opt_.degree_prime;
  } else {
    dprime_ = min_dprime_;
  }
  BG_ = build_basis(dprime_, N, opt_.gram_basis);

  std::set<int> mT = cell_masks(T_), mTA = mT;
  for (int m : cell_masks(A_)) mTA.insert(m);
  for (int e = 0; e < BG_.size(); ++e) {
    const int mk = BG_.mult_mask(e);
    if ((!opt_.trim.structural || below(mk, mT)) && (!opt_.trim.multiplier_free_R || mk == 0)) eR_.push_back(e);
    if (!opt_.trim.structural || below(mk, mTA)) eQ_.push_back(e);
  }

  RowTable rows(N);
  std::vector<double> rhs;
  auto row_of = [&](const Key& k) {
    int r = rows.get(k);
    if (r >= static_cast<int>(rhs.size())) rhs.resize(r + 1, 0.0);
    return r;
  };

  // Terms of a self-adjoint (sign = +1) or anti-self-adjoint (sign = -1)
  // operator, restricted to the canonical row of each mirrored pair.
  auto emit = [&](const NDPIOperator<Rational>& op, Group g, int sign, auto&& sink) {
    for (int c = 0; c < num_cells(N); ++c)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (const auto& [mono, coef] : op.cells[c](i, j).terms()) {
            Key k{pack(mono, N), static_cast<int>(g), c, i, j};
            Key mk = mirror_key(k, N);
            if (key_less(mk, k) || (sign < 0 && mk == k)) continue;
            sink(row_of(k), to_double(coef));
          }
  };

  for (int v = 0; v < nPvars_; ++v) {
    const auto Xa = adjoint_nd(X[v]);
    auto add_to = [&](std::vector<sdp::Entry>& out) {
      return [&out, v](int r, double c) { out.push_back({r, 0, v, v, c}); };
    };
    emit(Xa - X[v], Group::Symmetry, -1, add_to(base_));
    emit(scale_nd(X[v] + Xa, Rational(1, 2)), Group::Positivity, 1, add_to(base_));
    emit(Y[v] + adjoint_nd(Y[v]), Group::Derivative, 1, add_to(base_));
    emit(X[v] + Xa, Group::Derivative, 1, add_to(kpart_));
  }
  const double eps2 = opt_.epsilon * opt_.epsilon;
  emit(TT, Group::Positivity, 1, [&](int r, double c) { rhs[r] += eps2 * c; });

  // Gram terms through per-axis tables: Z_a* Z_b factors over the axes.
  std::vector<GramTable> tables;
  for (int t = 0; t < N; ++t) tables.push_back(axis_gram(BG_, t, T_.box[t]));
  const int mu = BG_.mu();
  auto gram = [&](const std::vector<int>& elems, Group g, int block, double sign) {
    const int Eg = static_cast<int>(elems.size());
    std::vector<std::vector<int>> dg(Eg);
    for (int x = 0; x < Eg; ++x) dg[x] = BG_.digits(elems[x]);
    const int size = n * Eg;
    std::vector<const std::array<std::vector<AxisTerm>, 3>*> parts(N);
    for (int p = 0; p < size; ++p) {
      const int i = p / Eg, a = p % Eg;
      for (int q = p; q < size; ++q) {
        const int j = q / Eg, b = q % Eg;
        for (int t = 0; t < N; ++t) parts[t] = &tables[t][dg[a][t] * mu + dg[b][t]];
        const double half = p == q ? 1.0 : 0.5;
        std::function<void(int, int, std::uint64_t, double)> rec = [&](int t, int cell, std::uint64_t mono,
                                                                       double coef) {
          if (t == N) {
            Key k{mono, static_cast<int>(g), cell, i, j};
            Key mk = mirror_key(k, N);
            const double v = sign * coef * half;
            if (!key_less(mk, k)) base_.push_back({row_of(k), block, p, q, v});
            if (p != q && !key_less(k, mk)) base_.push_back({row_of(mk), block, p, q, v});
            return;
          }
          for (int kind = 0; kind < 3; ++kind)
            for (const auto& term : (*parts[t])[kind])
              rec(t + 1, cell + kind * pow3(t), mono | term.mono, coef * term.v);
        };
        rec(0, 0, 0, 1.0);
      }
    }
  };
  gram(eR_, Group::Positivity, 1, -1.0);
  gram(eQ_, Group::Derivative, 2, 1.0);

  rhs_ = std::move(rhs);
  rhs_.resize(rows.keys().size(), 0.0);
  rows_.reserve(rows.keys().size());
  for (const auto& k : rows.keys()) rows_.push_back({static_cast<Group>(k.group), k.cell, unpack(k.mono, N), k.i, k.j});
}

StabilitySDP Assembler::assemble(double k) const {
  if (!(k >= 0) || !std::isfinite(k)) throw std::invalid_argument("lpi: k must be finite and nonnegative");
  StabilitySDP S;
  S.k = k;
  S.epsilon = opt_.epsilon;
  S.d = opt_.degree;
  S.dprime = dprime_;
  S.n = n_;
  S.dim = N_;
  S.num_P = nPvars_;
  S.size_R = n_ * static_cast<int>(eR_.size());
  S.size_Q = n_ * static_cast<int>(eQ_.size());
  auto& p = S.problem;
  p.add_block(sdp::BlockKind::FREE, S.num_P);
  p.add_block(sdp::BlockKind::PSD, S.size_R);
  p.add_block(sdp::BlockKind::PSD, S.size_Q);
  p.b = rhs_;
  p.A.reserve(base_.size() + kpart_.size());
  p.A = base_;
  if (k != 0)
    for (auto e : kpart_) {
      e.v *= k;
      p.A.push_back(e);
    }
  p.normalize();

  // Drop rows that ended up empty with a zero right-hand side.
  std::vector<int> count(rhs_.size(), 0);
  for (const auto& e : p.A) ++count[e.row];
  std::vector<int> renum(rhs_.size(), -1);
  std::vector<double> b;
  for (std::size_t r = 0; r < rhs_.size(); ++r)
    if (count[r] > 0 || rhs_[r] != 0.0) {
      renum[r] = static_cast<int>(b.size());
      b.push_back(rhs_[r]);
      S.rows.push_back(rows_[r]);
    }
  for (auto& e : p.A) e.row = renum[e.row];
  p.b = std::move(b);
  return S;
}

NDPIOperator<double> Assembler::recover_P(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != nPvars_) throw std::invalid_argument("recover_P: wrong number of values");
  const int EP = static_cast<int>(eP_.size());
  NDPIOperator<double> P(T_.box, n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int e = 0; e < EP; ++e) {
        double v = x[var_of_[(i * n_ + j) * EP + e]];
        if (v != 0.0) P.cells[BP_.cell(eP_[e])](i, j) += Polynomial<double>::monomial(BP_.monomial(eP_[e]), v);
      }
  return P;
}

NDPIOperator<double> Assembler::recover_P(const sdp::SDPSolution& sol) const {
  if (sol.X.empty()) throw std::invalid_argument("recover_P: solution has no primal point");
  const auto& xf = sol.X[0];
  std::vector<double> x(xf.data(), xf.data() + xf.size());
  return recover_P(x);
}

StabilitySDP assemble(const NDPIOperator<Rational>& T, const NDPIOperator<Rational>& A, double k, double epsilon,
                      int d, int dprime) {
  LPIOptions o;
  o.epsilon = epsilon;
  o.degree = d;
  o.degree_prime = dprime;
  return Assembler(T, A, o).assemble(k);
}

// ---------------------------------------------------------------------------
// Certificate checks.

namespace {

NDPIOperator<double> scaled(const NDPIOperator<double>& op, double s) {
  NDPIOperator<double> r = op;
  for (auto& c : r.cells) c = c.map([&](const Polynomial<double>& p) {
    return convert<double>(p, [&](double v) { return v * s; });
  });
  return r;
}

// Random test functions: half low-degree polynomials, half products of sines
// and cosines, each column normalized to unit L2 norm on the grid.
GridFunction random_functions(const std::vector<Interval>& box, int n, int count, unsigned seed, int q) {
  const int N = static_cast<int>(box.size());
  std::mt19937 rng(seed);
  std::normal_distribution<double> G(0, 1);
  std::uniform_int_distribution<int> freq(1, 4);
  struct Fn {
    bool trig;
    std::vector<std::vector<double>> coef;  // [component][monomial or axis-phase data]
  };
  const int deg = 4;
  int nmono = 1;
  for (int t = 0; t < N; ++t) nmono *= deg + 1;
  std::vector<Fn> fns(count);
  for (int c = 0; c < count; ++c) {
    fns[c].trig = c % 2 == 1;
    fns[c].coef.resize(n);
    for (int i = 0; i < n; ++i) {
      auto& cf = fns[c].coef[i];
      if (!fns[c].trig) {
        cf.resize(nmono);
        for (auto& x : cf) x = G(rng);
      } else {
        cf.push_back(G(rng));
        for (int t = 0; t < N; ++t) {
          cf.push_back(freq(rng));
          cf.push_back(std::uniform_real_distribution<double>(0, M_PI)(rng));
        }
      }
    }
  }
  auto raw = [=](const std::vector<double>& x) {
    Eigen::MatrixXd m(n, count);
    for (int c = 0; c < count; ++c)
      for (int i = 0; i < n; ++i) {
        const auto& cf = fns[c].coef[i];
        double v = 0;
        if (!fns[c].trig) {
          for (int k = 0; k < nmono; ++k) {
            double term = cf[k];
            int r = k;
            for (int t = 0; t < N; ++t) {
              double u = (x[t] - to_double(box[t].a)) / to_double(box[t].b - box[t].a);
              term *= std::pow(2 * u - 1, r % (deg + 1));
              r /= deg + 1;
            }
            v += term;
          }
        } else {
          v = cf[0];
          for (int t = 0; t < N; ++t) {
            double u = (x[t] - to_double(box[t].a)) / to_double(box[t].b - box[t].a);
            v *= std::sin(cf[1 + 2 * t] * M_PI * u / 2 + cf[2 + 2 * t]);
          }
        }
        m(i, c) = v;
      }
    return m;
  };
  auto g = sample(box, q, raw);
  Eigen::VectorXd norms = inner_products(g, g).diagonal().cwiseSqrt();
  return [raw, norms](const std::vector<double>& x) {
    Eigen::MatrixXd m = raw(x);
    for (int c = 0; c < m.cols(); ++c) m.col(c) /= norms(c);
    return m;
  };
}

}  // namespace

Replay replay_certificate(const NDPIOperator<double>& T, const NDPIOperator<double>& A,
                          const NDPIOperator<double>& P, double k, double epsilon, int samples, unsigned seed,
                          int q) {
  Replay r;
  r.samples = samples;
  const auto Ps = adjoint_nd(P);
  const auto TP = compose_nd(adjoint_nd(T), P);
  const auto PT = compose_nd(Ps, T);
  const auto L = compose_nd(Ps, A) + compose_nd(adjoint_nd(A), P) + scaled(PT, 2 * k);
  auto f = random_functions(T.box, T.cols, samples, seed, q);
  auto v = sample(T.box, q, f);
  auto Tv = apply_quadrature(T, f, q);
  auto TPv = apply_quadrature(TP, f, q);
  auto PTv = apply_quadrature(PT, f, q);
  auto Lv = apply_quadrature(L, f, q);
  Eigen::MatrixXd vTP = inner_products(v, TPv), vPT = inner_products(v, PTv);
  Eigen::VectorXd tt = inner_products(Tv, Tv).diagonal();
  Eigen::VectorXd lv = inner_products(v, Lv).diagonal();
  r.positivity_margin = (vTP.diagonal() - epsilon * epsilon * tt).minCoeff();
  r.derivative_max = lv.maxCoeff();
  r.symmetry_error = (vPT - vTP).cwiseAbs().maxCoeff();
  r.ok = r.positivity_margin >= -1e-6 && r.derivative_max <= 1e-6;
  return r;
}

StabilityResult check_stability(const Assembler& as, double k, const CheckOptions& opt) {
  using clock = std::chrono::steady_clock;
  StabilityResult res;
  res.k = k;
  auto t0 = clock::now();
  auto S = as.assemble(k);
  auto t1 = clock::now();
  res.rows = S.problem.num_constraints();
  res.num_P = S.num_P;
  res.size_R = S.size_R;
  res.size_Q = S.size_Q;
  try {
    res.solution = sdp::solve(S.problem, opt.solver);
  } catch (const std::exception& e) {
    std::ostringstream os;
    os << "solver failed at k = " << k << ": " << e.what();
    throw std::runtime_error(os.str());
  }
  auto t2 = clock::now();
  res.seconds_assemble = std::chrono::duration<double>(t1 - t0).count();
  res.seconds_solve = std::chrono::duration<double>(t2 - t1).count();
  if (res.solution.status != sdp::Status::Feasible) return res;
  const auto P = as.recover_P(res.solution);
  const auto Td = to_double(as.T());
  res.feasible = true;
  if (opt.replay) {
    res.replay = replay_certificate(Td, to_double(as.A()), P, k, as.options().epsilon, opt.samples, opt.seed);
    res.feasible = res.replay.ok;
  }
  if (opt.gain) {
    auto nrm = opnorm_estimate(compose_nd(adjoint_nd(P), Td), 8);
    res.gain = std::sqrt(std::max(0.0, nrm.value)) / as.options().epsilon;
  }
  return res;
}

BisectResult bisect_rate(const Assembler& as, double k_lo, double k_hi, double tol, const CheckOptions& opt,
                         const std::function<void(const BisectStep&)>& progress) {
  if (!(k_lo >= 0) || !(k_hi >= k_lo)) throw std::invalid_argument("bisect_rate: need 0 <= k_lo <= k_hi");
  if (!(tol > 0)) throw std::invalid_argument("bisect_rate: tolerance must be positive");
  BisectResult out;
  auto eval = [&](double k) {
    auto r = check_stability(as, k, opt);
    BisectStep st{k,
                  r.solution.status,
                  r.feasible,
                  r.solution.iterations,
                  r.seconds_assemble + r.seconds_solve,
                  r.solution.primal_residual,
                  r.solution.min_eig,
                  r.replay.ok};
    out.history.push_back(st);
    if (progress) progress(st);
    if (st.certified) {
      for (const auto& h : out.history)
        if (h.status == sdp::Status::Infeasible && h.k < k) {
          std::ostringstream os;
          os << "non-monotone feasibility: k = " << k << " is certified but k = " << h.k
             << " was reported infeasible";
          throw NonMonotoneError(os.str());
        }
      out.best = std::move(r);
    }
    return st.certified;
  };
  if (eval(k_hi)) {
    out.k_max = k_hi;
    out.any_feasible = out.hit_upper = true;
    return out;
  }
  if (k_lo == k_hi || !eval(k_lo)) {
    out.k_max = k_lo;
    return out;
  }
  out.any_feasible = true;
  double lo = k_lo, hi = k_hi;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (eval(mid)) lo = mid;
    else hi = mid;
  }
  out.k_max = lo;
  return out;
}

}  // namespace pie::lpi
