#include "pie/verify.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <random>

#include "pie/pieconvert.hpp"

namespace pie {

namespace {

PolyVec<Rational> mat_times(const MatrixQ& M, const PolyVec<Rational>& u) {
  PolyVec<Rational> out(M.rows());
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      if (M(r, c) != 0) out[r] += scale(u[c], M(r, c));
  return out;
}

void add_to(PolyVec<Rational>& a, const PolyVec<Rational>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace

std::vector<BCResidual> bc_residual(const PDESpec& spec, const PolyVec<Rational>& u) {
  if (static_cast<int>(u.size()) != spec.n) throw std::invalid_argument("bc_residual: vector length mismatch");
  std::vector<BCResidual> out;
  for (int i = 0; i < spec.dim(); ++i) {
    const int d = spec.delta[i];
    const VarId s = s_var(i);
    std::vector<PolyVec<Rational>> at_a(d), at_b(d);
    for (int k = 0; k < d; ++k) {
      at_a[k].resize(u.size());
      at_b[k].resize(u.size());
      for (std::size_t c = 0; c < u.size(); ++c) {
        auto dk = differentiate(u[c], s, k);
        at_a[k][c] = substitute(dk, s, spec.box[i].a);
        at_b[k][c] = substitute(dk, s, spec.box[i].b);
      }
    }
    for (int j = 0; j < d; ++j) {
      BCResidual r{i, j, PolyVec<Rational>(u.size())};
      for (int k = 0; k < d; ++k) {
        add_to(r.value, mat_times(spec.bcs[i].B[j][k], at_a[k]));
        add_to(r.value, mat_times(spec.bcs[i].C[j][k], at_b[k]));
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

bool bc_satisfied(const PDESpec& spec, const PolyVec<Rational>& u) {
  for (const auto& r : bc_residual(spec, u))
    if (!r.is_zero()) return false;
  return true;
}

// ---------------------------------------------------------------------------

const GaussRule& gauss_legendre(int q) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  if (q < 1) throw std::invalid_argument("gauss_legendre: order must be positive");
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(q);
  if (it != cache.end()) return it->second;
  GaussRule g;
  g.x.resize(q);
  g.w.resize(q);
  for (int i = 0; i < (q + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (q + 0.5));
    double dp = 0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= q; ++k) {
        double p2 = ((2.0 * k - 1) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (x * p1 - p0) / (x * x - 1);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1, p1 = x;
    for (int k = 2; k <= q; ++k) {
      double p2 = ((2.0 * k - 1) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = q * (x * p1 - p0) / (x * x - 1);
    double w = 2 / ((1 - x * x) * dp * dp);
    g.x[i] = -x;
    g.x[q - 1 - i] = x;
    g.w[i] = g.w[q - 1 - i] = w;
  }
  if (q % 2 == 1) g.x[q / 2] = 0.0;
  return cache.emplace(q, std::move(g)).first->second;
}

MatPolyEvaluator::MatPolyEvaluator(const MatPoly<double>& m) : rows_(m.rows()), cols_(m.cols()) {
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j)
      for (const auto& [mono, c] : m(i, j).terms()) {
        Term t{c, i + rows_ * j, {}};
        for (int s = 0; s < kNumSlots; ++s)
          if (mono[s]) t.factors.emplace_back(s, mono[s]);
        terms_.push_back(std::move(t));
      }
}

void MatPolyEvaluator::eval(const std::array<double, kNumSlots>& x, Eigen::MatrixXd& out) const {
  out.setZero(rows_, cols_);
  double* data = out.data();
  for (const auto& t : terms_) {
    double v = t.c;
    for (const auto& [s, p] : t.factors)
      for (int k = 0; k < p; ++k) v *= x[s];
    data[t.entry] += v;
  }
}

int QuadGrid::size() const {
  int n = 1;
  for (int i = 0; i < dim(); ++i) n *= q;
  return n;
}

std::vector<double> QuadGrid::point(int k) const {
  std::vector<double> x(dim());
  for (int i = 0; i < dim(); ++i) {
    x[i] = nodes[i][k % q];
    k /= q;
  }
  return x;
}

double QuadGrid::weight(int k) const {
  double w = 1;
  for (int i = 0; i < dim(); ++i) {
    w *= weights[i][k % q];
    k /= q;
  }
  return w;
}

QuadGrid make_grid(const std::vector<Interval>& box, int q) {
  const auto& g = gauss_legendre(q);
  QuadGrid grid;
  grid.box = box;
  grid.q = q;
  for (const auto& iv : box) {
    double a = to_double(iv.a), b = to_double(iv.b), h = 0.5 * (b - a);
    std::vector<double> x(q), w(q);
    for (int k = 0; k < q; ++k) {
      x[k] = a + h * (g.x[k] + 1);
      w[k] = h * g.w[k];
    }
    grid.nodes.push_back(std::move(x));
    grid.weights.push_back(std::move(w));
  }
  return grid;
}

QuadGrid sample(const std::vector<Interval>& box, int q, const GridFunction& f) {
  QuadGrid grid = make_grid(box, q);
  grid.values.resize(grid.size());
  for (int k = 0; k < grid.size(); ++k) grid.values[k] = f(grid.point(k));
  return grid;
}

QuadGrid apply_quadrature(const NDPIOperator<double>& op, const GridFunction& f, int q) {
  const int N = op.dim();
  QuadGrid grid = make_grid(op.box, q);
  const auto& g = gauss_legendre(q);
  std::vector<int> codes;
  std::vector<MatPolyEvaluator> ev;
  for (int c = 0; c < num_cells(N); ++c)
    if (!op.cells[c].is_zero()) {
      codes.push_back(c);
      ev.emplace_back(op.cells[c]);
    }
  std::vector<double> lo(N), hi(N);
  for (int i = 0; i < N; ++i) {
    lo[i] = to_double(op.box[i].a);
    hi[i] = to_double(op.box[i].b);
  }
  grid.values.assign(grid.size(), Eigen::MatrixXd());
  Eigen::MatrixXd K;
  for (int node = 0; node < grid.size(); ++node) {
    const auto s = grid.point(node);
    Eigen::MatrixXd acc;
    for (std::size_t ci = 0; ci < codes.size(); ++ci) {
      const int c = codes[ci];
      std::vector<int> kernel_axes;
      for (int i = 0; i < N; ++i)
        if (cell_kind(c, i) != CellKind::MULT) kernel_axes.push_back(i);
      int count = 1;
      for (std::size_t t = 0; t < kernel_axes.size(); ++t) count *= q;
      std::array<double, kNumSlots> x{};
      for (int i = 0; i < N; ++i) x[s_var(i).slot()] = s[i];
      std::vector<double> y = s;
      for (int m = 0; m < count; ++m) {
        double w = 1;
        int r = m;
        for (int i : kernel_axes) {
          int k = r % q;
          r /= q;
          double a, b;
          if (cell_kind(c, i) == CellKind::LOWER) a = lo[i], b = s[i];
          else a = s[i], b = hi[i];
          double h = 0.5 * (b - a);
          y[i] = a + h * (g.x[k] + 1);
          w *= h * g.w[k];
          x[theta_var(i).slot()] = y[i];
        }
        ev[ci].eval(x, K);
        Eigen::MatrixXd fv = f(y);
        if (acc.size() == 0) acc = Eigen::MatrixXd::Zero(op.rows, fv.cols());
        acc.noalias() += w * K * fv;
      }
    }
    if (acc.size() == 0) acc = Eigen::MatrixXd::Zero(op.rows, f(s).cols());
    grid.values[node] = std::move(acc);
  }
  return grid;
}

Eigen::MatrixXd inner_products(const QuadGrid& u, const QuadGrid& v) {
  if (u.size() != v.size() || u.q != v.q) throw std::invalid_argument("inner_products: grid mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(u.values[0].cols(), v.values[0].cols());
  for (int k = 0; k < u.size(); ++k) out.noalias() += u.weight(k) * u.values[k].transpose() * v.values[k];
  return out;
}

double inner(const QuadGrid& u, const QuadGrid& v) { return inner_products(u, v).trace(); }

GridFunction as_grid_function(const PolyVec<double>& v) {
  auto m = std::make_shared<MatPolyEvaluator>([&] {
    MatPoly<double> col(static_cast<int>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) col(static_cast<int>(i), 0) = v[i];
    return col;
  }());
  int n = static_cast<int>(v.size());
  return [m, n](const std::vector<double>& x) {
    std::array<double, kNumSlots> a{};
    for (std::size_t i = 0; i < x.size(); ++i) a[s_var(static_cast<int>(i)).slot()] = x[i];
    Eigen::MatrixXd out(n, 1);
    m->eval(a, out);
    return out;
  };
}

namespace {

// Orthonormal Legendre polynomials 0..p-1 on [a,b] at x.
void legendre_values(double x, double a, double b, int p, double* out) {
  double t = 2 * (x - a) / (b - a) - 1;
  double p0 = 1, p1 = t;
  for (int k = 0; k < p; ++k) {
    double v;
    if (k == 0) v = 1;
    else if (k == 1) v = t;
    else {
      double p2 = ((2.0 * k - 1) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
      v = p2;
    }
    out[k] = v * std::sqrt((2.0 * k + 1) / (b - a));
  }
}

}  // namespace

NormEstimate opnorm_estimate(const NDPIOperator<double>& op, int q, int iters) {
  const int N = op.dim(), n = op.cols;
  int kd = 0;
  for (int i = 0; i < N; ++i) kd = std::max(kd, max_degree(op, s_var(i)) + max_degree(op, theta_var(i)));
  const int qq = q + (kd + 2) / 2 + 1;
  int per = 1;
  for (int i = 0; i < N; ++i) per *= q;
  const int B = n * per;
  std::vector<double> lo(N), hi(N);
  for (int i = 0; i < N; ++i) {
    lo[i] = to_double(op.box[i].a);
    hi[i] = to_double(op.box[i].b);
  }
  auto basis_in = [&, n](int comps) {
    return [&, comps](const std::vector<double>& x) {
      std::vector<std::vector<double>> L(N, std::vector<double>(q));
      for (int i = 0; i < N; ++i) legendre_values(x[i], lo[i], hi[i], q, L[i].data());
      Eigen::MatrixXd out = Eigen::MatrixXd::Zero(comps, comps * per);
      for (int m = 0; m < per; ++m) {
        double v = 1;
        int r = m;
        for (int i = 0; i < N; ++i) {
          v *= L[i][r % q];
          r /= q;
        }
        for (int c = 0; c < comps; ++c) out(c, c + comps * m) = v;
      }
      return out;
    };
  };
  QuadGrid image = apply_quadrature(op, basis_in(n), qq);
  QuadGrid test = sample(op.box, qq, basis_in(op.rows));
  Eigen::MatrixXd G = inner_products(test, image);  // (rows*per) x B
  Eigen::MatrixXd GtG = G.transpose() * G;

  NormEstimate est;
  Eigen::VectorXd x(B);
  for (int i = 0; i < B; ++i) x(i) = 1.0 + 0.01 * (i % 7);
  x.normalize();
  double lambda = 0;
  for (int it = 1; it <= iters; ++it) {
    Eigen::VectorXd y = GtG * x;
    double nl = x.dot(y);
    double ny = y.norm();
    est.iterations = it;
    if (ny == 0) {
      lambda = 0;
      est.converged = true;
      break;
    }
    x = y / ny;
    if (it > 1 && std::abs(nl - lambda) <= 1e-14 * std::max(1.0, std::abs(nl))) {
      lambda = nl;
      est.converged = true;
      break;
    }
    lambda = nl;
  }
  est.value = std::sqrt(std::max(0.0, lambda));
  return est;
}

}  // namespace pie

namespace pie {

namespace {

PolyVec<Rational> random_polyvec(std::mt19937& rng, int n, int N, int degree) {
  std::uniform_int_distribution<int> num(-6, 6), den(1, 4), deg(0, degree);
  PolyVec<Rational> v(n);
  for (auto& p : v) {
    std::vector<Polynomial<Rational>::Term> terms;
    for (int k = 0; k < 4; ++k) {
      Monomial m;
      const int d = deg(rng);
      for (int j = 0; j < d; ++j) {
        const auto x = s_var(static_cast<int>(rng() % N));
        m.set(x, m.exponent(x) + 1);
      }
      terms.emplace_back(m, Rational(num(rng), den(rng)));
    }
    p = Polynomial<Rational>::from_terms(std::move(terms));
  }
  return v;
}

PolyVec<double> to_double(const PolyVec<Rational>& v) {
  PolyVec<double> out;
  for (const auto& p : v) out.push_back(pie::to_double(p));
  return out;
}

}  // namespace

SuiteReport run_suite(const PDESpec& spec, unsigned seed, int trials, int degree) {
  const int N = spec.dim(), n = spec.n;
  const auto K = axis_K<Rational>(spec);
  const auto sys = build_pie<Rational>(spec);
  const auto Td = to_double(sys.T);
  const auto Tad = adjoint_nd(Td);
  std::mt19937 rng(seed);
  SuiteReport rep;
  for (int t = 0; t < trials; ++t) {
    ++rep.trials;
    const auto v = random_polyvec(rng, n, N, degree);
    const auto u = apply_exact(sys.T, v);
    if (!(differentiate(u, spec.delta) == v)) ++rep.inverse_failures;
    if (!bc_satisfied(spec, u)) ++rep.bc_failures;
    std::vector<int> alpha(N, 0);
    for (;;) {
      std::vector<PI1Params<Rational>> f;
      for (int i = 0; i < N; ++i) f.push_back(build_Aij<Rational>(i, K[i], spec.delta[i], alpha[i], spec.box[i], n));
      if (!(apply_exact(axis_product(f, spec.box), v) == differentiate(u, alpha))) {
        ++rep.derivative_failures;
        break;
      }
      int i = 0;
      while (i < N && ++alpha[i] > spec.delta[i]) alpha[i++] = 0;
      if (i == N) break;
    }
    const auto w = random_polyvec(rng, n, N, degree);
    const auto fv = as_grid_function(to_double(v)), fw = as_grid_function(to_double(w));
    const int q = 10;
    const double lhs = inner(apply_quadrature(Td, fv, q), sample(spec.box, q, fw));
    const double rhs = inner(sample(spec.box, q, fv), apply_quadrature(Tad, fw, q));
    rep.adjoint_discrepancy = std::max(rep.adjoint_discrepancy, std::abs(lhs - rhs) / (1 + std::abs(lhs)));
  }
  return rep;
}

}  // namespace pie
