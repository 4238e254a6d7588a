#include <cmath>
#include <random>

#include "doctest.h"
#include "pie/pialg.hpp"
#include "pie/verify.hpp"
#include "test_util.hpp"

using namespace pie;
using PQ = Polynomial<Rational>;
using MQ = MatPoly<Rational>;
using Op = NDPIOperator<Rational>;

namespace {

const VarId s1 = s_var(0), t1 = theta_var(0), s2 = s_var(1), t2 = theta_var(1);
PQ P(const char* txt) { return parse_polynomial(txt); }
MQ M(const char* txt) { return parse_matpoly(txt); }

PI1Params<Rational> pi1(int axis, const char* r0, const char* r1, const char* r2) {
  return {axis, {}, M(r0), M(r1), M(r2)};
}

int code(std::initializer_list<CellKind> ks) {
  int c = 0, i = 0;
  for (auto k : ks) c = with_kind(c, i++, k);
  return c;
}

constexpr auto Mu = CellKind::MULT;
constexpr auto L = CellKind::LOWER;
constexpr auto U = CellKind::UPPER;

// Random smooth vector function: sums of shifted cosines per component.
GridFunction smooth_function(std::mt19937& rng, int n, int N) {
  std::uniform_real_distribution<double> U01(-2, 2);
  std::vector<std::vector<double>> coef(n, std::vector<double>(3 * (N + 2)));
  for (auto& c : coef)
    for (auto& x : c) x = U01(rng);
  return [coef, n, N](const std::vector<double>& x) {
    Eigen::MatrixXd out(n, 1);
    for (int k = 0; k < n; ++k) {
      double v = 0;
      for (int j = 0; j < 3; ++j) {
        const double* c = &coef[k][j * (N + 2)];
        double arg = c[N + 1];
        for (int i = 0; i < N; ++i) arg += c[i] * x[i];
        v += c[N] * std::cos(arg);
      }
      out(k, 0) = v;
    }
    return out;
  };
}

}  // namespace

TEST_CASE("canonicalize") {
  auto box = testutil::unit_box(2);
  SUBCASE("identity") {
    SumOfProducts<Rational> sop{{PI1Params<Rational>::identity(0, {}, 1), PI1Params<Rational>::identity(1, {}, 1)}};
    auto op = canonicalize(sop, box);
    CHECK(op_equal(op, Op::identity(box, 1)));
  }
  SUBCASE("mixed Dirichlet-Neumann inverse") {
    auto T1 = pi1(0, "0", "-t1*(1 - s1)", "-s1*(1 - t1)");
    auto T2 = pi1(1, "0", "-t2", "-s2");
    auto op = canonicalize(SumOfProducts<Rational>{{T1, T2}}, box);
    CHECK(op.cells[code({L, L})](0, 0) == P("t1*(1 - s1)*t2"));
    CHECK(op.cells[code({L, U})](0, 0) == P("t1*(1 - s1)*s2"));
    CHECK(op.cells[code({U, L})](0, 0) == P("s1*(1 - t1)*t2"));
    CHECK(op.cells[code({U, U})](0, 0) == P("s1*(1 - t1)*s2"));
    int nonzero = 0;
    for (const auto& c : op.cells) nonzero += !c.is_zero();
    CHECK(nonzero == 4);
    CHECK(dump(op) ==
          "cell (L,L): t1 * t2 - s1 * t1 * t2\n"
          "cell (U,L): s1 * t2 - s1 * t1 * t2\n"
          "cell (L,U): t1 * s2 - s1 * t1 * s2\n"
          "cell (U,U): s1 * s2 - s1 * t1 * s2\n");
  }
  SUBCASE("linearity in terms") {
    std::mt19937 rng(21);
    auto a = testutil::random_pi1(rng, 0, {}, 1, 1, 2), b = testutil::random_pi1(rng, 1, {}, 1, 1, 2);
    auto once = canonicalize(SumOfProducts<Rational>{{a, b}}, box);
    auto twice = canonicalize(SumOfProducts<Rational>{{a, b}, {a, b}}, box);
    CHECK(op_equal(twice, scale_nd(once, 2)));
  }
  SUBCASE("interval mismatch") {
    auto a = PI1Params<Rational>::identity(0, {0, 2}, 1);
    CHECK_THROWS_AS(canonicalize(SumOfProducts<Rational>{{a, PI1Params<Rational>::identity(1, {}, 1)}}, box),
                    std::invalid_argument);
  }
}

TEST_CASE("compose1d") {
  SUBCASE("multipliers") {
    auto Q = pi1(0, "1 + s1", "0", "0"), R = pi1(0, "s1^2", "0", "0");
    auto Pq = compose1d(Q, R);
    CHECK(Pq.R0 == M("s1^2 + s1^3"));
    CHECK(Pq.R1.is_zero());
    CHECK(Pq.R2.is_zero());
  }
  SUBCASE("two lower Volterra kernels") {
    auto Q = pi1(0, "0", "1", "0");
    auto Pq = compose1d(Q, Q);
    CHECK(Pq.R0.is_zero());
    CHECK(Pq.R1 == M("s1 - t1"));
    CHECK(Pq.R2.is_zero());
  }
  SUBCASE("Dirichlet inverse composed with itself against quadrature") {
    auto T = pi1(0, "0", "(s1 - t1) - s1*(1 - t1)", "-s1*(1 - t1)");
    auto TT = compose1d(T, T);
    std::vector<Interval> box(1);
    auto tt = lift(TT, box), t = lift(T, box);
    PolyVec<Rational> one{PQ(1)};
    auto exact = to_double(apply_exact(tt, one)[0]);
    // Apply T numerically to the exact T v with 7-point rules.
    auto tv = apply_exact(t, one);
    auto twice = apply_quadrature(to_double(t), as_grid_function({to_double(tv[0])}), 7);
    for (int k = 0; k < twice.size(); ++k) {
      std::array<double, kNumSlots> x{};
      x[0] = twice.point(k)[0];
      CHECK(twice.values[k](0, 0) == doctest::Approx(evaluate(exact, x)).epsilon(1e-10));
    }
  }
  SUBCASE("bystanders and errors") {
    auto Q = pi1(0, "s2", "s2*t1", "0"), R = pi1(0, "1", "0", "s1");
    CHECK_NOTHROW(compose1d(Q, R, {s2}));
    CHECK_THROWS_AS(compose1d(Q, R, {t1}), std::invalid_argument);
    auto R2 = pi1(0, "[1, 0]", "[0, 0]", "[0, 0]");
    CHECK_THROWS_AS(compose1d(R2, R2), std::invalid_argument);
  }
}

TEST_CASE("adjoint1d") {
  auto R = pi1(0, "0", "s1 - t1", "0");
  auto A = adjoint1d(R);
  CHECK(A.R0.is_zero());
  CHECK(A.R1.is_zero());
  CHECK(A.R2 == M("t1 - s1"));
  std::mt19937 rng(4);
  for (int k = 0; k < 20; ++k) {
    auto X = testutil::random_pi1(rng, 0, {}, 2, 1, 3);
    CHECK(adjoint1d(adjoint1d(X)) == X);
  }
  // <u, R v> = <R* u, v> for random degree-3 u, v.
  std::vector<Interval> box(1);
  for (int k = 0; k < 5; ++k) {
    auto X = testutil::random_pi1(rng, 0, {}, 1, 1, 3);
    auto u = testutil::random_polyvec(rng, 1, 1, 3), v = testutil::random_polyvec(rng, 1, 1, 3);
    auto lhs = inner(sample(box, 10, as_grid_function({to_double(u[0])})),
                     apply_quadrature(to_double(lift(X, box)), as_grid_function({to_double(v[0])}), 10));
    auto rhs = inner(apply_quadrature(to_double(lift(adjoint1d(X), box)), as_grid_function({to_double(u[0])}), 10),
                     sample(box, 10, as_grid_function({to_double(v[0])})));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("compose_nd") {
  auto box = testutil::unit_box(2);
  std::mt19937 rng(8);
  SUBCASE("identity is neutral") {
    auto R = testutil::random_op(rng, box, 2, 2, 2);
    CHECK(op_equal(compose_nd(Op::identity(box, 2), R), R));
    CHECK(op_equal(compose_nd(R, Op::identity(box, 2)), R));
  }
  SUBCASE("product of the mixed Dirichlet-Neumann inverses") {
    auto T1 = lift(pi1(0, "0", "-t1*(1 - s1)", "-s1*(1 - t1)"), box);
    auto T2 = lift(pi1(1, "0", "-t2", "-s2"), box);
    auto T = compose_nd(T1, T2);
    CHECK(T.cells[0].is_zero());
    CHECK(T.cells[code({L, L})](0, 0) == P("t1*(1 - s1)*t2"));
    CHECK(op_equal(T, compose_nd(T2, T1)));
  }
  SUBCASE("associativity") {
    for (int k = 0; k < 5; ++k) {
      auto Q = testutil::random_op(rng, box, 1, 1, 2), R = testutil::random_op(rng, box, 1, 1, 2),
           S = testutil::random_op(rng, box, 1, 1, 2);
      CHECK(op_equal(compose_nd(compose_nd(Q, R), S), compose_nd(Q, compose_nd(R, S))));
    }
  }
  SUBCASE("shape and box errors") {
    auto R = testutil::random_op(rng, box, 2, 1, 1);
    CHECK_THROWS_AS(compose_nd(R, R), std::invalid_argument);
    CHECK_THROWS_AS(compose_nd(Op::identity(testutil::unit_box(1), 1), Op::identity(box, 1)), std::invalid_argument);
  }
}

TEST_CASE("adjoint_nd") {
  auto box = testutil::unit_box(2);
  std::mt19937 rng(12);
  CHECK(op_equal(adjoint_nd(Op::identity(box, 2)), Op::identity(box, 2)));
  for (int k = 0; k < 10; ++k) {
    auto R = testutil::random_op(rng, box, 2, 1, 2);
    auto Rs = adjoint_nd(R);
    CHECK(op_equal(adjoint_nd(Rs), R));
    for (int c = 0; c < num_cells(2); ++c) {
      const auto& a = R.cells[c];
      const auto& b = Rs.cells[mirror_cell(c, 2)];
      for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) CHECK(total_degree(a(i, j)) == total_degree(b(j, i)));
    }
  }
  for (int k = 0; k < 3; ++k) {
    auto R = to_double(testutil::random_op(rng, box, 2, 2, 2));
    auto u = smooth_function(rng, 2, 2), v = smooth_function(rng, 2, 2);
    double lhs = inner(sample(box, 10, u), apply_quadrature(R, v, 10));
    double rhs = inner(apply_quadrature(adjoint_nd(R), u, 10), sample(box, 10, v));
    CHECK(std::abs(lhs - rhs) <= 1e-9);
  }
}

TEST_CASE("add and scale") {
  auto box = testutil::unit_box(2);
  std::mt19937 rng(15);
  auto R = testutil::random_op(rng, box, 2, 2, 2), Q = testutil::random_op(rng, box, 2, 2, 2);
  CHECK((R + scale_nd(R, -1)).is_zero());
  CHECK(op_equal(scale_nd(R, 2), R + R));
  CHECK(op_equal(-R, scale_nd(R, -1)));
  CHECK_THROWS_AS(R + testutil::random_op(rng, box, 2, 1, 1), std::invalid_argument);
  auto v = smooth_function(rng, 2, 2);
  Rational lam(3, 2), mu(-2);
  auto combo = apply_quadrature(to_double(scale_nd(Q, lam) + scale_nd(R, mu)), v, 8);
  auto qv = apply_quadrature(to_double(Q), v, 8), rv = apply_quadrature(to_double(R), v, 8);
  for (int k = 0; k < combo.size(); ++k)
    CHECK((combo.values[k] - (1.5 * qv.values[k] - 2.0 * rv.values[k])).norm() <= 1e-10);
}

TEST_CASE("from_semiseparable") {
  auto box1 = testutil::unit_box(1), box2 = testutil::unit_box(2);
  CHECK(op_equal(from_semiseparable<Rational>({}, MQ::identity(2), box2), Op::identity(box2, 2)));
  auto op = from_semiseparable<Rational>({{{-1}, M("s1 - t1")}, {{1}, M("0")}}, M("0"), box1);
  CHECK(op.cells[0].is_zero());
  CHECK(op.cells[1] == M("s1 - t1"));
  CHECK(op.cells[2].is_zero());
  CHECK_THROWS_AS(from_semiseparable<Rational>({{{0, 1}, M("1")}}, M("0"), box2), std::invalid_argument);

  // Separable kernels g(s1,t1) h(s2,t2) round-trip through canonicalize.
  std::mt19937 rng(19);
  std::map<std::vector<int>, MQ> kernels;
  SumOfProducts<Rational> sop;
  for (int a1 : {-1, 1})
    for (int a2 : {-1, 1}) {
      auto g = testutil::random_poly_in(rng, {s1, t1}, 2), h = testutil::random_poly_in(rng, {s2, t2}, 2);
      MQ gm(1, 1), hm(1, 1);
      gm(0, 0) = g;
      hm(0, 0) = h;
      kernels[{a1, a2}] = gm * hm;
      auto f1 = PI1Params<Rational>::zero(0, {}, 1, 1), f2 = PI1Params<Rational>::zero(1, {}, 1, 1);
      (a1 < 0 ? f1.R1 : f1.R2) = gm;
      (a2 < 0 ? f2.R1 : f2.R2) = hm;
      sop.push_back({f1, f2});
    }
  CHECK(op_equal(from_semiseparable(kernels, MQ(1, 1), box2), canonicalize(sop, box2)));
}

TEST_CASE("op_equal") {
  auto box = testutil::unit_box(2);
  CHECK(op_equal(Op::identity(box, 1), Op::identity(box, 1)));
  std::mt19937 rng(23);
  auto R = testutil::random_op(rng, box, 1, 1, 2);
  auto Reps = R + Op::multiplier(box, M("1/1000"));
  CHECK_FALSE(op_equal(R, Reps));
  for (int k = 0; k < 5; ++k) {
    auto q1 = testutil::random_pi1(rng, 0, {}, 1, 1, 2), q2 = testutil::random_pi1(rng, 1, {}, 1, 1, 2);
    auto r1 = testutil::random_pi1(rng, 0, {}, 1, 1, 2), r2 = testutil::random_pi1(rng, 1, {}, 1, 1, 2);
    auto Q = canonicalize(SumOfProducts<Rational>{{q1, q2}}, box);
    auto Rr = canonicalize(SumOfProducts<Rational>{{r1, r2}}, box);
    auto prod = canonicalize(SumOfProducts<Rational>{{compose1d(q1, r1), compose1d(q2, r2)}}, box);
    CHECK(op_equal(compose_nd(Q, Rr), prod));
  }
}

TEST_CASE("star-algebra laws on random operators") {
  std::mt19937 rng(31);
  for (int N : {1, 2})
    for (int n : {1, 2}) {
      auto box = testutil::unit_box(N);
      for (int k = 0; k < (N == 2 ? 3 : 6); ++k) {
        auto Q = testutil::random_op(rng, box, n, n, 2), R = testutil::random_op(rng, box, n, n, 2);
        auto S = testutil::random_op(rng, box, n, n, 2);
        CHECK(op_equal(adjoint_nd(compose_nd(Q, R)), compose_nd(adjoint_nd(R), adjoint_nd(Q))));
        CHECK(op_equal(adjoint_nd(Q + R), adjoint_nd(Q) + adjoint_nd(R)));
        CHECK(op_equal(compose_nd(compose_nd(Q, R), S), compose_nd(Q, compose_nd(R, S))));
        CHECK(op_equal(scale_nd(compose_nd(Q, R), Rational(-3, 7)), compose_nd(scale_nd(Q, Rational(-3, 7)), R)));
      }
    }
}

TEST_CASE("symbolic application respects composition") {
  std::mt19937 rng(37);
  for (int N : {1, 2}) {
    auto box = testutil::unit_box(N);
    for (int k = 0; k < 5; ++k) {
      auto Q = testutil::random_op(rng, box, 2, 2, 2), R = testutil::random_op(rng, box, 2, 2, 2);
      auto v = testutil::random_polyvec(rng, 2, N, 3);
      CHECK(apply_exact(compose_nd(Q, R), v) == apply_exact(Q, apply_exact(R, v)));
    }
  }
}

TEST_CASE("scalar factors on different axes commute") {
  std::mt19937 rng(41);
  auto box = testutil::unit_box(2);
  for (int k = 0; k < 10; ++k) {
    auto a = lift(testutil::random_pi1(rng, 0, {}, 1, 1, 2), box);
    auto b = lift(testutil::random_pi1(rng, 1, {}, 1, 1, 2), box);
    CHECK(op_equal(compose_nd(a, b), compose_nd(b, a)));
  }
}

TEST_CASE("non-unit intervals") {
  std::vector<Interval> box{{Rational(-1), Rational(2)}, {Rational(1, 2), Rational(3)}};
  std::mt19937 rng(43);
  for (int k = 0; k < 3; ++k) {
    auto Q = testutil::random_op(rng, box, 1, 1, 2), R = testutil::random_op(rng, box, 1, 1, 2);
    auto v = testutil::random_polyvec(rng, 1, 2, 2);
    CHECK(apply_exact(compose_nd(Q, R), v) == apply_exact(Q, apply_exact(R, v)));
    auto f = smooth_function(rng, 1, 2), g = smooth_function(rng, 1, 2);
    auto Rd = to_double(R);
    double lhs = inner(sample(box, 12, f), apply_quadrature(Rd, g, 12));
    double rhs = inner(apply_quadrature(adjoint_nd(Rd), f, 12), sample(box, 12, g));
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
  }
}
