#include <random>

#include "doctest.h"
#include "pie/pieconvert.hpp"
#include "pie/verify.hpp"
#include "test_util.hpp"

using namespace pie;
using PQ = Polynomial<Rational>;
using MQ = MatPoly<Rational>;
using Op = NDPIOperator<Rational>;

namespace {

MQ M(const char* txt) { return parse_matpoly(txt); }

MatrixQ Kdir(Rational a, Rational b) {
  MatrixQ K = MatrixQ::Zero(2, 2);
  K(1, 0) = Rational(1) / (b - a);
  return K;
}

MatrixQ Kmixed() {
  MatrixQ K = MatrixQ::Zero(2, 2);
  K(1, 1) = 1;
  return K;
}

PDESpec load(const char* name, std::map<std::string, Rational> ov = {}) {
  return load_spec(std::string(PIE_SPEC_DIR) + "/" + name + ".pde", ov);
}

// Block-diagonal placement of a scalar operator into the (r, c) block of an
// m x m operator.
Op embed(const Op& scalar, int m, int r, int c) {
  Op out(scalar.box, m, m);
  for (int k = 0; k < num_cells(scalar.dim()); ++k) out.cells[k](r, c) = scalar.cells[k](0, 0);
  return out;
}

}  // namespace

TEST_CASE("build_T1") {
  auto T = build_T1<Rational>(0, Kdir(0, 1), 2, {}, 1);
  CHECK(T.R0.is_zero());
  CHECK(T.R1 == M("(s1 - t1) - s1*(1 - t1)"));
  CHECK(T.R2 == M("-s1*(1 - t1)"));
  auto Tm = build_T1<Rational>(1, Kmixed(), 2, {}, 1);
  CHECK(Tm.R1 == M("-t2"));
  CHECK(Tm.R2 == M("-s2"));
  auto I = build_T1<Rational>(0, MatrixQ(0, 0), 0, {}, 3);
  CHECK(I == PI1Params<Rational>::identity(0, {}, 3));
  // Shifted interval: the Dirichlet kernel becomes -(s-a)(b-t)/(b-a) above the diagonal.
  auto Ts = build_T1<Rational>(0, Kdir(1, 3), 2, {Rational(1), Rational(3)}, 1);
  CHECK(Ts.R2 == M("-(s1 - 1)*(3 - t1)/2"));
  CHECK_THROWS_AS(build_T1<Rational>(0, Kdir(0, 1), 3, {}, 1), std::invalid_argument);
}

TEST_CASE("build_Aij") {
  CHECK(build_Aij<Rational>(0, Kdir(0, 1), 2, 2, {}, 1) == PI1Params<Rational>::identity(0, {}, 1));
  CHECK(build_Aij<Rational>(0, Kdir(0, 1), 2, 0, {}, 1) == build_T1<Rational>(0, Kdir(0, 1), 2, {}, 1));
  CHECK_THROWS_AS(build_Aij<Rational>(0, Kdir(0, 1), 2, 3, {}, 1), std::invalid_argument);
  auto A1 = build_Aij<Rational>(0, Kdir(0, 1), 2, 1, {}, 1);
  CHECK(A1.R1 == M("1 - (1 - t1)"));
  CHECK(A1.R2 == M("-(1 - t1)"));
  std::vector<Interval> box(1);
  auto T = lift(build_T1<Rational>(0, Kdir(0, 1), 2, {}, 1), box);
  auto a1 = lift(A1, box);
  std::mt19937 rng(2);
  for (int k = 0; k < 20; ++k) {
    auto v = testutil::random_polyvec(rng, 1, 1, 3);
    CHECK(differentiate(apply_exact(T, v)[0], s_var(0)) == apply_exact(a1, v)[0]);
  }
}

TEST_CASE("build_pie") {
  SUBCASE("heat equation") {
    for (Rational r : {Rational(0), Rational(123, 10)}) {
      auto spec = load("heat", {{"r", r}});
      auto sys = build_pie<Rational>(spec);
      auto Tx = lift(build_T1<Rational>(0, Kdir(0, 1), 2, {}, 1), spec.box);
      auto Ty = lift(build_T1<Rational>(1, Kmixed(), 2, {}, 1), spec.box);
      CHECK(op_equal(sys.T, compose_nd(Ty, Tx)));
      CHECK(op_equal(sys.A, Ty + Tx + scale_nd(sys.T, r)));
      CHECK(sys.T.cells[0].is_zero());
    }
  }
  SUBCASE("pure multiplier system") {
    auto spec = make_spec(testutil::unit_box(1), 2, {0});
    spec.terms[{0}] = M("[-1, 2; 0, -3]");
    auto sys = build_pie<Rational>(spec);
    CHECK(op_equal(sys.T, Op::identity(spec.box, 2)));
    CHECK(op_equal(sys.A, Op::multiplier(spec.box, M("[-1, 2; 0, -3]"))));
  }
  SUBCASE("damped wave") {
    for (int kappa : {1, 2}) {
      auto spec = load("wave", {{"kappa", Rational(kappa)}});
      auto sys = build_pie<Rational>(spec);
      auto Tx = lift(build_T1<Rational>(0, Kmixed(), 2, {}, 1), spec.box);
      auto Ty = lift(build_T1<Rational>(1, Kmixed(), 2, {}, 1), spec.box);
      auto T = compose_nd(Ty, Tx);
      CHECK(op_equal(sys.T, embed(T, 2, 0, 0) + embed(T, 2, 1, 1)));
      Op A = embed(T, 2, 0, 1) + embed(Ty + Tx + scale_nd(T, -kappa * kappa), 2, 1, 0) +
             embed(scale_nd(T, -2 * kappa), 2, 1, 1);
      CHECK(op_equal(sys.A, A));
    }
  }
  SUBCASE("float mode matches rational mode") {
    auto spec = load("wave");
    auto exact = build_pie<Rational>(spec);
    auto fl = build_pie<double>(spec);
    auto ref = to_double(exact.A);
    for (int c = 0; c < num_cells(2); ++c)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (const auto& [m, v] : ref.cells[c](i, j).terms())
            CHECK(fl.A.cells[c](i, j).coeff(m) == doctest::Approx(v).epsilon(1e-12));
  }
  SUBCASE("inconsistent domains are rejected") {
    CHECK_THROWS_AS(build_pie<Rational>(load("example1")), std::domain_error);
  }
}

TEST_CASE("exact inverse on random consistent specs") {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> pick(0, 2), dimd(1, 2), nd(1, 2);
  for (int t = 0; t < 25; ++t) {
    int N = dimd(rng), n = nd(rng);
    std::vector<int> delta(N);
    for (auto& d : delta) d = pick(rng);
    auto spec = testutil::random_spec(rng, N, n, delta, t % 2 == 1);
    auto K = axis_K<Rational>(spec);
    auto sys = build_pie<Rational>(spec);
    auto v = testutil::random_polyvec(rng, n, N, 3);
    auto u = apply_exact(sys.T, v);
    CHECK(differentiate(u, delta) == v);
    CHECK(bc_satisfied(spec, u));
    CHECK(apply_exact(sys.T, differentiate(u, delta)) == u);
    // Representation identity for every alpha <= delta.
    std::vector<int> alpha(N, 0);
    for (;;) {
      std::vector<PI1Params<Rational>> f;
      for (int i = 0; i < N; ++i) f.push_back(build_Aij<Rational>(i, K[i], delta[i], alpha[i], spec.box[i], n));
      CHECK(apply_exact(axis_product(f, spec.box), v) == differentiate(u, alpha));
      int i = 0;
      while (i < N && ++alpha[i] > delta[i]) alpha[i++] = 0;
      if (i == N) break;
    }
    // Axis inverses commute for consistent domains.
    if (N == 2) {
      auto T1 = lift(build_T1<Rational>(0, K[0], delta[0], spec.box[0], n), spec.box);
      auto T2 = lift(build_T1<Rational>(1, K[1], delta[1], spec.box[1], n), spec.box);
      CHECK(op_equal(compose_nd(T1, T2), compose_nd(T2, T1)));
    }
  }
}

TEST_CASE("inconsistent axis inverses do not commute") {
  auto spec = load("example1");
  auto K = axis_K<Rational>(spec);
  auto T1 = lift(build_T1<Rational>(0, K[0], 1, spec.box[0], 2), spec.box);
  auto T2 = lift(build_T1<Rational>(1, K[1], 1, spec.box[1], 2), spec.box);
  CHECK_FALSE(op_equal(compose_nd(T1, T2), compose_nd(T2, T1)));
}
