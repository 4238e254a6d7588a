#include <random>

#include "doctest.h"
#include "pie/affine.hpp"
#include "pie/poly.hpp"
#include "test_util.hpp"

using namespace pie;
using PQ = Polynomial<Rational>;

namespace {
const VarId s = s_var(0), t = theta_var(0), e = eta_var(0);
PQ P(const char* txt) { return parse_polynomial(txt); }
}  // namespace

TEST_CASE("add") {
  CHECK((P("s1") + P("-s1")).is_zero());
  CHECK(P("1 + s1*t1") + P("s1") == P("1 + s1 + s1*t1"));
  std::mt19937 rng(1);
  for (int k = 0; k < 50; ++k) {
    auto p = testutil::random_poly(rng, 2, 4), q = testutil::random_poly(rng, 2, 4);
    CHECK((p + q) - (q + p) == PQ());
  }
}

TEST_CASE("mul") {
  MatPoly<Rational> a(2, 2), b(2, 2);
  a(0, 1) = PQ(1);
  b(1, 0) = PQ(1);
  auto ab = a * b, ba = b * a;
  CHECK(ab(0, 0) == PQ(1));
  CHECK(ab(1, 1).is_zero());
  CHECK(ba(1, 1) == PQ(1));
  CHECK(ba(0, 0).is_zero());
  CHECK(MatPoly<Rational>::identity(2) * a == a);
  CHECK(P("s1") * P("t1") == P("s1*t1"));
}

TEST_CASE("integrate") {
  CHECK(integrate(PQ(1), t, 0, s) == P("s1"));
  CHECK(integrate(P("t1"), t, 0, 1) == PQ(Rational(1, 2)));
  auto r = integrate(P("e1"), e, t, s);
  CHECK(r == P("s1^2/2 - t1^2/2"));
  // Numeric cross-check of the symbolic antiderivative at random points.
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int k = 0; k < 5; ++k) {
    double sv = U(rng), tv = U(rng);
    std::array<double, kNumSlots> x{};
    x[s.slot()] = sv;
    x[t.slot()] = tv;
    double quad = testutil::gauss_integral([](double y) { return y; }, tv, sv);
    CHECK(evaluate(r, x) == doctest::Approx(quad).epsilon(1e-13));
  }
}

TEST_CASE("differentiate") {
  CHECK(differentiate(P("s1^3"), s) == P("3*s1^2"));
  CHECK(differentiate(P("t1"), s, 2).is_zero());
  std::mt19937 rng(3);
  for (int k = 0; k < 30; ++k) {
    auto p = testutil::random_poly(rng, 2, 5);
    CHECK(differentiate(differentiate(p, s), t) == differentiate(differentiate(p, t), s));
  }
}

TEST_CASE("substitute") {
  CHECK(substitute(P("s1 - t1"), s, t).is_zero());
  CHECK(substitute(P("s1*(1 - t1)"), t, 1).is_zero());
  CHECK(substitute(P("1 + s1 + s1*t1"), s, 2) == P("3 + 2*t1"));
}

TEST_CASE("ring axioms hold exactly") {
  std::mt19937 rng(11);
  for (int k = 0; k < 20; ++k) {
    auto A = testutil::random_matpoly(rng, 2, 3, 2, 2);
    auto B = testutil::random_matpoly(rng, 3, 2, 2, 2);
    auto C = testutil::random_matpoly(rng, 2, 2, 2, 2);
    auto D = testutil::random_matpoly(rng, 3, 2, 2, 2);
    CHECK((A * B) * C == A * (B * C));
    CHECK(A * (B + D) == A * B + A * D);
  }
}

TEST_CASE("integrate then differentiate recovers the integrand") {
  std::mt19937 rng(5);
  for (int k = 0; k < 30; ++k) {
    auto p = testutil::random_poly_in(rng, {s, s_var(1)}, 5);
    auto F = integrate(rename(p, s, t), t, 0, s);
    CHECK(differentiate(F, s) == p);
  }
}

TEST_CASE("float mode agrees with rational mode") {
  std::mt19937 rng(9);
  for (int k = 0; k < 20; ++k) {
    auto p = testutil::random_poly(rng, 2, 6), q = testutil::random_poly(rng, 2, 6);
    auto exact = integrate(p * q, t, s, 1);
    auto fl = integrate(to_double(p) * to_double(q), t, s, 1);
    auto ref = to_double(exact);
    REQUIRE(fl.size() <= ref.size());
    for (const auto& [m, c] : ref.terms())
      CHECK(fl.coeff(m) == doctest::Approx(c).epsilon(1e-12));
  }
}

TEST_CASE("text round trip and parse errors") {
  std::mt19937 rng(13);
  for (int k = 0; k < 20; ++k) {
    auto p = testutil::random_poly(rng, 2, 4);
    CHECK(parse_polynomial(to_string(p)) == p);
  }
  CHECK(to_string(P("-1/2*s1^2*t1 + 3")) == "3 - 1/2 * s1^2 * t1");
  CHECK(parse_polynomial("r*s1", {{"r", Rational(123, 10)}}) == P("12.3*s1"));
  CHECK_THROWS_WITH_AS(parse_polynomial("1 + q"), "column 5: unknown identifier 'q'", std::invalid_argument);
  CHECK_THROWS_AS(parse_polynomial("s1 / t1"), std::invalid_argument);
  auto m = parse_matpoly("[1, s1; 0, t2^2]");
  CHECK(m.rows() == 2);
  CHECK(m(1, 1) == P("t2^2"));
}

TEST_CASE("affine coefficients") {
  auto a = AffinePoly(Affine::variable(0)) * to_double(P("2*s1"));
  CHECK(a.terms()[0].second == Affine::variable(0, 2.0));
  Polynomial<Affine> x = Polynomial<Affine>(Affine::variable(3, 2.0));
  auto y = x * Polynomial<double>(0.5) + x;
  CHECK(y.terms()[0].second.w[0].second == doctest::Approx(3.0));
  CHECK(evaluate_affine(y, {0, 0, 0, 2.0}) == Polynomial<double>(6.0));
}
