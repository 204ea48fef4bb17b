#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <set>

#include "keiter/common.hpp"
#include "keiter/polynomial.hpp"

using namespace kei;

TEST_CASE("parse recovers degree, variable count and term list") {
  HomPoly F = parse_polynomial("x^4 + y^4 + z^4");
  CHECK(F.nvars() == 3);
  CHECK(F.degree() == 4);
  CHECK(F.terms().size() == 3);
  // graded-lex maximal term of the Fermat quartic is x^4
  CHECK(F.pivot().e == Expo{4, 0, 0});

  HomPoly G = parse_polynomial("2 x^2 y - 0.5 y^3 + z y^2");
  CHECK(G.degree() == 3);
  VecC z(3);
  z << cplx(1.0, 0.0), cplx(2.0, 0.0), cplx(-1.0, 0.0);
  // 2*1*2 - 0.5*8 + (-1)*4 = 4 - 4 - 4
  CHECK(std::abs(G.eval(z) - cplx(-4.0, 0.0)) < 1e-14);
}

TEST_CASE("unicode superscripts parse like caret exponents") {
  HomPoly a = parse_polynomial("x⁴ + y⁴ + z⁴");
  HomPoly b = parse_polynomial("x^4 + y^4 + z^4");
  REQUIRE(a.terms().size() == b.terms().size());
  for (std::size_t i = 0; i < a.terms().size(); ++i) {
    CHECK(a.terms()[i].e == b.terms()[i].e);
    CHECK(a.terms()[i].c == b.terms()[i].c);
  }
}

TEST_CASE("complex coefficients in parentheses") {
  HomPoly F = parse_polynomial("(1+2i) x^2 + (3i) y z");
  VecC z(3);
  z << cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 0.0);
  CHECK(std::abs(F.eval(z) - cplx(1.0, 5.0)) < 1e-14);
}

TEST_CASE("parser rejects malformed input") {
  CHECK_THROWS_AS(parse_polynomial("x^2 + y^3"), Error);       // inhomogeneous
  CHECK_THROWS_AS(parse_polynomial("x - x"), Error);           // identically zero
  CHECK_THROWS_AS(parse_polynomial("x^2 + q^2"), Error);       // unknown symbol
  try {
    parse_polynomial("x^2 + y^3");
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
  }
}

TEST_CASE("partial derivatives and the Euler relation") {
  HomPoly F = parse_polynomial("x^4 + y^4 + z^4 + 2 x y z^2");
  Rng rng(7);
  VecC z(3);
  for (int i = 0; i < 3; ++i) z[i] = rng.cgaussian();
  cplx euler(0.0, 0.0);
  for (int v = 0; v < 3; ++v) euler += z[v] * F.partial(v).eval(z);
  CHECK(std::abs(euler - 4.0 * F.eval(z)) < 1e-12 * F.coef_scale());
  CHECK(F.partial(0).degree() == 3);
}

TEST_CASE("compose_linear equals evaluation after substitution") {
  HomPoly F = parse_polynomial("x^4 + y^4 + z^4 + x^2 y z");
  Rng rng(11);
  MatC A(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) A(r, c) = rng.cgaussian();
  HomPoly G = F.compose_linear(A);
  for (int trial = 0; trial < 5; ++trial) {
    VecC z(3);
    for (int i = 0; i < 3; ++i) z[i] = rng.cgaussian();
    VecC Az = A * z;
    CHECK(std::abs(G.eval(z) - F.eval(Az)) < 1e-11 * F.coef_scale());
  }
}

TEST_CASE("graded-lex order and divisibility") {
  CHECK(grlex_less(Expo{1, 0, 0}, Expo{2, 0, 0}));   // lower degree first
  CHECK(grlex_less(Expo{0, 4, 0}, Expo{4, 0, 0}));   // same degree, lex on exponents
  CHECK(!grlex_less(Expo{4, 0, 0}, Expo{0, 4, 0}));
  CHECK(expo_divides(Expo{2, 0, 0}, Expo{3, 1, 0}));
  CHECK(!expo_divides(Expo{2, 0, 0}, Expo{1, 5, 0}));
}

TEST_CASE("monomials_of_degree enumerates the full simplex") {
  auto ms = monomials_of_degree(3, 2);
  CHECK(ms.size() == 6);
  std::set<Expo> seen(ms.begin(), ms.end());
  CHECK(seen.size() == 6);
  for (const auto& e : ms) CHECK(expo_degree(e) == 2);
  CHECK(monomials_of_degree(3, 0).size() == 1);
  CHECK(monomials_of_degree(3, -1).empty());
}

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(123), b(123), c(123, 1);
  for (int i = 0; i < 100; ++i) {
    double va = a.uniform01();
    CHECK(va == b.uniform01());
    CHECK(va >= 0.0);
    CHECK(va < 1.0);
  }
  // a stream split from the same seed must not replay the base sequence
  Rng a2(123);
  bool differs = false;
  for (int i = 0; i < 10; ++i) differs = differs || a2.uniform01() != c.uniform01();
  CHECK(differs);
}

TEST_CASE("parallel_for matches serial execution and rethrows") {
  std::vector<double> serial(1000), par(1000);
  for (std::size_t i = 0; i < serial.size(); ++i) serial[i] = std::sqrt(static_cast<double>(i));
  parallel_for(par.size(), [&](std::size_t i) { par[i] = std::sqrt(static_cast<double>(i)); }, 8);
  CHECK(serial == par);
  CHECK_THROWS_AS(parallel_for(4, [](std::size_t i) { if (i == 2) fail_numerical("boom"); }, 4), Error);
}

TEST_CASE("small numeric helpers") {
  CHECK(binomial_ll(10, 5) == 252);
  CHECK(binomial_ll(4, 0) == 1);
  CHECK(binomial_ll(3, 5) == 0);
  CHECK(hash_hex(fnv1a64("abc")).size() == 16);
  CHECK(fnv1a64("abc") != fnv1a64("abd"));
  CHECK(fnv1a64("") == 14695981039346656037ULL);  // offset basis of the 64-bit variant
}

TEST_CASE("error kinds map to their categories") {
  auto kind_of = [](void (*f)()) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::validation;
  };
  CHECK(kind_of(+[]() { fail_validation("v"); }) == ErrorKind::validation);
  CHECK(kind_of(+[]() { fail_numerical("n"); }) == ErrorKind::numerical);
  CHECK(kind_of(+[]() { fail_io("i"); }) == ErrorKind::io);
  CHECK(static_cast<int>(ErrorKind::validation) == 1);
  CHECK(static_cast<int>(ErrorKind::numerical) == 2);
  CHECK(static_cast<int>(ErrorKind::io) == 3);
}
