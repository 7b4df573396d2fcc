#include <gtest/gtest.h>

#include <random>

#include "nlslab/eqspec.hpp"

using namespace nlslab;

TEST(Rational, ParsesAndReduces) {
  EXPECT_EQ(Rational::parse("3"), Rational(3));
  EXPECT_EQ(Rational::parse("2.5"), Rational(5, 2));
  EXPECT_EQ(Rational::parse("14/6"), Rational(7, 3));
  EXPECT_EQ(Rational::parse("-0.25"), Rational(-1, 4));
  EXPECT_EQ((Rational(1, 3) + Rational(1, 6)).str(), "1/2");
  EXPECT_THROW(Rational::parse("abc"), std::invalid_argument);
  EXPECT_THROW(Rational::parse("1/0"), std::invalid_argument);
}

TEST(Criticality, TableValuesAreExact) {
  auto s = [](EquationSpec e) { return criticality(e).s; };
  EXPECT_EQ(s(EquationSpec::nls(3, Rational(3))), Rational(1, 2));
  EXPECT_EQ(s(EquationSpec::nls(3, Rational(4))), Rational(5, 6));
  EXPECT_EQ(s(EquationSpec::nls(3, Rational(5))), Rational(1));
  EXPECT_EQ(s(EquationSpec::ghartree(3, Rational(3), Rational(2))), Rational(1, 2));
  EXPECT_EQ(s(EquationSpec::ghartree(3, Rational(2), Rational(2))), Rational(-1, 2));
}

TEST(Criticality, Classification) {
  auto r = criticality(EquationSpec::nls(3, Rational(3)));
  EXPECT_EQ(r.classification, Criticality::INTERCRITICAL);
  EXPECT_TRUE(r.admissible);
  EXPECT_EQ(r.lower_p, Rational(7, 3));
  EXPECT_EQ(r.upper_p, Rational(5));

  r = criticality(EquationSpec::nls(3, Rational(5)));
  EXPECT_EQ(r.classification, Criticality::ENERGY_CRITICAL);
  EXPECT_FALSE(r.admissible);

  r = criticality(EquationSpec::nls(3, Rational(7, 3)));
  EXPECT_EQ(r.classification, Criticality::MASS_CRITICAL);
  EXPECT_FALSE(r.admissible);

  r = criticality(EquationSpec::ghartree(3, Rational(2), Rational(2)));
  EXPECT_EQ(r.classification, Criticality::MASS_SUBCRITICAL);
  EXPECT_FALSE(r.admissible);

  r = criticality(EquationSpec::ghartree(3, Rational(3), Rational(2)));
  EXPECT_TRUE(r.admissible);

  // Intercritical but p < 2 is outside the theorem hypotheses.
  r = criticality(EquationSpec::ghartree(5, Rational(9, 5), Rational(1, 2)));
  EXPECT_EQ(r.classification, Criticality::INTERCRITICAL);
  EXPECT_FALSE(r.admissible);
}

TEST(Criticality, RejectsBadSpecs) {
  EXPECT_THROW(criticality(EquationSpec::nls(2, Rational(3))), InvalidSpec);
  EXPECT_THROW(criticality(EquationSpec::nls(3, Rational(1))), InvalidSpec);
  EXPECT_THROW(criticality(EquationSpec::ghartree(3, Rational(3), Rational(3))), InvalidSpec);
  EXPECT_THROW(criticality(EquationSpec::ghartree(3, Rational(3), Rational(0))), InvalidSpec);
}

TEST(Criticality, MonotoneInP) {
  for (int N = 3; N <= 6; ++N) {
    Rational prev(-1000);
    for (int k = 0; k < 40; ++k) {
      Rational p = Rational(1) + Rational(k + 1, 8);
      auto s = criticality(EquationSpec::nls(N, p)).s;
      EXPECT_GT(s, prev);
      prev = s;
    }
  }
}

TEST(ThresholdFunction, Examples) {
  auto nls = EquationSpec::nls(3, Rational(3));
  for (double x : {0.0, 0.3, 1.0, 1.4}) EXPECT_NEAR(threshold_function_f(nls, x), 3 * x * x - 2 * x * x * x, 1e-14);
  auto gh = EquationSpec::ghartree(3, Rational(3), Rational(2));
  EXPECT_NEAR(threshold_function_f(gh, 1.0), 1.0, 1e-14);
  EXPECT_EQ(threshold_function_f(gh, 0.0), 0.0);
  EXPECT_THROW(threshold_function_f(EquationSpec::nls(3, Rational(5)), 1.0), InvalidSpec);
}

TEST(ThresholdFunction, CriticalPointAtOneAndShape) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dimN(3, 7);
  std::uniform_real_distribution<double> unit(0.02, 0.98);
  int tested = 0;
  while (tested < 40) {
    const int N = dimN(rng);
    const bool gh = tested % 2;
    const double gamma = gh ? unit(rng) * N : 0.0;
    // Choose p so that s lands inside (0,1).
    const double s_target = unit(rng);
    double p = gh ? 1.0 + (gamma + 2.0) / (N - 2.0 * s_target) : 1.0 + 4.0 / (N - 2.0 * s_target);
    auto spec = gh ? EquationSpec::ghartree(N, Rational::parse(std::to_string(p).substr(0, 8)),
                                            Rational::parse(std::to_string(gamma).substr(0, 8)))
                   : EquationSpec::nls(N, Rational::parse(std::to_string(p).substr(0, 8)));
    if (!criticality(spec).admissible) continue;
    ++tested;
    EXPECT_NEAR(threshold_function_f(spec, 1.0), 1.0, 1e-12);
    EXPECT_NEAR(threshold_function_df(spec, 1.0), 0.0, 1e-12);
    // Finite-difference check of the closed-form derivative.
    for (double x : {0.2, 0.7, 1.1}) {
      const double e = 1e-6;
      const double fd = (threshold_function_f(spec, x + e) - threshold_function_f(spec, x - e)) / (2 * e);
      EXPECT_NEAR(fd, threshold_function_df(spec, x), 1e-6 * (1 + std::abs(fd)));
    }
    for (double x = 0.05; x < 1.0; x += 0.1) EXPECT_GT(threshold_function_df(spec, x), 0.0);
    EXPECT_LT(threshold_function_df(spec, 1.05), 0.0);
  }
}

TEST(CoercivityDelta, Values) {
  EXPECT_NEAR(coercivity_delta1(EquationSpec::nls(3, Rational(3)), 0.5), 0.75, 1e-15);
  // Pure algebra: defined for any valid NLS spec, including the mass-critical N=4, p=2.
  EXPECT_NEAR(coercivity_delta1(EquationSpec::nls(4, Rational(2)), 0.5), 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(coercivity_delta1(EquationSpec::nls(3, Rational(3)), 1e-12), 0.0, 1e-11);
  EXPECT_THROW(coercivity_delta1(EquationSpec::nls(3, Rational(3)), 1.0), std::invalid_argument);
  EXPECT_THROW(coercivity_delta1(EquationSpec::ghartree(3, Rational(3), Rational(2)), 0.5), InvalidSpec);
}

TEST(EquationSpec, KeyValueRoundTrip) {
  auto e = EquationSpec::ghartree(3, Rational(5, 2), Rational(3, 2));
  EXPECT_EQ(EquationSpec::from_kv(e.to_kv()), e);
  auto n = EquationSpec::nls(4, Rational(2));
  EXPECT_EQ(EquationSpec::from_kv(n.to_kv()), n);
  EXPECT_THROW(EquationSpec::from_kv({{"kind", "NLS"}, {"N", "3"}}), ConfigError);
  EXPECT_THROW(EquationSpec::from_kv({{"kind", "KdV"}, {"N", "3"}, {"p", "3"}}), ConfigError);
  EXPECT_THROW(EquationSpec::from_kv({{"kind", "NLS"}, {"N", "3"}, {"p", "x"}}), ConfigError);
}
