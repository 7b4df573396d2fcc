#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "nlslab/diagnostics.hpp"
#include "nlslab/morawetz.hpp"

using namespace nlslab;
namespace {

const auto kNLS3 = EquationSpec::nls(3, Rational(3));
const auto kGH = EquationSpec::ghartree(3, Rational(3), Rational(2));

GridPtr soliton_grid() {
  static const GridPtr g = make_grid(3, 30.0, 2048);
  return g;
}

const GroundState& ground(const EquationSpec& spec) {
  static const GroundState nls = solve_ground(kNLS3, soliton_grid(), {.cross_check = false});
  static const GroundState gh = solve_ground(kGH, soliton_grid(), {.cross_check = false});
  return spec.is_nls() ? nls : gh;
}

RadialProfile bump(const GridPtr& g, double amp, double width, double k = 0.0) {
  return RadialProfile::from_function(g, [=](double r) { return amp * std::exp(-r * r / (width * width)) * std::polar(1.0, k * r * r); });
}

RadialProfile compact(const GridPtr& g, double support, double k) {
  // C² bump vanishing for r >= support.
  return RadialProfile::from_function(g, [=](double r) {
    if (r >= support) return cplx(0.0);
    const double x = 1.0 - (r / support) * (r / support);
    return x * x * x * std::polar(1.0, k * r * r);
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Weight

TEST(Weight, InnerAndOuterBranches) {
  auto g = make_grid(3, 40.0, 4000);
  for (double R : {2.0, 5.0, 10.0}) {
    auto w = build_weight(g, R);
    const double r = R / 4;
    EXPECT_NEAR(w.a(r), r * r, 1e-12);
    EXPECT_NEAR(w.d2a(r), 2.0, 1e-12);
    EXPECT_NEAR(w.laplacian(r), 6.0, 1e-12);
    EXPECT_NEAR(w.bilaplacian(r), 0.0, 1e-12);
    const double q = 2 * R;
    EXPECT_NEAR(w.da(q), R, 1e-12);
    EXPECT_NEAR(w.d2a(q), 0.0, 1e-12);
    EXPECT_NEAR(w.laplacian(q), 2.0 * R / q, 1e-12);
    EXPECT_LT(w.junction_mismatch(), 1e-10);
  }
}

TEST(Weight, JunctionsAndPositiveSlope) {
  auto g = make_grid(3, 40.0, 4000);
  auto w = build_weight(g, 8.0);
  for (double rj : {4.0, 8.0})
    for (int m = 0; m <= 3; ++m)
      EXPECT_NEAR(w.derivative(rj * (1 - 1e-12), m), w.derivative(rj * (1 + 1e-12), m), 1e-8 * (1 + std::abs(w.derivative(rj, m))));
  for (double r = 0.05; r < 40.0; r += 0.05) EXPECT_GT(w.da(r), 0.0);
  // The slope-matched transition overshoots: a' peaks above R inside it.
  double peak = 0.0;
  for (double r = 0.0; r <= 40.0; r += 1e-3) peak = std::max(peak, w.da(r));
  EXPECT_GE(w.max_da(), 8.0);
  EXPECT_NEAR(w.max_da(), peak, 1e-6 * peak);
  // No C² transition keeps a'' >= 0 between slope-matched branches.
  EXPECT_LT(w.min_d2a_transition(), 0.0);
}

TEST(Weight, HigherDimensionOuterBilaplacian) {
  // a = R r in N = 5: Δa = 4R/r, and Δ²a = f'' + 4f'/r with f = Δa.
  auto g = make_grid(5, 40.0, 2000);
  auto w = build_weight(g, 4.0);
  const double R = 4.0;
  for (double r : {10.0, 20.0}) {
    EXPECT_NEAR(w.laplacian(r), 4.0 * R / r, 1e-12);
    const double f2 = 8.0 * R / (r * r * r), f1 = -4.0 * R / (r * r);
    EXPECT_NEAR(w.bilaplacian(r), f2 + 4.0 * f1 / r, 1e-12);
  }
}

TEST(Weight, RejectsRadiusOutsideGrid) {
  auto g = make_grid(3, 10.0, 100);
  EXPECT_THROW(build_weight(g, 0.0), std::invalid_argument);
  EXPECT_THROW(build_weight(g, 11.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Functional and right-hand sides

TEST(Functional, RealPhaseAndBound) {
  auto g = make_grid(3, 20.0, 1000);
  auto w = build_weight(g, 5.0);
  EXPECT_EQ(morawetz_functional(bump(g, 1.0, 2.0), w), 0.0);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    auto u = bump(g, 1.0 + U(rng), 1.5 + U(rng), U(rng));
    const double M = morawetz_functional(u, w);
    EXPECT_NEAR(morawetz_functional(u.scaled(std::polar(1.0, 2.0 * U(rng))), w), M, 1e-12 * (1 + std::abs(M)));
    EXPECT_LE(std::abs(M), morawetz_bound(u, w));
  }
}

TEST(Rhs, ZeroField) {
  auto g = make_grid(3, 20.0, 800);
  auto w = build_weight(g, 5.0);
  RadialProfile z(g, std::vector<cplx>(g->size(), 0.0));
  RieszOperator op(g, kGH);
  EXPECT_EQ(morawetz_rhs_nls(z, w, kNLS3), 0.0);
  EXPECT_EQ(morawetz_rhs_gh(z, w, kGH, op), 0.0);
  EXPECT_EQ(morawetz_rhs_linear(z, w), 0.0);
}

TEST(Rhs, InnerRegionVirialNls) {
  auto g = make_grid(3, 20.0, 4000);
  auto w = build_weight(g, 10.0);
  for (const auto& spec : {kNLS3, EquationSpec::nls(3, Rational(4))}) {
    auto u = compact(g, 4.5, 0.3);
    const double p = spec.pd();
    const double expect = 8.0 * grad_norm_sq(u) - 4.0 * 3 * (p - 1) / (p + 1) * lp_integral(u, p + 1);
    EXPECT_NEAR(morawetz_rhs_nls(u, w, spec), expect, 1e-10 * std::abs(expect));
  }
}

TEST(Rhs, InnerRegionVirialGh) {
  auto g = make_grid(3, 20.0, 2000);
  auto w = build_weight(g, 10.0);
  RieszOperator op(g, kGH);
  auto v = compact(g, 4.5, 0.3);
  const double p = 3, N = 3, gamma = 2;
  const double P = potential_functional_P(v, kGH, op);
  const double expect = 8.0 * grad_norm_sq(v) - 4.0 * (N * (p - 1) - gamma) / p * P;
  // The nonlocal term is a quadrature of the virial field, not an exact reduction.
  EXPECT_NEAR(morawetz_rhs_gh(v, w, kGH, op), expect, 1e-4 * (8.0 * grad_norm_sq(v)));
}

TEST(Rhs, DenseAndNewtonAgree) {
  auto g = make_grid(3, 12.0, 512);
  auto w = build_weight(g, 4.0);
  RieszOperator newton(g, kGH), dense(g, kGH, {.force_dense = true});
  auto v = bump(g, 1.0, 1.5, 0.2);
  const auto a = morawetz_terms_gh(v, w, kGH, newton), b = morawetz_terms_gh(v, w, kGH, dense);
  EXPECT_NEAR(a.total(), b.total(), 1e-3 * a.scale());
}

TEST(Rhs, VanishesAtGroundState) {
  for (const auto& spec : {kNLS3, kGH}) {
    const auto& gs = ground(spec);
    auto w = build_weight(soliton_grid(), 25.0);
    const auto t = spec.is_nls() ? morawetz_terms_nls(gs.Q, w, spec) : morawetz_terms_gh(gs.Q, w, spec, *Nonlinearity(spec, soliton_grid()).riesz());
    // Zero up to the discrete Pohozaev defect, O(h²) at this resolution.
    EXPECT_LT(std::abs(t.total()), 1e-3 * t.scale()) << spec.is_nls();
  }
}

// ---------------------------------------------------------------------------
// Identity residual

namespace {

DiagnosticsSeries linear_run(int J, double dt, int every) {
  auto g = make_grid(3, 20.0, J);
  Nonlinearity nl(kNLS3, g);
  SimConfig cfg;
  cfg.dt = dt;
  cfg.t_end = 1.0;
  cfg.output_every = every;
  // R = 2.5 puts both junctions on nodes of every grid used, so the
  // quadrature error constant does not vary with the refinement level.
  return linear_test_mode(bump(g, 1.0, 1.0, 0.2), nl, cfg, {.radii = {2.5}}).series;
}

}  // namespace

TEST(Identity, LinearGaussianAndRefinement) {
  const double coarse = identity_residual(linear_run(1024, 1e-3, 10), 0);
  const double fine = identity_residual(linear_run(2048, 5e-4, 10), 0);
  EXPECT_LT(coarse, 1e-3);
  EXPECT_LT(fine, 0.5 * coarse);
}

TEST(Identity, SolitonRun) {
  const auto& gs = ground(kNLS3);
  Nonlinearity nl(kNLS3, soliton_grid());
  SimConfig cfg;
  cfg.t_end = 1.0;
  auto S = evolve(gs.Q, nl, cfg, {.radii = {2.0, 5.0}}).series;
  EXPECT_LT(identity_residual_at(S, 2.0), 1e-2);
  EXPECT_LT(identity_residual_at(S, 5.0), 1e-2);
  // Localized mass stays near M[Q]: no evacuation.
  for (const auto& ev : detect_evacuation(S, {2.0, 5.0}, 0.05 * gs.massQ)) EXPECT_LT(ev.mass_evacuation_time, 0.0);
  EXPECT_THROW(S.radius_index(3.0), std::invalid_argument);
}

TEST(Identity, NeedsThreeSamples) {
  DiagnosticsSeries S;
  S.t = {0.0, 1.0};
  S.morawetz = {{0.0, 0.0}};
  S.rhs = {{0.0, 0.0}};
  S.rhs_scale = {{0.0, 0.0}};
  EXPECT_THROW(identity_residual(S, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Time averages and evacuation

TEST(Evacuation, ZeroFieldAndTimeAverage) {
  auto g = make_grid(3, 10.0, 200);
  Nonlinearity nl(kNLS3, g);
  SimConfig cfg;
  cfg.t_end = 0.1;
  cfg.output_every = 10;
  auto S = evolve(RadialProfile(g, std::vector<cplx>(g->size(), 0.0)), nl, cfg, {.radii = {1.0, 2.0}}).series;
  EXPECT_EQ(time_avg_local_potential(S, 1.0, 0.1), 0.0);
  EXPECT_EQ(time_avg_local_potential(S, 2.0, 0.037), 0.0);
  EXPECT_THROW(time_avg_local_potential(S, 1.0, 0.2), std::invalid_argument);
  for (const auto& ev : detect_evacuation(S, {1.0, 2.0}, 1e-3)) EXPECT_EQ(ev.mass_evacuation_time, 0.0);
}

TEST(Evacuation, SyntheticSeries) {
  DiagnosticsSeries S;
  S.radii = {1.0};
  S.t = {0, 1, 2, 3, 4, 5};
  S.locmass = {{5.0, 4.0, 0.5, 0.2, 0.6, 0.1}};
  S.locpot = {{1.0, 0.5, 0.6, 0.25, 0.249, 0.1}};
  const auto ev = detect_evacuation(S, {1.0}, 1.0).front();
  EXPECT_EQ(ev.mass_evacuation_time, 2.0);
  EXPECT_EQ(ev.decreasing_times, (std::vector<double>{0, 1, 3, 5}));
  // A smaller threshold is met later or never.
  EXPECT_EQ(detect_evacuation(S, {1.0}, 0.55).front().mass_evacuation_time, 5.0);
  EXPECT_LT(detect_evacuation(S, {1.0}, 0.05).front().mass_evacuation_time, 0.0);
  // Trapezoid with a partial last interval: ∫_0^{1.5} = 0.75 + 0.5·(0.5+0.55)·0.5.
  EXPECT_NEAR(time_avg_local_potential(S, 1.0, 1.5), (0.75 + 0.2625) / 1.5, 1e-15);
  auto j = to_json(ev);
  EXPECT_EQ(j["mass_evacuation_time"], 2.0);
  EXPECT_EQ(j["decreasing_times"].size(), 4u);
}

// ---------------------------------------------------------------------------
// Classifier

TEST(Classify, GroundStateIsTheThreshold) {
  for (const auto& spec : {kNLS3, kGH}) {
    const auto& gs = ground(spec);
    auto r = classify(gs.Q, spec, gs);
    EXPECT_NEAR(r.ME_ratio, 1.0, 1e-12);
    EXPECT_NEAR(r.grad_ratio, 1.0, 1e-12);
    EXPECT_EQ(r.verdict, Verdict::OUTSIDE_THEOREM);
  }
}

TEST(Classify, ScaledGroundStates) {
  for (const auto& spec : {kNLS3, kGH}) {
    const auto& gs = ground(spec);
    for (double c : {0.25, 0.5, 0.9}) {
      auto r = classify(gs.Q.scaled(c), spec, gs);
      EXPECT_NEAR(r.grad_ratio, c, 1e-10);
      EXPECT_LT(r.ME_ratio, 1.0);
      EXPECT_EQ(r.verdict, Verdict::SCATTER_PREDICTED);
    }
    auto big = classify(gs.Q.scaled(1.1), spec, gs);
    EXPECT_EQ(big.verdict, Verdict::OUTSIDE_THEOREM);
  }
}

TEST(Classify, ZeroAndNegativeEnergy) {
  const auto& gs = ground(kNLS3);
  auto g = soliton_grid();
  auto z = classify(RadialProfile(g, std::vector<cplx>(g->size(), 0.0)), kNLS3, gs);
  EXPECT_EQ(z.ME_ratio, 0.0);
  EXPECT_EQ(z.grad_ratio, 0.0);
  EXPECT_EQ(z.verdict, Verdict::SCATTER_PREDICTED);
  auto neg = classify(gs.Q.scaled(2.0), kNLS3, gs);
  EXPECT_TRUE(neg.energy_negative);
  EXPECT_TRUE(std::isnan(neg.ME_ratio));
  EXPECT_EQ(neg.verdict, Verdict::OUTSIDE_THEOREM);
  auto j = to_json(neg);
  EXPECT_TRUE(j["ME_ratio"].is_null());
  EXPECT_EQ(j["notes"][0], "ENERGY_NEGATIVE_NOTE");
  EXPECT_EQ(j["verdict"], "OUTSIDE_THEOREM");
}

TEST(Classify, MismatchedSpecThrows) {
  const auto& gs = ground(kNLS3);
  EXPECT_THROW(classify(gs.Q, kGH, gs), InvalidSpec);
}
