#include <gtest/gtest.h>

#include "pxthin/analysis.hpp"

using namespace pxthin;

namespace {

MeshPtr make_mesh(int level) { return std::make_shared<const HalfDiskMesh>(build_half_disk_mesh(level)); }

double signorini32(Point p) { return std::pow(std::hypot(p.x, p.y), 1.5) * std::cos(1.5 * std::atan2(p.y, p.x)); }

}  // namespace

TEST(Iteration, ConstantsExample) {
  const auto k = iteration_constants(1.0, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(k.alpha3, 1.5);
  EXPECT_DOUBLE_EQ(k.kappa, 0.015625);
  EXPECT_NEAR(k.eps0, 0.015625 * 0.015625 / 2, 1e-18);
  EXPECT_NEAR(k.eps0, 1.2207e-4, 1e-8);
}

TEST(Iteration, ConstantsInvariants) {
  for (double A : {0.0, 0.1, 1.0, 10.0})
    for (double a2 : {0.0, 0.5, 1.5})
      for (double gap : {0.25, 1.0, 2.0}) {
        const auto k = iteration_constants(A, a2 + gap, a2);
        EXPECT_GT(k.alpha1, k.alpha3);
        EXPECT_GT(k.alpha3, k.alpha2);
        EXPECT_GT(k.kappa, 0.0);
        EXPECT_LT(k.kappa, 0.5);
        EXPECT_LE(std::pow(2.0, k.alpha1 + 1) * std::pow(k.kappa, k.alpha1) * A,
                  std::pow(k.kappa, k.alpha3) * (1 + 1e-12));
        EXPECT_LT(k.eps0 * std::pow(k.kappa, -k.alpha1), 1.0);
      }
  EXPECT_DOUBLE_EQ(iteration_constants(0.0, 2.0, 1.0).kappa, 0.49);
  EXPECT_THROW(iteration_constants(1.0, 1.0, 1.0), PreconditionError);
  EXPECT_THROW(iteration_constants(-1.0, 2.0, 1.0), PreconditionError);
}

TEST(Iteration, VerifiesAcrossRegimes) {
  for (auto k : {iteration_constants(1.0, 2.0, 1.0), iteration_constants(0.0, 2.0, 1.0),
                 iteration_constants(5.0, 1.0, 0.0), iteration_constants(0.3, 4.0, 3.5)}) {
    const auto v = iteration_verify(k, 200, 17);
    EXPECT_EQ(v.violations, 0);
    EXPECT_GE(v.worst_slack, 0.0);
  }
}

TEST(Iteration, PureHypothesisWithoutEpsilonOrB) {
  const auto k = iteration_constants(2.0, 3.0, 1.0);  // B = 0
  for (double q : {0.5, std::sqrt(0.5)}) {
    const auto phi = detail::maximal_phi(k, 0.0, 1.0, q, 40);
    for (int i = 0; i < 40; ++i)
      for (int j = 0; j < i; ++j)
        EXPECT_LE(phi[i], k.c * std::pow(std::pow(q, i - j), k.alpha2) * phi[j]);
  }
}

TEST(Iteration, ConstantPhiNeedsNoDecay) {
  // alpha2 = 0: the conclusion is plain boundedness phi(rho) <= c (phi(r) + B).
  const auto k = iteration_constants(1.0, 1.0, 0.0);
  EXPECT_GE(k.c, 1.0);
  const auto v = iteration_verify(k, 100, 3);
  EXPECT_EQ(v.violations, 0);
}

TEST(Iteration, RandomSuiteIsClean) {
  const auto v = iteration_verify_random(1000, 99);
  EXPECT_EQ(v.violations, 0);
  EXPECT_GT(v.checks, 0);
}

TEST(Monotonicity, DegenerateAndQuadraticCases) {
  const auto s = monotonicity_terms({0.3, -0.2}, {0.3, -0.2}, 3.0, 0.5);
  EXPECT_EQ(s.lhs, 0.0);
  EXPECT_GE(s.eps_term + s.mono_term, 0.0);
  const auto q = monotonicity_terms({1.0, 2.0}, {-0.5, 0.25}, 2.0, 1.0);
  EXPECT_NEAR(q.mono_term, q.lhs, 1e-14);
}

TEST(Monotonicity, CalibratedConstantHoldsOnFreshSamples) {
  const double c = calibrate_monotonicity(1.1, 10.0, 200000, 1);
  EXPECT_GT(c, 1.0);
  EXPECT_LE(monotonicity_check(1.1, 10.0, c, 20000, 777), 1.0);
  EXPECT_THROW(calibrate_monotonicity(1.0, 2.0), PreconditionError);
}

TEST(Radius, FirstDisplayExample) {
  // beta 1, seminorm 0.5, gamma1 2, M 10: min{1/16, (1/4)(4/(6 * 0.5)), 1/80}.
  ExponentField f(ExponentFamily::Affine, {2.5, 0.5, 0.0}, 1.0, 0.5);
  ASSERT_DOUBLE_EQ(f.gamma1(), 2.0);
  EXPECT_DOUBLE_EQ(admissible_radius(f, 10.0), 0.0125);
  // With M = 1 the cap drops out and the first term decides.
  EXPECT_DOUBLE_EQ(admissible_radius(f, 1.0), 0.0625);
}

TEST(Radius, ConstantExponentCap) {
  EXPECT_DOUBLE_EQ(admissible_radius(ExponentField::constant(3.0), 4.0), 1.0 / 32);
  EXPECT_THROW(admissible_radius(ExponentField::constant(3.0), 0.5), PreconditionError);
}

TEST(Radius, MonotoneInMAndSeminorm) {
  ExponentField f(ExponentFamily::Affine, {2.0, 0.3, 0.0}, 1.0, 0.3);
  double prev = 1e9;
  for (double M : {1.0, 2.0, 10.0, 100.0}) {
    const double r = admissible_radius(f, M);
    EXPECT_LE(r, prev);
    prev = r;
  }
  prev = 1e9;
  for (double s : {0.3, 1.0, 3.0, 10.0}) {
    const double r = admissible_radius(ExponentField(ExponentFamily::Affine, {2.0, 0.3, 0.0}, 1.0, s), 1.0);
    EXPECT_LE(r, prev);
    prev = r;
  }
  EXPECT_LE(admissible_radius(f, 1.0, 0.01), admissible_radius(f, 1.0));
}

TEST(Alpha, Formula) {
  EXPECT_NEAR(theoretical_alpha(0.5, 1.0, 3.0), 0.125 / 16.5, 1e-15);
  EXPECT_LT(theoretical_alpha(0.5, 1e-8, 3.0), 1e-9);
  EXPECT_LT(theoretical_alpha(0.4, 1.0, 3.0), theoretical_alpha(0.5, 1.0, 3.0));
  EXPECT_LT(theoretical_alpha(0.5, 0.5, 3.0), theoretical_alpha(0.5, 1.0, 3.0));
  EXPECT_GT(theoretical_alpha(0.5, 1.0, 2.0), theoretical_alpha(0.5, 1.0, 3.0));
  EXPECT_THROW(theoretical_alpha(1.0, 1.0, 3.0), PreconditionError);
}

TEST(HigherIntegrability, LinearField) {
  auto mesh = make_mesh(5);
  const auto u = FeFunction::interpolate(mesh, [](Point p) { return p.y; });
  const auto w = FeFunction::zero(mesh);
  const auto rep = higher_integrability_scan(u, w, ExponentField(ExponentFamily::Sinusoidal, {2.0, 0.5, 1.0}),
                                             {0.0, 0.0}, 0.2, 0.2);
  for (const auto& row : rep.rows) {
    EXPECT_NEAR(row.lhs, 1.0, 1e-12);
    EXPECT_LE(row.c, 1.0);
  }
  EXPECT_EQ(rep.sigma0, default_sigma_grid().back());
}

TEST(HigherIntegrability, SignoriniBenchmarkFinite) {
  auto mesh = make_mesh(6);
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(2.0)), FeFunction::interpolate(mesh, signorini32));
  const auto [u, rep] = solve(pb);
  const auto ref = build_reference(u, pb);
  const auto hi = higher_integrability_scan(u, ref.w, ExponentField::constant(2.0), {0.0, 0.0}, 0.1, 0.1);
  for (const auto& row : hi.rows) EXPECT_TRUE(std::isfinite(row.c));
  EXPECT_LE(hi.rows.front().c, 1.0 + 1e-9);
  EXPECT_GT(hi.sigma0, 0.0);
  EXPECT_FALSE(hi.reverse_holder.empty());
}

TEST(HigherIntegrability, Preconditions) {
  auto mesh = make_mesh(4);
  const auto z = FeFunction::zero(mesh);
  const auto f = ExponentField::constant(2.0);
  EXPECT_THROW(higher_integrability_scan(z, z, f, {0, 0}, 0.2, 0.1), InputError);
  EXPECT_THROW(higher_integrability_scan(z, z, f, {0.5, 0}, 0.2, 0.2), InputError);
  EXPECT_THROW(higher_integrability_scan(z, z, f, {0, 0}, 0.01, 0.2), ResolutionError);
}

TEST(Holder, LinearFieldIsSmooth) {
  auto mesh = make_mesh(5);
  const auto u = FeFunction::interpolate(mesh, [](Point p) { return p.y; });
  const std::vector<Point> centers{{0.0, 0.0}};
  const auto rep = gradient_holder_fit(u, ExponentField::constant(2.0), centers, default_holder_radii(*mesh));
  EXPECT_TRUE(std::isinf(rep.min_alpha));
}

TEST(Holder, SignoriniFreeBoundaryExponent) {
  auto mesh = make_mesh(7);
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(2.0)), FeFunction::interpolate(mesh, signorini32));
  const auto [u, rep] = solve(pb);
  const std::vector<Point> centers{{0.0, 0.0}, {0.4, 0.0}};
  const auto radii = default_holder_radii(*mesh);
  EXPECT_NEAR(radii.front(), 0.25, 0.0);
  EXPECT_GE(radii.back(), 4 * mesh->h_max() * (1 - 1e-12));
  const auto hr = gradient_holder_fit(u, ExponentField::constant(2.0), centers, radii);
  EXPECT_GE(hr.centers[0].profile.alpha, 0.40);
  EXPECT_LE(hr.centers[0].profile.alpha, 0.60);
  EXPECT_GE(hr.centers[1].profile.alpha, hr.centers[0].profile.alpha - 0.1);
}

TEST(Holder, ClosedFormGradientOracle) {
  // Du of the closed-form profile sampled directly at quadrature points.
  auto mesh = make_mesh(7);
  auto du = [](Point x, std::size_t) {
    const double r = std::hypot(x.x, x.y), th = std::atan2(x.y, x.x);
    return Vec2{1.5 * std::sqrt(r) * std::cos(0.5 * th), -1.5 * std::sqrt(r) * std::sin(0.5 * th)};
  };
  const auto prof = campanato_profile(*mesh, du, 2.0, {0.0, 0.0}, default_holder_radii(*mesh));
  EXPECT_NEAR(prof.alpha, 0.5, 0.02);
}

TEST(Luxemburg, IdentitySuite) {
  const auto c = luxemburg_identities(40, 5);
  EXPECT_EQ(c.fields, 40);
  EXPECT_EQ(c.failures, 0);
  EXPECT_LE(c.worst_unit_modular, 1e-10);
}
