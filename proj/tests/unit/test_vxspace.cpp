#include <gtest/gtest.h>

#include <random>

#include "pxthin/vxspace.hpp"

using namespace pxthin;

namespace {

MeshPtr make_mesh(int level) { return std::make_shared<const HalfDiskMesh>(build_half_disk_mesh(level)); }

FeFunction random_field(const MeshPtr& mesh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(mesh->num_vertices());
  for (auto& x : v) x = u(rng);
  return FeFunction(mesh, std::move(v));
}

// Largest ratio over the regression suite (100 fields per p, level 4,
// center origin, radius 0.5), times 1.1.
constexpr double kSobolevPoincareBound = 0.011361775038224777;

}  // namespace

TEST(FeFunction, RejectsBadValues) {
  auto mesh = make_mesh(1);
  EXPECT_THROW(FeFunction(mesh, std::vector<double>(3, 0.0)), PreconditionError);
  std::vector<double> v(mesh->num_vertices(), 0.0);
  v[2] = NAN;
  EXPECT_THROW(FeFunction(mesh, v), NumericError);
}

TEST(FeFunction, LinearFieldsHaveExactGradients) {
  auto mesh = make_mesh(3);
  const auto f = FeFunction::interpolate(mesh, [](Point p) { return 2.0 * p.x - 3.0 * p.y + 1.0; });
  for (std::size_t t = 0; t < mesh->num_triangles(); ++t) {
    EXPECT_NEAR(f.gradient(t).x, 2.0, 1e-12);
    EXPECT_NEAR(f.gradient(t).y, -3.0, 1e-12);
  }
}

TEST(Modular, ZeroAndOne) {
  auto mesh = make_mesh(4);
  const auto sn = ExponentField(ExponentFamily::Sinusoidal, {2.0, 0.5, 1.0});
  EXPECT_EQ(modular(FeFunction::zero(mesh), sn), 0.0);
  const auto one = FeFunction::interpolate(mesh, [](Point) { return 1.0; });
  EXPECT_NEAR(modular(one, sn), mesh->total_area(), 1e-13);
  const auto two = FeFunction::interpolate(mesh, [](Point) { return 2.0; });
  EXPECT_NEAR(modular(two, ExponentField::constant(2.0)), 4.0 * mesh->total_area(), 1e-12);
  EXPECT_NEAR(mesh->total_area(), kPi / 2, 2e-2);
}

TEST(Modular, ConstantExponentHomogeneity) {
  auto mesh = make_mesh(3);
  const auto f = random_field(mesh, 3);
  const auto p3 = ExponentField::constant(3.0);
  const double base = modular(f, p3);
  for (double c : {0.3, 2.0, 7.5}) {
    std::vector<double> v(f.values());
    for (auto& x : v) x *= c;
    EXPECT_NEAR(modular(FeFunction(mesh, v), p3), std::pow(c, 3.0) * base, 1e-12 * std::pow(c, 3.0) * base);
  }
}

TEST(Modular, SigmaInflatesExponent) {
  auto mesh = make_mesh(3);
  const auto two = FeFunction::interpolate(mesh, [](Point) { return 2.0; });
  EXPECT_NEAR(modular(two, ExponentField::constant(2.0), 0.5), 8.0 * mesh->total_area(), 1e-12);
  EXPECT_THROW(modular(two, ExponentField::constant(2.0), -0.1), PreconditionError);
}

TEST(Luxemburg, ZeroField) { EXPECT_EQ(luxemburg_norm(FeFunction::zero(make_mesh(2)), ExponentField::constant(2.0)), 0.0); }

TEST(Luxemburg, ConstantClosedForm) {
  auto mesh = make_mesh(6);
  const auto one = FeFunction::interpolate(mesh, [](Point) { return 1.0; });
  const double n = luxemburg_norm(one, ExponentField::constant(2.0));
  EXPECT_NEAR(n, std::sqrt(mesh->total_area()), 1e-10 * n);
  EXPECT_NEAR(n, std::sqrt(kPi / 2), 1e-2);
}

TEST(Luxemburg, MatchesLpNormForConstantExponent) {
  auto mesh = make_mesh(3);
  for (double p : {1.5, 2.0, 4.0}) {
    const auto f = random_field(mesh, 10 + static_cast<std::uint64_t>(p * 10));
    const auto field = ExponentField::constant(p);
    const double lp = std::pow(modular(f, field), 1.0 / p);
    EXPECT_NEAR(luxemburg_norm(f, field), lp, 1e-9 * lp);
  }
}

TEST(Luxemburg, UnitModularAndHomogeneityForVariableExponent) {
  auto mesh = make_mesh(3);
  const auto sn = ExponentField(ExponentFamily::Sinusoidal, {2.0, 0.5, 1.0});
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto f = random_field(mesh, 100 + s);
    const double n = luxemburg_norm(f, sn);
    std::vector<double> v(f.values());
    for (auto& x : v) x /= n;
    EXPECT_NEAR(modular(FeFunction(mesh, v), sn), 1.0, 1e-10);
    for (auto& x : v) x *= -3.0 * n;
    EXPECT_NEAR(luxemburg_norm(FeFunction(mesh, v), sn), 3.0 * n, 1e-9 * 3.0 * n);
  }
}

TEST(Campanato, ConstantAndLinearFieldsHaveNoOscillation) {
  auto mesh = make_mesh(5);
  const std::vector<double> radii{0.4, 0.2, 0.1};
  const auto c = campanato_profile(*mesh, [](Point, std::size_t) { return Vec2{1.0, -2.0}; }, 2.0, {0.0, 0.0}, radii);
  for (const auto& r : c.rows) EXPECT_NEAR(r.integral, 0.0, 1e-25);
  EXPECT_TRUE(std::isinf(c.lambda));
  EXPECT_TRUE(std::isinf(c.alpha));
  const auto u = FeFunction::interpolate(mesh, [](Point p) { return p.y; });
  const auto g = campanato_profile(*mesh, [&](Point, std::size_t t) { return u.gradient(t); }, 2.0, {0.0, 0.0}, radii);
  EXPECT_TRUE(std::isinf(g.alpha));
}

TEST(Campanato, PowerProfileAlpha) {
  auto mesh = make_mesh(7);
  std::vector<double> radii;
  for (double r = 0.25; r >= 4 * mesh->h_max(); r *= std::sqrt(0.5)) radii.push_back(r);
  const auto prof = campanato_profile(
      *mesh, [](Point x, std::size_t) { return Vec2{std::pow(std::hypot(x.x, x.y), 0.3), 0.0}; }, 2.0, {0.0, 0.0},
      radii);
  EXPECT_NEAR(prof.alpha, 0.3, 0.05);
  EXPECT_NEAR(prof.alpha, (prof.lambda - 2.0) / 2.0, 1e-15);
}

TEST(Campanato, RadiusBelowMeshScaleIsResolutionError) {
  auto mesh = make_mesh(3);
  const std::vector<double> radii{0.5, mesh->h_max()};
  EXPECT_THROW(campanato_profile(*mesh, [](Point, std::size_t) { return Vec2{0, 0}; }, 2.0, {0, 0}, radii),
               ResolutionError);
}

TEST(Campanato, MeanVersusInfimumVersion) {
  auto mesh = make_mesh(5);
  const auto f = random_field(mesh, 5);
  auto grad = [&](Point, std::size_t t) { return f.gradient(t); };
  for (double p : {1.5, 2.0, 3.0})
    for (double rho : {0.4, 0.2}) {
      const std::vector<double> r{rho, 0.5 * rho};
      const double mean_version = campanato_profile(*mesh, grad, p, {0.1, 0.0}, r).rows[0].integral;
      const double inf_version = campanato_inf_integral(*mesh, grad, p, {0.1, 0.0}, rho);
      EXPECT_LE(inf_version, mean_version * (1 + 1e-12));
      EXPECT_LE(mean_version, std::pow(2.0, p) * inf_version);
    }
}

TEST(Campanato, FixedConstantIntegralMonotoneInRadius) {
  auto mesh = make_mesh(5);
  const auto f = random_field(mesh, 6);
  const auto rule = quadrature(5);
  double prev = 0.0;
  for (double rho : {0.1, 0.2, 0.3, 0.45}) {
    const double v = integrate_ball(*mesh, rule, {0.0, 0.0}, rho, [&](Point x, std::size_t t) {
                       return std::pow(std::abs(f.value_in(t, x) - 0.25), 2.0);
                     }).value;
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(SobolevPoincare, ConstantFieldIsZero) {
  auto mesh = make_mesh(4);
  const auto c = FeFunction::interpolate(mesh, [](Point) { return 3.0; });
  EXPECT_EQ(sobolev_poincare_ratio(c, 2.0, 2.0, {0.0, 0.0}, 0.5), 0.0);
}

TEST(SobolevPoincare, LinearFieldClosedForm) {
  auto mesh = make_mesh(5);
  const auto f = FeFunction::interpolate(mesh, [](Point p) { return p.x; });
  // |Df| = 1, so the ratio is avg |x1 - mean|^2 / r^2; over the unit
  // half-disk the mean of x1 is 0 and the average of x1^2 is 1/4.
  EXPECT_NEAR(sobolev_poincare_ratio(f, 2.0, 2.0, {0.0, 0.0}, 1.0), 0.25, 1e-2);
}

TEST(SobolevPoincare, RandomSuiteBelowFrozenConstant) {
  auto mesh = make_mesh(4);
  for (double p : {1.5, 2.0, 3.0}) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int k = 0; k < 100; ++k) {
      std::vector<double> v(mesh->num_vertices());
      for (auto& x : v) x = u(rng);
      EXPECT_LE(sobolev_poincare_ratio(FeFunction(mesh, v), p, 1.5, {0.0, 0.0}, 0.5), kSobolevPoincareBound);
    }
  }
}

TEST(FitLine, RecoversSlope) {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.rms, 0.0, 1e-14);
}
