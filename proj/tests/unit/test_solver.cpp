#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "pxthin/solver.hpp"

using namespace pxthin;

namespace {

MeshPtr make_mesh(int level) { return std::make_shared<const HalfDiskMesh>(build_half_disk_mesh(level)); }

double signorini32(Point p) { return std::pow(std::hypot(p.x, p.y), 1.5) * std::cos(1.5 * std::atan2(p.y, p.x)); }

double max_error(const FeFunction& u, const std::function<double(Point)>& f) {
  double e = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) e = std::max(e, std::abs(u[i] - f(u.mesh().vertex(static_cast<int>(i)))));
  return e;
}

// Half-annulus 0.2 <= |x| <= 1 cut out of a half-disk mesh; every boundary
// vertex off the thin line is tagged Arc so that the data pins it.
MeshPtr half_annulus(int level) {
  const auto full = build_half_disk_mesh(level);
  std::vector<int> keep_t;
  for (std::size_t t = 0; t < full.num_triangles(); ++t) {
    bool in = true;
    for (int v : full.triangle(t)) in = in && norm(full.vertex(v)) >= 0.2 - 1e-12;
    if (in) keep_t.push_back(static_cast<int>(t));
  }
  std::map<int, int> index;
  std::vector<Point> verts;
  std::vector<Triangle> tris;
  for (int t : keep_t) {
    Triangle tr;
    for (int k = 0; k < 3; ++k) {
      const int v = full.triangle(static_cast<std::size_t>(t))[k];
      if (!index.count(v)) {
        index[v] = static_cast<int>(verts.size());
        verts.push_back(full.vertex(v));
      }
      tr[k] = index[v];
    }
    tris.push_back(tr);
  }
  std::map<std::pair<int, int>, int> uses;
  for (const auto& tr : tris)
    for (int k = 0; k < 3; ++k) uses[{std::min(tr[k], tr[(k + 1) % 3]), std::max(tr[k], tr[(k + 1) % 3])}]++;
  std::vector<VertexTag> tags(verts.size(), VertexTag::Interior);
  for (const auto& [e, n] : uses)
    if (n == 1)
      for (int v : {e.first, e.second})
        tags[v] = std::abs(verts[v].y) <= 1e-12 ? VertexTag::Thin : VertexTag::Arc;
  return std::make_shared<const HalfDiskMesh>(verts, tris, tags);
}

}  // namespace

TEST(Solver, LinearDirichletProblemIsExact) {
  auto mesh = make_mesh(4);
  const auto g = FeFunction::interpolate(mesh, [](Point p) { return p.y; });
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(2.0)), g, ThinMode::Dirichlet);
  const auto [u, rep] = solve_unconstrained(pb);
  EXPECT_LE(max_abs_diff(u, g), 1e-9);
}

TEST(Solver, LinearSignoriniWithContactIsExact) {
  // u = -x2 vanishes on the thin line and its outward normal derivative is 1
  // there, so it solves the obstacle problem for its own arc data.
  auto mesh = make_mesh(4);
  const auto g = FeFunction::interpolate(mesh, [](Point p) { return -p.y; });
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(2.0)), g);
  const auto [u, rep] = solve(pb);
  EXPECT_LE(max_abs_diff(u, g), 1e-9);
  std::size_t thin = 0;
  for (std::size_t i = 0; i < mesh->num_vertices(); ++i) thin += mesh->tag(static_cast<int>(i)) == VertexTag::Thin;
  EXPECT_EQ(rep.active_set.size(), thin);
}

TEST(Solver, X2DataLiftsOffTheThinLine) {
  // With data x2 the field x2 itself violates the variational inequality:
  // raising it on the thin line lowers the energy.
  auto mesh = make_mesh(4);
  const auto g = FeFunction::interpolate(mesh, [](Point p) { return p.y; });
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(2.0)), g);
  const auto [u, rep] = solve(pb);
  EXPECT_LT(rep.energy, pb.setup.energy(g) - 0.1);
  EXPECT_GT(vi_check(pb, g, 100, 1).violations, 0);
  EXPECT_EQ(vi_check(pb, u, 100, 1).violations, 0);
  EXPECT_TRUE(rep.active_set.empty());
}

TEST(Solver, SignoriniBenchmark) {
  auto mesh = make_mesh(5);
  const double h = mesh->h_max();
  const auto g = FeFunction::interpolate(mesh, signorini32);
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(2.0)), g);
  const auto [u, rep] = solve(pb, 1e-11);
  EXPECT_LE(max_error(u, signorini32), 5 * h);
  EXPECT_LE(rep.free_residual, 1e-11);
  EXPECT_LE(rep.complementarity, 1e-11);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (mesh->tag(static_cast<int>(i)) != VertexTag::Thin) continue;
    const double x = mesh->vertex(static_cast<int>(i)).x;
    if (x > 4 * h) { EXPECT_GT(u[i], 0.0); }
    if (x < -4 * h) { EXPECT_LE(std::abs(u[i]), 1e-11); }
  }
  EXPECT_EQ(vi_check(pb, u, 100, 7).violations, 0);
}

TEST(Solver, InactiveObstacleMatchesUnconstrained) {
  auto mesh = make_mesh(4);
  const auto g = FeFunction::interpolate(mesh, [](Point p) { return p.y + 2.0; });
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(4.0)), g);
  const auto [u, rep] = solve(pb);
  const auto [w, rep2] = solve_unconstrained(pb);
  EXPECT_LE(max_abs_diff(u, w), 1e-8);
  // Zero flux on the free thin line bends the solution away from the data.
  EXPECT_GT(max_abs_diff(u, g), 1e-2);
}

TEST(Solver, ConstantDataIsExactForVariableExponent) {
  auto mesh = make_mesh(4);
  const auto g = FeFunction::interpolate(mesh, [](Point) { return 2.0; });
  ObstacleProblem pb(EnergySetup(mesh, ExponentField(ExponentFamily::Sinusoidal, {2.0, 0.5, 1.0})), g);
  const auto [u, rep] = solve(pb);
  EXPECT_LE(max_abs_diff(u, g), 1e-9);
  EXPECT_TRUE(rep.active_set.empty());
}

TEST(Solver, FourHarmonicHalfAnnulus) {
  for (int level : {4, 5}) {
    auto mesh = half_annulus(level);
    auto exact = [](Point p) { return std::pow(std::hypot(p.x, p.y), 2.0 / 3.0); };
    ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(4.0)), FeFunction::interpolate(mesh, exact),
                       ThinMode::Dirichlet);
    const auto [u, rep] = solve_unconstrained(pb);
    EXPECT_LE(max_error(u, exact), mesh->h_max()) << "level " << level;
  }
}

TEST(Solver, FeasibilityAndEnergyOrdering) {
  auto mesh = make_mesh(4);
  for (const auto& f : {ExponentField::constant(1.5), ExponentField(ExponentFamily::Sinusoidal, {2.0, 0.5, 1.0}),
                        ExponentField(ExponentFamily::Affine, {3.0, 0.5, 0.0})}) {
    const auto g = FeFunction::interpolate(mesh, [](Point p) { return std::sin(3 * p.x) + p.y; });
    ObstacleProblem pb(EnergySetup(mesh, f), g);
    const auto [u, rep] = solve(pb);
    const auto [w, rep2] = solve_unconstrained(pb);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const auto t = mesh->tag(static_cast<int>(i));
      if (t == VertexTag::Arc) { EXPECT_EQ(u[i], g[i]); }
      if (t == VertexTag::Thin) { EXPECT_GE(u[i], 0.0); }
    }
    EXPECT_GE(rep.energy, rep2.energy - 1e-12);
    EXPECT_LE(std::max(rep.free_residual, rep.complementarity), 1e-11);
    EXPECT_EQ(vi_check(pb, u, 100, 3).violations, 0);
  }
}

TEST(Solver, ZeroDirectionProductIsZero) {
  auto mesh = make_mesh(3);
  const auto g = FeFunction::interpolate(mesh, signorini32);
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(2.0)), g);
  const auto [u, rep] = solve(pb);
  EXPECT_EQ(vi_product(pb, u, FeFunction::zero(mesh)), 0.0);
}

TEST(Solver, Deterministic) {
  auto mesh = make_mesh(4);
  const auto g = FeFunction::interpolate(mesh, signorini32);
  ObstacleProblem pb(EnergySetup(mesh, ExponentField(ExponentFamily::Sinusoidal, {2.0, 0.5, 1.0})), g);
  const auto a = solve(pb);
  const auto b = solve(pb);
  EXPECT_EQ(a.first.values(), b.first.values());
  EXPECT_EQ(a.second.energy, b.second.energy);
  EXPECT_EQ(a.second.active_set, b.second.active_set);
}

TEST(Solver, RejectsBadParameters) {
  auto mesh = make_mesh(2);
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(2.0)), FeFunction::zero(mesh));
  EXPECT_THROW(solve(pb, 1e-3), PreconditionError);
  EXPECT_THROW(solve(pb, 1e-11, {1e-2, 1e-4}), PreconditionError);
  EXPECT_THROW(solve(pb, 1e-11, {1e-2, 1e-1, 1e-9}), PreconditionError);
}

TEST(Solver, FeasibleStartIsAdmissible) {
  auto mesh = make_mesh(3);
  const auto g = FeFunction::interpolate(mesh, [](Point p) { return p.x - 0.3; });
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(2.0)), g);
  const auto s = pb.feasible_start();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto t = mesh->tag(static_cast<int>(i));
    if (t == VertexTag::Arc) { EXPECT_EQ(s[i], g[i]); }
    else if (t == VertexTag::Thin) EXPECT_EQ(s[i], std::max(g[i], 0.0));
    else EXPECT_EQ(s[i], g[i]);
  }
}

TEST(SolutionFile, RoundTripAndMeshCheck) {
  auto mesh = make_mesh(3);
  const auto g = FeFunction::interpolate(mesh, [](Point p) { return std::exp(p.x) / 3.0; });
  std::stringstream ss;
  write_solution(ss, g);
  const auto back = read_solution(ss, mesh);
  EXPECT_EQ(back.values(), g.values());
  std::stringstream ss2;
  write_solution(ss2, g);
  EXPECT_THROW(read_solution(ss2, make_mesh(2)), InputError);
  std::stringstream bad("garbage\n");
  EXPECT_THROW(read_solution(bad, mesh), InputError);
}
