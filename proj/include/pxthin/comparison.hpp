#pragma once

#include <ostream>

#include "pxthin/solver.hpp"

namespace pxthin {

struct ReferenceResult {
  FeFunction w;
  double m = 0.0;                // Dirichlet level on the arc
  double ordering_margin = 0.0;  // min over vertices of u - w
  SolveReport report;
};

/// w: unconstrained solution with w = m on Arc and w = 0 on Thin, for a
/// prescribed level m. Exposed separately so the level can be forced.
inline ReferenceResult build_reference_at_level(const ObstacleProblem& problem, double m, double tol = 1e-11,
                                                const std::vector<double>& schedule = default_eps_schedule()) {
  const auto& mesh = problem.mesh();
  std::vector<double> data(mesh.num_vertices(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i)
    if (mesh.tag(static_cast<int>(i)) == VertexTag::Arc) data[i] = m;
  ObstacleProblem ref(problem.setup, FeFunction(problem.g.mesh_ptr(), std::move(data)), ThinMode::Dirichlet);
  auto [w, rep] = solve_unconstrained(ref, tol, schedule);
  return {std::move(w), m, 0.0, std::move(rep)};
}

/// Reference solution for u: level m = min of u over Arc vertices, then the
/// nodal ordering margin min(u - w).
inline ReferenceResult build_reference(const FeFunction& u, const ObstacleProblem& problem, double tol = 1e-11,
                                       const std::vector<double>& schedule = default_eps_schedule()) {
  const auto& mesh = problem.mesh();
  if (u.size() != mesh.num_vertices()) throw PreconditionError("u does not live on the problem mesh");
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < u.size(); ++i)
    if (mesh.tag(static_cast<int>(i)) == VertexTag::Arc) m = std::min(m, u[i]);
  auto ref = build_reference_at_level(problem, m, tol, schedule);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < u.size(); ++i) margin = std::min(margin, u[i] - ref.w[i]);
  ref.ordering_margin = margin;
  return ref;
}

struct ReflectionCheck {
  double residual = 0.0;  // sup over non-Arc disk vertices
  std::size_t disk_vertices = 0;
};

/// Odd extension of w and even extension of p across the thin line; returns
/// the unconstrained residual sup-norm on the full disk.
inline ReflectionCheck reflect_and_check(const FeFunction& w, const ExponentField& field) {
  const auto& half = w.mesh();
  for (std::size_t i = 0; i < w.size(); ++i)
    if (half.tag(static_cast<int>(i)) == VertexTag::Thin && std::abs(w[i]) > 1e-10)
      throw PreconditionError("reflection needs w = 0 on Thin vertices; found " + fmt_real(w[i]));
  auto mirrored = mirror_mesh(half);
  std::vector<double> vals(mirrored.mesh.num_vertices());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double s = static_cast<double>(mirrored.sign[i]);
    vals[i] = s * w[static_cast<std::size_t>(mirrored.source[i])];
  }
  auto disk = std::make_shared<const HalfDiskMesh>(std::move(mirrored.mesh));
  EnergySetup es(disk, field, 0.0, 2, true);
  const auto r = es.residual(std::span<const double>(vals));
  ReflectionCheck out;
  out.disk_vertices = vals.size();
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (disk->tag(static_cast<int>(i)) != VertexTag::Arc) out.residual = std::max(out.residual, std::abs(r[i]));
  return out;
}

/// M = int (|Du|^p + |Dw|^p + 1) dx + 1.
inline double compute_M(const FeFunction& u, const FeFunction& w, const ExponentField& field) {
  if (&u.mesh() != &w.mesh() && u.mesh().num_vertices() != w.mesh().num_vertices())
    throw PreconditionError("u and w live on different meshes");
  const auto gu = element_gradients(u);
  const auto gw = element_gradients(w);
  return integrate(u.mesh(), quadrature(5),
                   [&](Point x, std::size_t t) {
                     const double p = field.eval(x);
                     return std::pow(norm(gu[t]), p) + std::pow(norm(gw[t]), p) + 1.0;
                   }) +
         1.0;
}

/// Sum over elements of area * |grad v|^q; exact for P1 fields and constant q.
inline double gradient_power_integral(const FeFunction& v, double q) {
  double s = 0.0;
  for (std::size_t t = 0; t < v.mesh().num_triangles(); ++t) s += v.mesh().area(t) * std::pow(norm(v.gradient(t)), q);
  return s;
}

struct FrozenResult {
  Submesh sub;
  MeshPtr mesh;
  FeFunction u_restricted;
  FeFunction u0;
  double p2 = 0.0;
  SolveReport report;
  double energy_u = 0.0;   // int_sub |Du|^p2
  double energy_u0 = 0.0;  // int_sub |Du0|^p2
};

/// Constant-exponent p2 = sup p thin obstacle problem on the half-ball, with
/// Dirichlet data the nodal trace of u on the submesh boundary.
inline FrozenResult frozen_solve(const FeFunction& u, Point center, double radius, const ExponentField& field,
                                 double tol = 1e-11, const std::vector<double>& schedule = default_eps_schedule()) {
  auto sub = extract_halfball_submesh(u.mesh(), center, radius);
  auto mesh = std::make_shared<const HalfDiskMesh>(sub.mesh);
  const double p2 = sup_inf_on_halfball(field, center, radius).p2;
  auto ur = u.restrict_to(sub, mesh);
  ObstacleProblem pb(EnergySetup(mesh, ExponentField::constant(p2)), ur, ThinMode::Obstacle);
  auto [u0, rep] = solve(pb, tol, schedule, ur);
  FrozenResult out{std::move(sub), mesh, ur, u0, p2, std::move(rep)};
  out.energy_u = gradient_power_integral(out.u_restricted, p2);
  out.energy_u0 = gradient_power_integral(out.u0, p2);
  return out;
}

struct ComparisonRow {
  double r = 0.0;
  double p2 = 0.0;
  double error = 0.0;      // int_{B_r} |Du - Du0|^p2
  double majorant = 0.0;   // int_{B_2r} |Du|^p2
  double normalized = 0.0; // error / (M^sigma1 majorant + r^2)
  double dugedu0_slack = 0.0;  // int |Du|^p2 - int |Du0|^p2 on the submesh
};

struct ComparisonReport {
  double M = 0.0;
  double sigma1 = 0.0;
  double ordering_margin = 0.0;
  double reflection_residual = 0.0;
  std::vector<ComparisonRow> rows;
  std::vector<double> skipped_radii;
  double rate = 0.0;
};

/// Per-radius frozen comparisons and the log-log slope of the normalized
/// comparison error against r. sigma1 = min(beta/(4n), sigma0), n = 2.
inline ComparisonReport comparison_decay(const FeFunction& u, const ExponentField& field, Point center,
                                         std::span<const double> radii, double M, double sigma0, double tol = 1e-11,
                                         const std::vector<double>& schedule = default_eps_schedule()) {
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] < radii[i - 1])) throw InputError("comparison radii must be strictly decreasing");
  ComparisonReport rep;
  rep.M = M;
  rep.sigma1 = std::min(field.beta() / 8.0, sigma0);
  const auto grads = element_gradients(u);
  const auto rule = quadrature(5);
  std::vector<double> lx, ly;
  for (double r : radii) {
    if (std::abs(center.x) + 2.0 * r > 0.75 + kGeomTol) {
      rep.skipped_radii.push_back(r);
      continue;
    }
    std::optional<FrozenResult> solved;
    try {
      solved.emplace(frozen_solve(u, center, r, field, tol, schedule));
    } catch (const ResolutionError&) {
      rep.skipped_radii.push_back(r);
      continue;
    }
    const FrozenResult& fr = *solved;
    double err = 0.0;
    for (std::size_t t = 0; t < fr.mesh->num_triangles(); ++t)
      err += fr.mesh->area(t) * std::pow(norm(fr.u_restricted.gradient(t) - fr.u0.gradient(t)), fr.p2);
    const double maj =
        integrate_ball(u.mesh(), rule, center, 2.0 * r, [&](Point, std::size_t t) {
          return std::pow(norm(grads[t]), fr.p2);
        }).value;
    ComparisonRow row{r, fr.p2, err, maj, 0.0, fr.energy_u - fr.energy_u0};
    row.normalized = err / (std::pow(M, rep.sigma1) * maj + r * r);
    rep.rows.push_back(row);
    if (row.normalized > 0.0) {
      lx.push_back(std::log(r));
      ly.push_back(std::log(row.normalized));
    }
  }
  if (rep.rows.size() < 3)
    throw InputError("comparison_decay needs at least 3 valid radii, got " + std::to_string(rep.rows.size()));
  rep.rate = lx.size() >= 2 ? fit_line(lx, ly).slope : std::numeric_limits<double>::infinity();
  return rep;
}

inline void write_comparison_csv(std::ostream& out, const ComparisonReport& rep) {
  out << "kind,r,p2,error,majorant,normalized,dugedu0_slack,M,sigma1,rate,ordering_margin,reflection_residual\n";
  for (const auto& row : rep.rows)
    out << "radius," << fmt_real(row.r) << "," << fmt_real(row.p2) << "," << fmt_real(row.error) << ","
        << fmt_real(row.majorant) << "," << fmt_real(row.normalized) << "," << fmt_real(row.dugedu0_slack)
        << ",,,,,\n";
  out << "summary,,,,,,," << fmt_real(rep.M) << "," << fmt_real(rep.sigma1) << "," << fmt_real(rep.rate) << ","
      << fmt_real(rep.ordering_margin) << "," << fmt_real(rep.reflection_residual) << "\n";
}

}  // namespace pxthin
