#pragma once

#include <Eigen/SparseCholesky>
#include <chrono>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "pxthin/energy.hpp"

namespace pxthin {

/// How Thin vertices enter the problem: unilateral constraint v >= 0,
/// natural (free) boundary, or pinned to g.
enum class ThinMode { Obstacle, Free, Dirichlet };

struct ObstacleProblem {
  EnergySetup setup;
  FeFunction g;  // read at Arc vertices (and Thin vertices in Dirichlet mode)
  ThinMode thin = ThinMode::Obstacle;

  ObstacleProblem(EnergySetup s, FeFunction data, ThinMode mode = ThinMode::Obstacle)
      : setup(std::move(s)), g(std::move(data)), thin(mode) {
    if (&g.mesh() != &setup.mesh() && g.mesh().num_vertices() != setup.mesh().num_vertices())
      throw PreconditionError("boundary data and energy live on different meshes");
  }

  const HalfDiskMesh& mesh() const { return setup.mesh(); }

  /// Explicit admissible point: g on Arc, max(g, 0) on Thin, g inside.
  FeFunction feasible_start() const { return project(g.values()); }

  FeFunction project(const std::vector<double>& v) const {
    std::vector<double> out = v;
    for (std::size_t i = 0; i < out.size(); ++i) clamp(out, i);
    return FeFunction(g.mesh_ptr(), std::move(out));
  }

  bool pinned(std::size_t i) const {
    const auto t = mesh().tag(static_cast<int>(i));
    return t == VertexTag::Arc || (t == VertexTag::Thin && thin == ThinMode::Dirichlet);
  }
  bool constrained(std::size_t i) const {
    return thin == ThinMode::Obstacle && mesh().tag(static_cast<int>(i)) == VertexTag::Thin;
  }

  void clamp(std::vector<double>& v, std::size_t i) const {
    if (pinned(i))
      v[i] = g[i];
    else if (constrained(i))
      v[i] = std::max(v[i], 0.0);
  }
};

struct StageRecord {
  double epsilon = 0.0;
  int iterations = 0;
  int newton_steps = 0;
  int gradient_steps = 0;
};

struct SolveReport {
  std::vector<StageRecord> stages;
  double energy = 0.0;  // at epsilon = 0
  double free_residual = 0.0;
  double complementarity = 0.0;
  std::vector<int> active_set;
  bool converged = false;
  double wall_seconds = 0.0;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, FeFunction best, SolveReport report)
      : Error(what), best_(std::move(best)), report_(std::move(report)) {}
  const FeFunction& best() const { return best_; }
  const SolveReport& report() const { return report_; }

 private:
  FeFunction best_;
  SolveReport report_;
};

inline std::vector<double> default_eps_schedule() { return {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8}; }

struct Kkt {
  double free_residual = 0.0;
  double complementarity = 0.0;
  double worst() const { return std::max(free_residual, complementarity); }
};

namespace detail {

inline Kkt kkt(const ObstacleProblem& pb, std::span<const double> v, std::span<const double> r) {
  Kkt k;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (pb.pinned(i)) continue;
    if (pb.constrained(i))
      k.complementarity = std::max(k.complementarity, std::abs(std::min(v[i], r[i])));
    else
      k.free_residual = std::max(k.free_residual, std::abs(r[i]));
  }
  return k;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Projected Armijo backtracking along v + t d. Returns true and updates v on
// acceptance. Near the minimizer the energy decrease falls below the rounding
// level of the energy itself; there a step is taken when the energy does not
// rise beyond that level and the KKT measure drops.
inline bool projected_armijo(const ObstacleProblem& pb, const EnergySetup& es, std::vector<double>& v,
                             std::span<const double> r, std::span<const double> d, double kkt_now) {
  const double noise = 1e-13 * std::max(1.0, std::abs(es.energy(v)));
  std::vector<double> trial(v.size());
  std::vector<double> step(v.size());
  double t = 1.0;
  for (int halving = 0; halving <= 40; ++halving, t *= 0.5) {
    bool moved = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
      trial[i] = v[i] + t * d[i];
      pb.clamp(trial, i);
      step[i] = trial[i] - v[i];
      moved = moved || step[i] != 0.0;
    }
    if (!moved) return false;
    const double slope = dot(r, step);
    const double change = es.energy_change(v, trial);
    if (!std::isfinite(change)) continue;
    if (slope < 0.0 && change <= 1e-4 * slope && std::abs(slope) > noise) {
      v.swap(trial);
      return true;
    }
    if (change <= noise) {
      const auto rt = es.residual(trial);
      if (kkt(pb, trial, rt).worst() < kkt_now) {
        v.swap(trial);
        return true;
      }
    }
  }
  return false;
}

// Minimizes the energy of `energy_es` from v, using Newton matrices from
// `hessian_es` (identical except in the final eps = 0 polish, where the last
// positive epsilon supplies the tangent).
inline bool run_stage(const ObstacleProblem& pb, const EnergySetup& energy_es, const EnergySetup& hessian_es,
                      std::vector<double>& v, double tol, StageRecord& rec, std::vector<double>& best,
                      double& best_kkt, int& since_best) {
  const std::size_t n = v.size();
  while (true) {
    const auto r = energy_es.residual(v);
    const Kkt k = kkt(pb, v, r);
    if (k.worst() < best_kkt) {
      best_kkt = k.worst();
      best = v;
      since_best = 0;
    }
    if (k.worst() <= tol) return true;
    if (since_best >= 200) return false;
    ++rec.iterations;
    ++since_best;

    // Active set: Thin nodes with v_i - r_i < 0; ties stay inactive.
    std::vector<int> index(n, -1);
    std::vector<double> d(n, 0.0);
    int nf = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pb.pinned(i)) continue;
      if (pb.constrained(i) && v[i] - r[i] < 0.0) {
        d[i] = -v[i];
        continue;
      }
      index[i] = nf++;
    }

    const auto h = hessian_es.hessian(v);
    bool newton_ok = false;
    if (nf > 0) {
      Eigen::VectorXd rhs(nf);
      for (std::size_t i = 0; i < n; ++i)
        if (index[i] >= 0) rhs[index[i]] = -r[i];
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(static_cast<std::size_t>(h.nonZeros()));
      for (int col = 0; col < h.outerSize(); ++col) {
        const int jc = index[static_cast<std::size_t>(col)];
        for (SparseSymmetricMatrix::InnerIterator it(h, col); it; ++it) {
          const int ir = index[static_cast<std::size_t>(it.row())];
          if (ir < 0) continue;
          if (jc >= 0)
            trip.emplace_back(ir, jc, it.value());
          else if (d[static_cast<std::size_t>(col)] != 0.0)
            rhs[ir] -= it.value() * d[static_cast<std::size_t>(col)];
        }
      }
      SparseSymmetricMatrix hf(nf, nf);
      hf.setFromTriplets(trip.begin(), trip.end());
      Eigen::SimplicialLDLT<SparseSymmetricMatrix> ldlt(hf);
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd x = ldlt.solve(rhs);
        if (ldlt.info() == Eigen::Success && x.allFinite()) {
          for (std::size_t i = 0; i < n; ++i)
            if (index[i] >= 0) d[i] = x[index[i]];
          newton_ok = projected_armijo(pb, energy_es, v, r, d, k.worst());
        }
      }
    }
    if (newton_ok) {
      ++rec.newton_steps;
      continue;
    }

    // Jacobi-scaled projected gradient.
    std::vector<double> g(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (pb.pinned(i)) continue;
      const double diag = h.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
      g[i] = -r[i] / (diag > 0.0 ? diag : 1.0);
    }
    if (projected_armijo(pb, energy_es, v, r, g, k.worst())) {
      ++rec.gradient_steps;
      continue;
    }
    // No admissible step decreases anything: further iterations would repeat
    // this one exactly.
    return false;
  }
}

inline std::pair<FeFunction, SolveReport> solve_impl(const ObstacleProblem& pb, double tol,
                                                     const std::vector<double>& schedule,
                                                     const std::optional<FeFunction>& initial) {
  if (!(tol >= 1e-14 && tol <= 1e-4)) throw PreconditionError("solver tolerance must lie in [1e-14, 1e-4]");
  if (schedule.empty() || !(schedule.back() <= 1e-8))
    throw PreconditionError("epsilon schedule must end at or below 1e-8");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0)) throw PreconditionError("epsilon schedule entries must be positive");
    if (i > 0 && !(schedule[i] < schedule[i - 1]))
      throw PreconditionError("epsilon schedule must be strictly decreasing");
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> v = (initial ? pb.project(initial->values()) : pb.feasible_start()).values();

  SolveReport rep;
  std::vector<double> best = v;
  double best_kkt = std::numeric_limits<double>::infinity();
  int since_best = 0;
  bool ok = true;
  const double loose = std::max(tol, 1e-8);
  for (double eps : schedule) {
    const auto es = pb.setup.with_epsilon(eps);
    StageRecord rec{eps};
    best_kkt = std::numeric_limits<double>::infinity();
    since_best = 0;
    ok = run_stage(pb, es, es, v, loose, rec, best, best_kkt, since_best);
    rep.stages.push_back(rec);
    if (!ok) break;
  }
  if (ok) {
    StageRecord rec{0.0};
    best_kkt = std::numeric_limits<double>::infinity();
    since_best = 0;
    ok = run_stage(pb, pb.setup.with_epsilon(0.0), pb.setup.with_epsilon(schedule.back()), v, tol, rec, best,
                   best_kkt, since_best);
    rep.stages.push_back(rec);
  }
  if (!ok) v = best;

  const auto e0 = pb.setup.with_epsilon(0.0);
  const auto r = e0.residual(v);
  const Kkt k = kkt(pb, v, r);
  rep.energy = e0.energy(v);
  rep.free_residual = k.free_residual;
  rep.complementarity = k.complementarity;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (pb.constrained(i) && v[i] == 0.0) rep.active_set.push_back(static_cast<int>(i));
  rep.converged = ok && k.worst() <= tol;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  FeFunction u(pb.g.mesh_ptr(), std::move(v));
  if (!rep.converged)
    throw ConvergenceError("solver stagnated at KKT residual " + fmt_real(k.worst()), u, rep);
  return {std::move(u), std::move(rep)};
}

}  // namespace detail

/// Thin-obstacle minimizer by primal-dual active set Newton with epsilon
/// continuation. The final stage minimizes the unregularized energy.
inline std::pair<FeFunction, SolveReport> solve(const ObstacleProblem& problem, double tol = 1e-11,
                                                const std::vector<double>& eps_schedule = default_eps_schedule(),
                                                const std::optional<FeFunction>& initial = std::nullopt) {
  return detail::solve_impl(problem, tol, eps_schedule, initial);
}

/// Same Dirichlet data without the thin constraint. Thin vertices are free
/// unless the problem pins them.
inline std::pair<FeFunction, SolveReport> solve_unconstrained(
    const ObstacleProblem& problem, double tol = 1e-11,
    const std::vector<double>& eps_schedule = default_eps_schedule(),
    const std::optional<FeFunction>& initial = std::nullopt) {
  ObstacleProblem free_pb = problem;
  if (free_pb.thin == ThinMode::Obstacle) free_pb.thin = ThinMode::Free;
  return detail::solve_impl(free_pb, tol, eps_schedule, initial);
}

struct ViCheck {
  double min_product = 0.0;     // min over trials of residual(u) . v
  double min_normalized = 0.0;  // min over trials of residual(u) . v / |v|
  int violations = 0;           // trials with product < -tol |v|
};

/// Tests the discrete variational inequality at u against random admissible
/// directions: v = 0 on pinned vertices, v >= -u on constrained ones.
inline ViCheck vi_check(const ObstacleProblem& problem, const FeFunction& u, int trials, std::uint64_t seed,
                        double tol = 1e-8) {
  const auto r = problem.setup.with_epsilon(0.0).residual(u);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  ViCheck out;
  out.min_product = std::numeric_limits<double>::infinity();
  out.min_normalized = std::numeric_limits<double>::infinity();
  std::vector<double> v(u.size());
  for (int trial = 0; trial < trials; ++trial) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = unif(rng);
      if (problem.pinned(i))
        v[i] = 0.0;
      else if (problem.constrained(i))
        v[i] = std::max(v[i], -u[i]);
    }
    double prod = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      prod += r[i] * v[i];
      nv += v[i] * v[i];
    }
    nv = std::sqrt(nv);
    out.min_product = std::min(out.min_product, prod);
    out.min_normalized = std::min(out.min_normalized, nv > 0.0 ? prod / nv : 0.0);
    if (prod < -tol * nv) ++out.violations;
  }
  if (trials <= 0) out.min_product = out.min_normalized = 0.0;
  return out;
}

/// residual(u) . v for one direction, evaluated at epsilon = 0.
inline double vi_product(const ObstacleProblem& problem, const FeFunction& u, const FeFunction& v) {
  const auto r = problem.setup.with_epsilon(0.0).residual(u);
  return detail::dot(r, v.values());
}

// ---------------------------------------------------------------------------
// Solution files: "# pxthin solution mesh_hash=<hex> n=<nv>" then "u i value".

inline void write_solution(std::ostream& out, const FeFunction& u) {
  out << "# pxthin solution mesh_hash=" << u.mesh().content_hash() << " n=" << u.size() << "\n";
  for (std::size_t i = 0; i < u.size(); ++i) out << "u " << i << " " << fmt_real(u[i]) << "\n";
}

inline FeFunction read_solution(std::istream& in, MeshPtr mesh) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty solution file");
  const std::string key = "mesh_hash=";
  const auto pos = line.find(key);
  if (line.rfind("# pxthin solution", 0) != 0 || pos == std::string::npos)
    throw InputError("solution file header missing");
  const std::string hash = line.substr(pos + key.size(), 16);
  if (hash != mesh->content_hash())
    throw InputError("solution file was written for a different mesh (hash " + hash + ")");
  std::vector<double> values(mesh->num_vertices(), 0.0);
  std::vector<char> seen(values.size(), 0);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    long long idx = -1;
    std::string value;
    if (!(ls >> tag >> idx >> value) || tag != "u" || idx < 0 || static_cast<std::size_t>(idx) >= values.size())
      throw InputError("malformed solution line " + std::to_string(lineno));
    char* end = nullptr;
    values[static_cast<std::size_t>(idx)] = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0') throw InputError("bad value on solution line " + std::to_string(lineno));
    seen[static_cast<std::size_t>(idx)] = 1;
  }
  for (char s : seen)
    if (!s) throw InputError("solution file does not cover every vertex");
  return FeFunction(std::move(mesh), std::move(values));
}

}  // namespace pxthin
