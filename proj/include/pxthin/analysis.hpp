#pragma once

#include <ostream>
#include <random>

#include "pxthin/comparison.hpp"

namespace pxthin {

// ---------------------------------------------------------------------------
// Iteration lemma

struct IterationConstants {
  double A = 0.0;
  double B = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double alpha3 = 0.0;
  double kappa = 0.0;
  double eps0 = 0.0;
  double c = 0.0;
};

/// kappa and eps0 make phi(kappa r) <= kappa^alpha3 phi(r) + B r^alpha2 hold;
/// iterating it gives the chain constant S kappa^-alpha2 with
/// S = 1 / (1 - kappa^(alpha3 - alpha2)), and passing from grid radii to
/// arbitrary rho costs one more kappa^-alpha2.
inline IterationConstants iteration_constants(double A, double alpha1, double alpha2, double B = 0.0) {
  if (!(A >= 0.0) || !(alpha2 >= 0.0) || !(alpha1 > alpha2) || !(B >= 0.0))
    throw PreconditionError("iteration constants need A, B >= 0 and alpha1 > alpha2 >= 0");
  IterationConstants k;
  k.A = A;
  k.B = B;
  k.alpha1 = alpha1;
  k.alpha2 = alpha2;
  k.alpha3 = 0.5 * (alpha1 + alpha2);
  k.kappa = std::min(0.49, std::pow(std::pow(2.0, -(alpha1 + 1.0)) / std::max(A, 1e-12), 1.0 / (alpha1 - k.alpha3)));
  k.eps0 = 0.5 * std::pow(k.kappa, alpha1);
  const double S = 1.0 / (1.0 - std::pow(k.kappa, k.alpha3 - alpha2));
  k.c = std::pow(k.kappa, -2.0 * alpha2) * S;
  return k;
}

struct IterationVerify {
  double worst_slack = std::numeric_limits<double>::infinity();
  long long violations = 0;
  long long checks = 0;
};

namespace detail {

// Largest non-increasing-downward phi on the grid r_k = r0 q^k satisfying
// phi(rho) <= A((rho/r)^a1 + eps) phi(2r) + B r^a2 for every grid pair.
inline std::vector<double> maximal_phi(const IterationConstants& k, double eps, double phi0, double q, int levels) {
  std::vector<double> r(static_cast<std::size_t>(levels)), phi(r.size());
  for (int i = 0; i < levels; ++i) r[static_cast<std::size_t>(i)] = std::pow(q, i);
  // 2 r_j = r_{j - s} where q^s = 1/2.
  const int s = static_cast<int>(std::lround(std::log(0.5) / std::log(q)));
  phi[0] = phi0;
  for (int i = 1; i < levels; ++i) {
    double bound = phi[static_cast<std::size_t>(i - 1)];
    for (int j = s; j < i; ++j) {
      const double rho = r[static_cast<std::size_t>(i)], rr = r[static_cast<std::size_t>(j)];
      const double val = k.A * (std::pow(rho / rr, k.alpha1) + eps) * phi[static_cast<std::size_t>(j - s)] +
                         k.B * std::pow(rr, k.alpha2);
      bound = std::min(bound, val);
    }
    phi[static_cast<std::size_t>(i)] = std::max(0.0, bound);
  }
  return phi;
}

}  // namespace detail

/// Checks the lemma's conclusion on synthesized worst-case sequences. Each
/// trial draws phi(r0), B in [0, 1], eps in [0, eps0) and a grid ratio in
/// {1/2, 2^-1/2}, builds the maximal admissible phi and tests every grid pair.
inline IterationVerify iteration_verify(const IterationConstants& consts, int trials, std::uint64_t seed,
                                        int levels = 48) {
  IterationVerify out;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(trial));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    IterationConstants k = consts;
    k.B = u01(rng);
    const double eps = consts.eps0 * u01(rng);
    const double phi0 = std::exp(std::log(1e-3) + u01(rng) * std::log(1e6));
    const double q = u01(rng) < 0.5 ? 0.5 : std::sqrt(0.5);
    const auto phi = detail::maximal_phi(k, eps, phi0, q, levels);
    for (int i = 0; i < levels; ++i)
      for (int j = 0; j < i; ++j) {
        const double rho = std::pow(q, i), r = std::pow(q, j);
        const double rhs = k.c * (std::pow(rho / r, k.alpha2) * phi[static_cast<std::size_t>(j)] +
                                  k.B * std::pow(rho, k.alpha2));
        const double slack = rhs - phi[static_cast<std::size_t>(i)];
        out.worst_slack = std::min(out.worst_slack, slack);
        ++out.checks;
        if (slack < 0.0) ++out.violations;
      }
  }
  return out;
}

/// Randomized instances: A in [0.1, 10], alpha2 in [0, 2], alpha1 - alpha2 in
/// [0.25, 2] capped at 4, each with freshly constructed constants.
inline IterationVerify iteration_verify_random(int trials, std::uint64_t seed) {
  IterationVerify out;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(trial));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double A = 0.1 + 9.9 * u01(rng);
    const double a2 = 2.0 * u01(rng);
    const double a1 = std::min(4.0, a2 + 0.25 + 1.75 * u01(rng));
    const auto k = iteration_constants(A, a1, a2);
    const auto one = iteration_verify(k, 1, seed ^ (0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(trial)));
    out.worst_slack = std::min(out.worst_slack, one.worst_slack);
    out.violations += one.violations;
    out.checks += one.checks;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monotonicity inequality
//   |x1 - x2|^p <= c eps (|x1|^p + |x2|^p) + c/eps (|x1|^(p-2) x1 - |x2|^(p-2) x2).(x1 - x2)

struct MonotonicitySample {
  double lhs = 0.0;
  double eps_term = 0.0;   // eps (|x1|^p + |x2|^p)
  double mono_term = 0.0;  // (V(x1) - V(x2)).(x1 - x2) / eps
};

inline MonotonicitySample monotonicity_terms(Vec2 x1, Vec2 x2, double p, double eps) {
  auto V = [p](Vec2 x) {
    const double n = norm(x);
    return n > 0.0 ? std::pow(n, p - 2.0) * x : Vec2{0.0, 0.0};
  };
  MonotonicitySample s;
  s.lhs = std::pow(norm(x1 - x2), p);
  s.eps_term = eps * (std::pow(norm(x1), p) + std::pow(norm(x2), p));
  s.mono_term = dot(V(x1) - V(x2), x1 - x2) / eps;
  return s;
}

namespace detail {

struct MonotonicityPoint {
  double a1, a2, log_r2, p, log_eps;
};

inline MonotonicitySample monotonicity_at(const MonotonicityPoint& q) {
  const double r2 = std::exp(q.log_r2);
  return monotonicity_terms({std::cos(q.a1), std::sin(q.a1)}, {r2 * std::cos(q.a2), r2 * std::sin(q.a2)}, q.p,
                            std::exp(q.log_eps));
}

// |x1| = 1 (both sides are p-homogeneous); |x2| log-uniform in [1e-3, 1e3],
// uniform angle; p uniform in [gamma1, gamma2]; eps log-uniform in (1e-6, 1).
template <class Fn>
void monotonicity_points(double gamma1, double gamma2, long long trials, std::uint64_t seed, Fn&& fn) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (long long i = 0; i < trials; ++i) {
    MonotonicityPoint q;
    q.a1 = 2.0 * kPi * u01(rng);
    q.a2 = 2.0 * kPi * u01(rng);
    q.log_r2 = std::log(1e-3) + u01(rng) * std::log(1e6);
    q.p = gamma1 + (gamma2 - gamma1) * u01(rng);
    q.log_eps = std::log(1e-6) * (1.0 - u01(rng));
    fn(q);
  }
}

template <class Fn>
void monotonicity_samples(double gamma1, double gamma2, long long trials, std::uint64_t seed, Fn&& fn) {
  monotonicity_points(gamma1, gamma2, trials, seed, [&](const MonotonicityPoint& q) { fn(monotonicity_at(q)); });
}

inline double monotonicity_ratio(const MonotonicityPoint& q) {
  const auto s = monotonicity_at(q);
  const double den = s.eps_term + s.mono_term;
  return den > 0.0 ? s.lhs / den : 0.0;
}

// Compass search inside the sampling box, started from a sampled point.
inline double polish_monotonicity(MonotonicityPoint q, double gamma1, double gamma2) {
  const double lo[5] = {-1e300, -1e300, std::log(1e-3), gamma1, std::log(1e-6)};
  const double hi[5] = {1e300, 1e300, std::log(1e3), gamma2, 0.0};
  double step[5] = {0.1, 0.1, 0.5, 0.1 * (gamma2 - gamma1), 0.5};
  double* x[5] = {&q.a1, &q.a2, &q.log_r2, &q.p, &q.log_eps};
  double best = monotonicity_ratio(q);
  for (int sweep = 0; sweep < 400; ++sweep) {
    bool moved = false;
    for (int k = 0; k < 5; ++k)
      for (double dir : {1.0, -1.0}) {
        const double old = *x[k];
        *x[k] = std::clamp(old + dir * step[k], lo[k], hi[k]);
        const double f = monotonicity_ratio(q);
        if (f > best) {
          best = f;
          moved = true;
        } else {
          *x[k] = old;
        }
      }
    if (!moved) {
      double largest = 0.0;
      for (int k = 0; k < 5; ++k) largest = std::max(largest, step[k] *= 0.5);
      if (largest < 1e-10) break;
    }
  }
  return best;
}

}  // namespace detail

/// Empirical constant: max of LHS / (eps term + monotone term) over samples,
/// with the 16 worst samples refined by a local search, times a safety factor.
inline double calibrate_monotonicity(double gamma1, double gamma2, long long samples = 1000000,
                                     std::uint64_t seed = 1, double safety = 1.05) {
  if (!(gamma1 > 1.0 && gamma1 <= gamma2)) throw PreconditionError("monotonicity needs 1 < gamma1 <= gamma2");
  constexpr std::size_t keep = 16;
  std::vector<std::pair<double, detail::MonotonicityPoint>> top;
  detail::monotonicity_points(gamma1, gamma2, samples, seed, [&](const detail::MonotonicityPoint& q) {
    const double f = detail::monotonicity_ratio(q);
    if (top.size() < keep || f > top.back().first) {
      top.emplace_back(f, q);
      std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      if (top.size() > keep) top.pop_back();
    }
  });
  double worst = 0.0;
  for (const auto& [f, q] : top) worst = std::max(worst, detail::polish_monotonicity(q, gamma1, gamma2));
  return safety * worst;
}

/// Worst LHS / RHS with the given constant; <= 1 means the inequality held.
inline double monotonicity_check(double gamma1, double gamma2, double c, long long trials, std::uint64_t seed) {
  if (!(gamma1 > 1.0 && gamma1 <= gamma2)) throw PreconditionError("monotonicity needs 1 < gamma1 <= gamma2");
  double worst = 0.0;
  detail::monotonicity_samples(gamma1, gamma2, trials, seed, [&](const MonotonicitySample& s) {
    if (s.lhs == 0.0) return;
    const double rhs = c * (s.eps_term + s.mono_term);
    worst = std::max(worst, rhs > 0.0 ? s.lhs / rhs : std::numeric_limits<double>::infinity());
  });
  return worst;
}

// ---------------------------------------------------------------------------
// Radius and exponent formulas (n = 2)

/// Smallness condition on r for the higher integrability estimate. With
/// sigma0 given, also [p](2r)^beta <= sigma0/2 and
/// r <= (sigma1/4)^(1/beta) / [p], sigma1 = min(beta/8, sigma0).
inline double admissible_radius(const ExponentField& field, double M, std::optional<double> sigma0 = std::nullopt) {
  if (!(M >= 1.0)) throw PreconditionError("admissible_radius needs M >= 1");
  const double cap = 1.0 / (8.0 * M);
  const double s = field.holder_seminorm();
  if (!(s > 0.0)) return cap;
  const double beta = field.beta(), g1 = field.gamma1();
  constexpr double n = 2.0;
  double r = std::min({std::pow(beta / (8.0 * s), 2.0 / beta),
                       0.25 * std::pow(g1 * g1 / ((2.0 * n + g1) * s), 1.0 / beta), cap});
  if (sigma0) {
    const double sig1 = std::min(beta / (4.0 * n), *sigma0);
    r = std::min(r, 0.5 * std::pow(*sigma0 / (2.0 * s), 1.0 / beta));
    r = std::min(r, std::pow(sig1 / 4.0, 1.0 / beta) / s);
  }
  return r;
}

/// alpha0 beta0 / (2 (n + alpha0 + beta0) gamma2), beta0 = beta/4, n = 2.
inline double theoretical_alpha(double alpha0, double beta, double gamma2) {
  if (!(alpha0 > 0.0 && alpha0 < 1.0) || !(beta > 0.0 && beta <= 1.0) || !(gamma2 > 1.0))
    throw PreconditionError("theoretical_alpha needs alpha0 in (0,1), beta in (0,1], gamma2 > 1");
  const double b0 = beta / 4.0;
  return alpha0 * b0 / (2.0 * (2.0 + alpha0 + b0) * gamma2);
}

// ---------------------------------------------------------------------------
// Higher integrability

inline std::vector<double> default_sigma_grid() { return {0.0, 0.01, 0.02, 0.05, 0.1, 0.2}; }

struct SigmaRow {
  double sigma = 0.0;
  double lhs = 0.0;   // avg_{B_r} |Du|^((1+s)p)
  double rhs1 = 0.0;  // (avg_{B_2r} |Du|^p)^(1+s)
  double rhs2 = 0.0;  // avg_{B_2r} |Dw|^((1+s)p)
  double c = 0.0;     // lhs / (rhs1 + rhs2 + 1)
};

struct ReverseHolderRow {
  double rho = 0.0;
  double sigma = 0.0;
  double ratio = 0.0;  // (avg_{B_rho} |Du|^((1+s)p))^(1/(1+s)) / avg_{B_2rho} |Du|^p
};

struct HigherIntegrabilityReport {
  Point center;
  double r = 0.0;
  double c_cap = 1e3;
  std::vector<SigmaRow> rows;
  double sigma0 = 0.0;
  double c_at_sigma0 = 0.0;
  std::vector<ReverseHolderRow> reverse_holder;
};

namespace detail {

inline double ball_average_power(const HalfDiskMesh& mesh, const std::vector<Vec2>& grads, const ExponentField& field,
                                 Point center, double radius, double scale) {
  const auto region = ball_samples(mesh, quadrature(5), center, radius);
  if (region.area <= 0.0) throw ResolutionError("empty half-ball");
  return region.integrate([&](Point x, std::size_t t) { return std::pow(norm(grads[t]), scale * field.eval(x)); }) /
         region.area;
}

}  // namespace detail

inline HigherIntegrabilityReport higher_integrability_scan(const FeFunction& u, const FeFunction& w,
                                                           const ExponentField& field, Point center, double r,
                                                           double r_max,
                                                           const std::vector<double>& sigma_grid = default_sigma_grid(),
                                                           double c_cap = 1e3) {
  if (!(r > 0.0) || r > r_max) throw InputError("scan radius " + fmt_real(r) + " exceeds admissible " + fmt_real(r_max));
  if (std::abs(center.y) > kGeomTol || std::abs(center.x) + 2.0 * r > 0.75 + kGeomTol)
    throw InputError("scan half-ball B_2r must lie in the 3/4 half-ball with center on the thin set");
  if (sigma_grid.empty()) throw InputError("empty sigma grid");
  for (double s : sigma_grid)
    if (!(s >= 0.0)) throw InputError("sigma grid entries must be non-negative");
  if (!(2.0 * r > 2.0 * u.mesh().h_max()))
    throw ResolutionError("scan radius below mesh resolution");
  const auto& mesh = u.mesh();
  const auto gu = element_gradients(u);
  const auto gw = element_gradients(w);
  HigherIntegrabilityReport rep;
  rep.center = center;
  rep.r = r;
  rep.c_cap = c_cap;
  const double base = detail::ball_average_power(mesh, gu, field, center, 2.0 * r, 1.0);
  bool any = false;
  for (double s : sigma_grid) {
    SigmaRow row;
    row.sigma = s;
    row.lhs = detail::ball_average_power(mesh, gu, field, center, r, 1.0 + s);
    row.rhs1 = std::pow(base, 1.0 + s);
    row.rhs2 = detail::ball_average_power(mesh, gw, field, center, 2.0 * r, 1.0 + s);
    row.c = row.lhs / (row.rhs1 + row.rhs2 + 1.0);
    rep.rows.push_back(row);
    if (row.c <= c_cap && (!any || s > rep.sigma0)) {
      rep.sigma0 = s;
      rep.c_at_sigma0 = row.c;
      any = true;
    }
  }
  for (double rho = r; rho > 2.0 * mesh.h_max(); rho *= 0.5) {
    const double den = detail::ball_average_power(mesh, gu, field, center, 2.0 * rho, 1.0);
    for (double s : sigma_grid) {
      const double num = detail::ball_average_power(mesh, gu, field, center, rho, 1.0 + s);
      rep.reverse_holder.push_back({rho, s, den > 0.0 ? std::pow(num, 1.0 / (1.0 + s)) / den : 0.0});
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient Hoelder fit

struct HolderCenterRow {
  Point center;
  double p2 = 0.0;
  CampanatoProfile profile;
};

struct HolderReport {
  std::vector<HolderCenterRow> centers;
  double min_alpha = std::numeric_limits<double>::infinity();
};

/// Geometric radii from `largest` down to `4 h_max` (inclusive of both ends
/// when the ratio divides evenly), step 2^-1/2.
inline std::vector<double> default_holder_radii(const HalfDiskMesh& mesh, double largest = 0.25) {
  std::vector<double> radii;
  const double smallest = 4.0 * mesh.h_max();
  for (double r = largest; r >= smallest * (1.0 - 1e-12); r *= std::sqrt(0.5)) radii.push_back(r);
  return radii;
}

/// Campanato profile of Du at each center, with the exponent frozen to its
/// sup over the largest half-ball; alpha = (lambda - n) / p2.
inline HolderReport gradient_holder_fit(const FeFunction& u, const ExponentField& field, std::span<const Point> centers,
                                        std::span<const double> radii) {
  if (radii.empty()) throw InputError("gradient_holder_fit needs radii");
  const auto grads = element_gradients(u);
  HolderReport rep;
  for (const Point& c : centers) {
    if (std::abs(c.y) > kGeomTol || std::abs(c.x) > 0.5 + kGeomTol)
      throw InputError("Hoelder fit centers must lie on the thin set within |x| <= 1/2");
    const double p2 = sup_inf_on_halfball(field, c, radii.front()).p2;
    auto prof = campanato_profile(
        u.mesh(), [&](Point, std::size_t t) { return grads[t]; }, p2, c, radii);
    rep.min_alpha = std::min(rep.min_alpha, prof.alpha);
    rep.centers.push_back({c, p2, std::move(prof)});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Luxemburg norm identities

struct LuxemburgCheck {
  int fields = 0;
  double worst_unit_modular = 0.0;     // max |modular(f / |f|) - 1|
  double worst_closed_form = 0.0;      // max relative gap to (int |f|^p)^(1/p), constant p
  double worst_homogeneity = 0.0;      // max relative gap |a f| vs |a| |f|
  int failures = 0;
};

/// Random nodal fields on a fixed mesh against random exponents (all four
/// families). Tolerances: 1e-10 absolute on the unit modular, 1e-9 relative
/// on the closed form and on homogeneity.
inline LuxemburgCheck luxemburg_identities(int trials, std::uint64_t seed, int level = 3) {
  auto mesh = std::make_shared<const HalfDiskMesh>(build_half_disk_mesh(level));
  LuxemburgCheck out;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(trial));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double scale = std::exp(std::log(1e-3) + u01(rng) * std::log(1e6));
    std::vector<double> vals(mesh->num_vertices());
    for (double& v : vals) v = scale * (2.0 * u01(rng) - 1.0);
    const FeFunction f(mesh, vals);
    const double c0 = 1.2 + 3.0 * u01(rng);
    ExponentField field = ExponentField::constant(c0);
    switch (trial % 4) {
      case 1: field = ExponentField(ExponentFamily::Affine, {c0, 0.1 * u01(rng), 0.1 * u01(rng)}); break;
      case 2: field = ExponentField(ExponentFamily::Radial, {c0, 0.1 * u01(rng), 0.5 + 0.5 * u01(rng)}); break;
      case 3: field = ExponentField(ExponentFamily::Sinusoidal, {c0, 0.1 * u01(rng), 1.0}); break;
      default: break;
    }
    const ModularSamples samples(*mesh, field, [&](Point x, std::size_t t) { return f.value_in(t, x); });
    const double lam = luxemburg_norm(samples);
    bool ok = true;
    const double unit = std::abs(samples.modular(lam) - 1.0);
    out.worst_unit_modular = std::max(out.worst_unit_modular, unit);
    ok = ok && unit <= 1e-10;
    if (field.is_constant()) {
      const double closed = std::pow(samples.modular(), 1.0 / c0);
      const double rel = std::abs(lam - closed) / closed;
      out.worst_closed_form = std::max(out.worst_closed_form, rel);
      ok = ok && rel <= 1e-9;
    }
    const double a = (u01(rng) < 0.5 ? -1.0 : 1.0) * std::exp(std::log(1e-2) + u01(rng) * std::log(1e4));
    const ModularSamples scaled(*mesh, field, [&](Point x, std::size_t t) { return a * f.value_in(t, x); });
    const double rel_h = std::abs(luxemburg_norm(scaled) - std::abs(a) * lam) / (std::abs(a) * lam);
    out.worst_homogeneity = std::max(out.worst_homogeneity, rel_h);
    ok = ok && rel_h <= 1e-9;
    ++out.fields;
    if (!ok) ++out.failures;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV output

inline void write_higher_integrability_csv(std::ostream& out, const HigherIntegrabilityReport& rep) {
  out << "kind,rho,sigma,lhs,rhs1,rhs2,c,ratio\n";
  for (const auto& row : rep.rows)
    out << "sigma," << fmt_real(rep.r) << "," << fmt_real(row.sigma) << "," << fmt_real(row.lhs) << ","
        << fmt_real(row.rhs1) << "," << fmt_real(row.rhs2) << "," << fmt_real(row.c) << ",\n";
  for (const auto& row : rep.reverse_holder)
    out << "reverse_holder," << fmt_real(row.rho) << "," << fmt_real(row.sigma) << ",,,,," << fmt_real(row.ratio)
        << "\n";
  out << "sigma0,," << fmt_real(rep.sigma0) << ",,,," << fmt_real(rep.c_at_sigma0) << ",\n";
}

inline void write_campanato_csv(std::ostream& out, const HolderReport& rep) {
  out << "center_x,center_y,p2,rho,integral,mean,lambda,alpha,fit_rms\n";
  for (const auto& c : rep.centers)
    for (const auto& row : c.profile.rows)
      out << fmt_real(c.center.x) << "," << fmt_real(c.center.y) << "," << fmt_real(c.p2) << "," << fmt_real(row.rho)
          << "," << fmt_real(row.integral) << "," << fmt_real(row.mean_p) << "," << fmt_real(c.profile.lambda) << ","
          << fmt_real(c.profile.alpha) << "," << fmt_real(c.profile.residual) << "\n";
}

inline void write_holder_csv(std::ostream& out, const HolderReport& rep) {
  out << "center_x,center_y,p2,lambda,alpha,fit_rms\n";
  for (const auto& c : rep.centers)
    out << fmt_real(c.center.x) << "," << fmt_real(c.center.y) << "," << fmt_real(c.p2) << ","
        << fmt_real(c.profile.lambda) << "," << fmt_real(c.profile.alpha) << "," << fmt_real(c.profile.residual)
        << "\n";
}

}  // namespace pxthin
