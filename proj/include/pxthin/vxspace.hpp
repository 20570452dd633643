#pragma once

#include <memory>
#include <span>

#include "pxthin/exponent.hpp"
#include "pxthin/mesh.hpp"

namespace pxthin {

using MeshPtr = std::shared_ptr<const HalfDiskMesh>;

/// Continuous piecewise-linear field: one value per mesh vertex.
class FeFunction {
 public:
  FeFunction() = default;
  FeFunction(MeshPtr mesh, std::vector<double> values) : mesh_(std::move(mesh)), values_(std::move(values)) {
    if (!mesh_) throw PreconditionError("FeFunction needs a mesh");
    if (values_.size() != mesh_->num_vertices())
      throw PreconditionError("FeFunction: value count differs from vertex count");
    for (double v : values_)
      if (!std::isfinite(v)) throw NumericError("FeFunction: non-finite nodal value");
  }

  static FeFunction zero(MeshPtr mesh) {
    const std::size_t n = mesh->num_vertices();
    return FeFunction(std::move(mesh), std::vector<double>(n, 0.0));
  }

  template <class F>
  static FeFunction interpolate(MeshPtr mesh, F&& f) {
    std::vector<double> vals;
    vals.reserve(mesh->num_vertices());
    for (const Point& p : mesh->vertices()) vals.push_back(f(p));
    return FeFunction(std::move(mesh), std::move(vals));
  }

  const HalfDiskMesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  Vec2 gradient(std::size_t t) const {
    const auto g = mesh_->hat_gradients(t);
    const auto& tr = mesh_->triangle(t);
    const double v0 = values_[static_cast<std::size_t>(tr[0])];
    return (values_[static_cast<std::size_t>(tr[1])] - v0) * g[1] + (values_[static_cast<std::size_t>(tr[2])] - v0) * g[2];
  }

  /// Value at x, which must lie in element t.
  double value_in(std::size_t t, Point x) const {
    const auto& tr = mesh_->triangle(t);
    const Point a = mesh_->vertex(tr[0]);
    return values_[static_cast<std::size_t>(tr[0])] + dot(gradient(t), x - a);
  }

  /// Restriction to a submesh through its vertex map.
  FeFunction restrict_to(const Submesh& sub, MeshPtr sub_mesh) const {
    std::vector<double> vals;
    vals.reserve(sub.parent_vertex.size());
    for (int pv : sub.parent_vertex) vals.push_back(values_[static_cast<std::size_t>(pv)]);
    return FeFunction(std::move(sub_mesh), std::move(vals));
  }

 private:
  MeshPtr mesh_;
  std::vector<double> values_;
};

inline std::vector<Vec2> element_gradients(const FeFunction& f) {
  std::vector<Vec2> g(f.mesh().num_triangles());
  for (std::size_t t = 0; t < g.size(); ++t) g[t] = f.gradient(t);
  return g;
}

/// Nodal sup-norm of a - b (same mesh).
inline double max_abs_diff(const FeFunction& a, const FeFunction& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------
// Modular and Luxemburg norm

/// Quadrature samples (weight, |f|, p) frozen once so that the modular of
/// f / lambda can be re-evaluated cheaply.
class ModularSamples {
 public:
  template <class Magnitude>
  ModularSamples(const HalfDiskMesh& mesh, const ExponentField& field, Magnitude&& magnitude,
                 int order = 5) {
    const auto rule = quadrature(order);
    const std::size_t nq = rule.points.size();
    w_.reserve(mesh.num_triangles() * nq);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const double jac = 2.0 * mesh.area(t);
      for (std::size_t q = 0; q < nq; ++q) {
        const Point x = mesh.map(t, rule.points[q].x, rule.points[q].y);
        w_.push_back(jac * rule.weights[q]);
        mag_.push_back(std::abs(magnitude(x, t)));
        p_.push_back(field.eval(x));
      }
    }
    gamma1_ = field.gamma1();
  }

  /// int |f / lambda|^((1 + sigma) p(x)) dx
  double modular(double lambda = 1.0, double sigma = 0.0) const {
    double s = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      if (mag_[i] == 0.0) continue;
      s += w_[i] * std::pow(mag_[i] / lambda, (1.0 + sigma) * p_[i]);
    }
    return s;
  }

  double gamma1() const { return gamma1_; }

 private:
  std::vector<double> w_, mag_, p_;
  double gamma1_ = 1.0;
};

inline double modular(const FeFunction& f, const ExponentField& field, double sigma = 0.0) {
  if (sigma < 0.0) throw PreconditionError("modular: sigma must be >= 0");
  return ModularSamples(f.mesh(), field, [&](Point x, std::size_t t) { return f.value_in(t, x); })
      .modular(1.0, sigma);
}

inline double gradient_modular(const FeFunction& f, const ExponentField& field, double sigma = 0.0) {
  if (sigma < 0.0) throw PreconditionError("modular: sigma must be >= 0");
  const auto g = element_gradients(f);
  return ModularSamples(f.mesh(), field, [&](Point, std::size_t t) { return norm(g[t]); })
      .modular(1.0, sigma);
}

/// Luxemburg norm: the lambda with modular(f / lambda) = 1, by bisection on
/// the modular residual (tolerance 1e-10).
inline double luxemburg_norm(const ModularSamples& s) {
  const double m = s.modular();
  if (m == 0.0) return 0.0;
  const double base = std::max(m, 1.0);
  double lo = std::pow(base, -1.0 / s.gamma1());
  double hi = std::pow(base, 1.0 / s.gamma1());
  int doublings = 0;
  while (s.modular(lo) < 1.0) {
    lo *= 0.5;
    if (++doublings > 200) throw NumericError("luxemburg_norm: bracket expansion failed");
  }
  while (s.modular(hi) > 1.0) {
    hi *= 2.0;
    if (++doublings > 200) throw NumericError("luxemburg_norm: bracket expansion failed");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 2000; ++it) {
    mid = 0.5 * (lo + hi);
    if (!(lo < mid && mid < hi)) break;  // interval exhausted at machine precision
    const double r = s.modular(mid) - 1.0;
    if (std::abs(r) <= 1e-10) return mid;
    if (r > 0.0) lo = mid;
    else hi = mid;
  }
  return mid;
}

inline double luxemburg_norm(const FeFunction& f, const ExponentField& field) {
  return luxemburg_norm(
      ModularSamples(f.mesh(), field, [&](Point x, std::size_t t) { return f.value_in(t, x); }));
}

inline double gradient_luxemburg_norm(const FeFunction& f, const ExponentField& field) {
  const auto g = element_gradients(f);
  return luxemburg_norm(ModularSamples(f.mesh(), field, [&](Point, std::size_t t) { return norm(g[t]); }));
}

// ---------------------------------------------------------------------------
// Campanato profiles

struct CampanatoRow {
  double rho = 0.0;
  double integral = 0.0;   // int_{B_rho cap domain} |f - (f)|^p
  double mean_p = 0.0;     // the same, averaged over the region
};

struct CampanatoProfile {
  Point center;
  double p = 2.0;
  std::vector<CampanatoRow> rows;
  double lambda = 0.0;   // +inf when the oscillation vanishes
  double alpha = 0.0;    // (lambda - 2) / p
  double residual = 0.0; // rms of the log-log fit
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

/// Least-squares line through (x_i, y_i), with intercept.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw InputError("line fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ss += e * e;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

/// Mean-oscillation integrals I(rho) of a (up to 2-component) field over
/// B_rho(center) cap domain and the log-log fit I ~ rho^lambda. The Hoelder
/// exponent follows from lambda = n + p alpha with n = 2.
template <class Field>
CampanatoProfile campanato_profile(const HalfDiskMesh& mesh, Field&& f, double p, Point center,
                                   std::span<const double> radii, int order = 5) {
  if (radii.size() < 2) throw InputError("campanato_profile needs at least two radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 2.0 * mesh.h_max()))
      throw ResolutionError("Campanato radius " + fmt_real(radii[i]) + " not above 2 h_max");
    if (i > 0 && !(radii[i] < radii[i - 1]))
      throw InputError("Campanato radii must be strictly decreasing");
  }
  const auto rule = quadrature(order);
  CampanatoProfile prof;
  prof.center = center;
  prof.p = p;
  std::vector<double> lx, ly;
  for (double rho : radii) {
    const auto region = ball_samples(mesh, rule, center, rho);
    if (region.elements < 3)
      throw ResolutionError("Campanato region of radius " + fmt_real(rho) +
                            " has fewer than 3 elements");
    std::vector<Vec2> vals;
    vals.reserve(region.samples.size());
    Vec2 mean{0.0, 0.0};
    for (const auto& q : region.samples) {
      vals.push_back(f(q.x, q.element));
      mean = mean + q.weight * vals.back();
    }
    mean = (1.0 / region.area) * mean;
    double osc = 0.0, size = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      osc += region.samples[i].weight * std::pow(norm(vals[i] - mean), p);
      size += region.samples[i].weight * std::pow(norm(vals[i]), p);
    }
    prof.rows.push_back({rho, osc, osc / region.area});
    // Oscillation at rounding level counts as zero.
    if (osc > 1e-20 * std::max(1.0, size)) {
      lx.push_back(std::log(rho));
      ly.push_back(std::log(osc));
    }
  }
  if (lx.size() < 2) {
    prof.lambda = prof.alpha = std::numeric_limits<double>::infinity();
    prof.residual = 0.0;
    return prof;
  }
  const auto fit = fit_line(lx, ly);
  prof.lambda = fit.slope;
  prof.alpha = (fit.slope - 2.0) / p;
  prof.residual = fit.rms;
  return prof;
}

/// inf over constant vectors xi of int_{B_rho cap domain} |f - xi|^p, by
/// damped Newton on the convex objective, started from the mean.
template <class Field>
double campanato_inf_integral(const HalfDiskMesh& mesh, Field&& f, double p, Point center,
                              double rho, int order = 5) {
  const auto region = ball_samples(mesh, quadrature(order), center, rho);
  std::vector<Vec2> vals;
  Vec2 xi{0.0, 0.0};
  for (const auto& q : region.samples) {
    vals.push_back(f(q.x, q.element));
    xi = xi + q.weight * vals.back();
  }
  if (region.area == 0.0) return 0.0;
  xi = (1.0 / region.area) * xi;
  auto objective = [&](Vec2 c) {
    double s = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i)
      s += region.samples[i].weight * std::pow(norm(vals[i] - c), p);
    return s;
  };
  double best = objective(xi);
  for (int it = 0; it < 200; ++it) {
    Vec2 grad{0, 0};
    double hxx = 0, hxy = 0, hyy = 0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const Vec2 d = vals[i] - xi;
      const double s2 = norm2(d) + 1e-24;
      const double w = region.samples[i].weight * p * std::pow(s2, 0.5 * p - 1.0);
      grad = grad - w * d;
      const double k = (p - 2.0) / s2;
      hxx += w * (1.0 + k * d.x * d.x);
      hxy += w * k * d.x * d.y;
      hyy += w * (1.0 + k * d.y * d.y);
    }
    const double det = hxx * hyy - hxy * hxy;
    if (!(det > 0.0)) break;
    Vec2 step{-(hyy * grad.x - hxy * grad.y) / det, -(hxx * grad.y - hxy * grad.x) / det};
    bool moved = false;
    for (int h = 0; h < 50; ++h) {
      const double val = objective(xi + step);
      if (val < best) {
        best = val;
        xi = xi + step;
        moved = true;
        break;
      }
      step = 0.5 * step;
    }
    if (!moved) break;
  }
  return best;
}

/// Ratio of the two sides of the Sobolev-Poincare inequality on
/// B_radius(center) cap domain, n = 2:
///   avg (|f - (f)| / r)^p   over   ( avg |Df|^(2p / (2 + gamma1)) )^((2 + gamma1) / 2)
inline double sobolev_poincare_ratio(const FeFunction& f, double p, double gamma1, Point center,
                                     double radius) {
  const auto region = ball_samples(f.mesh(), quadrature(5), center, radius);
  if (region.area == 0.0) throw ResolutionError("Sobolev-Poincare region is empty");
  const double mean = region.integrate([&](Point x, std::size_t t) { return f.value_in(t, x); }) / region.area;
  const double lhs = region.integrate([&](Point x, std::size_t t) {
                       return std::pow(std::abs(f.value_in(t, x) - mean) / radius, p);
                     }) / region.area;
  const double q = 2.0 * p / (2.0 + gamma1);
  const double rhs_avg =
      region.integrate([&](Point, std::size_t t) { return std::pow(norm(f.gradient(t)), q); }) /
      region.area;
  const double rhs = std::pow(rhs_avg, (2.0 + gamma1) / 2.0);
  const double scale = std::pow(std::abs(mean) / radius + 1.0, p);
  const bool lhs_zero = lhs <= 1e-24 * scale;
  if (rhs == 0.0) {
    if (lhs_zero) return 0.0;
    throw NumericError("Sobolev-Poincare violation: gradient vanishes but oscillation does not");
  }
  return lhs_zero ? 0.0 : lhs / rhs;
}

}  // namespace pxthin
