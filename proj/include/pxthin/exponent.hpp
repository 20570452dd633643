#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pxthin/core.hpp"

namespace pxthin {

// Variable exponent p(.) over the closed unit half-disk. Only closed
// parametric families are supported so that bounds and Hoelder data can be
// computed or checked rather than trusted.
//
//   Constant    {c0}              p = c0
//   Affine      {c0, c1, c2}      p = c0 + c1 x + c2 y
//   Radial      {c0, c1, c2=1}    p = c0 + c1 |x|^c2,        c2 in (0, 1]
//   Sinusoidal  {c0, c1, c2=1}    p = c0 + c1 sin(c2 pi x),  c2 > 0
enum class ExponentFamily { Constant, Affine, Radial, Sinusoidal };

inline std::string to_string(ExponentFamily f) {
  switch (f) {
    case ExponentFamily::Constant: return "constant";
    case ExponentFamily::Affine: return "affine";
    case ExponentFamily::Radial: return "radial";
    case ExponentFamily::Sinusoidal: return "sinusoidal";
  }
  return "?";
}

inline ExponentFamily parse_family(const std::string& name) {
  if (name == "constant") return ExponentFamily::Constant;
  if (name == "affine") return ExponentFamily::Affine;
  if (name == "radial") return ExponentFamily::Radial;
  if (name == "sinusoidal") return ExponentFamily::Sinusoidal;
  throw InputError("unknown exponent family '" + name + "'");
}

inline bool in_closed_half_disk(Point x, double tol = kGeomTol) {
  return x.y >= -tol && norm(x) <= 1.0 + tol;
}

struct ExponentRange {
  double p1 = 0.0;  // inf
  double p2 = 0.0;  // sup
};

class ExponentField {
 public:
  /// Builds a field; Hoelder data defaults to the family's natural exponent
  /// and an analytic seminorm bound. A declared seminorm is cross-checked
  /// against 10^4 random difference quotients.
  ExponentField(ExponentFamily family, std::vector<double> coeffs,
                std::optional<double> beta = std::nullopt,
                std::optional<double> holder_seminorm = std::nullopt)
      : family_(family), c_(normalize(family, std::move(coeffs))) {
    compute_bounds();
    if (!(gamma1_ > 1.0))
      throw DomainError("exponent lower bound gamma1 = " + fmt_real(gamma1_) +
                        " must exceed 1");
    beta_ = beta.value_or(family_ == ExponentFamily::Radial ? c_[2] : 1.0);
    if (!(beta_ > 0.0 && beta_ <= 1.0))
      throw DomainError("Hoelder exponent beta must lie in (0, 1]");
    const double analytic = analytic_seminorm(beta_);
    if (holder_seminorm) {
      if (*holder_seminorm < 0.0)
        throw DomainError("declared Hoelder seminorm must be non-negative");
      seminorm_ = *holder_seminorm;
      const double est = random_pair_quotient(beta_, 10000, 20231);
      if (est > seminorm_ + 1e-10)
        throw DomainError("declared Hoelder seminorm " + fmt_real(seminorm_) +
                          " is below the sampled quotient " + fmt_real(est));
    } else {
      seminorm_ = analytic;
    }
  }

  static ExponentField constant(double p) {
    return ExponentField(ExponentFamily::Constant, {p});
  }

  ExponentFamily family() const { return family_; }
  std::span<const double> coefficients() const { return c_; }
  double gamma1() const { return gamma1_; }
  double gamma2() const { return gamma2_; }
  double beta() const { return beta_; }
  double holder_seminorm() const { return seminorm_; }
  bool is_constant() const { return gamma1_ == gamma2_; }

  double eval(Point x) const {
    if (!in_closed_half_disk(x))
      throw DomainError("exponent evaluated outside the closed half-disk at (" +
                        fmt_real(x.x) + ", " + fmt_real(x.y) + ")");
    return raw(x);
  }

  /// Even extension across the thin set: p~(x1, -x2) = p(x1, x2).
  double eval_even(Point x) const { return eval({x.x, std::abs(x.y)}); }

  /// Formula value without the domain check (for quadrature points that may
  /// sit a rounding error outside the polygonal domain).
  double raw(Point x) const {
    switch (family_) {
      case ExponentFamily::Constant: return c_[0];
      case ExponentFamily::Affine: return c_[0] + c_[1] * x.x + c_[2] * x.y;
      case ExponentFamily::Radial:
        return c_[0] + c_[1] * std::pow(norm(x), c_[2]);
      case ExponentFamily::Sinusoidal:
        return c_[0] + c_[1] * std::sin(c_[2] * kPi * x.x);
    }
    return c_[0];
  }

  /// Max of |p(x)-p(y)| / |x-y|^beta over random pairs in the half-disk.
  /// Half the pairs are short-range so Lipschitz-type suprema are reached.
  double random_pair_quotient(double beta, int pairs, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    auto draw = [&] {
      const double r = std::sqrt(uni(rng));
      const double t = kPi * uni(rng);
      return Point{r * std::cos(t), r * std::sin(t)};
    };
    double best = 0.0;
    for (int k = 0; k < pairs; ++k) {
      const Point a = draw();
      Point b;
      if (k % 2 == 0) {
        b = draw();
      } else {
        const double d = std::pow(10.0, -1.0 - 4.0 * uni(rng));
        const double t = 2.0 * kPi * uni(rng);
        b = {a.x + d * std::cos(t), a.y + d * std::sin(t)};
        if (!in_closed_half_disk(b, 0.0)) continue;
      }
      const double dist = norm(a - b);
      if (dist <= 0.0) continue;
      best = std::max(best, std::abs(raw(a) - raw(b)) / std::pow(dist, beta));
    }
    return best;
  }

 private:
  static std::vector<double> normalize(ExponentFamily f, std::vector<double> c) {
    if (c.empty()) throw DomainError("exponent family needs at least one coefficient");
    const std::size_t want = f == ExponentFamily::Constant ? 1 : 3;
    if (c.size() > want)
      throw DomainError(to_string(f) + " family takes at most " +
                        std::to_string(want) + " coefficients");
    const double fill = (f == ExponentFamily::Radial || f == ExponentFamily::Sinusoidal) ? 1.0 : 0.0;
    while (c.size() < want) c.push_back(c.size() == 2 ? fill : 0.0);
    for (double v : c)
      if (!std::isfinite(v)) throw DomainError("non-finite exponent coefficient");
    if (f == ExponentFamily::Radial && !(c[2] > 0.0 && c[2] <= 1.0))
      throw DomainError("radial family needs power c2 in (0, 1]");
    if (f == ExponentFamily::Sinusoidal && !(c[2] > 0.0))
      throw DomainError("sinusoidal family needs frequency c2 > 0");
    return c;
  }

  void compute_bounds() {
    switch (family_) {
      case ExponentFamily::Constant:
        gamma1_ = gamma2_ = c_[0];
        break;
      case ExponentFamily::Affine: {
        // Linear form over the half-disk: max a.x = |a| if a points upward,
        // otherwise |a_x| (attained at a corner).
        auto sup_linear = [](double ax, double ay) {
          return ay >= 0.0 ? std::hypot(ax, ay) : std::abs(ax);
        };
        gamma2_ = c_[0] + sup_linear(c_[1], c_[2]);
        gamma1_ = c_[0] - sup_linear(-c_[1], -c_[2]);
        break;
      }
      case ExponentFamily::Radial:
        gamma1_ = c_[0] + std::min(0.0, c_[1]);
        gamma2_ = c_[0] + std::max(0.0, c_[1]);
        break;
      case ExponentFamily::Sinusoidal: {
        const double arg = c_[2] * kPi;
        const double s = arg >= kPi / 2 ? 1.0 : std::sin(arg);
        gamma1_ = c_[0] - std::abs(c_[1]) * s;
        gamma2_ = c_[0] + std::abs(c_[1]) * s;
        break;
      }
    }
  }

  double analytic_seminorm(double beta) const {
    const double osc = gamma2_ - gamma1_;
    if (osc == 0.0) return 0.0;
    if (family_ == ExponentFamily::Radial) {
      if (beta > c_[2] + 1e-15)
        throw DomainError("radial exponent is only Hoelder of order c2");
      // ||x|^a - |y|^a| <= |x-y|^a <= 2^(a-beta) |x-y|^beta on a set of diameter 2
      return std::abs(c_[1]) * std::pow(2.0, c_[2] - beta);
    }
    double lip = 0.0;
    if (family_ == ExponentFamily::Affine) lip = std::hypot(c_[1], c_[2]);
    if (family_ == ExponentFamily::Sinusoidal) lip = std::abs(c_[1]) * c_[2] * kPi;
    // |p(x)-p(y)| <= min(L d, osc) <= L^beta osc^(1-beta) d^beta
    return std::pow(lip, beta) * std::pow(osc, 1.0 - beta);
  }

  ExponentFamily family_;
  std::vector<double> c_;
  double gamma1_ = 0.0;
  double gamma2_ = 0.0;
  double beta_ = 1.0;
  double seminorm_ = 0.0;
};

/// Lower bound for [p]_beta: max difference quotient over all grid pairs at
/// dyadic offsets on a samples x samples lattice covering the half-disk.
inline double estimate_holder_seminorm(const ExponentField& field, double beta,
                                       int samples) {
  if (samples < 2) throw PreconditionError("estimate_holder_seminorm needs samples >= 2");
  if (!(beta > 0.0 && beta <= 1.0)) throw PreconditionError("beta must lie in (0, 1]");
  const int nx = samples;
  const double h = 2.0 / (nx - 1);
  const int ny = static_cast<int>(std::floor(1.0 / h + 1e-12)) + 1;
  std::vector<double> val(static_cast<std::size_t>(nx) * ny,
                          std::numeric_limits<double>::quiet_NaN());
  auto at = [&](int i, int j) -> double& { return val[static_cast<std::size_t>(j) * nx + i]; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Point x{-1.0 + i * h, j * h};
      if (in_closed_half_disk(x)) at(i, j) = field.raw(x);
    }
  double best = 0.0;
  for (int s = 1; s < nx; s *= 2) {
    const std::array<std::pair<int, int>, 4> offs{{{s, 0}, {0, s}, {s, s}, {s, -s}}};
    for (auto [di, dj] : offs) {
      const double dist = h * std::hypot(di, dj);
      const double scale = std::pow(dist, beta);
      for (int j = 0; j < ny; ++j) {
        const int j2 = j + dj;
        if (j2 < 0 || j2 >= ny) continue;
        for (int i = 0; i + di < nx; ++i) {
          const double a = at(i, j);
          const double b = at(i + di, j2);
          if (std::isnan(a) || std::isnan(b)) continue;
          best = std::max(best, std::abs(a - b) / scale);
        }
      }
    }
  }
  return best;
}

namespace detail {

// Parameter interval along the ray c + t (cos th, sin th) that stays inside
// the ball of radius `radius` about c and inside the closed unit disk.
inline bool ray_interval(Point c, double radius, double th, double& lo, double& hi) {
  const double ct = std::cos(th);
  const double b = c.x * ct + c.y * std::sin(th);
  const double disc = b * b - (norm2(c) - 1.0);
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  lo = std::max(0.0, -b - sq);
  hi = std::min(radius, -b + sq);
  return lo <= hi;
}

}  // namespace detail

/// (inf, sup) of p over B_radius(center) intersected with the half-disk.
/// Dense polar sampling (n x n) followed by a local zoom around the sampled
/// extremes; non-degenerate ranges are widened by a 1e-6 pad and clipped to
/// [gamma1, gamma2].
inline ExponentRange sup_inf_on_halfball(const ExponentField& field, Point center,
                                         double radius, int n = 64) {
  if (!(radius > 0.0)) throw DomainError("half-ball radius must be positive");
  if (std::abs(center.y) > kGeomTol) throw DomainError("half-ball center must lie on the thin set");
  if (field.is_constant()) {
    if (std::abs(center.x) >= 1.0 + radius) throw DomainError("half-ball misses the domain");
    return {field.gamma1(), field.gamma2()};
  }
  auto sample = [&](double s, double th, bool& ok) {
    double lo, hi;
    ok = detail::ray_interval(center, radius, th, lo, hi);
    if (!ok) return 0.0;
    return field.raw(center + (lo + s * (hi - lo)) * Point{std::cos(th), std::sin(th)});
  };
  bool any = false;
  double pmin = std::numeric_limits<double>::infinity(), pmax = -pmin;
  double smin = 0, tmin = 0, smax = 0, tmax = 0;
  for (int j = 0; j < n; ++j) {
    const double th = kPi * j / (n - 1);
    for (int i = 0; i < n; ++i) {
      const double s = static_cast<double>(i) / (n - 1);
      bool ok;
      const double v = sample(s, th, ok);
      if (!ok) break;
      any = true;
      if (v < pmin) { pmin = v; smin = s; tmin = th; }
      if (v > pmax) { pmax = v; smax = s; tmax = th; }
    }
  }
  if (!any) throw DomainError("half-ball does not intersect the half-disk");

  auto zoom = [&](double& s0, double& t0, double& best, double sign) {
    double ws = 1.0 / (n - 1), wt = kPi / (n - 1);
    for (int round = 0; round < 40; ++round) {
      double bs = s0, bt = t0;
      for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b) {
          const double s = std::clamp(s0 + 0.5 * a * ws, 0.0, 1.0);
          const double th = std::clamp(t0 + 0.5 * b * wt, 0.0, kPi);
          bool ok;
          const double v = sample(s, th, ok);
          if (ok && sign * v > sign * best) { best = v; bs = s; bt = th; }
        }
      s0 = bs;
      t0 = bt;
      ws *= 0.5;
      wt *= 0.5;
    }
  };
  zoom(smin, tmin, pmin, -1.0);
  zoom(smax, tmax, pmax, +1.0);
  constexpr double pad = 1e-6;
  return {std::max(field.gamma1(), pmin - pad), std::min(field.gamma2(), pmax + pad)};
}

}  // namespace pxthin
