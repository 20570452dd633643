#pragma once

#include <Eigen/Sparse>

#include "pxthin/vxspace.hpp"

namespace pxthin {

using SparseSymmetricMatrix = Eigen::SparseMatrix<double>;

/// Discrete variable-exponent energy
///   E(v) = sum_T sum_q w_q (1/p(x_q)) (|grad v|^2 + eps^2)^(p(x_q)/2)
/// with its gradient and a regularized second variation. p is sampled at the
/// quadrature points once, at construction.
class EnergySetup {
 public:
  EnergySetup(MeshPtr mesh, ExponentField field, double epsilon = 0.0, int quad_order = 2,
              bool even_extension = false)
      : data_(std::make_shared<Data>()), epsilon_(epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1e-2))
      throw PreconditionError("energy regularization epsilon must lie in [0, 1e-2]");
    auto& d = *data_;
    d.mesh = std::move(mesh);
    d.field = std::make_shared<ExponentField>(std::move(field));
    d.order = quad_order;
    const auto rule = quadrature(quad_order);
    const std::size_t nt = d.mesh->num_triangles();
    d.nq = rule.points.size();
    d.grads.resize(nt);
    d.w.resize(nt * d.nq);
    d.p.resize(nt * d.nq);
    for (std::size_t t = 0; t < nt; ++t) {
      d.grads[t] = d.mesh->hat_gradients(t);
      const double jac = 2.0 * d.mesh->area(t);
      for (std::size_t q = 0; q < d.nq; ++q) {
        const Point x = d.mesh->map(t, rule.points[q].x, rule.points[q].y);
        d.w[t * d.nq + q] = jac * rule.weights[q];
        d.p[t * d.nq + q] = even_extension ? d.field->eval_even(x) : d.field->eval(x);
      }
    }
  }

  /// Same mesh, exponent samples and quadrature; different epsilon.
  EnergySetup with_epsilon(double epsilon) const {
    if (!(epsilon >= 0.0 && epsilon <= 1e-2))
      throw PreconditionError("energy regularization epsilon must lie in [0, 1e-2]");
    EnergySetup s = *this;
    s.epsilon_ = epsilon;
    return s;
  }

  const HalfDiskMesh& mesh() const { return *data_->mesh; }
  const MeshPtr& mesh_ptr() const { return data_->mesh; }
  const ExponentField& field() const { return *data_->field; }
  double epsilon() const { return epsilon_; }
  int quad_order() const { return data_->order; }

  Vec2 gradient(std::span<const double> v, std::size_t t) const {
    const auto& tr = mesh().triangle(t);
    const auto& g = data_->grads[t];
    // Difference form: exactly zero on constants.
    const double v0 = v[tr[0]];
    return (v[tr[1]] - v0) * g[1] + (v[tr[2]] - v0) * g[2];
  }

  double energy(std::span<const double> v) const {
    check(v);
    const auto& d = *data_;
    std::vector<double> local(mesh().num_triangles());
    parallel_for(local.size(), [&](std::size_t t) {
      const double s = norm2(gradient(v, t)) + epsilon_ * epsilon_;
      double e = 0.0;
      for (std::size_t q = 0; q < d.nq; ++q) {
        const double p = d.p[t * d.nq + q];
        if (s > 0.0) e += d.w[t * d.nq + q] * std::pow(s, 0.5 * p) / p;
      }
      local[t] = e;
    });
    double total = 0.0;
    for (double e : local) total += e;
    return total;
  }

  /// energy(w) - energy(v), evaluated per quadrature point as
  /// b^(p/2) expm1((p/2) log1p((a-b)/b)) so that tiny changes are not lost
  /// to cancellation between two O(1) totals.
  double energy_change(std::span<const double> v, std::span<const double> w) const {
    check(v);
    check(w);
    const auto& d = *data_;
    const double e2 = epsilon_ * epsilon_;
    std::vector<double> local(mesh().num_triangles());
    parallel_for(local.size(), [&](std::size_t t) {
      const Vec2 gv = gradient(v, t);
      const Vec2 gw = gradient(w, t);
      const double b = norm2(gv) + e2;
      const double a = norm2(gw) + e2;
      const double delta = dot(gw - gv, gw + gv);
      double e = 0.0;
      for (std::size_t q = 0; q < d.nq; ++q) {
        const double p = d.p[t * d.nq + q];
        double term;
        if (b > 0.0)
          term = std::pow(b, 0.5 * p) * std::expm1(0.5 * p * std::log1p(delta / b));
        else
          term = a > 0.0 ? std::pow(a, 0.5 * p) : 0.0;
        e += d.w[t * d.nq + q] * term / p;
      }
      local[t] = e;
    });
    double total = 0.0;
    for (double e : local) total += e;
    return total;
  }

  /// r_i = int (|grad v|^2 + eps^2)^((p-2)/2) grad v . grad phi_i; the flux
  /// is taken as 0 wherever grad v = 0 and eps = 0.
  std::vector<double> residual(std::span<const double> v) const {
    check(v);
    const auto& d = *data_;
    const std::size_t nt = mesh().num_triangles();
    std::vector<std::array<double, 3>> local(nt);
    parallel_for(nt, [&](std::size_t t) {
      const Vec2 g = gradient(v, t);
      const double s = norm2(g) + epsilon_ * epsilon_;
      double coef = 0.0;
      if (s > 0.0)
        for (std::size_t q = 0; q < d.nq; ++q)
          coef += d.w[t * d.nq + q] * std::pow(s, 0.5 * (d.p[t * d.nq + q] - 2.0));
      for (int k = 0; k < 3; ++k) local[t][k] = coef * dot(g, d.grads[t][k]);
    });
    std::vector<double> r(mesh().num_vertices(), 0.0);
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& tr = mesh().triangle(t);
      for (int k = 0; k < 3; ++k) r[static_cast<std::size_t>(tr[k])] += local[t][k];
    }
    return r;
  }

  /// Tangent built from (|g|^2+eps^2)^((p-2)/2) [I + (p-2) g g^T / (|g|^2+eps^2)];
  /// symmetric positive definite for eps > 0.
  SparseSymmetricMatrix hessian(std::span<const double> v) const {
    check(v);
    if (!(epsilon_ > 0.0)) throw PreconditionError("hessian requires epsilon > 0");
    const auto& d = *data_;
    const std::size_t nt = mesh().num_triangles();
    std::vector<std::array<double, 6>> local(nt);  // upper triangle of the 3x3 block
    parallel_for(nt, [&](std::size_t t) {
      const Vec2 g = gradient(v, t);
      const double s = norm2(g) + epsilon_ * epsilon_;
      double kxx = 0, kxy = 0, kyy = 0;
      for (std::size_t q = 0; q < d.nq; ++q) {
        const double p = d.p[t * d.nq + q];
        const double a = d.w[t * d.nq + q] * std::pow(s, 0.5 * (p - 2.0));
        const double b = a * (p - 2.0) / s;
        kxx += a + b * g.x * g.x;
        kxy += b * g.x * g.y;
        kyy += a + b * g.y * g.y;
      }
      const auto& G = d.grads[t];
      int m = 0;
      for (int k = 0; k < 3; ++k)
        for (int l = k; l < 3; ++l) {
          local[t][m++] = G[k].x * (kxx * G[l].x + kxy * G[l].y) + G[k].y * (kxy * G[l].x + kyy * G[l].y);
        }
    });
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(nt * 9);
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& tr = mesh().triangle(t);
      int m = 0;
      for (int k = 0; k < 3; ++k)
        for (int l = k; l < 3; ++l) {
          const double val = local[t][m++];
          trip.emplace_back(tr[k], tr[l], val);
          if (l != k) trip.emplace_back(tr[l], tr[k], val);
        }
    }
    const auto n = static_cast<Eigen::Index>(mesh().num_vertices());
    SparseSymmetricMatrix h(n, n);
    h.setFromTriplets(trip.begin(), trip.end());
    return h;
  }

  double energy(const FeFunction& v) const { return energy(std::span<const double>(v.values())); }
  std::vector<double> residual(const FeFunction& v) const { return residual(std::span<const double>(v.values())); }
  SparseSymmetricMatrix hessian(const FeFunction& v) const { return hessian(std::span<const double>(v.values())); }

 private:
  struct Data {
    MeshPtr mesh;
    std::shared_ptr<const ExponentField> field;
    int order = 2;
    std::size_t nq = 0;
    std::vector<std::array<Vec2, 3>> grads;
    std::vector<double> w;  // quadrature weight times Jacobian
    std::vector<double> p;  // exponent at the quadrature point
  };

  void check(std::span<const double> v) const {
    if (v.size() != mesh().num_vertices())
      throw PreconditionError("field does not live on the energy's mesh");
  }

  std::shared_ptr<Data> data_;
  double epsilon_ = 0.0;
};

}  // namespace pxthin
