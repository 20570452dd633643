#pragma once

#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "pxthin/core.hpp"

namespace pxthin {

enum class VertexTag : std::uint8_t { Interior, Arc, Thin };

inline char tag_char(VertexTag t) {
  switch (t) {
    case VertexTag::Interior: return 'i';
    case VertexTag::Arc: return 'a';
    case VertexTag::Thin: return 't';
  }
  return '?';
}

using Triangle = std::array<int, 3>;

/// Conforming triangulation of (a subset of) the half-disk with per-vertex
/// boundary tags. Immutable once built. Arc vertices carry Dirichlet data,
/// Thin vertices carry the obstacle constraint.
class HalfDiskMesh {
 public:
  HalfDiskMesh() = default;

  /// `half_disk` enables the containment invariants; mirrored full-disk
  /// meshes switch it off.
  HalfDiskMesh(std::vector<Point> vertices, std::vector<Triangle> triangles,
               std::vector<VertexTag> tags, bool half_disk = true)
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)), tags_(std::move(tags)) {
    if (tags_.size() != vertices_.size())
      throw PreconditionError("mesh: tag count differs from vertex count");
    const int nv = static_cast<int>(vertices_.size());
    if (half_disk)
      for (const Point& p : vertices_)
        if (p.y < -kGeomTol || norm(p) > 1.0 + kGeomTol)
          throw DomainError("mesh vertex outside the closed half-disk");
    areas_.reserve(triangles_.size());
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      for (int v : triangles_[t])
        if (v < 0 || v >= nv) throw PreconditionError("mesh: triangle index out of range");
      const double a = signed_area(t);
      if (!(a > 0.0))
        throw DomainError("mesh: triangle " + std::to_string(t) + " has non-positive area");
      areas_.push_back(a);
      for (int k = 0; k < 3; ++k)
        h_max_ = std::max(h_max_, norm(vertex(triangles_[t][k]) - vertex(triangles_[t][(k + 1) % 3])));
    }
  }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }
  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<VertexTag>& tags() const { return tags_; }
  Point vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }
  VertexTag tag(int i) const { return tags_[static_cast<std::size_t>(i)]; }
  const Triangle& triangle(std::size_t t) const { return triangles_[t]; }
  double area(std::size_t t) const { return areas_[t]; }
  double h_max() const { return h_max_; }

  double total_area() const {
    double s = 0.0;
    for (double a : areas_) s += a;
    return s;
  }

  double signed_area(std::size_t t) const {
    const auto& tr = triangles_[t];
    return 0.5 * cross(vertex(tr[1]) - vertex(tr[0]), vertex(tr[2]) - vertex(tr[0]));
  }

  /// Gradients of the three barycentric hat functions (constant per element).
  std::array<Vec2, 3> hat_gradients(std::size_t t) const {
    const auto& tr = triangles_[t];
    const Point a = vertex(tr[0]), b = vertex(tr[1]), c = vertex(tr[2]);
    const double twice = 2.0 * areas_[t];
    return {Vec2{(b.y - c.y) / twice, (c.x - b.x) / twice},
            Vec2{(c.y - a.y) / twice, (a.x - c.x) / twice},
            Vec2{(a.y - b.y) / twice, (b.x - a.x) / twice}};
  }

  /// Maps reference coordinates (xi, eta) of element t to physical space.
  Point map(std::size_t t, double xi, double eta) const {
    const auto& tr = triangles_[t];
    const Point a = vertex(tr[0]);
    return a + xi * (vertex(tr[1]) - a) + eta * (vertex(tr[2]) - a);
  }

  /// Text serialization: `m nv nt`, `v x y tag` lines, `t i j k` lines.
  std::string to_text() const {
    std::ostringstream os;
    os << "m " << vertices_.size() << ' ' << triangles_.size() << '\n';
    for (std::size_t i = 0; i < vertices_.size(); ++i)
      os << "v " << fmt_real(vertices_[i].x) << ' ' << fmt_real(vertices_[i].y) << ' '
         << tag_char(tags_[i]) << '\n';
    for (const auto& t : triangles_) os << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    return os.str();
  }

  std::string content_hash() const { return hex64(fnv1a64(to_text())); }

  static HalfDiskMesh from_text(std::istream& in) {
    std::string kw;
    std::size_t nv = 0, nt = 0;
    if (!(in >> kw >> nv >> nt) || kw != "m") throw InputError("mesh file: missing 'm' header");
    std::vector<Point> verts(nv);
    std::vector<VertexTag> tags(nv);
    for (std::size_t i = 0; i < nv; ++i) {
      char tg = 0;
      if (!(in >> kw >> verts[i].x >> verts[i].y >> tg) || kw != "v")
        throw InputError("mesh file: bad vertex line " + std::to_string(i));
      if (tg == 'i') tags[i] = VertexTag::Interior;
      else if (tg == 'a') tags[i] = VertexTag::Arc;
      else if (tg == 't') tags[i] = VertexTag::Thin;
      else throw InputError("mesh file: bad vertex tag");
    }
    std::vector<Triangle> tris(nt);
    for (std::size_t i = 0; i < nt; ++i)
      if (!(in >> kw >> tris[i][0] >> tris[i][1] >> tris[i][2]) || kw != "t")
        throw InputError("mesh file: bad triangle line " + std::to_string(i));
    return HalfDiskMesh(std::move(verts), std::move(tris), std::move(tags));
  }

 private:
  std::vector<Point> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<VertexTag> tags_;
  std::vector<double> areas_;
  double h_max_ = 0.0;
};

/// Tagging rule of the full half-disk: Arc iff |x| = 1, Thin iff x2 = 0 and
/// not Arc (so the corners (+-1, 0) are Arc).
inline VertexTag classify_half_disk_vertex(Point p) {
  if (std::abs(norm(p) - 1.0) <= kGeomTol) return VertexTag::Arc;
  if (std::abs(p.y) <= kGeomTol) return VertexTag::Thin;
  return VertexTag::Interior;
}

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

inline bool on_thin_line(Point p) { return std::abs(p.y) <= kGeomTol; }

// Midpoint of a boundary edge, pushed onto the unit circle unless the edge
// lies on the thin set.
inline Point boundary_midpoint(Point a, Point b, bool boundary) {
  Point m = 0.5 * (a + b);
  if (boundary && !(on_thin_line(a) && on_thin_line(b))) {
    const double r = norm(m);
    m = (1.0 / r) * m;
  }
  return m;
}

inline std::unordered_map<std::uint64_t, int> edge_use_count(const std::vector<Triangle>& tris) {
  std::unordered_map<std::uint64_t, int> cnt;
  cnt.reserve(tris.size() * 2);
  for (const auto& t : tris)
    for (int k = 0; k < 3; ++k) ++cnt[edge_key(t[k], t[(k + 1) % 3])];
  return cnt;
}

inline void red_refine(std::vector<Point>& verts, std::vector<Triangle>& tris) {
  const auto uses = edge_use_count(tris);
  std::unordered_map<std::uint64_t, int> mid;
  mid.reserve(uses.size());
  auto midpoint = [&](int a, int b) {
    const auto key = edge_key(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const bool boundary = uses.at(key) == 1;
    verts.push_back(boundary_midpoint(verts[a], verts[b], boundary));
    const int id = static_cast<int>(verts.size()) - 1;
    mid.emplace(key, id);
    return id;
  };
  std::vector<Triangle> out;
  out.reserve(tris.size() * 4);
  for (const auto& t : tris) {
    const int ab = midpoint(t[0], t[1]);
    const int bc = midpoint(t[1], t[2]);
    const int ca = midpoint(t[2], t[0]);
    out.push_back({t[0], ab, ca});
    out.push_back({ab, t[1], bc});
    out.push_back({ca, bc, t[2]});
    out.push_back({ab, bc, ca});
  }
  tris = std::move(out);
}

// Longest-edge (Rivara) bisection with conforming closure.
class Bisector {
 public:
  Bisector(std::vector<Point>& verts, std::vector<Triangle>& tris) : v_(verts), t_(tris) {
    version_.assign(t_.size(), 0);
    for (std::size_t i = 0; i < t_.size(); ++i) link(static_cast<int>(i));
  }

  std::uint32_t version(int t) const { return version_[static_cast<std::size_t>(t)]; }

  void refine(int t) {
    for (int guard = 0; guard < 1000000; ++guard) {
      const int k = longest_local_edge(t);
      const int a = t_[t][k], b = t_[t][(k + 1) % 3];
      const int n = neighbour(t, a, b);
      if (n >= 0) {
        const int kn = longest_local_edge(n);
        const int na = t_[n][kn], nb = t_[n][(kn + 1) % 3];
        if (edge_key(na, nb) != edge_key(a, b)) {
          refine(n);
          continue;
        }
      }
      const auto key = edge_key(a, b);
      const Point m = boundary_midpoint(v_[a], v_[b], n < 0);
      v_.push_back(m);
      const int mid = static_cast<int>(v_.size()) - 1;
      split(t, a, b, mid, key);
      if (n >= 0) split(n, a, b, mid, key);
      return;
    }
    throw NumericError("mesh bisection failed to terminate");
  }

 private:
  double len2(int a, int b) const { return norm2(v_[a] - v_[b]); }

  int longest_local_edge(int t) const {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      const double lk = len2(t_[t][k], t_[t][(k + 1) % 3]);
      const double lb = len2(t_[t][best], t_[t][(best + 1) % 3]);
      const auto kk = edge_key(t_[t][k], t_[t][(k + 1) % 3]);
      const auto kb = edge_key(t_[t][best], t_[t][(best + 1) % 3]);
      if (lk > lb || (lk == lb && kk < kb)) best = k;
    }
    return best;
  }

  int neighbour(int t, int a, int b) const {
    const auto& owners = edges_.at(edge_key(a, b));
    for (int o : owners)
      if (o >= 0 && o != t) return o;
    return -1;
  }

  void link(int t) {
    for (int k = 0; k < 3; ++k) {
      auto& owners = edges_.try_emplace(edge_key(t_[t][k], t_[t][(k + 1) % 3]), std::array<int, 2>{-1, -1})
                         .first->second;
      if (owners[0] < 0) owners[0] = t;
      else owners[1] = t;
    }
  }

  void unlink(int t) {
    for (int k = 0; k < 3; ++k) {
      const auto key = edge_key(t_[t][k], t_[t][(k + 1) % 3]);
      auto& owners = edges_.at(key);
      if (owners[0] == t) owners[0] = owners[1], owners[1] = -1;
      else if (owners[1] == t) owners[1] = -1;
      if (owners[0] < 0) edges_.erase(key);
    }
  }

  // Splits triangle t across its edge (a, b) at vertex mid, keeping ccw order.
  void split(int t, int a, int b, int mid, std::uint64_t) {
    Triangle tr = t_[t];
    while (!((tr[0] == a && tr[1] == b) || (tr[0] == b && tr[1] == a)))
      tr = {tr[1], tr[2], tr[0]};
    const int p = tr[0], q = tr[1], c = tr[2];
    unlink(t);
    t_[t] = {p, mid, c};
    ++version_[static_cast<std::size_t>(t)];
    link(t);
    t_.push_back({mid, q, c});
    version_.push_back(0);
    link(static_cast<int>(t_.size()) - 1);
  }

  std::vector<Point>& v_;
  std::vector<Triangle>& t_;
  std::vector<std::uint32_t> version_;
  std::unordered_map<std::uint64_t, std::array<int, 2>> edges_;
};

}  // namespace detail

/// Half-disk mesh: 4-triangle fan, `level` red refinements with arc
/// projection, then round(grading) passes of bisection of every element
/// touching the thin set.
inline HalfDiskMesh build_half_disk_mesh(int level, double grading = 0.0) {
  if (level < 0) throw PreconditionError("mesh level must be non-negative");
  if (!(grading >= 0.0)) throw PreconditionError("mesh grading must be >= 0");
  const int passes = static_cast<int>(std::lround(grading));
  // V = 1 + (T + B)/2 with T = 4^(L+1), B = 6 * 2^L; bisection passes at
  // most double the count each.
  const double tris = std::pow(4.0, level + 1);
  const double nodes = (1.0 + 0.5 * (tris + 6.0 * std::pow(2.0, level))) * std::pow(2.0, passes);
  if (level > 10 || nodes > 1e7)
    throw ResourceError("mesh level " + std::to_string(level) + " exceeds the node budget");

  const double s = std::sqrt(0.5);
  std::vector<Point> verts{{0, 0}, {1, 0}, {s, s}, {0, 1}, {-s, s}, {-1, 0}};
  std::vector<Triangle> tris_v{{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 5}};
  for (int l = 0; l < level; ++l) detail::red_refine(verts, tris_v);

  for (int pass = 0; pass < passes; ++pass) {
    detail::Bisector bis(verts, tris_v);
    std::vector<std::pair<int, std::uint32_t>> marked;
    for (std::size_t t = 0; t < tris_v.size(); ++t) {
      const auto& tr = tris_v[t];
      if (detail::on_thin_line(verts[tr[0]]) || detail::on_thin_line(verts[tr[1]]) ||
          detail::on_thin_line(verts[tr[2]]))
        marked.emplace_back(static_cast<int>(t), 0u);
    }
    for (auto [t, ver] : marked)
      if (bis.version(t) == ver) bis.refine(t);
  }

  std::vector<VertexTag> tags;
  tags.reserve(verts.size());
  for (const Point& p : verts) tags.push_back(classify_half_disk_vertex(p));
  return HalfDiskMesh(std::move(verts), std::move(tris_v), std::move(tags));
}

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureRule {
  int order = 2;
  std::vector<Point> points;    // reference coordinates (xi, eta)
  std::vector<double> weights;  // sum to 1/2, the reference area
};

inline QuadratureRule quadrature(int order) {
  QuadratureRule q;
  q.order = order;
  if (order == 2) {
    q.points = {{1.0 / 6, 1.0 / 6}, {2.0 / 3, 1.0 / 6}, {1.0 / 6, 2.0 / 3}};
    q.weights = {1.0 / 6, 1.0 / 6, 1.0 / 6};
  } else if (order == 5) {
    const double r15 = std::sqrt(15.0);
    const double a = (6.0 - r15) / 21.0, b = (6.0 + r15) / 21.0;
    const double wa = (155.0 - r15) / 2400.0, wb = (155.0 + r15) / 2400.0;
    q.points = {{1.0 / 3, 1.0 / 3}, {a, a}, {1 - 2 * a, a}, {a, 1 - 2 * a},
                {b, b}, {1 - 2 * b, b}, {b, 1 - 2 * b}};
    q.weights = {9.0 / 80, wa, wa, wa, wb, wb, wb};
  } else {
    throw PreconditionError("quadrature order must be 2 or 5");
  }
  return q;
}

/// Sum over elements, in element order, of the mapped rule applied to
/// integrand(x, element).
template <class Integrand>
double integrate(const HalfDiskMesh& mesh, const QuadratureRule& rule, Integrand&& f) {
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double jac = 2.0 * mesh.area(t);
    double local = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double v = f(mesh.map(t, rule.points[q].x, rule.points[q].y), t);
      if (!std::isfinite(v))
        throw NumericError("non-finite integrand on element " + std::to_string(t));
      local += rule.weights[q] * v;
    }
    total += jac * local;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Integration over B_radius(center) intersected with the mesh

struct BallIntegral {
  double value = 0.0;
  double area = 0.0;
  std::size_t elements = 0;  // elements meeting the ball
};

/// Weighted quadrature sample of a clipped region.
struct BallSample {
  Point x;
  std::size_t element = 0;
  double weight = 0.0;
};

struct BallSamples {
  std::vector<BallSample> samples;
  double area = 0.0;
  std::size_t elements = 0;

  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (const auto& q : samples) s += q.weight * f(q.x, q.element);
    return s;
  }
};

namespace detail {

inline double point_segment_distance(Point p, Point a, Point b) {
  const Vec2 ab = b - a;
  const double t = std::clamp(dot(p - a, ab) / norm2(ab), 0.0, 1.0);
  return norm(p - (a + t * ab));
}

inline double point_triangle_distance(Point p, Point a, Point b, Point c) {
  const double d1 = cross(b - a, p - a), d2 = cross(c - b, p - b), d3 = cross(a - c, p - c);
  if (d1 >= 0 && d2 >= 0 && d3 >= 0) return 0.0;
  return std::min({point_segment_distance(p, a, b), point_segment_distance(p, b, c),
                   point_segment_distance(p, c, a)});
}

inline void clip_samples(const QuadratureRule& rule, Point center, double r, Point a, Point b,
                         Point c, std::size_t elem, int depth, std::vector<BallSample>& out) {
  const double ra = norm(a - center), rb = norm(b - center), rc = norm(c - center);
  const double jac = std::abs(cross(b - a, c - a));
  const bool inside = ra <= r && rb <= r && rc <= r;
  if (!inside && point_triangle_distance(center, a, b, c) > r) return;
  if (inside || depth == 0) {
    // At leaves of cut elements only quadrature points inside the ball count.
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Point x = a + rule.points[q].x * (b - a) + rule.points[q].y * (c - a);
      if (inside || norm(x - center) <= r) out.push_back({x, elem, jac * rule.weights[q]});
    }
    return;
  }
  const Point ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  clip_samples(rule, center, r, a, ab, ca, elem, depth - 1, out);
  clip_samples(rule, center, r, ab, b, bc, elem, depth - 1, out);
  clip_samples(rule, center, r, ca, bc, c, elem, depth - 1, out);
  clip_samples(rule, center, r, ab, bc, ca, elem, depth - 1, out);
}

}  // namespace detail

/// Quadrature samples for B_radius(center) intersected with the meshed
/// domain. Cut elements are recursively subdivided `depth` times.
inline BallSamples ball_samples(const HalfDiskMesh& mesh, const QuadratureRule& rule, Point center,
                                double radius, int depth = 4) {
  BallSamples out;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tr = mesh.triangle(t);
    const std::size_t before = out.samples.size();
    detail::clip_samples(rule, center, radius, mesh.vertex(tr[0]), mesh.vertex(tr[1]),
                         mesh.vertex(tr[2]), t, depth, out.samples);
    if (out.samples.size() > before) ++out.elements;
  }
  for (const auto& q : out.samples) out.area += q.weight;
  return out;
}

template <class Integrand>
BallIntegral integrate_ball(const HalfDiskMesh& mesh, const QuadratureRule& rule, Point center,
                            double radius, Integrand&& f, int depth = 4) {
  const auto s = ball_samples(mesh, rule, center, radius, depth);
  BallIntegral out{s.integrate(f), s.area, s.elements};
  if (!std::isfinite(out.value)) throw NumericError("non-finite integrand in ball integral");
  return out;
}

// ---------------------------------------------------------------------------
// Half-ball submeshes

struct Submesh {
  HalfDiskMesh mesh;
  std::vector<int> parent_vertex;    // submesh vertex -> parent vertex
  std::vector<int> parent_triangle;  // submesh triangle -> parent triangle
};

/// Triangles whose three vertices lie in the closed ball of `radius` about
/// `center`. Retagging: boundary vertices off the thin line are Arc
/// (Dirichlet); vertices on the thin line are Thin except where the curved
/// part of the submesh boundary meets the thin line (those corners are Arc,
/// mirroring the full mesh).
inline Submesh extract_halfball_submesh(const HalfDiskMesh& mesh, Point center, double radius) {
  if (std::abs(center.y) > kGeomTol || std::abs(center.x) > 0.5 + kGeomTol)
    throw PreconditionError("submesh center must lie on T_{1/2}");
  if (!(radius > 2.0 * mesh.h_max()))
    throw ResolutionError("submesh radius " + fmt_real(radius) + " not above 2 h_max = " +
                          fmt_real(2.0 * mesh.h_max()));
  const double rr = radius + kGeomTol;
  Submesh sub;
  std::vector<int> local(mesh.num_vertices(), -1);
  std::vector<Triangle> tris;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tr = mesh.triangle(t);
    if (norm(mesh.vertex(tr[0]) - center) <= rr && norm(mesh.vertex(tr[1]) - center) <= rr &&
        norm(mesh.vertex(tr[2]) - center) <= rr) {
      Triangle lt;
      for (int k = 0; k < 3; ++k) {
        int& id = local[static_cast<std::size_t>(tr[k])];
        if (id < 0) {
          id = static_cast<int>(sub.parent_vertex.size());
          sub.parent_vertex.push_back(tr[k]);
        }
        lt[k] = id;
      }
      tris.push_back(lt);
      sub.parent_triangle.push_back(static_cast<int>(t));
    }
  }
  if (tris.size() < 10)
    throw ResolutionError("half-ball submesh has only " + std::to_string(tris.size()) +
                          " triangles");
  std::vector<Point> verts;
  verts.reserve(sub.parent_vertex.size());
  for (int pv : sub.parent_vertex) verts.push_back(mesh.vertex(pv));

  const auto uses = detail::edge_use_count(tris);
  std::vector<bool> boundary(verts.size(), false), curved_end(verts.size(), false);
  for (const auto& t : tris)
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if (uses.at(detail::edge_key(a, b)) != 1) continue;
      boundary[a] = boundary[b] = true;
      const bool ta = detail::on_thin_line(verts[a]), tb = detail::on_thin_line(verts[b]);
      if (ta != tb) curved_end[ta ? a : b] = true;
    }
  std::vector<VertexTag> tags(verts.size(), VertexTag::Interior);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    if (detail::on_thin_line(verts[i])) tags[i] = curved_end[i] ? VertexTag::Arc : VertexTag::Thin;
    else if (boundary[i]) tags[i] = VertexTag::Arc;
  }
  sub.mesh = HalfDiskMesh(std::move(verts), std::move(tris), std::move(tags));
  return sub;
}

/// Mirror image across x2 = 0, glued along the thin line into a full-disk
/// mesh (the two arc corners are not glued). Returns the disk mesh and, for each disk vertex, the half-disk
/// vertex it came from together with the reflection sign.
struct MirroredMesh {
  HalfDiskMesh mesh;
  std::vector<int> source;     // half-disk vertex index
  std::vector<int> sign;       // +1 original, -1 mirrored
};

inline MirroredMesh mirror_mesh(const HalfDiskMesh& half) {
  MirroredMesh out;
  const int nv = static_cast<int>(half.num_vertices());
  std::vector<Point> verts(half.vertices());
  std::vector<int> image(static_cast<std::size_t>(nv));
  out.source.resize(static_cast<std::size_t>(nv));
  out.sign.assign(static_cast<std::size_t>(nv), 1);
  for (int i = 0; i < nv; ++i) out.source[i] = i;
  for (int i = 0; i < nv; ++i) {
    const Point p = half.vertex(i);
    // Thin-line vertices are shared by both halves, except the arc corners:
    // data there jumps between arc and thin values, so each half keeps its
    // own copy and the odd extension stays single-valued per element.
    if (detail::on_thin_line(p) && half.tag(i) != VertexTag::Arc) {
      image[i] = i;
    } else {
      verts.push_back({p.x, -p.y});
      image[i] = static_cast<int>(verts.size()) - 1;
      out.source.push_back(i);
      out.sign.push_back(-1);
    }
  }
  std::vector<Triangle> tris(half.triangles());
  for (const auto& t : half.triangles()) tris.push_back({image[t[0]], image[t[2]], image[t[1]]});
  std::vector<VertexTag> tags;
  tags.reserve(verts.size());
  for (const Point& p : verts)
    tags.push_back(std::abs(norm(p) - 1.0) <= kGeomTol ? VertexTag::Arc : VertexTag::Interior);
  out.mesh = HalfDiskMesh(std::move(verts), std::move(tris), std::move(tags), false);
  return out;
}

}  // namespace pxthin
