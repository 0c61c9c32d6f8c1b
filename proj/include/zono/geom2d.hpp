#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "zono/geom.hpp"
#include "zono/linalg.hpp"

namespace zono {

using P2 = std::array<double, 2>;

/// A 2-D zonotope in canonical form: every generator has g[0] >= 0 (g[1] > 0
/// when vertical), and no two generators span the same line.  Canonicalizing
/// at construction is what makes the vertex walk below correct without
/// general-position caveats.
struct Zono2D {
  P2 center{0.0, 0.0};
  std::vector<P2> gens;

  Zono2D() = default;

  Zono2D(P2 c, const std::vector<P2>& raw) : center(c) {
    // sign-normalize, drop zero columns, merge colinear pairs
    // (tolerance 1e-12 on the normalized cross product)
    std::vector<P2> dirs;
    std::vector<double> lens;
    for (P2 g : raw) {
      const double len = std::hypot(g[0], g[1]);
      if (len == 0.0) continue;
      P2 u{g[0] / len, g[1] / len};
      if (u[0] < 0.0 || (u[0] == 0.0 && u[1] < 0.0)) {
        u[0] = -u[0];
        u[1] = -u[1];
      }
      bool merged = false;
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        if (std::abs(u[0] * dirs[k][1] - u[1] * dirs[k][0]) <= 1e-12) {
          lens[k] += len;
          merged = true;
          break;
        }
      }
      if (!merged) {
        dirs.push_back(u);
        lens.push_back(len);
      }
    }
    gens.resize(dirs.size());
    for (std::size_t k = 0; k < dirs.size(); ++k)
      gens[k] = {dirs[k][0] * lens[k], dirs[k][1] * lens[k]};
  }

  static Zono2D from(const Zonotope& z) {
    if (z.dim() != 2) throw std::invalid_argument("Zono2D: expected dimension 2");
    std::vector<P2> raw(z.num_generators());
    for (std::size_t j = 0; j < raw.size(); ++j) raw[j] = {z.generators(0, j), z.generators(1, j)};
    return Zono2D({z.center[0], z.center[1]}, raw);
  }

  std::size_t num_generators() const { return gens.size(); }
};

enum class CandKind { Vertex, AxisCrossing, Origin, RectVertex, EdgeIntersection };

/// Candidate optima of a ReLU program over a 2-D zonotope (optionally
/// intersected with a rectangle).  `empty_intersection` marks the distinct
/// empty-feasible-set outcome of the boxed variant.
struct CandidateSet {
  std::vector<P2> points;
  std::vector<CandKind> kinds;
  bool empty_intersection = false;

  void add(const P2& p, CandKind kind, double dedup_tol = 1e-9) {
    for (const P2& q : points)
      if (std::hypot(p[0] - q[0], p[1] - q[1]) <= dedup_tol) return;
    points.push_back(p);
    kinds.push_back(kind);
  }
};

/// All 2m vertices in clockwise order (2 points for a segment, 1 for a
/// point).  The upper hull is traversed left to right by walking the
/// generators in decreasing slope order (vertical ones first) from the
/// bottom-left vertex c - sum(g); the lower hull is its reflection through
/// the center.  O(m log m) from the sort.
inline std::vector<P2> enumerate_vertices(const Zono2D& z) {
  const std::size_t m = z.num_generators();
  if (m == 0) return {z.center};
  std::vector<P2> order = z.gens;
  std::sort(order.begin(), order.end(), [](const P2& a, const P2& b) {
    const double cross = a[1] * b[0] - a[0] * b[1];  // slope(a) - slope(b), same sign
    if (cross != 0.0) return cross > 0.0;
    return a[0] * a[0] + a[1] * a[1] > b[0] * b[0] + b[1] * b[1];
  });
  P2 v{z.center[0], z.center[1]};
  for (const P2& g : order) {
    v[0] -= g[0];
    v[1] -= g[1];
  }
  std::vector<P2> upper;
  upper.reserve(m + 1);
  upper.push_back(v);
  for (const P2& g : order) {
    v[0] += 2.0 * g[0];
    v[1] += 2.0 * g[1];
    upper.push_back(v);
  }
  std::vector<P2> all = upper;  // v_0 .. v_m left to right along the top
  // lower hull by central symmetry: after v_m the boundary continues through
  // the reflections of v_1, v_2, ... (x decreasing), closing back at v_0
  for (std::size_t i = 1; i + 1 <= m; ++i)
    all.push_back({2.0 * z.center[0] - upper[i][0], 2.0 * z.center[1] - upper[i][1]});
  return all;  // 2m points, clockwise
}

/// Boundary points of the polygon with x = 0 or y = 0: vertices lying on an
/// axis plus interpolated points of strictly sign-changing edges.
inline std::vector<P2> axis_crossings(const std::vector<P2>& vertices) {
  std::vector<P2> out;
  const std::size_t n = vertices.size();
  if (n == 0) return out;
  auto push = [&out](const P2& p) {
    for (const P2& q : out)
      if (std::hypot(p[0] - q[0], p[1] - q[1]) <= 1e-9) return;
    out.push_back(p);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const P2& a = vertices[i];
    const P2& b = vertices[(i + 1) % n];
    if (a[0] == 0.0 || a[1] == 0.0) push(a);
    for (int axis = 0; axis < 2; ++axis) {
      if (a[axis] * b[axis] < 0.0) {
        const double t = a[axis] / (a[axis] - b[axis]);
        P2 p{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
        p[axis] = 0.0;
        push(p);
      }
    }
  }
  return out;
}

namespace detail {

/// Signed-area-free point-in-convex-polygon for a clockwise vertex list;
/// boundary counts as inside.  Degenerate lists (1-2 points) are handled as
/// point / segment.
inline bool polygon_contains(const std::vector<P2>& vertices, const P2& p, double tol = 1e-9) {
  const std::size_t n = vertices.size();
  if (n == 0) return false;
  if (n == 1)
    return std::hypot(p[0] - vertices[0][0], p[1] - vertices[0][1]) <= tol;
  if (n == 2) {
    const P2& a = vertices[0];
    const P2& b = vertices[1];
    const double ex = b[0] - a[0], ey = b[1] - a[1];
    const double len = std::hypot(ex, ey);
    if (len == 0.0) return std::hypot(p[0] - a[0], p[1] - a[1]) <= tol;
    const double cross = ex * (p[1] - a[1]) - ey * (p[0] - a[0]);
    if (std::abs(cross) / len > tol) return false;
    const double t = (ex * (p[0] - a[0]) + ey * (p[1] - a[1])) / (len * len);
    return t >= -tol && t <= 1.0 + tol;
  }
  // bounding-box precheck; also rules out points on the spanning line of a
  // degenerate (collinear) polygon, where the edge test alone is blind
  for (int axis = 0; axis < 2; ++axis) {
    double lo = vertices[0][axis], hi = lo;
    for (const P2& v : vertices) {
      lo = std::min(lo, v[axis]);
      hi = std::max(hi, v[axis]);
    }
    if (p[axis] < lo - tol || p[axis] > hi + tol) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const P2& a = vertices[i];
    const P2& b = vertices[(i + 1) % n];
    const double ex = b[0] - a[0], ey = b[1] - a[1];
    const double cross = ex * (p[1] - a[1]) - ey * (p[0] - a[0]);
    const double len = std::hypot(ex, ey);
    // clockwise orientation: interior is to the right of every edge
    if (cross > tol * std::max(1.0, len)) return false;
  }
  return true;
}

/// Clip a clockwise convex polygon against sign * coord(axis) <= sign * value
/// (one axis-aligned half-plane).  Interpolated points get the clipped
/// coordinate set exactly.  This is the line-shoot primitive: emitted
/// interpolations are exactly the points where polygon edges cross the line.
inline std::vector<P2> clip_halfplane(const std::vector<P2>& poly, int axis, double value,
                                      bool keep_below) {
  std::vector<P2> out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  auto inside = [&](const P2& p) {
    return keep_below ? p[axis] <= value : p[axis] >= value;
  };
  auto cross_point = [&](const P2& a, const P2& b) {
    const double t = (value - a[axis]) / (b[axis] - a[axis]);
    P2 p{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
    p[axis] = value;
    return p;
  };
  if (n == 1) {
    if (inside(poly[0])) out.push_back(poly[0]);
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const P2& a = poly[i];
    const P2& b = poly[(i + 1) % n];
    const bool ia = inside(a), ib = inside(b);
    if (ia) out.push_back(a);
    if (ia != ib && a[axis] != b[axis]) out.push_back(cross_point(a, b));
  }
  // collapse consecutive duplicates introduced by touching edges
  std::vector<P2> dedup;
  for (const P2& p : out) {
    if (!dedup.empty()) {
      const P2& q = dedup.back();
      if (std::hypot(p[0] - q[0], p[1] - q[1]) <= 1e-12) continue;
    }
    dedup.push_back(p);
  }
  while (dedup.size() > 1) {
    const P2& f = dedup.front();
    const P2& l = dedup.back();
    if (std::hypot(f[0] - l[0], f[1] - l[1]) <= 1e-12)
      dedup.pop_back();
    else
      break;
  }
  return dedup;
}

inline std::vector<P2> clip_to_rect(std::vector<P2> poly, const Hyperbox& rect) {
  poly = clip_halfplane(poly, 0, rect.lo[0], /*keep_below=*/false);
  poly = clip_halfplane(poly, 0, rect.hi[0], /*keep_below=*/true);
  poly = clip_halfplane(poly, 1, rect.lo[1], /*keep_below=*/false);
  poly = clip_halfplane(poly, 1, rect.hi[1], /*keep_below=*/true);
  return poly;
}

}  // namespace detail

/// True iff the origin lies inside or on the polygon boundary.
inline bool contains_origin(const std::vector<P2>& vertices) {
  return detail::polygon_contains(vertices, {0.0, 0.0});
}

/// Candidate optima for a ReLU program over the zonotope itself: vertices,
/// axis crossings, and the origin when contained.
inline CandidateSet relu_candidates(const Zono2D& z) {
  CandidateSet cs;
  const std::vector<P2> verts = enumerate_vertices(z);
  for (const P2& v : verts) cs.add(v, CandKind::Vertex);
  for (const P2& p : axis_crossings(verts)) cs.add(p, CandKind::AxisCrossing);
  if (contains_origin(verts)) cs.add({0.0, 0.0}, CandKind::Origin);
  return cs;
}

/// Candidate optima over zonotope-intersect-rectangle: the vertices of the
/// clipped polygon (zonotope vertices inside the rectangle, rectangle corners
/// inside the zonotope, and edge/edge intersections from the axis-aligned
/// line shoots), plus axis crossings of the clipped boundary and the origin
/// when feasible.  At most 2m + 9 candidates after deduplication.  When the
/// intersection is empty even after widening the rectangle by 1e-9 the
/// empty-set marker is returned and callers fall back to zonotope-only
/// candidates.
inline CandidateSet relu_candidates_boxed(const Zono2D& z, const Hyperbox& rect) {
  if (rect.dim() != 2) throw std::invalid_argument("relu_candidates_boxed: rect must be 2-D");
  CandidateSet cs;
  const std::vector<P2> verts = enumerate_vertices(z);
  std::vector<P2> clipped = detail::clip_to_rect(verts, rect);
  if (clipped.empty()) {
    Hyperbox widened = rect;
    for (int i = 0; i < 2; ++i) {
      widened.lo[i] -= 1e-9;
      widened.hi[i] += 1e-9;
    }
    clipped = detail::clip_to_rect(verts, widened);
    if (clipped.empty()) {
      cs.empty_intersection = true;
      return cs;
    }
  }
  auto near = [](const P2& a, const P2& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]) <= 1e-9;
  };
  const P2 corners[4] = {{rect.lo[0], rect.lo[1]},
                         {rect.lo[0], rect.hi[1]},
                         {rect.hi[0], rect.lo[1]},
                         {rect.hi[0], rect.hi[1]}};
  for (const P2& p : clipped) {
    CandKind kind = CandKind::EdgeIntersection;
    for (const P2& v : verts)
      if (near(p, v)) {
        kind = CandKind::Vertex;
        break;
      }
    if (kind == CandKind::EdgeIntersection)
      for (const P2& c : corners)
        if (near(p, c)) {
          kind = CandKind::RectVertex;
          break;
        }
    cs.add(p, kind);
  }
  for (const P2& p : axis_crossings(clipped)) cs.add(p, CandKind::AxisCrossing);
  if (detail::polygon_contains(clipped, {0.0, 0.0})) cs.add({0.0, 0.0}, CandKind::Origin);
  return cs;
}

}  // namespace zono
