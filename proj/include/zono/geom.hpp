#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "zono/linalg.hpp"

namespace zono {

/// Axis-aligned box { x : lo <= x <= hi }.
struct Hyperbox {
  Vec lo, hi;

  Hyperbox() = default;
  Hyperbox(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw std::invalid_argument("Hyperbox: lo/hi size mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i]))
        throw std::invalid_argument("Hyperbox: lo > hi at coordinate " + std::to_string(i));
  }

  std::size_t dim() const { return lo.size(); }

  Vec center() const {
    Vec c(dim());
    for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
  }
  Vec radius() const {
    Vec r(dim());
    for (std::size_t i = 0; i < dim(); ++i) r[i] = 0.5 * (hi[i] - lo[i]);
    return r;
  }

  bool contains(const Vec& x, double tol = 0.0) const {
    for (std::size_t i = 0; i < dim(); ++i)
      if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    return true;
  }
};

inline Hyperbox select(const Hyperbox& h, const std::vector<std::size_t>& idx) {
  return Hyperbox(select(h.lo, idx), select(h.hi, idx));
}

/// Elementwise intersection.  Throws if the result is empty in some
/// coordinate (beyond roundoff both inputs should cover the same set).
inline Hyperbox intersect(const Hyperbox& a, const Hyperbox& b, double widen = 0.0) {
  if (a.dim() != b.dim()) throw std::invalid_argument("intersect: dimension mismatch");
  Vec lo(a.dim()), hi(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) {
    lo[i] = std::max(a.lo[i], b.lo[i] - widen);
    hi[i] = std::min(a.hi[i], b.hi[i] + widen);
    if (lo[i] > hi[i])
      throw std::runtime_error("intersect: empty intersection at coordinate " + std::to_string(i));
  }
  return Hyperbox(std::move(lo), std::move(hi));
}

/// Z(c, E) = { c + E y : y in [-1,1]^m }.  Columns of E are the generators;
/// m = 0 encodes a single point.
struct Zonotope {
  Vec center;
  Matrix generators;  // d x m

  Zonotope() = default;
  Zonotope(Vec c, Matrix e) : center(std::move(c)), generators(std::move(e)) {
    if (generators.rows() != center.size() && !(generators.rows() == 0 && generators.cols() == 0))
      throw std::invalid_argument("Zonotope: generator row count must equal dimension");
    if (generators.rows() == 0 && generators.cols() == 0)
      generators = Matrix(center.size(), 0);
  }

  std::size_t dim() const { return center.size(); }
  std::size_t num_generators() const { return generators.cols(); }

  /// Point of the zonotope for a given coefficient vector y in [-1,1]^m.
  Vec point(const Vec& y) const { return add(matvec(generators, y), center); }
};

/// { W z + b : z in Z } = Z(W c + b, W E).
inline Zonotope affine_image(const Zonotope& z, const Matrix& w, const Vec& b) {
  if (w.cols() != z.dim()) throw std::invalid_argument("affine_image: dimension mismatch");
  if (b.size() != w.rows()) throw std::invalid_argument("affine_image: bias length mismatch");
  return Zonotope(add(matvec(w, z.center), b), matmul(w, z.generators));
}

/// Centers add, generator columns concatenate.
inline Zonotope minkowski_sum(const Zonotope& a, const Zonotope& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("minkowski_sum: dimension mismatch");
  return Zonotope(add(a.center, b.center), hcat(a.generators, b.generators));
}

struct LinMinResult {
  double value;
  Vec argmin;
};

/// Exact linear minimization over a zonotope:
///   min_{z in Z} a.z  =  a.c - ||E^T a||_1,
/// attained at y*_j = -sign((E^T a)_j), with y*_j = +1 on zero entries so the
/// argmin is deterministic.
inline LinMinResult linmin(const Zonotope& z, const Vec& a) {
  if (a.size() != z.dim()) throw std::invalid_argument("linmin: dimension mismatch");
  const Vec eta = tmatvec(z.generators, a);
  double value = dot(a, z.center);
  Vec y(eta.size());
  for (std::size_t j = 0; j < eta.size(); ++j) {
    value -= std::abs(eta[j]);
    y[j] = eta[j] > 0.0 ? -1.0 : 1.0;
  }
  return {value, z.point(y)};
}

/// max_{z in Z} a.z = a.c + ||E^T a||_1.
inline double support(const Zonotope& z, const Vec& a) {
  const Vec eta = tmatvec(z.generators, a);
  double value = dot(a, z.center);
  for (double e : eta) value += std::abs(e);
  return value;
}

/// Smallest enclosing box: c_i +- sum_j |E_ij| per coordinate.
inline Hyperbox concretize(const Zonotope& z) {
  Vec lo(z.dim()), hi(z.dim());
  for (std::size_t i = 0; i < z.dim(); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < z.num_generators(); ++j) r += std::abs(z.generators(i, j));
    lo[i] = z.center[i] - r;
    hi[i] = z.center[i] + r;
  }
  return Hyperbox(std::move(lo), std::move(hi));
}

/// Coordinate projection: keep the selected rows of c and E.
inline Zonotope project(const Zonotope& z, const std::vector<std::size_t>& coords) {
  for (std::size_t i = 0; i < coords.size(); ++i)
    for (std::size_t j = i + 1; j < coords.size(); ++j)
      if (coords[i] == coords[j]) throw std::invalid_argument("project: duplicate index");
  return Zonotope(select(z.center, coords), select_rows(z.generators, coords));
}

/// Combines generator columns that span the same line.  Two columns merge
/// when their normalized directions agree within tol up to sign; the merged
/// column points along the canonical direction with magnitude equal to the
/// sum of the members' magnitudes, which leaves the represented set
/// unchanged.  Zero columns are dropped.
inline Zonotope merge_colinear(const Zonotope& z, double tol) {
  if (tol < 0.0) throw std::invalid_argument("merge_colinear: negative tolerance");
  const std::size_t d = z.dim();
  const std::size_t m = z.num_generators();
  std::vector<Vec> dirs;        // canonical unit vectors of groups
  std::vector<double> lengths;  // accumulated magnitudes
  for (std::size_t j = 0; j < m; ++j) {
    Vec g = z.generators.col(j);
    const double len = l2_norm(g);
    if (len == 0.0) continue;
    Vec u = scale(g, 1.0 / len);
    // canonical sign: first nonzero coordinate positive
    for (std::size_t i = 0; i < d; ++i) {
      if (u[i] != 0.0) {
        if (u[i] < 0.0) u = scale(std::move(u), -1.0);
        break;
      }
    }
    bool merged = false;
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      if (linf_norm(sub(u, dirs[k])) <= tol) {
        lengths[k] += len;
        merged = true;
        break;
      }
    }
    if (!merged) {
      dirs.push_back(std::move(u));
      lengths.push_back(len);
    }
  }
  Matrix e(d, dirs.size());
  for (std::size_t k = 0; k < dirs.size(); ++k)
    for (std::size_t i = 0; i < d; ++i) e(i, k) = dirs[k][i] * lengths[k];
  return Zonotope(z.center, std::move(e));
}

/// A box is a zonotope with a diagonal generator matrix; zero-width
/// coordinates contribute no column.
inline Zonotope box_to_zonotope(const Hyperbox& h) {
  const std::size_t d = h.dim();
  const Vec c = h.center();
  const Vec r = h.radius();
  std::vector<std::size_t> nz;
  for (std::size_t i = 0; i < d; ++i)
    if (r[i] > 0.0) nz.push_back(i);
  Matrix e(d, nz.size());
  for (std::size_t k = 0; k < nz.size(); ++k) e(nz[k], k) = r[nz[k]];
  return Zonotope(c, std::move(e));
}

/// Closed-form box LP: min_{x in h} a.x with the deterministic argmin
/// convention lo on zero coefficients.
inline LinMinResult box_linmin(const Hyperbox& h, const Vec& a) {
  if (a.size() != h.dim()) throw std::invalid_argument("box_linmin: dimension mismatch");
  double value = 0.0;
  Vec x(h.dim());
  for (std::size_t i = 0; i < h.dim(); ++i) {
    x[i] = a[i] < 0.0 ? h.hi[i] : h.lo[i];
    value += a[i] * x[i];
  }
  return {value, std::move(x)};
}

}  // namespace zono
