#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "zono/geom.hpp"
#include "zono/linalg.hpp"
#include "zono/netio.hpp"

namespace test_helpers {

using zono::Matrix;
using zono::Rng;
using zono::Vec;
using zono::Zonotope;

inline Vec rand_vec(Rng& rng, std::size_t n, double lo, double hi) {
  return rng.uniform_vec(n, lo, hi);
}

inline Matrix rand_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline Zonotope rand_zonotope(Rng& rng, std::size_t d, std::size_t m, double scale = 1.0) {
  return Zonotope(rand_vec(rng, d, -scale, scale), rand_matrix(rng, d, m, -scale, scale));
}

/// Brute-force linear minimum over all 2^m sign assignments; exact because a
/// linear objective over the y-cube is minimized at a vertex.
inline double linmin_bruteforce(const Zonotope& z, const Vec& a) {
  const std::size_t m = z.num_generators();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << m); ++bits) {
    Vec y(m);
    for (std::size_t j = 0; j < m; ++j) y[j] = (bits >> j) & 1 ? 1.0 : -1.0;
    best = std::min(best, zono::dot(a, z.point(y)));
  }
  return best;
}

/// Uniform sample from the zonotope via a random coefficient vector.
inline Vec sample_point(Rng& rng, const Zonotope& z) {
  return z.point(rand_vec(rng, z.num_generators(), -1.0, 1.0));
}

/// Pre-activation vectors z_0..z_{L} of every layer at one input.
inline std::vector<Vec> forward_trace(const zono::NetworkSpec& net, const Vec& x) {
  std::vector<Vec> out;
  Vec z = zono::add(zono::matvec(net.layers[0].weight, x), net.layers[0].bias);
  out.push_back(z);
  for (std::size_t k = 1; k < net.layers.size(); ++k) {
    z = zono::add(zono::matvec(net.layers[k].weight, zono::relu(std::move(z))), net.layers[k].bias);
    out.push_back(z);
  }
  return out;
}

inline Vec sample_box(Rng& rng, const zono::Hyperbox& box) {
  Vec x(box.dim());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(box.lo[i], box.hi[i]);
  return x;
}

}  // namespace test_helpers
