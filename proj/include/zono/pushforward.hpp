#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "zono/geom.hpp"
#include "zono/netio.hpp"

namespace zono {

/// Sound enclosure of one layer's pre-activation vector: the zonotope, a box
/// (concretization intersected with any externally supplied box -- the two
/// sources can be incomparable), and the ReLU scale factors the pushforward
/// out of this layer used.
struct LayerBounds {
  Zonotope pre_zono;
  Hyperbox pre_box;
  Vec lambdas;
};

namespace detail {

struct ReluLin {
  double lambda;
  double offset;  // half-height of the error band; 0 for stable coordinates
};

/// Coordinatewise linearization of the ReLU over [l, u]: scale lambda plus a
/// centered error band of half-height offset, chosen so that
/// sigma(z) in lambda*z + offset +- offset for all z in [l, u].
inline ReluLin relu_linearize(double l, double u) {
  if (u <= 0.0) return {0.0, 0.0};
  if (l > 0.0) return {1.0, 0.0};
  if (u * l >= 0.0) return {1.0, 0.0};  // l == 0: identity on [0, u]
  const double lambda = u / (u - l);
  return {lambda, -l * u / (2.0 * (u - l))};
}

inline std::pair<Zonotope, Vec> relu_pushforward_impl(const Zonotope& z, const Hyperbox& box) {
  const std::size_t d = z.dim();
  Vec lambdas(d);
  Vec offsets(d);
  std::vector<std::size_t> fresh;  // coordinates needing a new error column
  for (std::size_t i = 0; i < d; ++i) {
    const ReluLin lin = relu_linearize(box.lo[i], box.hi[i]);
    lambdas[i] = lin.lambda;
    offsets[i] = lin.offset;
    if (lin.offset != 0.0) fresh.push_back(i);
  }
  Vec c(d);
  for (std::size_t i = 0; i < d; ++i) c[i] = lambdas[i] * z.center[i] + offsets[i];
  // Scaled copies of the old columns (zero columns dropped), then one fresh
  // diagonal error column per unstable coordinate.
  std::vector<std::size_t> live;
  for (std::size_t j = 0; j < z.num_generators(); ++j) {
    bool nonzero = false;
    for (std::size_t i = 0; i < d && !nonzero; ++i) nonzero = lambdas[i] * z.generators(i, j) != 0.0;
    if (nonzero) live.push_back(j);
  }
  Matrix e(d, live.size() + fresh.size());
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < live.size(); ++j) e(i, j) = lambdas[i] * z.generators(i, live[j]);
  for (std::size_t k = 0; k < fresh.size(); ++k)
    e(fresh[k], live.size() + k) = offsets[fresh[k]];
  return {Zonotope(std::move(c), std::move(e)), std::move(lambdas)};
}

}  // namespace detail

/// Sound ReLU pushforward from the zonotope's own coordinate intervals.
/// Returns the output zonotope and the per-coordinate scale factors.
inline std::pair<Zonotope, Vec> relu_pushforward_deepz(const Zonotope& z) {
  return detail::relu_pushforward_impl(z, concretize(z));
}

/// Same construction over the intersected intervals
/// [max(l_z, l_h), min(u_z, u_h)], sound for every x in z with x in h.
/// Throws when some intersected interval is empty even after widening h by
/// 1e-9, which signals inconsistent bounds upstream.
inline std::pair<Zonotope, Vec> relu_pushforward_boxed(const Zonotope& z, const Hyperbox& h) {
  if (h.dim() != z.dim()) throw std::invalid_argument("relu_pushforward_boxed: dimension mismatch");
  return detail::relu_pushforward_impl(z, intersect(concretize(z), h, 1e-9));
}

/// Interval bound propagation: per-layer pre-activation boxes via interval
/// arithmetic on the affine layers and clamping at the ReLUs.
inline std::vector<Hyperbox> ibp_propagate(const NetworkSpec& net, const Hyperbox& input) {
  if (input.dim() != net.input_dim) throw std::invalid_argument("ibp_propagate: input dim mismatch");
  std::vector<Hyperbox> boxes;
  Vec c = input.center(), r = input.radius();
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const Matrix& w = net.layers[k].weight;
    Vec cc = add(matvec(w, c), net.layers[k].bias);
    Vec rr(w.rows(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i)
      for (std::size_t j = 0; j < w.cols(); ++j) rr[i] += std::abs(w(i, j)) * r[j];
    Vec lo(w.rows()), hi(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) {
      lo[i] = cc[i] - rr[i];
      hi[i] = cc[i] + rr[i];
    }
    boxes.emplace_back(lo, hi);
    // ReLU before the next affine layer
    for (std::size_t i = 0; i < lo.size(); ++i) {
      lo[i] = std::max(lo[i], 0.0);
      hi[i] = std::max(hi[i], 0.0);
    }
    c.assign(lo.size(), 0.0);
    r.assign(lo.size(), 0.0);
    for (std::size_t i = 0; i < lo.size(); ++i) {
      c[i] = 0.5 * (lo[i] + hi[i]);
      r[i] = 0.5 * (hi[i] - lo[i]);
    }
  }
  return boxes;
}

/// Full intermediate-bound pipeline: propagates a zonotope through every
/// layer, applying the (optionally box-improved) ReLU pushforward between
/// affine layers.  Returns one LayerBounds per layer output, the last entry
/// being the network output itself.
inline std::vector<LayerBounds> zono_propagate(
    const NetworkSpec& net, const Hyperbox& input,
    const std::optional<std::vector<Hyperbox>>& aux_boxes = std::nullopt) {
  if (input.dim() != net.input_dim) throw std::invalid_argument("zono_propagate: input dim mismatch");
  if (aux_boxes && aux_boxes->size() != net.num_layers())
    throw std::invalid_argument("zono_propagate: aux box count != layer count");
  std::vector<LayerBounds> out;
  out.reserve(net.num_layers());
  Zonotope z = affine_image(box_to_zonotope(input), net.layers[0].weight, net.layers[0].bias);
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    Hyperbox box = concretize(z);
    if (aux_boxes) {
      if ((*aux_boxes)[k].dim() != z.dim())
        throw std::invalid_argument("zono_propagate: aux box " + std::to_string(k) + " width mismatch");
      box = intersect(box, (*aux_boxes)[k], 1e-9);
    }
    auto [pushed, lambdas] = detail::relu_pushforward_impl(z, box);
    out.push_back(LayerBounds{z, std::move(box), std::move(lambdas)});
    if (k + 1 < net.num_layers())
      z = affine_image(pushed, net.layers[k + 1].weight, net.layers[k + 1].bias);
  }
  return out;
}

}  // namespace zono
