#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "zono/linalg.hpp"
#include "zono/netio.hpp"

namespace zono {

/// Seeded Kaiming-uniform-style random network: weights U(+-sqrt(6/fan_in)),
/// biases U(+-1/sqrt(fan_in)).  Input dimension defaults to 2 so exhaustive
/// grid oracles stay cheap.  Each layer gets a feature shape so spatial and
/// depthwise partitioning are exercisable on fixtures.
inline NetworkSpec make_fixture_net(std::uint64_t seed,
                                    const std::vector<std::size_t>& widths = {8, 8},
                                    std::size_t input_dim = 2) {
  Rng rng(seed * 0x9e3779b97f4a7c15ull + 0x5bf03635ull);
  NetworkSpec net;
  net.input_dim = input_dim;
  std::size_t fan_in = input_dim;
  std::vector<std::size_t> all = widths;
  all.push_back(1);  // scalar output
  for (std::size_t w : all) {
    const double wb = std::sqrt(6.0 / static_cast<double>(fan_in));
    const double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
    LayerSpec layer;
    layer.weight = Matrix(w, fan_in);
    for (std::size_t i = 0; i < w; ++i)
      for (std::size_t j = 0; j < fan_in; ++j) layer.weight(i, j) = rng.uniform(-wb, wb);
    layer.bias = rng.uniform_vec(w, -bb, bb);
    layer.feature_shape = w % 2 == 0 ? std::array<std::size_t, 3>{2, 1, w / 2}
                                     : std::array<std::size_t, 3>{1, 1, w};
    net.layers.push_back(std::move(layer));
    fan_in = w;
  }
  validate(net);
  return net;
}

/// Matching random verification problem: a center near the origin, an
/// l-infinity radius in [0.05, 0.5], no clipping, unit scalar objective.
inline ProblemSpec make_fixture_problem(std::uint64_t seed, const NetworkSpec& net) {
  Rng rng(seed * 0xd1342543de82ef95ull + 0x2545f491ull);
  ProblemSpec p;
  p.input_center = rng.uniform_vec(net.input_dim, -0.5, 0.5);
  p.epsilon = rng.uniform(0.05, 0.5);
  p.objective.assign(net.output_dim(), 0.0);
  p.objective[0] = 1.0;
  if (net.output_dim() > 1) p.objective[1] = -1.0;
  return p;
}

}  // namespace zono
