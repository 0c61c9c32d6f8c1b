#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zono/dual.hpp"
#include "zono/geom.hpp"
#include "zono/linalg.hpp"
#include "zono/netio.hpp"
#include "zono/parallel.hpp"
#include "zono/partition.hpp"
#include "zono/pushforward.hpp"
#include "zono/reluprog.hpp"

namespace zono {

enum class PartitionStrategy { Singleton, PairsRandom, PairsSimilarity, PairsSpatial, PairsDepthwise };

inline const char* to_string(PartitionStrategy s) {
  switch (s) {
    case PartitionStrategy::Singleton: return "singleton";
    case PartitionStrategy::PairsRandom: return "random";
    case PartitionStrategy::PairsSimilarity: return "similarity";
    case PartitionStrategy::PairsSpatial: return "spatial";
    case PartitionStrategy::PairsDepthwise: return "depthwise";
  }
  return "?";
}

inline PartitionStrategy partition_strategy_from_string(const std::string& s) {
  if (s == "singleton") return PartitionStrategy::Singleton;
  if (s == "random") return PartitionStrategy::PairsRandom;
  if (s == "similarity") return PartitionStrategy::PairsSimilarity;
  if (s == "spatial") return PartitionStrategy::PairsSpatial;
  if (s == "depthwise") return PartitionStrategy::PairsDepthwise;
  throw ValidationError("unknown partition strategy: " + s);
}

struct VerifyConfig {
  PartitionStrategy partition_strategy = PartitionStrategy::PairsSimilarity;
  AdamConfig adam;
  /// (sub-layer index, target dimension) merges applied in the evaluation
  /// phase; empty means re-evaluate under the iteration-phase partition.
  std::vector<std::pair<std::size_t, std::size_t>> merge_layers;
  SolveBudget mip_budget;
  bool use_ibp_boxes = true;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

inline nlohmann::json config_to_json(const VerifyConfig& cfg) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& [layer, dim] : cfg.merge_layers) merges.push_back({layer, dim});
  return nlohmann::json{{"partition", to_string(cfg.partition_strategy)},
                        {"iters", cfg.adam.iters},
                        {"lr", cfg.adam.lr0},
                        {"lr_decay", cfg.adam.decay_factor},
                        {"decay_every", cfg.adam.decay_every},
                        {"beta1", cfg.adam.beta1},
                        {"beta2", cfg.adam.beta2},
                        {"merge_layers", merges},
                        {"mip_nodes", cfg.mip_budget.max_patterns},
                        {"mip_time_s", cfg.mip_budget.time_limit_s},
                        {"use_ibp_boxes", cfg.use_ibp_boxes},
                        {"seed", cfg.seed},
                        {"threads", cfg.threads}};
}

/// Per-neuron tightening pass configuration.  The final output bound is
/// computed with the caller's main config.
struct StagewiseConfig {
  VerifyConfig per_neuron;                 // reduced budgets
  std::optional<std::vector<std::size_t>> layers;  // default: 1..L-1
  bool reuse_boxes = true;                 // re-propagate between stages
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ull + (k << 17) + (k >> 3));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  return x;
}

inline std::vector<Partition> make_partitions(PartitionStrategy strategy, const NetworkSpec& net,
                                              const std::vector<LayerBounds>& bounds,
                                              std::uint64_t seed) {
  std::vector<Partition> parts;
  const std::size_t sub_layers = net.num_layers() - 1;
  parts.reserve(sub_layers);
  for (std::size_t k = 0; k < sub_layers; ++k) {
    const std::size_t d = bounds[k].pre_zono.dim();
    switch (strategy) {
      case PartitionStrategy::Singleton:
        parts.push_back(singletons(d));
        break;
      case PartitionStrategy::PairsRandom:
        parts.push_back(pairs_random(d, mix_seed(seed, k)));
        break;
      case PartitionStrategy::PairsSimilarity:
        parts.push_back(pairs_similarity(bounds[k].pre_zono.generators));
        break;
      case PartitionStrategy::PairsSpatial:
      case PartitionStrategy::PairsDepthwise: {
        const auto& shape = net.layers[k].feature_shape;
        if (!shape)
          throw ValidationError("layer " + std::to_string(k) +
                                " has no feature_shape; spatial/depthwise partitioning needs one");
        parts.push_back(strategy == PartitionStrategy::PairsSpatial ? pairs_spatial(*shape, d)
                                                                    : pairs_depthwise(*shape, d));
        break;
      }
    }
  }
  return parts;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Everything a caller (or test) may want to inspect after a run; the
/// ReportSpec is the serializable subset.
struct VerifyOutcome {
  ReportSpec report;
  DualState best_rho;
  std::vector<LayerBounds> bounds;
  std::vector<Partition> partitions;
  double deepz_output_bound = 0.0;
};

/// Core three-phase run on an already folded scalar network with explicit
/// auxiliary boxes.  Phase 1 propagates bounds and scores the KW / zero dual
/// initializations; phase 2 runs Adam ascent over the 2-D (or singleton)
/// partition; phase 3 re-evaluates the best iterate (and rho = 0) under the
/// merged partition.  Bounds are tracked best-so-far, so the reported chain
/// is nondecreasing and remains sound even if a later phase fails.
inline VerifyOutcome verify_core(const NetworkSpec& folded, const Hyperbox& input_box,
                                 const std::optional<std::vector<Hyperbox>>& aux_boxes,
                                 const VerifyConfig& cfg) {
  VerifyOutcome out;
  const auto t0 = std::chrono::steady_clock::now();

  // Phase 1: intermediate bounds + dual initialization.
  out.bounds = zono_propagate(folded, input_box, aux_boxes);
  out.deepz_output_bound = out.bounds.back().pre_box.lo[0];
  out.partitions = detail::make_partitions(cfg.partition_strategy, folded, out.bounds, cfg.seed);
  DualSolverConfig solver{cfg.mip_budget, cfg.threads};
  DualContext ctx(folded, input_box, out.bounds, out.partitions, solver);
  const DualState rho_kw = init_rho_kw(folded, out.bounds);
  const DualState rho_zero = init_rho_zero(folded);
  const double g_kw = ctx.eval(rho_kw).value;
  const double g_zero = ctx.eval(rho_zero).value;
  out.best_rho = g_kw >= g_zero ? rho_kw : rho_zero;
  double best = std::max(g_kw, g_zero);
  out.report.bound_init = best;
  out.report.phase_times_s[0] = detail::seconds_since(t0);

  // Phase 2: dual ascent with best-iterate tracking.
  const auto t1 = std::chrono::steady_clock::now();
  try {
    const AscendResult asc = ascend(ctx, out.best_rho, cfg.adam);
    if (asc.best_value > best) {
      best = asc.best_value;
      out.best_rho = asc.best_rho;
    }
  } catch (const std::exception&) {
    // keep the phase-1 bound
  }
  out.report.bound_iter = best;
  out.report.phase_times_s[1] = detail::seconds_since(t1);

  // Phase 3: coarser partition, evaluated once at the best iterate and at
  // rho = 0 (the latter secures the primal-dominance guarantee even when
  // ascent wandered off).
  const auto t2 = std::chrono::steady_clock::now();
  try {
    std::vector<Partition> merged = out.partitions;
    for (const auto& [layer, dim] : cfg.merge_layers) {
      if (layer >= merged.size())
        throw ValidationError("merge layer index " + std::to_string(layer) + " out of range");
      const std::size_t target = std::min<std::size_t>(dim, merged[layer].dim());
      std::size_t largest = 0;
      for (const auto& g : merged[layer].groups) largest = std::max(largest, g.size());
      merged[layer] = merge_groups(merged[layer], std::max(target, largest));
    }
    DualContext merged_ctx(folded, input_box, out.bounds, merged, solver);
    best = std::max(best, merged_ctx.eval(out.best_rho).value);
    best = std::max(best, merged_ctx.eval(rho_zero).value);
  } catch (const std::exception&) {
    // keep the phase-2 bound
  }
  out.report.bound_eval = best;
  out.report.phase_times_s[2] = detail::seconds_since(t2);

  // soundness self-check: sampled network values must respect the bound
  out.report.valid = std::isfinite(out.report.bound_eval) &&
                     out.report.bound_init <= out.report.bound_iter + 1e-9 &&
                     out.report.bound_iter <= out.report.bound_eval + 1e-9;
  Rng rng(detail::mix_seed(cfg.seed, 0xb0c5));
  for (int s = 0; s < 100 && out.report.valid; ++s) {
    Vec x(input_box.dim());
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = rng.uniform(input_box.lo[i], input_box.hi[i]);
    if (forward(folded, x)[0] < out.report.bound_eval - 1e-6) out.report.valid = false;
  }
  out.report.config_echo = config_to_json(cfg);
  return out;
}

inline VerifyOutcome verify_single_detailed(const NetworkSpec& net, const ProblemSpec& problem,
                                            const VerifyConfig& cfg) {
  validate(net);
  validate(problem, net);
  const NetworkSpec folded = fold_objective(net, problem.objective);
  const Hyperbox box = make_input_box(problem);
  std::optional<std::vector<Hyperbox>> aux;
  if (cfg.use_ibp_boxes) aux = ibp_propagate(folded, box);
  return verify_core(folded, box, aux, cfg);
}

inline ReportSpec verify_single(const NetworkSpec& net, const ProblemSpec& problem,
                                const VerifyConfig& cfg) {
  return verify_single_detailed(net, problem, cfg).report;
}

namespace detail {

/// KW-style dual initialization for a network prefix whose final objective
/// row is arbitrary (stagewise per-neuron runs).
inline DualState init_rho_kw_prefix(const NetworkSpec& net, const std::vector<LayerBounds>& bounds,
                                    std::size_t sub_layers, const Vec& final_row) {
  DualState s;
  s.rho.resize(sub_layers);
  Vec v = final_row;
  for (std::size_t k = sub_layers; k-- > 0;) {
    const Vec& lam = bounds[k].lambdas;
    Vec r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = lam[i] * v[i];
    s.rho[k] = r;
    if (k > 0) v = tmatvec(net.layers[k].weight, r);
  }
  return s;
}

}  // namespace detail

/// Bounds every neuron of the selected layers (ascending) by running the
/// dual ascent on the network prefix with objectives +-e_j, intersects the
/// results into the per-layer boxes, re-propagates the zonotopes through the
/// box-improved pushforward, and finally runs the single-stage procedure
/// with the tightened bounds.  A per-neuron iteration budget of zero
/// disables tightening entirely.
inline std::pair<VerifyOutcome, std::vector<Hyperbox>> verify_stagewise(const NetworkSpec& net,
                                                                        const ProblemSpec& problem,
                                                                        const VerifyConfig& cfg,
                                                                        const StagewiseConfig& scfg) {
  validate(net);
  validate(problem, net);
  const NetworkSpec folded = fold_objective(net, problem.objective);
  const Hyperbox box = make_input_box(problem);
  std::optional<std::vector<Hyperbox>> aux;
  if (cfg.use_ibp_boxes) aux = ibp_propagate(folded, box);
  std::vector<LayerBounds> bounds = zono_propagate(folded, box, aux);

  std::vector<Hyperbox> stage_boxes;
  stage_boxes.reserve(bounds.size());
  for (const LayerBounds& lb : bounds) stage_boxes.push_back(lb.pre_box);

  const std::size_t sub_layers = folded.num_layers() - 1;
  std::vector<std::size_t> stages;
  if (scfg.layers) {
    stages = *scfg.layers;
    for (std::size_t k : stages)
      if (k >= sub_layers) throw ValidationError("stagewise: layer index out of range");
  } else {
    for (std::size_t k = 1; k < sub_layers; ++k) stages.push_back(k);
  }
  std::sort(stages.begin(), stages.end());

  if (scfg.per_neuron.adam.iters > 0) {
    for (std::size_t k : stages) {
      // Prefix of the network feeding pre-activation z_k; blocks for layers
      // < k are shared across all 2 * width_k per-neuron runs.
      std::vector<Partition> parts =
          detail::make_partitions(scfg.per_neuron.partition_strategy, folded, bounds,
                                  detail::mix_seed(scfg.per_neuron.seed, k));
      parts.resize(k);
      std::vector<LayerBounds> prefix_bounds(bounds.begin(),
                                             bounds.begin() + static_cast<std::ptrdiff_t>(k));
      NetworkSpec prefix;
      prefix.input_dim = folded.input_dim;
      prefix.layers.assign(folded.layers.begin(),
                           folded.layers.begin() + static_cast<std::ptrdiff_t>(k + 1));
      // placeholder scalar final row; rebound per neuron below
      const Matrix wk = prefix.layers.back().weight;
      const Vec bk = prefix.layers.back().bias;
      prefix.layers.back().weight = Matrix(1, wk.cols());
      prefix.layers.back().bias = Vec{0.0};
      prefix.layers.back().feature_shape.reset();
      DualSolverConfig solver{scfg.per_neuron.mip_budget, 1};

      const std::size_t width = wk.rows();
      // block caches (candidate sets) built once per stage; per-neuron runs
      // copy the prototype and rebind only the final objective row
      const DualContext proto(prefix, box, prefix_bounds, parts, solver);
      Vec lows(width), highs(width);
      parallel_for(width, cfg.threads, [&](std::size_t j) {
        DualContext ctx = proto;
        for (int dir = 0; dir < 2; ++dir) {
          const double sgn = dir == 0 ? 1.0 : -1.0;
          Vec row = wk.row(j);
          if (sgn < 0) row = scale(std::move(row), -1.0);
          ctx.set_final_objective(row, sgn * bk[j]);
          const DualState rho0 =
              detail::init_rho_kw_prefix(prefix, prefix_bounds, k, row);
          const AscendResult asc = ascend(ctx, rho0, scfg.per_neuron.adam);
          (dir == 0 ? lows[j] : highs[j]) = dir == 0 ? asc.best_value : -asc.best_value;
        }
      });
      Hyperbox tightened = stage_boxes[k];
      for (std::size_t j = 0; j < width; ++j) {
        const double lo = std::max(tightened.lo[j], lows[j]);
        const double hi = std::min(tightened.hi[j], highs[j]);
        if (lo <= hi) {
          tightened.lo[j] = lo;
          tightened.hi[j] = hi;
        }
      }
      stage_boxes[k] = tightened;
      if (scfg.reuse_boxes) {
        bounds = zono_propagate(folded, box, stage_boxes);
        for (std::size_t t = 0; t < bounds.size(); ++t) stage_boxes[t] = bounds[t].pre_box;
      }
    }
    if (!scfg.reuse_boxes) {
      bounds = zono_propagate(folded, box, stage_boxes);
      for (std::size_t t = 0; t < bounds.size(); ++t) stage_boxes[t] = bounds[t].pre_box;
    }
  }

  VerifyOutcome out = verify_core(folded, box, stage_boxes, cfg);
  return {std::move(out), std::move(stage_boxes)};
}

/// Upper-bounding oracle: the minimum of the network over a corner-inclusive
/// regular grid.  Input dimension is capped so the grid stays enumerable.
inline double oracle_grid_min(const NetworkSpec& net, const Hyperbox& box,
                              std::size_t points_per_dim) {
  if (box.dim() > 4) throw std::invalid_argument("oracle_grid_min: input dimension > 4");
  if (points_per_dim < 1) throw std::invalid_argument("oracle_grid_min: need at least one point");
  if (net.output_dim() != 1) throw std::invalid_argument("oracle_grid_min: scalar networks only");
  const std::size_t d = box.dim();
  std::vector<std::size_t> idx(d, 0);
  double best = std::numeric_limits<double>::infinity();
  Vec x(d);
  while (true) {
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = points_per_dim == 1 ? box.lo[i]
                                 : box.lo[i] + (box.hi[i] - box.lo[i]) *
                                                   static_cast<double>(idx[i]) /
                                                   static_cast<double>(points_per_dim - 1);
    }
    best = std::min(best, forward(net, x)[0]);
    std::size_t i = 0;
    for (; i < d; ++i) {
      if (++idx[i] < points_per_dim) break;
      idx[i] = 0;
    }
    if (i == d) break;
  }
  return best;
}

/// Exact oracle by global activation-pattern enumeration: with every
/// unstable neuron's sign fixed the network is affine in the input, so each
/// pattern is one LP over the input box with the pattern constraints; the
/// exact minimum is the best feasible pattern.
inline double oracle_exact_small(const NetworkSpec& net, const Hyperbox& box,
                                 std::size_t max_unstable = 16) {
  if (net.output_dim() != 1) throw std::invalid_argument("oracle_exact_small: scalar networks only");
  const std::vector<Hyperbox> ibp = ibp_propagate(net, box);
  struct Neuron {
    std::size_t layer, index;
  };
  std::vector<Neuron> unstable;
  for (std::size_t k = 0; k + 1 < net.num_layers(); ++k)
    for (std::size_t i = 0; i < net.width(k); ++i)
      if (ibp[k].lo[i] < 0.0 && ibp[k].hi[i] > 0.0) unstable.push_back({k, i});
  if (unstable.size() > max_unstable)
    throw std::runtime_error("oracle_exact_small: " + std::to_string(unstable.size()) +
                             " unstable neurons exceed the cap");

  const std::size_t d = net.input_dim;
  double best = std::numeric_limits<double>::infinity();
  const std::uint64_t patterns = std::uint64_t{1} << unstable.size();
  for (std::uint64_t pat = 0; pat < patterns; ++pat) {
    // affine expression z = M x + v maintained through the layers
    Matrix m = net.layers[0].weight;
    Vec v = net.layers[0].bias;
    LinearProgram lp;
    lp.objective.assign(d, 0.0);
    lp.var_lo = box.lo;
    lp.var_hi = box.hi;
    std::size_t u = 0;
    for (std::size_t k = 0; k + 1 < net.num_layers(); ++k) {
      for (std::size_t i = 0; i < net.width(k); ++i) {
        bool active;
        if (ibp[k].lo[i] >= 0.0) {
          active = true;
        } else if (ibp[k].hi[i] <= 0.0) {
          active = false;
        } else {
          active = (pat >> u) & 1;
          // sign constraint on the affine pre-activation
          Vec row = m.row(i);
          double rhs = -v[i];
          if (!active) {
            row = scale(std::move(row), -1.0);
            rhs = v[i];
          }
          lp.constraints.emplace_back(std::move(row), rhs);
          ++u;
        }
        if (!active) {
          for (std::size_t j = 0; j < d; ++j) m(i, j) = 0.0;
          v[i] = 0.0;
        }
      }
      m = matmul(net.layers[k + 1].weight, m);
      v = add(matvec(net.layers[k + 1].weight, v), net.layers[k + 1].bias);
    }
    lp.objective = m.row(0);
    const double constant = v[0];
    const LpResult res = solve_lp(lp);
    if (res.status == LpStatus::Infeasible) continue;
    if (res.status == LpStatus::IterLimit)
      throw std::runtime_error("oracle_exact_small: LP did not converge");
    best = std::min(best, res.value + constant);
  }
  return best;
}

/// The hyperbox-decomposition comparison point: the identical pipeline but
/// with singleton partitions everywhere and no evaluation-phase merging, so
/// the zonotope structure is never exploited.  Returns the post-ascent bound.
inline double baseline_box_dual(const NetworkSpec& net, const ProblemSpec& problem,
                                const AdamConfig& adam, std::uint64_t seed = 0,
                                bool use_ibp = true) {
  VerifyConfig cfg;
  cfg.partition_strategy = PartitionStrategy::Singleton;
  cfg.adam = adam;
  cfg.merge_layers.clear();
  cfg.use_ibp_boxes = use_ibp;
  cfg.seed = seed;
  return verify_single_detailed(net, problem, cfg).report.bound_iter;
}

}  // namespace zono
