#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "zono/geom.hpp"
#include "zono/geom2d.hpp"
#include "zono/linalg.hpp"
#include "zono/netio.hpp"
#include "zono/parallel.hpp"
#include "zono/partition.hpp"
#include "zono/pushforward.hpp"
#include "zono/reluprog.hpp"

namespace zono {

/// One dual vector per pre-activation layer z_k, k = 0..L-1.
struct DualState {
  std::vector<Vec> rho;
};

inline DualState init_rho_zero(const NetworkSpec& net) {
  DualState s;
  for (std::size_t k = 0; k + 1 < net.num_layers(); ++k) s.rho.emplace_back(net.width(k), 0.0);
  return s;
}

/// Backward recursion through the pushforward scale factors:
/// rho_{L-1} = Lambda_{L-1} o (W_L^T 1), rho_k = Lambda_k o (W_{k+1}^T rho_{k+1}).
/// The network must already be scalar-output (objective folded).
inline DualState init_rho_kw(const NetworkSpec& net, const std::vector<LayerBounds>& bounds) {
  if (bounds.size() != net.num_layers())
    throw std::invalid_argument("init_rho_kw: bounds/layer count mismatch");
  if (net.output_dim() != 1)
    throw std::invalid_argument("init_rho_kw: expected a scalar-output network");
  DualState s;
  const std::size_t nl = net.num_layers();
  if (nl < 2) return s;
  s.rho.resize(nl - 1);
  Vec v = net.layers[nl - 1].weight.row(0);  // W_L^T . 1 for a single row
  for (std::size_t k = nl - 1; k-- > 0;) {
    const Vec& lam = bounds[k].lambdas;
    if (lam.size() != v.size()) throw std::invalid_argument("init_rho_kw: shape mismatch");
    Vec r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = lam[i] * v[i];
    s.rho[k] = r;
    if (k > 0) v = tmatvec(net.layers[k].weight, r);
  }
  return s;
}

struct DualEval {
  double value = 0.0;        // input_term + sum(block_values) + sum(layer_constants)
  double input_term = 0.0;   // box LP over the input region, incl. rho_0 . b_0
  Vec layer_constants;       // folded bias constants, one per sub-layer
  std::vector<std::vector<double>> block_values;  // per layer, per block
  std::vector<Vec> zB_star;                       // per-layer argmins when exact
  bool exact = false;
};

struct DualSolverConfig {
  SolveBudget budget;
  unsigned threads = 1;
};

namespace detail {

/// One partition block of one layer, pre-dispatched by size with cached 2-D
/// candidate sets so repeated dual evaluations cost O(candidates) per block.
struct DualBlock {
  std::vector<std::size_t> coords;
  // size 1
  double lo = 0.0, hi = 0.0;
  // size 2
  Zono2D z2;
  CandidateSet cands;
  // size >= 3
  Zonotope zsub;
  Hyperbox boxsub;

  ReluSolution solve(const ReluObjective& obj, const SolveBudget& budget) const {
    switch (coords.size()) {
      case 1:
        return solve_interval(lo, hi, obj.c1[0], obj.c2[0]);
      case 2:
        return solve_zono2d(z2, obj, std::nullopt, &cands);
      default:
        return solve_zono_exact(zsub, obj, boxsub, budget);
    }
  }
};

}  // namespace detail

/// Precomputed per-block machinery for evaluating the decomposed dual.  The
/// final-layer objective row is a plain field so stagewise per-neuron runs
/// can rebind it without recomputing any candidate sets.
class DualContext {
public:
  DualContext(const NetworkSpec& net, const Hyperbox& input_box,
              const std::vector<LayerBounds>& bounds, const std::vector<Partition>& partitions,
              DualSolverConfig cfg = {})
      : cfg_(cfg) {
    const std::size_t nl = net.num_layers();
    if (nl < 1) throw std::invalid_argument("DualContext: empty network");
    if (bounds.size() < nl - 1) throw std::invalid_argument("DualContext: missing layer bounds");
    if (partitions.size() < nl - 1) throw std::invalid_argument("DualContext: missing partitions");
    num_sub_layers_ = nl - 1;
    w0_ = net.layers[0].weight;
    b0_ = net.layers[0].bias;
    input_box_ = input_box;
    next_weights_.reserve(num_sub_layers_);
    next_biases_.reserve(num_sub_layers_);
    for (std::size_t k = 0; k + 1 < nl; ++k) {
      next_weights_.push_back(net.layers[k + 1].weight);
      next_biases_.push_back(net.layers[k + 1].bias);
    }
    if (net.output_dim() != 1)
      throw std::invalid_argument("DualContext: expected a scalar-output network");
    final_w_ = net.layers[nl - 1].weight.row(0);
    final_b_ = net.layers[nl - 1].bias[0];

    layer_blocks_.resize(num_sub_layers_);
    widths_.resize(num_sub_layers_);
    for (std::size_t k = 0; k < num_sub_layers_; ++k) {
      const LayerBounds& lb = bounds[k];
      widths_[k] = lb.pre_zono.dim();
      validate(partitions[k], widths_[k]);
      for (const auto& group : partitions[k].groups) {
        detail::DualBlock blk;
        blk.coords = group;
        if (group.size() == 1) {
          blk.lo = lb.pre_box.lo[group[0]];
          blk.hi = lb.pre_box.hi[group[0]];
        } else if (group.size() == 2) {
          blk.z2 = Zono2D::from(project(lb.pre_zono, group));
          blk.cands = relu_candidates_boxed(blk.z2, select(lb.pre_box, group));
          if (blk.cands.empty_intersection) blk.cands = relu_candidates(blk.z2);
        } else {
          blk.zsub = project(lb.pre_zono, group);
          blk.boxsub = select(lb.pre_box, group);
        }
        layer_blocks_[k].push_back(std::move(blk));
      }
    }
  }

  /// Rebinds the final subproblem's objective row and bias; everything
  /// cached stays valid because candidate sets do not depend on objectives.
  void set_final_objective(Vec w, double b) {
    if (w.size() != (num_sub_layers_ ? widths_.back() : w0_.cols()))
      throw std::invalid_argument("set_final_objective: width mismatch");
    final_w_ = std::move(w);
    final_b_ = b;
  }

  std::size_t num_sub_layers() const { return num_sub_layers_; }
  const std::vector<std::size_t>& widths() const { return widths_; }

  /// g(rho) = [min over the input box of (W_0^T rho_0).x + rho_0.b_0]
  ///        + sum_k [block-decomposed ReLU program over Z_k with
  ///                 c1 = -rho_k, c2 = W_{k+1}^T rho_{k+1} (the final layer's
  ///                 row for the last k) plus the folded bias constant].
  /// A valid lower bound on the network minimum for any rho.
  DualEval eval(const DualState& rho) const {
    if (rho.rho.size() != num_sub_layers_)
      throw std::invalid_argument("eval_dual: rho layer count mismatch");
    DualEval ev;
    if (num_sub_layers_ == 0) {
      // affine network: the closed-form box LP is the whole story
      ev.input_term = box_linmin(input_box_, Vec(final_w_)).value + final_b_;
      ev.value = ev.input_term;
      ev.exact = true;
      return ev;
    }
    for (std::size_t k = 0; k < num_sub_layers_; ++k)
      if (rho.rho[k].size() != widths_[k])
        throw std::invalid_argument("eval_dual: rho width mismatch at layer " + std::to_string(k));

    // per-layer objective vectors and bias constants
    std::vector<Vec> c1(num_sub_layers_), c2(num_sub_layers_);
    Vec constants(num_sub_layers_);
    for (std::size_t k = 0; k < num_sub_layers_; ++k) {
      c1[k] = scale(Vec(rho.rho[k]), -1.0);
      if (k + 1 < num_sub_layers_) {
        c2[k] = tmatvec(next_weights_[k], rho.rho[k + 1]);
        constants[k] = dot(rho.rho[k + 1], next_biases_[k]);
      } else {
        c2[k] = final_w_;
        constants[k] = final_b_;
      }
    }

    // flatten blocks into one task list; results land in indexed slots
    struct Task {
      std::size_t layer, block;
    };
    std::vector<Task> tasks;
    for (std::size_t k = 0; k < num_sub_layers_; ++k)
      for (std::size_t b = 0; b < layer_blocks_[k].size(); ++b) tasks.push_back({k, b});
    std::vector<ReluSolution> results(tasks.size());
    parallel_for(tasks.size(), cfg_.threads, [&](std::size_t t) {
      const auto& [k, b] = tasks[t];
      const detail::DualBlock& blk = layer_blocks_[k][b];
      ReluObjective obj{select(c1[k], blk.coords), select(c2[k], blk.coords)};
      results[t] = blk.solve(obj, cfg_.budget);
    });

    const LinMinResult input_term = box_linmin(input_box_, tmatvec(w0_, rho.rho[0]));
    ev.input_term = input_term.value + dot(rho.rho[0], b0_);
    ev.value = ev.input_term;
    ev.exact = true;
    ev.block_values.resize(num_sub_layers_);
    ev.zB_star.resize(num_sub_layers_);
    for (std::size_t k = 0; k < num_sub_layers_; ++k) ev.zB_star[k].assign(widths_[k], 0.0);
    // fixed-order reduction keeps the value independent of the thread count
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const auto& [k, b] = tasks[t];
      const ReluSolution& s = results[t];
      ev.value += s.value;
      ev.block_values[k].push_back(s.value);
      if (s.exact && s.argmin) {
        const auto& coords = layer_blocks_[k][b].coords;
        for (std::size_t i = 0; i < coords.size(); ++i) ev.zB_star[k][coords[i]] = (*s.argmin)[i];
      } else {
        ev.exact = false;
      }
    }
    for (double c : constants) ev.value += c;
    ev.layer_constants = std::move(constants);
    if (!ev.exact) ev.zB_star.clear();
    return ev;
  }

  /// Supergradient of the concave g at rho: the primal residuals
  /// z_k^{A*} - z_k^{B*}, where the A-chain replays the network dynamics from
  /// the input-term argmin and the B-argmins come from the block solves.
  std::vector<Vec> supergradient(const DualEval& ev, const DualState& rho) const {
    if (!ev.exact || ev.zB_star.size() != num_sub_layers_)
      throw std::runtime_error("supergradient: requires an exact dual evaluation");
    std::vector<Vec> grad(num_sub_layers_);
    if (num_sub_layers_ == 0) return grad;
    const LinMinResult input_term = box_linmin(input_box_, tmatvec(w0_, rho.rho[0]));
    Vec zA = add(matvec(w0_, input_term.argmin), b0_);
    for (std::size_t k = 0; k < num_sub_layers_; ++k) {
      grad[k] = sub(Vec(zA), ev.zB_star[k]);
      if (k + 1 < num_sub_layers_)
        zA = add(matvec(next_weights_[k], relu(Vec(ev.zB_star[k]))), next_biases_[k]);
    }
    return grad;
  }

private:
  DualSolverConfig cfg_;
  std::size_t num_sub_layers_ = 0;
  Matrix w0_;
  Vec b0_;
  Hyperbox input_box_;
  std::vector<Matrix> next_weights_;
  std::vector<Vec> next_biases_;
  Vec final_w_;
  double final_b_ = 0.0;
  std::vector<std::size_t> widths_;
  std::vector<std::vector<detail::DualBlock>> layer_blocks_;
};

/// One-shot evaluation; ascent loops should build a DualContext once.
inline DualEval eval_dual(const NetworkSpec& net, const Hyperbox& input_box,
                          const std::vector<LayerBounds>& bounds,
                          const std::vector<Partition>& partitions, const DualState& rho,
                          const DualSolverConfig& cfg = {}) {
  return DualContext(net, input_box, bounds, partitions, cfg).eval(rho);
}

struct AdamConfig {
  double lr0 = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_factor = 0.75;
  std::size_t decay_every = 100;
  std::size_t iters = 1000;
};

struct AscendResult {
  DualState best_rho;
  double best_value = 0.0;
  std::vector<double> trace;  // g(rho_t) for t = 0..iters
};

/// Adam ascent on the concave dual with best-iterate tracking.  rho = 0 and
/// the initial iterate are always in the candidate set, so
/// best_value >= max(g(rho0), g(0)).
inline AscendResult ascend(const DualContext& ctx, const DualState& rho0, const AdamConfig& cfg) {
  AscendResult out;
  const DualState zero = [&] {
    DualState s;
    for (std::size_t w : ctx.widths()) s.rho.emplace_back(w, 0.0);
    return s;
  }();
  const DualEval at_zero = ctx.eval(zero);
  out.best_rho = zero;
  out.best_value = at_zero.value;

  DualState rho = rho0;
  std::vector<Vec> m(ctx.widths().size()), v(ctx.widths().size());
  for (std::size_t k = 0; k < ctx.widths().size(); ++k) {
    m[k].assign(ctx.widths()[k], 0.0);
    v[k].assign(ctx.widths()[k], 0.0);
  }
  for (std::size_t t = 0;; ++t) {
    const DualEval ev = ctx.eval(rho);
    out.trace.push_back(ev.value);
    if (ev.value > out.best_value) {
      out.best_value = ev.value;
      out.best_rho = rho;
    }
    if (t == cfg.iters) break;
    if (!ev.exact) break;  // ascent needs exact argmins; keep the best so far
    const std::vector<Vec> grad = ctx.supergradient(ev, rho);
    const double lr = cfg.lr0 * (cfg.decay_every > 0
                                     ? std::pow(cfg.decay_factor,
                                                static_cast<double>(t / cfg.decay_every))
                                     : 1.0);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t + 1));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t + 1));
    for (std::size_t k = 0; k < grad.size(); ++k) {
      for (std::size_t i = 0; i < grad[k].size(); ++i) {
        const double g = grad[k][i];
        m[k][i] = cfg.beta1 * m[k][i] + (1.0 - cfg.beta1) * g;
        v[k][i] = cfg.beta2 * v[k][i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = m[k][i] / bc1;
        const double vhat = v[k][i] / bc2;
        rho.rho[k][i] += lr * mhat / (std::sqrt(vhat) + cfg.eps);  // ascent
      }
    }
  }
  return out;
}

}  // namespace zono
