#pragma once

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zono/zono.hpp"

namespace zono::cli {

namespace detail {

struct CommonOpts {
  std::string net_path, problem_path, out_path;
  std::string partition = "similarity";
  std::size_t iters = 1000;
  double lr = 0.01;
  double lr_decay = 0.75;
  std::size_t decay_every = 100;
  std::size_t merge_last = 20;
  std::string merge_layers;
  double mip_time_s = 10.0;
  std::uint64_t mip_nodes = std::uint64_t{1} << 20;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  bool no_ibp = false;
};

inline void add_common(CLI::App* cmd, CommonOpts& o, bool need_out) {
  cmd->add_option("--net", o.net_path, "network JSON file")->required();
  cmd->add_option("--problem", o.problem_path, "problem JSON file")->required();
  auto* out = cmd->add_option("--out", o.out_path, "report JSON output path");
  if (need_out) out->required();
  cmd->add_option("--partition", o.partition,
                  "partition strategy: singleton|random|similarity|spatial|depthwise");
  cmd->add_option("--iters", o.iters, "dual ascent iterations");
  cmd->add_option("--lr", o.lr, "initial Adam learning rate");
  cmd->add_option("--lr-decay", o.lr_decay, "multiplicative learning-rate decay factor");
  cmd->add_option("--decay-every", o.decay_every, "iterations between decays");
  cmd->add_option("--merge-last", o.merge_last,
                  "evaluation-phase target dimension for the last layer (0 disables)");
  cmd->add_option("--merge-layers", o.merge_layers,
                  "explicit merges as layer:dim[,layer:dim...] (overrides --merge-last)");
  cmd->add_option("--mip-time-s", o.mip_time_s, "per-block time limit for exact solves");
  cmd->add_option("--mip-nodes", o.mip_nodes, "per-block pattern limit for exact solves");
  cmd->add_option("--threads", o.threads, "worker threads (default: hardware concurrency)");
  cmd->add_option("--seed", o.seed, "seed for all randomized choices");
  cmd->add_flag("--no-ibp", o.no_ibp, "skip interval bound propagation when initializing");
}

inline VerifyConfig make_config(const CommonOpts& o, std::size_t sub_layers) {
  VerifyConfig cfg;
  cfg.partition_strategy = partition_strategy_from_string(o.partition);
  cfg.adam.lr0 = o.lr;
  cfg.adam.decay_factor = o.lr_decay;
  cfg.adam.decay_every = o.decay_every;
  cfg.adam.iters = o.iters;
  cfg.mip_budget.max_patterns = o.mip_nodes;
  cfg.mip_budget.time_limit_s = o.mip_time_s;
  cfg.use_ibp_boxes = !o.no_ibp;
  cfg.seed = o.seed;
  cfg.threads = o.threads == 0 ? default_threads() : o.threads;
  if (!o.merge_layers.empty()) {
    std::string rest = o.merge_layers;
    while (!rest.empty()) {
      const std::size_t comma = rest.find(',');
      const std::string item = rest.substr(0, comma);
      rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
      const std::size_t colon = item.find(':');
      if (colon == std::string::npos)
        throw ValidationError("--merge-layers: expected layer:dim, got '" + item + "'");
      const std::size_t layer = std::stoul(item.substr(0, colon));
      const std::size_t dim = std::stoul(item.substr(colon + 1));
      if (dim < 2) throw ValidationError("--merge-layers: target dimension must be >= 2");
      if (layer >= sub_layers)
        throw ValidationError("--merge-layers: layer index " + std::to_string(layer) +
                              " out of range");
      cfg.merge_layers.emplace_back(layer, dim);
    }
  } else if (o.merge_last >= 2 && sub_layers > 0) {
    cfg.merge_layers.emplace_back(sub_layers - 1, o.merge_last);
  }
  return cfg;
}

inline void print_bound(double bound) { std::printf("%.17g\n", bound); }

inline int run_selftest(std::uint64_t seed, std::size_t num_nets) {
  std::size_t failures = 0;
  for (std::size_t n = 0; n < num_nets; ++n) {
    const NetworkSpec net = make_fixture_net(seed + n);
    const ProblemSpec problem = make_fixture_problem(seed + n, net);
    VerifyConfig cfg;
    cfg.adam.iters = 60;
    cfg.seed = seed + n;
    cfg.merge_layers = {{net.num_layers() - 2, 8}};
    const VerifyOutcome out = verify_single_detailed(net, problem, cfg);
    const NetworkSpec folded = fold_objective(net, problem.objective);
    const double grid = oracle_grid_min(folded, make_input_box(problem), 201);
    const bool chain = out.report.bound_init <= out.report.bound_iter + 1e-9 &&
                       out.report.bound_iter <= out.report.bound_eval + 1e-9;
    const bool sound = out.report.bound_eval <= grid + 1e-6;
    const bool ok = chain && sound && out.report.valid;
    std::fprintf(stderr, "selftest net %zu: bound %.6f grid %.6f %s\n", n,
                 out.report.bound_eval, grid, ok ? "ok" : "FAIL");
    if (!ok) ++failures;
  }
  if (failures > 0) {
    std::fprintf(stderr, "selftest: %zu failure(s)\n", failures);
    return 2;
  }
  std::fprintf(stderr, "selftest: all %zu nets sound\n", num_nets);
  return 0;
}

}  // namespace detail

/// Entry point shared by the binary and the in-process tests.
/// Exit codes: 0 success, 1 usage error, 2 invalid input.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"certified lower bounds for ReLU networks over box input regions"};
  app.require_subcommand(1);

  detail::CommonOpts vo, so;
  bool verify_stagewise_flag = false;
  std::size_t stage_iters = 100;

  CLI::App* verify = app.add_subcommand("verify", "single-stage verification");
  detail::add_common(verify, vo, /*need_out=*/true);
  verify->add_flag("--stagewise", verify_stagewise_flag,
                   "tighten intermediate bounds per neuron before the final bound");
  verify->add_option("--stage-iters", stage_iters, "per-neuron ascent iterations");

  CLI::App* stagewise = app.add_subcommand("stagewise", "stagewise verification");
  detail::add_common(stagewise, so, /*need_out=*/true);
  stagewise->add_option("--stage-iters", stage_iters, "per-neuron ascent iterations");

  std::string onet, oproblem;
  std::size_t opoints = 101;
  bool oexact = false;
  std::size_t omax_unstable = 16;
  CLI::App* oracle = app.add_subcommand("oracle", "grid or exact reference minimum");
  oracle->add_option("--net", onet, "network JSON file")->required();
  oracle->add_option("--problem", oproblem, "problem JSON file")->required();
  oracle->add_option("--points", opoints, "grid points per input dimension");
  oracle->add_flag("--exact", oexact, "activation-pattern enumeration instead of a grid");
  oracle->add_option("--max-unstable", omax_unstable, "unstable-neuron cap for --exact");

  std::uint64_t st_seed = 1;
  std::size_t st_nets = 5;
  CLI::App* selftest = app.add_subcommand("selftest", "built-in soundness check on random nets");
  selftest->add_option("--seed", st_seed, "fixture seed");
  selftest->add_option("--nets", st_nets, "number of fixture nets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (verify->parsed() || stagewise->parsed()) {
      const detail::CommonOpts& o = verify->parsed() ? vo : so;
      const bool run_stagewise = stagewise->parsed() || verify_stagewise_flag;
      const NetworkSpec net = load_network(o.net_path);
      const ProblemSpec problem = load_problem(o.problem_path);
      validate(problem, net);
      const VerifyConfig cfg = detail::make_config(o, net.num_layers() - 1);
      ReportSpec report;
      if (run_stagewise) {
        StagewiseConfig scfg;
        scfg.per_neuron = cfg;
        scfg.per_neuron.adam.iters = stage_iters;
        scfg.per_neuron.merge_layers.clear();
        report = verify_stagewise(net, problem, cfg, scfg).first.report;
        report.config_echo["stagewise"] = true;
        report.config_echo["stage_iters"] = stage_iters;
      } else {
        report = verify_single(net, problem, cfg);
        report.config_echo["stagewise"] = false;
      }
      write_report(report, o.out_path);
      detail::print_bound(report.bound_eval);
      return 0;
    }
    if (oracle->parsed()) {
      const NetworkSpec net = load_network(onet);
      const ProblemSpec problem = load_problem(oproblem);
      validate(problem, net);
      const NetworkSpec folded = fold_objective(net, problem.objective);
      const Hyperbox box = make_input_box(problem);
      const double value = oexact ? oracle_exact_small(folded, box, omax_unstable)
                                  : oracle_grid_min(folded, box, opoints);
      detail::print_bound(value);
      return 0;
    }
    if (selftest->parsed()) return detail::run_selftest(st_seed, st_nets);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}

}  // namespace zono::cli
