#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "zono/geom.hpp"
#include "zono/linalg.hpp"

namespace zono {

/// Input files that fail to parse or violate the format.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Structurally well-formed input that fails validation (dimension
/// mismatches, empty boxes, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One affine layer.  Convolutions are ingested as dense matrices; the
/// optional feature shape (channels, height, width) records the output
/// arrangement so spatial partition heuristics can use it.
struct LayerSpec {
  Matrix weight;
  Vec bias;
  std::optional<std::array<std::size_t, 3>> feature_shape;
};

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<LayerSpec> layers;

  std::size_t output_dim() const { return layers.back().weight.rows(); }
  /// Width of the k-th layer's output (the pre-activation z_k).
  std::size_t width(std::size_t k) const { return layers[k].weight.rows(); }
  std::size_t num_layers() const { return layers.size(); }
};

inline void validate(const NetworkSpec& net) {
  if (net.input_dim == 0) throw ValidationError("network: input_dim must be positive");
  if (net.layers.empty()) throw ValidationError("network: at least one layer required");
  std::size_t prev = net.input_dim;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const LayerSpec& l = net.layers[k];
    if (l.weight.rows() == 0 || l.weight.cols() == 0)
      throw ValidationError("network: layer " + std::to_string(k) + " has an empty weight");
    if (l.weight.cols() != prev)
      throw ValidationError("network: layer " + std::to_string(k) + " expects input width " +
                            std::to_string(l.weight.cols()) + " but gets " + std::to_string(prev));
    if (l.bias.size() != l.weight.rows())
      throw ValidationError("network: layer " + std::to_string(k) + " bias length " +
                            std::to_string(l.bias.size()) + " != row count " +
                            std::to_string(l.weight.rows()));
    if (!l.weight.all_finite() || !all_finite(l.bias))
      throw ValidationError("network: layer " + std::to_string(k) + " has non-finite entries");
    if (l.feature_shape) {
      const auto& s = *l.feature_shape;
      if (s[0] * s[1] * s[2] != l.weight.rows())
        throw ValidationError("network: layer " + std::to_string(k) +
                              " feature_shape product != row count");
    }
    prev = l.weight.rows();
  }
}

/// Evaluates the network (affine layers with ReLU between them, none after
/// the last) at a point.
inline Vec forward(const NetworkSpec& net, const Vec& x) {
  Vec z = add(matvec(net.layers[0].weight, x), net.layers[0].bias);
  for (std::size_t k = 1; k < net.layers.size(); ++k)
    z = add(matvec(net.layers[k].weight, relu(std::move(z))), net.layers[k].bias);
  return z;
}

struct ProblemSpec {
  Vec input_center;
  double epsilon = 0.0;
  std::optional<Vec> clip_lo, clip_hi;
  Vec objective;
};

inline void validate(const ProblemSpec& p, const NetworkSpec& net) {
  if (p.input_center.size() != net.input_dim)
    throw ValidationError("problem: input_center length != network input_dim");
  if (!(p.epsilon >= 0.0)) throw ValidationError("problem: epsilon must be nonnegative");
  if (p.objective.size() != net.output_dim())
    throw ValidationError("problem: objective length != network output width");
  if (!all_finite(p.input_center) || !all_finite(p.objective) || !std::isfinite(p.epsilon))
    throw ValidationError("problem: non-finite entries");
  for (const auto& clip : {p.clip_lo, p.clip_hi})
    if (clip && clip->size() != p.input_center.size())
      throw ValidationError("problem: clip vector length != input_center length");
  if (p.clip_lo && p.clip_hi)
    for (std::size_t i = 0; i < p.clip_lo->size(); ++i)
      if ((*p.clip_lo)[i] > (*p.clip_hi)[i])
        throw ValidationError("problem: clip_lo > clip_hi at coordinate " + std::to_string(i));
}

/// x +- epsilon intersected with the clip bounds.  Throws when the clip
/// region pushes the box empty.
inline Hyperbox make_input_box(const ProblemSpec& p) {
  const std::size_t d = p.input_center.size();
  Vec lo(d), hi(d);
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = p.input_center[i] - p.epsilon;
    hi[i] = p.input_center[i] + p.epsilon;
    if (p.clip_lo) lo[i] = std::max(lo[i], (*p.clip_lo)[i]);
    if (p.clip_hi) hi[i] = std::min(hi[i], (*p.clip_hi)[i]);
    if (lo[i] > hi[i])
      throw ValidationError("problem: empty input box at coordinate " + std::to_string(i));
  }
  return Hyperbox(std::move(lo), std::move(hi));
}

/// Absorbs a scalar objective into the final layer: the returned network's
/// last layer is objective.W_last (a single row) with bias objective.b_last,
/// so folded(x) = objective . net(x).
inline NetworkSpec fold_objective(const NetworkSpec& net, const Vec& objective) {
  if (objective.size() != net.output_dim())
    throw ValidationError("fold_objective: objective length != output width");
  NetworkSpec folded = net;
  LayerSpec& last = folded.layers.back();
  Matrix row(1, last.weight.cols());
  for (std::size_t j = 0; j < last.weight.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < last.weight.rows(); ++i) s += objective[i] * last.weight(i, j);
    row(0, j) = s;
  }
  const double b = dot(objective, last.bias);
  last.weight = std::move(row);
  last.bias = Vec{b};
  last.feature_shape.reset();
  return folded;
}

/// Verification run summary.  bound_init/iter/eval are best-so-far, hence
/// nondecreasing; `valid` is the self-check flag set by the pipeline.
struct ReportSpec {
  double bound_init = 0.0;
  double bound_iter = 0.0;
  double bound_eval = 0.0;
  std::array<double, 3> phase_times_s{0.0, 0.0, 0.0};
  nlohmann::json config_echo;
  bool valid = false;
};

// ---------------------------------------------------------------------------
// JSON serialization.  Matrices are row-major nested arrays; doubles use
// nlohmann's shortest round-trip encoding so files reload bit-exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw IoError(what + ": expected non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array()) throw IoError(what + ": rows must be arrays");
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw IoError(what + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw IoError(what + ": non-numeric entry");
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

inline Vec vec_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw IoError(what + ": expected array");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw IoError(what + ": non-numeric entry");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline void write_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

inline nlohmann::json network_to_json(const NetworkSpec& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& l : net.layers) {
    nlohmann::json jl;
    jl["weight"] = detail::to_json(l.weight);
    jl["bias"] = l.bias;
    if (l.feature_shape)
      jl["feature_shape"] = {(*l.feature_shape)[0], (*l.feature_shape)[1], (*l.feature_shape)[2]};
    else
      jl["feature_shape"] = nullptr;
    layers.push_back(std::move(jl));
  }
  return nlohmann::json{{"input_dim", net.input_dim}, {"layers", std::move(layers)}};
}

inline NetworkSpec network_from_json(const nlohmann::json& j) {
  NetworkSpec net;
  if (!j.contains("input_dim") || !j["input_dim"].is_number_unsigned())
    throw IoError("network: missing or invalid input_dim");
  net.input_dim = j["input_dim"].get<std::size_t>();
  if (!j.contains("layers") || !j["layers"].is_array())
    throw IoError("network: missing layers array");
  for (std::size_t k = 0; k < j["layers"].size(); ++k) {
    const auto& jl = j["layers"][k];
    LayerSpec l;
    l.weight = detail::matrix_from_json(jl.at("weight"), "layer " + std::to_string(k) + " weight");
    l.bias = detail::vec_from_json(jl.at("bias"), "layer " + std::to_string(k) + " bias");
    if (jl.contains("feature_shape") && !jl["feature_shape"].is_null()) {
      const auto& s = jl["feature_shape"];
      if (!s.is_array() || s.size() != 3)
        throw IoError("layer " + std::to_string(k) + ": feature_shape must be [c,h,w]");
      l.feature_shape = {s[0].get<std::size_t>(), s[1].get<std::size_t>(), s[2].get<std::size_t>()};
    }
    net.layers.push_back(std::move(l));
  }
  validate(net);
  return net;
}

inline NetworkSpec load_network(const std::string& path) {
  return network_from_json(detail::parse_file(path));
}

inline void save_network(const NetworkSpec& net, const std::string& path) {
  detail::write_file(path, network_to_json(net));
}

inline nlohmann::json problem_to_json(const ProblemSpec& p) {
  nlohmann::json j;
  j["input_center"] = p.input_center;
  j["epsilon"] = p.epsilon;
  j["clip_lo"] = p.clip_lo ? nlohmann::json(*p.clip_lo) : nlohmann::json(nullptr);
  j["clip_hi"] = p.clip_hi ? nlohmann::json(*p.clip_hi) : nlohmann::json(nullptr);
  j["objective"] = p.objective;
  return j;
}

inline ProblemSpec problem_from_json(const nlohmann::json& j) {
  ProblemSpec p;
  p.input_center = detail::vec_from_json(j.at("input_center"), "problem input_center");
  if (!j.contains("epsilon") || !j["epsilon"].is_number())
    throw IoError("problem: missing or invalid epsilon");
  p.epsilon = j["epsilon"].get<double>();
  if (j.contains("clip_lo") && !j["clip_lo"].is_null())
    p.clip_lo = detail::vec_from_json(j["clip_lo"], "problem clip_lo");
  if (j.contains("clip_hi") && !j["clip_hi"].is_null())
    p.clip_hi = detail::vec_from_json(j["clip_hi"], "problem clip_hi");
  p.objective = detail::vec_from_json(j.at("objective"), "problem objective");
  return p;
}

inline ProblemSpec load_problem(const std::string& path) {
  try {
    return problem_from_json(detail::parse_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline void save_problem(const ProblemSpec& p, const std::string& path) {
  detail::write_file(path, problem_to_json(p));
}

inline nlohmann::json report_to_json(const ReportSpec& r) {
  for (double v : {r.bound_init, r.bound_iter, r.bound_eval})
    if (!std::isfinite(v)) throw ValidationError("report: non-finite bound");
  for (double t : r.phase_times_s)
    if (!(t >= 0.0)) throw ValidationError("report: negative phase time");
  nlohmann::json j;
  j["bound_init"] = r.bound_init;
  j["bound_iter"] = r.bound_iter;
  j["bound_eval"] = r.bound_eval;
  j["phase_times_s"] = r.phase_times_s;
  j["config_echo"] = r.config_echo;
  j["valid"] = r.valid;
  return j;
}

inline void write_report(const ReportSpec& r, const std::string& path) {
  detail::write_file(path, report_to_json(r));
}

inline ReportSpec read_report(const std::string& path) {
  const nlohmann::json j = detail::parse_file(path);
  ReportSpec r;
  try {
    r.bound_init = j.at("bound_init").get<double>();
    r.bound_iter = j.at("bound_iter").get<double>();
    r.bound_eval = j.at("bound_eval").get<double>();
    const auto& t = j.at("phase_times_s");
    for (std::size_t i = 0; i < 3; ++i) r.phase_times_s[i] = t.at(i).get<double>();
    r.config_echo = j.at("config_echo");
    r.valid = j.at("valid").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  return r;
}

}  // namespace zono
