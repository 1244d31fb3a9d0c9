#include "pouf/config.hpp"

#include <algorithm>
#include <set>

#include "pouf/embedding_io.hpp"
#include "pouf/errors.hpp"

namespace pouf {
namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) {
      throw ValidationError(std::string("unknown ") + what + " key '" + key + "'");
    }
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename Enum, typename Parse>
void read_enum(const Json& j, const char* key, Enum& out, Parse parse) {
  if (!j.contains(key)) return;
  std::string s;
  read(j, key, s);
  out = parse(s);
}

void read_size(const Json& j, const char* key, std::size_t& out) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ValidationError(std::string("'") + key + "' must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

}  // namespace

TrainConfig train_config_from_json(const Json& j) {
  static const std::set<std::string> known = {
      "method", "transport_kind", "transport_weight", "lambda_mi", "entropy_only_weight",
      "cost_kind", "prior_mode", "prior_horizon", "tuning_mode", "batch_size", "iterations",
      "eta0", "gamma", "alpha", "momentum", "initial_temperature", "seed", "sinkhorn_epsilon",
      "sinkhorn_max_iter", "sinkhorn_tol", "upl_topk", "eval_every"};
  reject_unknown(j, known, "training config");
  TrainConfig c;
  read_enum(j, "method", c.method, method_from_string);
  read_enum(j, "transport_kind", c.transport_kind, transport_kind_from_string);
  read(j, "transport_weight", c.transport_weight);
  read(j, "lambda_mi", c.lambda_mi);
  read(j, "entropy_only_weight", c.entropy_only_weight);
  read_enum(j, "cost_kind", c.cost_kind, cost_kind_from_string);
  read_enum(j, "prior_mode", c.prior_mode, prior_mode_from_string);
  read_size(j, "prior_horizon", c.prior_horizon);
  read_enum(j, "tuning_mode", c.tuning_mode, tuning_mode_from_string);
  read_size(j, "batch_size", c.batch_size);
  read_size(j, "iterations", c.iterations);
  read(j, "eta0", c.eta0);
  read(j, "gamma", c.gamma);
  read(j, "alpha", c.alpha);
  read(j, "momentum", c.momentum);
  read(j, "initial_temperature", c.initial_temperature);
  if (j.contains("seed")) {
    std::size_t seed = 0;
    read_size(j, "seed", seed);
    c.seed = seed;
  }
  read(j, "sinkhorn_epsilon", c.sinkhorn_epsilon);
  read_size(j, "sinkhorn_max_iter", c.sinkhorn_max_iter);
  read(j, "sinkhorn_tol", c.sinkhorn_tol);
  read_size(j, "upl_topk", c.upl_topk);
  read_size(j, "eval_every", c.eval_every);
  c.validate();
  return c;
}

Json to_json(const TrainConfig& c) {
  return Json{{"method", to_string(c.method)},
              {"transport_kind", to_string(c.transport_kind)},
              {"transport_weight", c.transport_weight},
              {"lambda_mi", c.lambda_mi},
              {"entropy_only_weight", c.entropy_only_weight},
              {"cost_kind", to_string(c.cost_kind)},
              {"prior_mode", to_string(c.prior_mode)},
              {"prior_horizon", c.prior_horizon},
              {"tuning_mode", to_string(c.tuning_mode)},
              {"batch_size", c.batch_size},
              {"iterations", c.iterations},
              {"eta0", c.eta0},
              {"gamma", c.gamma},
              {"alpha", c.alpha},
              {"momentum", c.momentum},
              {"initial_temperature", c.initial_temperature},
              {"seed", c.seed},
              {"sinkhorn_epsilon", c.sinkhorn_epsilon},
              {"sinkhorn_max_iter", c.sinkhorn_max_iter},
              {"sinkhorn_tol", c.sinkhorn_tol},
              {"upl_topk", c.upl_topk},
              {"eval_every", c.eval_every}};
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
  static const std::set<std::string> known = {
      "classes", "dim", "samples", "class_proportions", "cluster_spread",
      "rotation_angle_scale", "bias_scale", "proto_noise", "seed"};
  reject_unknown(j, known, "synthetic spec");
  SyntheticSpec s;
  read_size(j, "classes", s.classes);
  read_size(j, "dim", s.dim);
  read_size(j, "samples", s.samples);
  read(j, "class_proportions", s.class_proportions);
  read(j, "cluster_spread", s.cluster_spread);
  read(j, "rotation_angle_scale", s.rotation_angle_scale);
  read(j, "bias_scale", s.bias_scale);
  read(j, "proto_noise", s.proto_noise);
  if (j.contains("seed")) {
    std::size_t seed = 0;
    read_size(j, "seed", seed);
    s.seed = seed;
  }
  s.validate();
  return s;
}

Json to_json(const SyntheticSpec& s) {
  return Json{{"classes", s.classes},
              {"dim", s.dim},
              {"samples", s.samples},
              {"class_proportions", s.class_proportions},
              {"cluster_spread", s.cluster_spread},
              {"rotation_angle_scale", s.rotation_angle_scale},
              {"bias_scale", s.bias_scale},
              {"proto_noise", s.proto_noise},
              {"seed", s.seed}};
}

AblationConfig ablation_config_from_json(const Json& j) {
  reject_unknown(j, {"base", "variants", "seeds"}, "ablation config");
  AblationConfig a;
  if (j.contains("base")) a.base = train_config_from_json(j.at("base"));
  read(j, "variants", a.variants);
  read(j, "seeds", a.seeds);
  if (a.variants.empty()) throw ValidationError("ablation grid lists no variants");
  if (a.seeds.empty()) throw ValidationError("ablation grid lists no seeds");
  for (const auto& v : a.variants) {
    if (std::find(kAblationVariants.begin(), kAblationVariants.end(), v) ==
        kAblationVariants.end()) {
      throw ValidationError("unknown ablation variant '" + v + "'");
    }
  }
  return a;
}

Json to_json(const AblationConfig& a) {
  return Json{{"base", to_json(a.base)}, {"variants", a.variants}, {"seeds", a.seeds}};
}

TrainConfig apply_variant(const TrainConfig& base, const std::string& variant) {
  TrainConfig c = base;
  if (variant == "default") return c;
  if (variant == "ct") {
    c.transport_kind = TransportKind::kCt;
  } else if (variant == "ot-sinkhorn") {
    c.transport_kind = TransportKind::kOtSinkhorn;
  } else if (variant == "no-transport") {
    c.transport_kind = TransportKind::kNone;
  } else if (variant == "no-mi") {
    c.lambda_mi = 0.0;
  } else if (variant == "cost=exp-neg-dot") {
    c.cost_kind = CostKind::kExpNegDot;
  } else {
    throw ValidationError("unknown ablation variant '" + variant + "'");
  }
  return c;
}

Json parse_json_file(const std::string& path) {
  const std::string text = io::read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace pouf
