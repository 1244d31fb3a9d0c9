#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pouf/synthetic.hpp"
#include "pouf/trainer.hpp"

namespace pouf {

using Json = nlohmann::json;

// JSON round-trips for the run configurations. Parsing starts from the defaults, applies
// every key present and rejects unknown keys and wrongly-typed values with ValidationError.

TrainConfig train_config_from_json(const Json& j);
Json to_json(const TrainConfig& c);

SyntheticSpec synthetic_spec_from_json(const Json& j);
Json to_json(const SyntheticSpec& s);

/// Variants of the ablation grid.
inline const std::vector<std::string> kAblationVariants = {
    "default", "ct", "ot-sinkhorn", "no-transport", "no-mi", "cost=exp-neg-dot"};

struct AblationConfig {
  TrainConfig base;
  std::vector<std::string> variants = kAblationVariants;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
};

AblationConfig ablation_config_from_json(const Json& j);
Json to_json(const AblationConfig& a);

/// `base` with one ablation applied.
TrainConfig apply_variant(const TrainConfig& base, const std::string& variant);

Json parse_json_file(const std::string& path);

}  // namespace pouf
