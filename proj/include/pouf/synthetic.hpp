#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pouf/types.hpp"

namespace pouf {

/// Parameters of the synthetic domain-shift benchmark: Gaussian clusters around
/// well-separated unit class means, and prototypes displaced from those means by a
/// shared rotation, a shared bias and per-class noise.
struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t dim = 64;
  std::size_t samples = 2000;
  std::vector<double> class_proportions;  // empty: uniform
  double cluster_spread = 0.25;
  double rotation_angle_scale = 0.8;  // radians, largest principal rotation angle
  double bias_scale = 0.6;
  double proto_noise = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<double> proportions() const;
};

struct SyntheticDataset {
  RowMatrixXd raw_prototypes;  // K x d
  RowMatrixXd raw_features;    // M x d
  std::vector<int> labels;     // M
  RowMatrixXd class_means;     // K x d, unit rows
};

/// Deterministic in the spec (seed included).
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace pouf
