#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pouf {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t instances = 100;  // random instances per chain
  double rtol = 1e-4;
  double atol = 1e-7;
  double step = 1e-5;
  bool flip_sign = false;  // corrupts the analytic gradient; used to test the harness itself
};

struct GradcheckChain {
  std::string name;
  std::size_t instances = 0;
  double worst = 0.0;  // worst normalized mismatch, see grad::gradient_mismatch
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckChain> chains;
  double worst = 0.0;
  bool passed = true;
};

/// Compares reverse-mode gradients with central differences for every op kind and every
/// loss pipeline on random small instances.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace pouf
