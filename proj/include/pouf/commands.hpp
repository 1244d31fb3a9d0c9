#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pouf/eval_report.hpp"
#include "pouf/model.hpp"
#include "pouf/trainer.hpp"

namespace pouf {

inline constexpr const char* kVersion = "0.1.0";

/// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitValidation = 2,
  kExitDiverged = 3,
};

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  std::filesystem::path params_dir;
  std::optional<std::uint64_t> seed;
};

/// Files of a benchmark directory as written by `generate`.
struct DataDir {
  RowMatrixXd raw_prototypes;
  RowMatrixXd raw_features;
  std::optional<std::vector<int>> labels;  // absent when labels.txt is missing
  std::vector<std::string> class_names;

  static DataDir load(const std::filesystem::path& dir);
};

/// Labels with -1 entries removed, paired with the row indices they belong to.
struct LabeledSubset {
  std::vector<std::size_t> rows;
  std::vector<int> labels;
};
LabeledSubset labeled_subset(const std::vector<int>& labels);

/// Accuracy and mean correct-class cosine of `params` on the labeled rows.
EvalResult evaluate_params(const ModelParams& params, const DataDir& data);

void write_params(const std::filesystem::path& dir, const ModelParams& params);
ModelParams read_params(const std::filesystem::path& dir);

int cmd_generate(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_adapt(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_ablate(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const CommandOptions& opts, std::ostream& out, std::ostream& err);

/// Worker count from POUF_THREADS (default 1).
std::size_t thread_budget();

}  // namespace pouf
