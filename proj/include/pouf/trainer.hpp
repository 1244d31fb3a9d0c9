#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pouf/graph.hpp"
#include "pouf/losses.hpp"
#include "pouf/model.hpp"
#include "pouf/ot.hpp"
#include "pouf/priors.hpp"

namespace pouf {

enum class TransportKind { kCt, kOtSinkhorn, kOtExact, kNone };
enum class PriorMode { kUniform, kLearned };
enum class Method { kPouf, kUpl };

const char* to_string(TransportKind kind) noexcept;
const char* to_string(PriorMode mode) noexcept;
const char* to_string(Method method) noexcept;
TransportKind transport_kind_from_string(const std::string& s);
PriorMode prior_mode_from_string(const std::string& s);
Method method_from_string(const std::string& s);

/// Everything that determines a training run besides the data.
struct TrainConfig {
  Method method = Method::kPouf;
  TransportKind transport_kind = TransportKind::kCt;
  double transport_weight = 1.0;
  double lambda_mi = 0.3;
  double entropy_only_weight = 0.0;  // Tent-style conditional-entropy term
  CostKind cost_kind = CostKind::kCosineDistance;
  PriorMode prior_mode = PriorMode::kUniform;
  std::size_t prior_horizon = 0;  // 0: same as iterations
  TuningMode tuning_mode = TuningMode::kModel;
  std::size_t batch_size = 96;
  std::size_t iterations = 1000;
  double eta0 = 2e-2;
  double gamma = 2e-4;
  double alpha = 0.75;
  double momentum = 0.9;
  double initial_temperature = 0.01;
  std::uint64_t seed = 0;
  double sinkhorn_epsilon = 0.0;  // 0: 0.1 * mean(C)
  std::size_t sinkhorn_max_iter = 1000;
  double sinkhorn_tol = 1e-6;
  std::size_t upl_topk = 16;
  std::size_t eval_every = 100;

  /// Throws ValidationError on negative weights, zero batch size, etc.
  void validate() const;
  std::size_t effective_prior_horizon() const {
    return prior_horizon == 0 ? iterations : prior_horizon;
  }
};

/// eta0 * (1 + gamma * iter)^(-alpha).
double lr_schedule(std::size_t iter, double eta0, double gamma, double alpha);

struct OptimizerState {
  std::map<std::string, Tensor> velocity;
  std::size_t iteration = 0;
};

/// Heavy-ball momentum: v <- momentum * v + g; p <- p - lr * v.
/// Supplying a gradient for a parameter outside `trainable` is an error.
void sgd_momentum_step(grad::Bindings& params, const grad::Gradients& grads,
                       OptimizerState& state, double lr, double momentum,
                       const std::set<std::string>& trainable);

struct StepRecord {
  std::size_t iter = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_transport = 0.0;
  double loss_mi = 0.0;
  double loss_entropy = 0.0;
  double loss_ce = 0.0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();  // only when monitored
};

struct RunReport {
  std::vector<StepRecord> records;
  std::vector<double> final_prior;
  std::vector<std::size_t> upl_short_classes;  // classes with fewer than topk candidates
};

/// Samples fixed-size batches from a seeded permutation; reshuffles when exhausted and
/// wraps around so a batch may straddle two epochs.
class BatchSampler {
 public:
  BatchSampler(std::size_t population, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();

 private:
  void reshuffle();

  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
};

/// One optimization step on a batch of raw (unadapted) features.
struct StepContext {
  const RowMatrixXd& raw_batch;
  std::span<const std::size_t> batch_ids;
  const RowMatrixXd& raw_prototypes;
  const TrainConfig& config;
};

StepRecord pouf_step(const StepContext& ctx, ModelParams& params, PriorState& prior,
                     OptimizerState& optimizer);

/// Accuracy of the current parameters; only the reporting path holds labels.
using Monitor = std::function<double(const ModelParams&)>;

struct TrainResult {
  ModelParams params;
  RunReport report;
};

/// The unsupervised POUF loop. Deterministic in (dataset, prototypes, config).
TrainResult train(const Eigen::Ref<const RowMatrixXd>& dataset,
                  const Eigen::Ref<const RowMatrixXd>& raw_prototypes, const TrainConfig& config,
                  const Monitor& monitor = {});

struct PseudoLabels {
  std::vector<std::size_t> indices;
  std::vector<int> labels;
  std::vector<std::size_t> short_classes;
};

/// Per class, the `topk` most confident samples; each sample goes to at most one class,
/// assigned in order of decreasing confidence (ties: lower sample index, then lower class).
PseudoLabels upl_pseudo_label(const Eigen::Ref<const RowMatrixXd>& probs, std::size_t topk);

/// Pseudo-labels with the zero-shot model, then fits prompt-tuning parameters with
/// cross entropy on the selected subset.
TrainResult upl_train(const Eigen::Ref<const RowMatrixXd>& dataset,
                      const Eigen::Ref<const RowMatrixXd>& raw_prototypes,
                      const TrainConfig& config, const Monitor& monitor = {});

/// Dispatches on config.method.
TrainResult run_training(const Eigen::Ref<const RowMatrixXd>& dataset,
                         const Eigen::Ref<const RowMatrixXd>& raw_prototypes,
                         const TrainConfig& config, const Monitor& monitor = {});

}  // namespace pouf
