#include "pouf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pouf/errors.hpp"
#include "pouf/loss_graph.hpp"

namespace pouf {

const char* to_string(TransportKind kind) noexcept {
  switch (kind) {
    case TransportKind::kCt: return "ct";
    case TransportKind::kOtSinkhorn: return "ot-sinkhorn";
    case TransportKind::kOtExact: return "ot-exact";
    case TransportKind::kNone: return "none";
  }
  return "?";
}

const char* to_string(PriorMode mode) noexcept {
  return mode == PriorMode::kLearned ? "learned" : "uniform";
}

const char* to_string(Method method) noexcept { return method == Method::kUpl ? "upl" : "pouf"; }

TransportKind transport_kind_from_string(const std::string& s) {
  if (s == "ct") return TransportKind::kCt;
  if (s == "ot-sinkhorn") return TransportKind::kOtSinkhorn;
  if (s == "ot-exact" || s == "ot") return TransportKind::kOtExact;
  if (s == "none") return TransportKind::kNone;
  throw ValidationError("unknown transport kind '" + s + "'");
}

PriorMode prior_mode_from_string(const std::string& s) {
  if (s == "uniform") return PriorMode::kUniform;
  if (s == "learned") return PriorMode::kLearned;
  throw ValidationError("unknown prior mode '" + s + "'");
}

Method method_from_string(const std::string& s) {
  if (s == "pouf") return Method::kPouf;
  if (s == "upl") return Method::kUpl;
  throw ValidationError("unknown method '" + s + "'");
}

void TrainConfig::validate() const {
  auto non_negative = [](double x, const char* name) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw ValidationError(std::string(name) + " must be a finite value >= 0");
    }
  };
  non_negative(transport_weight, "transport_weight");
  non_negative(lambda_mi, "lambda_mi");
  non_negative(entropy_only_weight, "entropy_only_weight");
  non_negative(gamma, "gamma");
  non_negative(alpha, "alpha");
  non_negative(momentum, "momentum");
  if (!(eta0 > 0.0)) throw ValidationError("eta0 must be positive");
  if (!(initial_temperature > 0.0)) throw ValidationError("initial_temperature must be positive");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(sinkhorn_tol > 0.0)) throw ValidationError("sinkhorn_tol must be positive");
  if (sinkhorn_epsilon < 0.0) throw ValidationError("sinkhorn_epsilon must be >= 0");
  if (method == Method::kUpl && upl_topk < 1) throw ValidationError("upl_topk must be >= 1");
  if (eval_every < 1) throw ValidationError("eval_every must be >= 1");
}

double lr_schedule(std::size_t iter, double eta0, double gamma, double alpha) {
  if (!(eta0 > 0.0)) throw ValidationError("eta0 must be positive");
  return eta0 * std::pow(1.0 + gamma * static_cast<double>(iter), -alpha);
}

void sgd_momentum_step(grad::Bindings& params, const grad::Gradients& grads,
                       OptimizerState& state, double lr, double momentum,
                       const std::set<std::string>& trainable) {
  for (const auto& [name, g] : grads) {
    if (!trainable.count(name)) {
      throw ValidationError("gradient supplied for non-trainable parameter '" + name + "'");
    }
    auto it = params.find(name);
    if (it == params.end()) throw ValidationError("unknown parameter '" + name + "'");
    if (!it->second.same_shape(g)) {
      throw ShapeError("gradient shape " + g.shape_string() + " != parameter shape " +
                       it->second.shape_string(), name);
    }
  }
  for (const auto& [name, g] : grads) {
    auto [v, fresh] = state.velocity.try_emplace(name, Tensor::zeros(g.shape()));
    (void)fresh;
    v->second.matrix() = momentum * v->second.matrix() + g.matrix();
    params[name].matrix() -= lr * v->second.matrix();
  }
  ++state.iteration;
}

BatchSampler::BatchSampler(std::size_t population, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), order_(population), rng_(seed) {
  if (population == 0) throw ValidationError("cannot sample from an empty dataset");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> batch;
  batch.reserve(batch_size_);
  while (batch.size() < batch_size_) {
    if (cursor_ == order_.size()) reshuffle();
    batch.push_back(order_[cursor_++]);
  }
  return batch;
}

namespace {

RowMatrixXd gather_rows(const Eigen::Ref<const RowMatrixXd>& m,
                        std::span<const std::size_t> rows) {
  RowMatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::string batch_id_list(std::span<const std::size_t> ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? "," : "") << ids[i];
  return os.str();
}

[[noreturn]] void diverged(const std::string& why, std::span<const std::size_t> ids) {
  throw DivergenceError(why + "; batch ids: " + batch_id_list(ids));
}

bool has_objective(const TrainConfig& c) {
  const bool transport = c.transport_kind != TransportKind::kNone && c.transport_weight > 0.0;
  return transport || c.lambda_mi > 0.0 || c.entropy_only_weight > 0.0;
}

}  // namespace

StepRecord pouf_step(const StepContext& ctx, ModelParams& params, PriorState& prior,
                     OptimizerState& optimizer) {
  const TrainConfig& cfg = ctx.config;
  const std::size_t rows = static_cast<std::size_t>(ctx.raw_batch.rows());
  if (rows == 0) throw ValidationError("pouf_step: empty batch");

  StepRecord rec;
  rec.iter = optimizer.iteration;
  rec.lr = lr_schedule(optimizer.iteration, cfg.eta0, cfg.gamma, cfg.alpha);

  grad::Graph g;
  const ModelNodes model = build_model_graph(g, ctx.raw_batch, ctx.raw_prototypes);
  const grad::Var probs = graph_predict(g, model.similarity, model.inv_temperature);
  const MiNodes mi = graph_mi_loss(g, probs);

  grad::Bindings bindings = params.bindings();
  std::optional<grad::Var> transport;
  if (cfg.transport_kind == TransportKind::kCt) {
    transport = graph_ct_loss(g, model.similarity, model.inv_temperature, prior.prior, rows,
                              cfg.cost_kind)
                    .value;
  } else if (cfg.transport_kind != TransportKind::kNone) {
    const grad::Var cost =
        graph_cost(g, model.similarity, cfg.cost_kind, rows, prior.prior.support_size());
    // Two-stage: solve the plan on the current cost with gradients blocked.
    grad::Graph probe = g;
    probe.set_output(cost);
    RowMatrixXd cost_value;
    try {
      cost_value = grad::evaluate(probe, bindings).to_matrix();
    } catch (const NumericError& e) {
      diverged(e.what(), ctx.batch_ids);
    }
    const auto batch_marginal = DiscreteDistribution::uniform(rows);
    RowMatrixXd plan;
    if (cfg.transport_kind == TransportKind::kOtExact) {
      plan = ot_exact(cost_value, batch_marginal, prior.prior).plan;
    } else {
      SinkhornOptions opts;
      opts.epsilon = cfg.sinkhorn_epsilon;
      opts.max_iter = cfg.sinkhorn_max_iter;
      opts.tol = cfg.sinkhorn_tol;
      plan = sinkhorn(cost_value, batch_marginal, prior.prior, opts).plan;
    }
    transport = graph_plan_cost(g, cost, plan);
  }

  grad::Var total = g.scale(cfg.lambda_mi, mi.value);
  if (transport) total = g.add(g.scale(cfg.transport_weight, *transport), total);
  if (cfg.entropy_only_weight > 0.0) {
    total = g.add(total, g.scale(cfg.entropy_only_weight, mi.conditional_entropy));
  }
  g.set_output(g.named(total, "loss_total"));

  grad::Evaluation values;
  try {
    values = grad::forward(g, bindings);
  } catch (const NumericError& e) {
    diverged(e.what(), ctx.batch_ids);
  }
  rec.loss_total = values.output().item();
  rec.loss_mi = values[mi.value].item();
  rec.loss_entropy = values[mi.conditional_entropy].item();
  if (transport) rec.loss_transport = values[*transport].item();
  if (!std::isfinite(rec.loss_total)) diverged("non-finite loss", ctx.batch_ids);

  if (has_objective(cfg)) {
    const auto trainable = trainable_set(cfg.tuning_mode);
    const grad::Gradients grads = grad::backward(g, values, trainable);
    for (const auto& [name, t] : grads) {
      if (!t.all_finite()) diverged("non-finite gradient for " + name, ctx.batch_ids);
    }
    sgd_momentum_step(bindings, grads, optimizer, rec.lr, cfg.momentum, trainable);
    params = ModelParams::from_bindings(bindings);
  } else {
    ++optimizer.iteration;
  }

  if (cfg.prior_mode == PriorMode::kLearned) {
    const RowMatrixXd sim = values[model.similarity].to_matrix();
    const double temperature = 1.0 / values[model.inv_temperature].item();
    prior = ema_update(prior, batch_prior_estimate(sim, temperature, prior.prior));
  }
  return rec;
}

namespace {

void maybe_monitor(StepRecord& rec, std::size_t step, std::size_t total, std::size_t every,
                   const Monitor& monitor, const ModelParams& params) {
  if (!monitor) return;
  if ((step + 1) % every == 0 || step + 1 == total) rec.accuracy = monitor(params);
}

void check_shapes(const Eigen::Ref<const RowMatrixXd>& dataset,
                  const Eigen::Ref<const RowMatrixXd>& raw_prototypes) {
  if (dataset.rows() == 0) throw ValidationError("dataset is empty");
  if (raw_prototypes.rows() == 0) throw ValidationError("no prototypes");
  if (dataset.cols() != raw_prototypes.cols()) {
    throw ShapeError("feature dim " + std::to_string(dataset.cols()) +
                     " != prototype dim " + std::to_string(raw_prototypes.cols()));
  }
}

}  // namespace

TrainResult train(const Eigen::Ref<const RowMatrixXd>& dataset,
                  const Eigen::Ref<const RowMatrixXd>& raw_prototypes, const TrainConfig& config,
                  const Monitor& monitor) {
  config.validate();
  check_shapes(dataset, raw_prototypes);
  const auto dim = static_cast<std::size_t>(dataset.cols());
  const auto classes = static_cast<std::size_t>(raw_prototypes.rows());

  TrainResult result{ModelParams::identity(dim, classes, config.initial_temperature), {}};
  PriorState prior = PriorState::uniform(classes, config.effective_prior_horizon());
  OptimizerState optimizer;
  BatchSampler sampler(static_cast<std::size_t>(dataset.rows()), config.batch_size, config.seed);
  const RowMatrixXd prototypes = raw_prototypes;

  result.report.records.reserve(config.iterations);
  for (std::size_t step = 0; step < config.iterations; ++step) {
    const std::vector<std::size_t> ids = sampler.next();
    const RowMatrixXd batch = gather_rows(dataset, ids);
    StepRecord rec = pouf_step({batch, ids, prototypes, config}, result.params, prior, optimizer);
    maybe_monitor(rec, step, config.iterations, config.eval_every, monitor, result.params);
    result.report.records.push_back(rec);
  }
  result.report.final_prior = prior.prior.to_vector();
  return result;
}

PseudoLabels upl_pseudo_label(const Eigen::Ref<const RowMatrixXd>& probs, std::size_t topk) {
  if (topk < 1) throw ValidationError("topk must be >= 1");
  const auto n = static_cast<std::size_t>(probs.rows());
  const auto classes = static_cast<std::size_t>(probs.cols());

  struct Candidate {
    double p;
    std::size_t sample;
    std::size_t cls;
  };
  std::vector<Candidate> all;
  all.reserve(n * classes);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < classes; ++k) {
      all.push_back({probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)), i, k});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
    if (a.p != b.p) return a.p > b.p;
    if (a.sample != b.sample) return a.sample < b.sample;
    return a.cls < b.cls;
  });

  std::vector<bool> taken(n, false);
  std::vector<std::size_t> count(classes, 0);
  std::vector<std::pair<std::size_t, int>> chosen;
  for (const Candidate& c : all) {
    if (taken[c.sample] || count[c.cls] >= topk) continue;
    taken[c.sample] = true;
    ++count[c.cls];
    chosen.emplace_back(c.sample, static_cast<int>(c.cls));
  }
  std::sort(chosen.begin(), chosen.end());

  PseudoLabels out;
  for (const auto& [i, y] : chosen) {
    out.indices.push_back(i);
    out.labels.push_back(y);
  }
  for (std::size_t k = 0; k < classes; ++k) {
    if (count[k] < topk) out.short_classes.push_back(k);
  }
  return out;
}

TrainResult upl_train(const Eigen::Ref<const RowMatrixXd>& dataset,
                      const Eigen::Ref<const RowMatrixXd>& raw_prototypes,
                      const TrainConfig& config, const Monitor& monitor) {
  TrainConfig cfg = config;
  cfg.method = Method::kUpl;
  cfg.tuning_mode = TuningMode::kPrompt;
  cfg.validate();
  check_shapes(dataset, raw_prototypes);
  const auto dim = static_cast<std::size_t>(dataset.cols());
  const auto classes = static_cast<std::size_t>(raw_prototypes.rows());

  TrainResult result{ModelParams::identity(dim, classes, cfg.initial_temperature), {}};
  const RowMatrixXd zero_shot = predict(encode(dataset, result.params),
                                        effective_prototypes(raw_prototypes, result.params),
                                        result.params.temperature());
  const PseudoLabels pseudo = upl_pseudo_label(zero_shot, cfg.upl_topk);
  result.report.upl_short_classes = pseudo.short_classes;
  if (pseudo.indices.empty()) throw ValidationError("pseudo-labeling selected no samples");

  const RowMatrixXd subset = gather_rows(dataset, pseudo.indices);
  const RowMatrixXd prototypes = raw_prototypes;
  const auto trainable = trainable_set(TuningMode::kPrompt);
  OptimizerState optimizer;
  BatchSampler sampler(pseudo.indices.size(), cfg.batch_size, cfg.seed);

  for (std::size_t step = 0; step < cfg.iterations; ++step) {
    const std::vector<std::size_t> local = sampler.next();
    std::vector<std::size_t> ids(local.size());
    std::vector<int> labels(local.size());
    for (std::size_t i = 0; i < local.size(); ++i) {
      ids[i] = pseudo.indices[local[i]];
      labels[i] = pseudo.labels[local[i]];
    }
    const RowMatrixXd batch = gather_rows(subset, local);

    StepRecord rec;
    rec.iter = optimizer.iteration;
    rec.lr = lr_schedule(optimizer.iteration, cfg.eta0, cfg.gamma, cfg.alpha);
    grad::Graph g;
    const ModelNodes model = build_model_graph(g, batch, prototypes);
    const grad::Var probs = graph_predict(g, model.similarity, model.inv_temperature);
    const grad::Var ce = graph_cross_entropy(g, probs, labels, classes);
    g.set_output(ce);
    grad::Bindings bindings = result.params.bindings();
    grad::Evaluation values;
    try {
      values = grad::forward(g, bindings);
    } catch (const NumericError& e) {
      diverged(e.what(), ids);
    }
    rec.loss_ce = values.output().item();
    rec.loss_total = rec.loss_ce;
    if (!std::isfinite(rec.loss_total)) diverged("non-finite loss", ids);
    const grad::Gradients grads = grad::backward(g, values, trainable);
    sgd_momentum_step(bindings, grads, optimizer, rec.lr, cfg.momentum, trainable);
    result.params = ModelParams::from_bindings(bindings);
    maybe_monitor(rec, step, cfg.iterations, cfg.eval_every, monitor, result.params);
    result.report.records.push_back(rec);
  }
  result.report.final_prior = DiscreteDistribution::uniform(classes).to_vector();
  return result;
}

TrainResult run_training(const Eigen::Ref<const RowMatrixXd>& dataset,
                         const Eigen::Ref<const RowMatrixXd>& raw_prototypes,
                         const TrainConfig& config, const Monitor& monitor) {
  if (config.method == Method::kUpl) return upl_train(dataset, raw_prototypes, config, monitor);
  return train(dataset, raw_prototypes, config, monitor);
}

}  // namespace pouf
