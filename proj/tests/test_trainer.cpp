#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "pouf/errors.hpp"
#include "pouf/eval_report.hpp"
#include "pouf/synthetic.hpp"
#include "pouf/trainer.hpp"

using namespace pouf;

namespace {

SyntheticDataset small_benchmark(std::uint64_t seed, std::size_t classes = 4) {
  SyntheticSpec spec;
  spec.classes = classes;
  spec.dim = 12;
  spec.samples = 240;
  spec.seed = seed;
  return generate_synthetic(spec);
}

TrainConfig quick_config() {
  TrainConfig c;
  c.batch_size = 32;
  c.iterations = 40;
  return c;
}

double accuracy_of(const ModelParams& p, const SyntheticDataset& d) {
  const RowMatrixXd probs = predict(encode(d.raw_features, p),
                                    effective_prototypes(d.raw_prototypes, p), p.temperature());
  return evaluate_predictions(probs, d.labels).accuracy;
}

bool same_records(const RunReport& a, const RunReport& b) {
  if (a.records.size() != b.records.size() || a.final_prior != b.final_prior) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const StepRecord& x = a.records[i];
    const StepRecord& y = b.records[i];
    const bool acc_same = (std::isnan(x.accuracy) && std::isnan(y.accuracy)) || x.accuracy == y.accuracy;
    if (x.iter != y.iter || x.lr != y.lr || x.loss_total != y.loss_total ||
        x.loss_transport != y.loss_transport || x.loss_mi != y.loss_mi || !acc_same) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("lr_schedule examples") {
  CHECK(lr_schedule(0, 0.3, 2e-4, 0.75) == 0.3);
  for (std::size_t it : {1u, 10u, 10000u}) CHECK(lr_schedule(it, 0.3, 0.0, 0.75) == 0.3);
  CHECK(lr_schedule(5000, 1e-3, 2e-4, 0.75) ==
        doctest::Approx(1e-3 * std::pow(2.0, -0.75)).epsilon(1e-14));
}

TEST_CASE("sgd_momentum_step examples") {
  const std::set<std::string> trainable{"p"};
  {
    grad::Bindings p{{"p", Tensor::vector({1.0, -2.0})}};
    OptimizerState s;
    sgd_momentum_step(p, {{"p", Tensor::vector({0.5, 0.25})}}, s, 1.0, 0.0, trainable);
    CHECK(p.at("p") == Tensor::vector({0.5, -2.25}));
    CHECK(s.iteration == 1);
  }
  {
    grad::Bindings p{{"p", Tensor::vector({1.0, -2.0})}};
    OptimizerState s;
    sgd_momentum_step(p, {{"p", Tensor::vector({0.0, 0.0})}}, s, 0.1, 0.9, trainable);
    CHECK(p.at("p") == Tensor::vector({1.0, -2.0}));
  }
  {
    grad::Bindings p{{"p", Tensor::scalar(0.0)}};
    OptimizerState s;
    sgd_momentum_step(p, {{"p", Tensor::scalar(1.0)}}, s, 0.1, 0.9, trainable);
    CHECK(p.at("p").item() == doctest::Approx(-0.1).epsilon(1e-15));
    sgd_momentum_step(p, {{"p", Tensor::scalar(1.0)}}, s, 0.1, 0.9, trainable);
    CHECK(p.at("p").item() == doctest::Approx(-0.29).epsilon(1e-15));
  }
  {
    grad::Bindings p{{"p", Tensor::scalar(0.0)}, {"q", Tensor::scalar(0.0)}};
    OptimizerState s;
    CHECK_THROWS_AS(sgd_momentum_step(p, {{"q", Tensor::scalar(1.0)}}, s, 0.1, 0.9, trainable),
                    ValidationError);
  }
}

TEST_CASE("config validation and defaults") {
  const TrainConfig c;
  CHECK(c.transport_kind == TransportKind::kCt);
  CHECK(c.lambda_mi == 0.3);
  CHECK(c.momentum == 0.9);
  CHECK(c.batch_size == 96);
  CHECK(c.gamma == 2e-4);
  CHECK(c.alpha == 0.75);
  CHECK(c.transport_weight == 1.0);
  CHECK(c.cost_kind == CostKind::kCosineDistance);
  TrainConfig bad = c;
  bad.lambda_mi = -1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = c;
  bad.method = Method::kUpl;
  bad.upl_topk = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK(transport_kind_from_string("ot-sinkhorn") == TransportKind::kOtSinkhorn);
  CHECK_THROWS_AS(transport_kind_from_string("ot-fast"), ValidationError);
}

TEST_CASE("batch sampler covers every index per epoch and wraps around") {
  BatchSampler s(10, 4, 7);
  std::multiset<std::size_t> seen;
  for (int i = 0; i < 5; ++i) {
    for (std::size_t id : s.next()) seen.insert(id);
  }
  for (std::size_t i = 0; i < 10; ++i) CHECK(seen.count(i) == 2);

  BatchSampler small(3, 8, 1);
  const auto batch = small.next();
  CHECK(batch.size() == 8);
  for (std::size_t id : batch) CHECK(id < 3);

  BatchSampler a(50, 7, 3), b(50, 7, 3);
  for (int i = 0; i < 20; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("zero objective leaves parameters bitwise unchanged") {
  const SyntheticDataset d = small_benchmark(1);
  TrainConfig c = quick_config();
  c.transport_kind = TransportKind::kNone;
  c.lambda_mi = 0.0;
  const TrainResult r = train(d.raw_features, d.raw_prototypes, c);
  CHECK(r.params == ModelParams::identity(12, 4, c.initial_temperature));
  CHECK(r.report.records.size() == c.iterations);

  c.transport_kind = TransportKind::kCt;
  c.transport_weight = 0.0;
  CHECK(train(d.raw_features, d.raw_prototypes, c).params ==
        ModelParams::identity(12, 4, c.initial_temperature));
}

TEST_CASE("iterations = 0 returns the initial parameters") {
  const SyntheticDataset d = small_benchmark(2);
  TrainConfig c = quick_config();
  c.iterations = 0;
  const TrainResult r = train(d.raw_features, d.raw_prototypes, c);
  CHECK(r.params == ModelParams::identity(12, 4, c.initial_temperature));
  CHECK(r.report.records.empty());
}

TEST_CASE("a small step decreases the loss on a separable toy") {
  RowMatrixXd raw_f(4, 2), raw_w(2, 2);
  raw_f << 1, 0.1, 0.9, -0.2, -0.1, 1, 0.2, 0.8;
  raw_w << 1, 0.5, 0.4, 1;
  TrainConfig c;
  c.initial_temperature = 0.5;
  c.eta0 = 1e-3;
  c.momentum = 0.0;
  const std::vector<std::size_t> ids{0, 1, 2, 3};
  ModelParams p = ModelParams::identity(2, 2, c.initial_temperature);
  PriorState prior = PriorState::uniform(2, 10);
  OptimizerState opt;
  const StepRecord first = pouf_step({raw_f, ids, raw_w, c}, p, prior, opt);
  PriorState prior2 = PriorState::uniform(2, 10);
  OptimizerState opt2 = opt;
  ModelParams q = p;
  const StepRecord second = pouf_step({raw_f, ids, raw_w, c}, q, prior2, opt2);
  CHECK(second.loss_total < first.loss_total);
}

TEST_CASE("mi gradient step decreases mi_loss from a one-hot-adverse start") {
  // Every feature sits on prototype 0, so predictions collapse onto one class.
  RowMatrixXd raw_f(4, 2), raw_w(2, 2);
  raw_f << 1, 0.05, 1, -0.05, 0.98, 0.1, 0.99, -0.1;
  raw_w << 1, 0, 0.2, 1;
  TrainConfig c;
  c.transport_kind = TransportKind::kNone;
  c.lambda_mi = 1.0;
  c.momentum = 0.0;
  c.initial_temperature = 0.2;
  const std::vector<std::size_t> ids{0, 1, 2, 3};
  bool decreased = false;
  for (double lr = 1e-1; lr >= 1e-8 && !decreased; lr /= 10) {
    c.eta0 = lr;
    ModelParams p = ModelParams::identity(2, 2, c.initial_temperature);
    PriorState prior = PriorState::uniform(2, 10);
    OptimizerState opt;
    const StepRecord before = pouf_step({raw_f, ids, raw_w, c}, p, prior, opt);
    OptimizerState fresh;
    const StepRecord after = pouf_step({raw_f, ids, raw_w, c}, p, prior, fresh);
    decreased = after.loss_mi < before.loss_mi;
  }
  CHECK(decreased);
}

TEST_CASE("runs are deterministic and record the loss decomposition") {
  const SyntheticDataset d = small_benchmark(3);
  TrainConfig c = quick_config();
  c.prior_mode = PriorMode::kLearned;
  c.eval_every = 10;
  const Monitor monitor = [&d](const ModelParams& p) { return accuracy_of(p, d); };
  const TrainResult a = train(d.raw_features, d.raw_prototypes, c, monitor);
  const TrainResult b = train(d.raw_features, d.raw_prototypes, c, monitor);
  CHECK(a.params == b.params);
  CHECK(same_records(a.report, b.report));
  CHECK(a.report.records.size() == c.iterations);
  CHECK(a.report.final_prior.size() == 4);
  for (const StepRecord& r : a.report.records) {
    CHECK(std::abs(r.loss_total - (c.transport_weight * r.loss_transport + c.lambda_mi * r.loss_mi)) <=
          1e-12);
    CHECK(std::isnan(r.accuracy) == ((r.iter + 1) % 10 != 0));
  }
  c.seed = 9;
  CHECK_FALSE(train(d.raw_features, d.raw_prototypes, c).params == a.params);
}

TEST_CASE("prompt tuning leaves the adapter bitwise unchanged") {
  const SyntheticDataset d = small_benchmark(4);
  TrainConfig c = quick_config();
  c.tuning_mode = TuningMode::kPrompt;
  const TrainResult r = train(d.raw_features, d.raw_prototypes, c);
  const ModelParams init = ModelParams::identity(12, 4, c.initial_temperature);
  CHECK(r.params.adapter == init.adapter);
  CHECK_FALSE(r.params.proto_offsets == init.proto_offsets);

  c.tuning_mode = TuningMode::kModel;
  CHECK_FALSE(train(d.raw_features, d.raw_prototypes, c).params.adapter == init.adapter);
}

TEST_CASE("transport variants and tent mode run") {
  const SyntheticDataset d = small_benchmark(5);
  for (TransportKind kind : {TransportKind::kOtSinkhorn, TransportKind::kOtExact}) {
    TrainConfig c = quick_config();
    c.iterations = 10;
    c.transport_kind = kind;
    const TrainResult r = train(d.raw_features, d.raw_prototypes, c);
    for (const StepRecord& rec : r.report.records) {
      CHECK(std::isfinite(rec.loss_total));
      CHECK(rec.loss_transport >= 0.0);
    }
  }
  TrainConfig tent = quick_config();
  tent.transport_kind = TransportKind::kNone;
  tent.lambda_mi = 0.0;
  tent.entropy_only_weight = 0.3;
  tent.tuning_mode = TuningMode::kPrompt;
  const TrainResult r = train(d.raw_features, d.raw_prototypes, tent);
  CHECK(r.report.records.back().loss_total ==
        doctest::Approx(0.3 * r.report.records.back().loss_entropy).epsilon(1e-12));
  CHECK_FALSE(r.params == ModelParams::identity(12, 4, tent.initial_temperature));
}

TEST_CASE("divergence is reported with batch ids") {
  const SyntheticDataset d = small_benchmark(6);
  TrainConfig c = quick_config();
  c.eta0 = 1e9;
  try {
    train(d.raw_features, d.raw_prototypes, c);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("batch ids:") != std::string::npos);
  }
}

TEST_CASE("upl_pseudo_label examples") {
  RowMatrixXd onehot = RowMatrixXd::Zero(5, 3);
  const int y[] = {2, 0, 2, 1, 0};
  for (int i = 0; i < 5; ++i) onehot(i, y[i]) = 1.0;
  const PseudoLabels a = upl_pseudo_label(onehot, 1);
  CHECK(a.indices.size() == 3);
  for (std::size_t j = 0; j < a.indices.size(); ++j) CHECK(a.labels[j] == y[a.indices[j]]);
  CHECK(a.short_classes.empty());

  RowMatrixXd single(4, 1);
  single << 1, 1, 1, 1;
  const PseudoLabels b = upl_pseudo_label(single, 2);
  CHECK(b.indices == std::vector<std::size_t>{0, 1});

  RowMatrixXd crafted(6, 2);
  crafted << 0.9, 0.1, 0.6, 0.4, 0.55, 0.45, 0.2, 0.8, 0.7, 0.3, 0.45, 0.55;
  const PseudoLabels c = upl_pseudo_label(crafted, 2);
  const auto want = oracle::topk_pseudo_labels(oracle::to_table(crafted), 2);
  REQUIRE(c.indices.size() == want.size());
  for (std::size_t j = 0; j < want.size(); ++j) {
    CHECK(c.indices[j] == want[j].first);
    CHECK(c.labels[j] == want[j].second);
  }

  const PseudoLabels short_run = upl_pseudo_label(onehot, 3);
  CHECK(short_run.short_classes == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(upl_pseudo_label(onehot, 0), ValidationError);
}

TEST_CASE("upl_pseudo_label matches the scan oracle on random matrices") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 3 + trial % 12, k = 1 + trial % 4;
    RowMatrixXd p(n, k);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
    for (Eigen::Index r = 0; r < n; ++r) p.row(r) /= p.row(r).sum();
    const std::size_t topk = 1 + static_cast<std::size_t>(trial % 3);
    const PseudoLabels got = upl_pseudo_label(p, topk);
    const auto want = oracle::topk_pseudo_labels(oracle::to_table(p), topk);
    REQUIRE(got.indices.size() == want.size());
    for (std::size_t j = 0; j < want.size(); ++j) {
      CHECK(got.indices[j] == want[j].first);
      CHECK(got.labels[j] == want[j].second);
    }
  }
}

TEST_CASE("upl_train keeps the adapter and does not hurt separated data") {
  SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 8;
  spec.samples = 150;
  spec.cluster_spread = 0.02;
  spec.rotation_angle_scale = 0.0;
  spec.bias_scale = 0.0;
  spec.proto_noise = 0.0;
  const SyntheticDataset d = generate_synthetic(spec);
  TrainConfig c = quick_config();
  c.method = Method::kUpl;
  c.upl_topk = 16;
  const TrainResult r = run_training(d.raw_features, d.raw_prototypes, c);
  const ModelParams init = ModelParams::identity(8, 3, c.initial_temperature);
  CHECK(r.params.adapter == init.adapter);
  CHECK(accuracy_of(r.params, d) >= accuracy_of(init, d));
  CHECK(r.report.records.size() == c.iterations);
  for (const StepRecord& rec : r.report.records) CHECK(rec.loss_total == rec.loss_ce);
}
