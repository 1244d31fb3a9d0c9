#include "pouf/model.hpp"

#include <cmath>
#include <cstring>
#include <unordered_set>

#include "pouf/loss_graph.hpp"
#include "pouf/losses.hpp"

namespace pouf {

const char* to_string(TuningMode mode) noexcept {
  return mode == TuningMode::kPrompt ? "prompt" : "model";
}

TuningMode tuning_mode_from_string(const std::string& s) {
  if (s == "model" || s == "model-tuning") return TuningMode::kModel;
  if (s == "prompt" || s == "prompt-tuning") return TuningMode::kPrompt;
  throw ValidationError("unknown tuning mode '" + s + "'");
}

ModelParams ModelParams::identity(std::size_t dim, std::size_t classes, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  const auto d = static_cast<Eigen::Index>(dim);
  return {RowMatrixXd::Identity(d, d), RowMatrixXd::Zero(static_cast<Eigen::Index>(classes), d),
          std::log(temperature)};
}

grad::Bindings ModelParams::bindings() const {
  return {{kAdapter, Tensor::from_matrix(adapter)},
          {kProtoOffsets, Tensor::from_matrix(proto_offsets)},
          {kLogTemperature, Tensor::scalar(log_temperature)}};
}

ModelParams ModelParams::from_bindings(const grad::Bindings& b) {
  return {b.at(kAdapter).to_matrix(), b.at(kProtoOffsets).to_matrix(),
          b.at(kLogTemperature).item()};
}

bool operator==(const ModelParams& a, const ModelParams& b) noexcept {
  auto same = [](const RowMatrixXd& x, const RowMatrixXd& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
  };
  return same(a.adapter, b.adapter) && same(a.proto_offsets, b.proto_offsets) &&
         std::memcmp(&a.log_temperature, &b.log_temperature, sizeof(double)) == 0;
}

std::set<std::string> trainable_set(TuningMode mode) {
  if (mode == TuningMode::kPrompt) {
    return {ModelParams::kProtoOffsets, ModelParams::kLogTemperature};
  }
  return {ModelParams::kAdapter, ModelParams::kProtoOffsets, ModelParams::kLogTemperature};
}

std::size_t trainable_count(TuningMode mode, std::size_t dim, std::size_t classes) {
  const std::size_t prompt = classes * dim + 1;
  return mode == TuningMode::kPrompt ? prompt : prompt + dim * dim;
}

FeatureBatch encode(const Eigen::Ref<const RowMatrixXd>& raw_features, const ModelParams& params) {
  if (raw_features.cols() != params.adapter.cols()) {
    throw ShapeError("encode: features have dim " + std::to_string(raw_features.cols()) +
                     ", adapter expects " + std::to_string(params.adapter.cols()));
  }
  FeatureBatch batch;
  batch.matrix = row_normalized(raw_features * params.adapter.transpose());
  batch.ids.resize(static_cast<std::size_t>(raw_features.rows()));
  for (std::size_t i = 0; i < batch.ids.size(); ++i) batch.ids[i] = i;
  return batch;
}

Prototypes effective_prototypes(const Eigen::Ref<const RowMatrixXd>& raw_prototypes,
                                const ModelParams& params, PrototypeSource source) {
  if (raw_prototypes.rows() != params.proto_offsets.rows() ||
      raw_prototypes.cols() != params.proto_offsets.cols()) {
    throw ShapeError("effective_prototypes: raw prototypes are " +
                     std::to_string(raw_prototypes.rows()) + "x" +
                     std::to_string(raw_prototypes.cols()) + ", offsets are " +
                     std::to_string(params.proto_offsets.rows()) + "x" +
                     std::to_string(params.proto_offsets.cols()));
  }
  Prototypes p;
  p.matrix = row_normalized(raw_prototypes + params.proto_offsets);
  p.source = source;
  return p;
}

RowMatrixXd predict(const FeatureBatch& features, const Prototypes& prototypes,
                    double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  RowMatrixXd logits = similarity(features.matrix, prototypes.matrix) / temperature;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - mx).exp();
    logits.row(r) /= logits.row(r).sum();
  }
  return logits;
}

Prototypes select_decoder_rows(const Eigen::Ref<const RowMatrixXd>& vocab,
                               const LabelWordMap& map) {
  if (map.rows.empty()) throw ValidationError("label-word map is empty");
  std::unordered_set<std::size_t> seen;
  RowMatrixXd gathered(static_cast<Eigen::Index>(map.rows.size()), vocab.cols());
  for (std::size_t k = 0; k < map.rows.size(); ++k) {
    const std::size_t row = map.rows[k];
    if (row >= static_cast<std::size_t>(vocab.rows())) {
      throw ValidationError("label word row " + std::to_string(row) + " outside vocabulary of " +
                            std::to_string(vocab.rows()));
    }
    if (!seen.insert(row).second) {
      throw ValidationError("label word row " + std::to_string(row) + " mapped twice");
    }
    gathered.row(static_cast<Eigen::Index>(k)) = vocab.row(static_cast<Eigen::Index>(row));
  }
  Prototypes p;
  p.matrix = row_normalized(gathered);
  p.source = PrototypeSource::kDecoderRows;
  return p;
}

ModelNodes build_model_graph(grad::Graph& g, const Eigen::Ref<const RowMatrixXd>& raw_features,
                             const Eigen::Ref<const RowMatrixXd>& raw_prototypes) {
  const grad::Var adapter = g.parameter(ModelParams::kAdapter);
  const grad::Var offsets = g.parameter(ModelParams::kProtoOffsets);
  const grad::Var log_t = g.parameter(ModelParams::kLogTemperature);

  const grad::Var x = g.constant(Tensor::from_matrix(raw_features), "raw_features");
  const grad::Var w = g.constant(Tensor::from_matrix(raw_prototypes), "raw_prototypes");
  const grad::Var features =
      g.named(g.row_l2_normalize(g.matmul(x, g.transpose(adapter))), "features");
  const grad::Var prototypes = g.named(g.row_l2_normalize(g.add(w, offsets)), "prototypes");
  const grad::Var sim = graph_similarity(g, features, prototypes);
  const grad::Var inv_t = g.named(g.exp(g.scale(-1.0, log_t)), "inv_temperature");
  return {features, prototypes, sim, inv_t};
}

}  // namespace pouf
