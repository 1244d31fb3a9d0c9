#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "pouf/errors.hpp"
#include "pouf/graph.hpp"
#include "pouf/types.hpp"

namespace pouf {

enum class PrototypeSource { kPromptEmbeddings, kDecoderRows, kSynthetic };

/// Unit-norm class representatives, one row per class.
struct Prototypes {
  RowMatrixXd matrix;
  PrototypeSource source = PrototypeSource::kSynthetic;
  std::vector<std::string> class_names;

  std::size_t classes() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
};

/// Unit-norm target features with record identifiers.
struct FeatureBatch {
  RowMatrixXd matrix;
  std::vector<std::size_t> ids;

  std::size_t size() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
};

enum class TuningMode { kModel, kPrompt };

const char* to_string(TuningMode mode) noexcept;
TuningMode tuning_mode_from_string(const std::string& s);

/// Trainable state: a feature-side linear adapter, additive prototype offsets (the
/// soft-prompt analog) and the log of the softmax temperature.
struct ModelParams {
  RowMatrixXd adapter;        // d x d
  RowMatrixXd proto_offsets;  // K x d
  double log_temperature = 0.0;

  static constexpr const char* kAdapter = "adapter";
  static constexpr const char* kProtoOffsets = "proto_offsets";
  static constexpr const char* kLogTemperature = "log_temperature";

  /// Zero-shot parameters: identity adapter, zero offsets.
  static ModelParams identity(std::size_t dim, std::size_t classes, double temperature);

  double temperature() const { return std::exp(log_temperature); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(adapter.rows()); }
  std::size_t classes() const noexcept { return static_cast<std::size_t>(proto_offsets.rows()); }

  grad::Bindings bindings() const;
  static ModelParams from_bindings(const grad::Bindings& b);

  friend bool operator==(const ModelParams& a, const ModelParams& b) noexcept;
};

/// Parameter names the optimizer may touch in each mode.
std::set<std::string> trainable_set(TuningMode mode);
std::size_t trainable_count(TuningMode mode, std::size_t dim, std::size_t classes);

/// Divides every row by its L2 norm; rows with norm below kMinRowNorm are rejected.
template <typename Derived>
RowMatrix<typename Derived::Scalar> row_normalized(const Eigen::MatrixBase<Derived>& m) {
  RowMatrix<typename Derived::Scalar> out = m;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const auto norm = out.row(r).norm();
    if (!(norm >= kMinRowNorm)) {
      throw NumericError("row " + std::to_string(r) + " has norm below " +
                         std::to_string(kMinRowNorm));
    }
    out.row(r) /= norm;
  }
  return out;
}

/// row_normalize(raw * adapterᵀ).
FeatureBatch encode(const Eigen::Ref<const RowMatrixXd>& raw_features, const ModelParams& params);

/// row_normalize(raw + offsets).
Prototypes effective_prototypes(const Eigen::Ref<const RowMatrixXd>& raw_prototypes,
                                const ModelParams& params,
                                PrototypeSource source = PrototypeSource::kSynthetic);

/// Row-wise softmax of cos(f_i, w_k) / T.
RowMatrixXd predict(const FeatureBatch& features, const Prototypes& prototypes,
                    double temperature);

/// Class index -> vocabulary row. Must be injective.
struct LabelWordMap {
  std::vector<std::size_t> rows;
};

/// Gathers the mapped vocabulary rows (decoder-head weights) as class prototypes.
Prototypes select_decoder_rows(const Eigen::Ref<const RowMatrixXd>& vocab,
                               const LabelWordMap& map);

/// The encode -> prototypes -> similarity front of every training graph.
struct ModelNodes {
  grad::Var features;         // M x d, unit rows
  grad::Var prototypes;       // K x d, unit rows
  grad::Var similarity;       // M x K
  grad::Var inv_temperature;  // exp(-log_temperature)
};

ModelNodes build_model_graph(grad::Graph& g, const Eigen::Ref<const RowMatrixXd>& raw_features,
                             const Eigen::Ref<const RowMatrixXd>& raw_prototypes);

}  // namespace pouf
