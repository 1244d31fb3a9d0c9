#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pouf/types.hpp"

namespace pouf {

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from the labels
  RowMatrix<long> confusion;               // rows: true class, cols: predicted class
  double mean_correct_cosine = 0.0;        // NaN unless computed from features
};

/// Argmax with ties broken towards the lowest index.
std::vector<int> argmax_rows(const Eigen::Ref<const RowMatrixXd>& m);

/// Accuracy, per-class accuracy and confusion of argmax predictions.
EvalResult evaluate_predictions(const Eigen::Ref<const RowMatrixXd>& probs,
                                std::span<const int> labels);

/// Mean over samples of cos(f_i, w_{label_i}) for unit-norm rows.
double mean_correct_cosine(const Eigen::Ref<const RowMatrixXd>& features,
                           const Eigen::Ref<const RowMatrixXd>& prototypes,
                           std::span<const int> labels);

struct Histogram {
  std::vector<double> edges;  // bins + 1 values, linear on [-1, 1]
  std::vector<std::size_t> counts;
};

/// Histogram of cos(f_i, w_{label_i}). Bins are right-closed, (a, b], except the first
/// which also holds -1.
Histogram cosine_histogram(const Eigen::Ref<const RowMatrixXd>& features,
                           const Eigen::Ref<const RowMatrixXd>& prototypes,
                           std::span<const int> labels, std::size_t bins);

/// For each prototype, the k features with highest cosine, descending; ties by index.
RowMatrix<long> knn_of_prototypes(const Eigen::Ref<const RowMatrixXd>& features,
                                  const Eigen::Ref<const RowMatrixXd>& prototypes, std::size_t k);

/// Projection onto the top two principal components; each axis is signed so that its
/// largest-magnitude loading is positive.
RowMatrixXd pca_2d(const Eigen::Ref<const RowMatrixXd>& points);

std::string histogram_csv(const Histogram& h);
std::string knn_csv(const RowMatrix<long>& knn, const Eigen::Ref<const RowMatrixXd>& features,
                    const Eigen::Ref<const RowMatrixXd>& prototypes,
                    std::span<const std::size_t> feature_ids);
std::string pca_csv(const Eigen::Ref<const RowMatrixXd>& coords,
                    std::span<const std::size_t> ids, std::span<const int> labels);
std::string metrics_json(const EvalResult& r);

}  // namespace pouf
