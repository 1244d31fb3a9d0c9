#include "pouf/eval_report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pouf/errors.hpp"

namespace pouf {
namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw ShapeError(std::to_string(labels.size()) + " labels for " + std::to_string(rows) +
                     " samples");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ValidationError("label " + std::to_string(labels[i]) + " at index " +
                            std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

std::vector<int> argmax_rows(const Eigen::Ref<const RowMatrixXd>& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c) {
      if (m(r, c) > m(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

EvalResult evaluate_predictions(const Eigen::Ref<const RowMatrixXd>& probs,
                                std::span<const int> labels) {
  const auto classes = static_cast<std::size_t>(probs.cols());
  check_labels(labels, static_cast<std::size_t>(probs.rows()), classes);
  if (labels.empty()) throw ValidationError("cannot evaluate an empty sample");
  const std::vector<int> pred = argmax_rows(probs);

  EvalResult r;
  r.confusion = RowMatrix<long>::Zero(probs.cols(), probs.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) r.confusion(labels[i], pred[i]) += 1;
  r.accuracy = static_cast<double>(r.confusion.trace()) / static_cast<double>(labels.size());
  r.per_class_accuracy.resize(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    const long total = r.confusion.row(static_cast<Eigen::Index>(k)).sum();
    r.per_class_accuracy[k] =
        total == 0 ? std::numeric_limits<double>::quiet_NaN()
                   : static_cast<double>(r.confusion(static_cast<Eigen::Index>(k),
                                                     static_cast<Eigen::Index>(k))) /
                         static_cast<double>(total);
  }
  r.mean_correct_cosine = std::numeric_limits<double>::quiet_NaN();
  return r;
}

double mean_correct_cosine(const Eigen::Ref<const RowMatrixXd>& features,
                           const Eigen::Ref<const RowMatrixXd>& prototypes,
                           std::span<const int> labels) {
  check_labels(labels, static_cast<std::size_t>(features.rows()),
               static_cast<std::size_t>(prototypes.rows()));
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total += features.row(static_cast<Eigen::Index>(i)).dot(prototypes.row(labels[i]));
  }
  return total / static_cast<double>(labels.size());
}

Histogram cosine_histogram(const Eigen::Ref<const RowMatrixXd>& features,
                           const Eigen::Ref<const RowMatrixXd>& prototypes,
                           std::span<const int> labels, std::size_t bins) {
  if (bins < 1) throw ValidationError("histogram needs at least one bin");
  check_labels(labels, static_cast<std::size_t>(features.rows()),
               static_cast<std::size_t>(prototypes.rows()));
  Histogram h;
  h.edges.resize(bins + 1);
  const double width = 2.0 / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = -1.0 + width * static_cast<double>(b);
  h.edges.back() = 1.0;
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double c = std::clamp(
        features.row(static_cast<Eigen::Index>(i)).dot(prototypes.row(labels[i])), -1.0, 1.0);
    // First edge >= c marks the bin's upper bound.
    const auto it = std::lower_bound(h.edges.begin() + 1, h.edges.end(), c);
    const auto bin = static_cast<std::size_t>(std::distance(h.edges.begin() + 1, it));
    h.counts[std::min(bin, bins - 1)] += 1;
  }
  return h;
}

RowMatrix<long> knn_of_prototypes(const Eigen::Ref<const RowMatrixXd>& features,
                                  const Eigen::Ref<const RowMatrixXd>& prototypes,
                                  std::size_t k) {
  const auto m = static_cast<std::size_t>(features.rows());
  if (k > m) {
    throw ValidationError("k = " + std::to_string(k) + " exceeds " + std::to_string(m) +
                          " features");
  }
  const RowMatrixXd sim = features * prototypes.transpose();
  RowMatrix<long> out(prototypes.rows(), static_cast<Eigen::Index>(k));
  std::vector<std::size_t> order(m);
  for (Eigen::Index p = 0; p < prototypes.rows(); ++p) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return sim(static_cast<Eigen::Index>(a), p) > sim(static_cast<Eigen::Index>(b), p);
    });
    for (std::size_t r = 0; r < k; ++r) {
      out(p, static_cast<Eigen::Index>(r)) = static_cast<long>(order[r]);
    }
  }
  return out;
}

RowMatrixXd pca_2d(const Eigen::Ref<const RowMatrixXd>& points) {
  if (points.rows() == 0) return RowMatrixXd(0, 2);
  const Eigen::RowVectorXd mean = points.colwise().mean();
  const RowMatrixXd centered = points.rowwise() - mean;
  const RowMatrixXd cov = centered.transpose() * centered / static_cast<double>(points.rows());
  Eigen::SelfAdjointEigenSolver<RowMatrixXd> solver(cov);
  RowMatrixXd axes(points.cols(), 2);
  for (Eigen::Index a = 0; a < 2; ++a) {
    const Eigen::Index col = points.cols() - 1 - a;  // eigenvalues ascend
    if (col < 0) {
      axes.col(a).setZero();
      continue;
    }
    VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v[idx] < 0) v = -v;
    axes.col(a) = v;
  }
  return centered * axes;
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os << "edge,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) os << fmt(h.edges[b]) << ',' << h.counts[b] << '\n';
  return os.str();
}

std::string knn_csv(const RowMatrix<long>& knn, const Eigen::Ref<const RowMatrixXd>& features,
                    const Eigen::Ref<const RowMatrixXd>& prototypes,
                    std::span<const std::size_t> feature_ids) {
  std::ostringstream os;
  os << "prototype_id,rank,feature_id,cosine\n";
  for (Eigen::Index p = 0; p < knn.rows(); ++p) {
    for (Eigen::Index r = 0; r < knn.cols(); ++r) {
      const long i = knn(p, r);
      const double c = features.row(i).dot(prototypes.row(p));
      os << p << ',' << r << ',' << feature_ids[static_cast<std::size_t>(i)] << ',' << fmt(c)
         << '\n';
    }
  }
  return os.str();
}

std::string pca_csv(const Eigen::Ref<const RowMatrixXd>& coords,
                    std::span<const std::size_t> ids, std::span<const int> labels) {
  std::ostringstream os;
  os << "id,x,y,label\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const auto s = static_cast<std::size_t>(i);
    os << ids[s] << ',' << fmt(coords(i, 0)) << ',' << fmt(coords(i, 1)) << ','
       << (labels.empty() ? -1 : labels[s]) << '\n';
  }
  return os.str();
}

std::string metrics_json(const EvalResult& r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  nlohmann::json per_class = nlohmann::json::array();
  for (double a : r.per_class_accuracy) {
    per_class.push_back(std::isnan(a) ? nlohmann::json(nullptr) : nlohmann::json(a));
  }
  j["per_class_accuracy"] = per_class;
  nlohmann::json confusion = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < r.confusion.cols(); ++c) row.push_back(r.confusion(i, c));
    confusion.push_back(row);
  }
  j["confusion"] = confusion;
  j["mean_correct_cosine"] =
      std::isnan(r.mean_correct_cosine) ? nlohmann::json(nullptr) : nlohmann::json(r.mean_correct_cosine);
  return j.dump(2) + "\n";
}

}  // namespace pouf
