#include "pouf/synthetic.hpp"

#include <cmath>
#include <random>
#include <string>

#include "pouf/errors.hpp"

namespace pouf {
namespace {

using Index = Eigen::Index;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal() { return normal_(engine_); }
  VectorXd normal_vector(Index n) {
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }
  VectorXd unit_vector(Index n) {
    VectorXd v = normal_vector(n);
    while (v.norm() < 1e-12) v = normal_vector(n);
    return v.normalized();
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

RowMatrixXd sample_class_means(Rng& rng, std::size_t classes, std::size_t dim) {
  const std::size_t max_tries = 10 * classes * 100;
  RowMatrixXd means(static_cast<Index>(classes), static_cast<Index>(dim));
  std::size_t accepted = 0;
  for (std::size_t tries = 0; accepted < classes; ++tries) {
    if (tries >= max_tries) {
      throw ValidationError("could not place " + std::to_string(classes) +
                            " class means with pairwise cosine < 0.5 in dimension " +
                            std::to_string(dim));
    }
    const VectorXd candidate = rng.unit_vector(static_cast<Index>(dim));
    bool ok = true;
    for (std::size_t k = 0; k < accepted && ok; ++k) {
      ok = means.row(static_cast<Index>(k)).dot(candidate) < 0.5;
    }
    if (ok) means.row(static_cast<Index>(accepted++)) = candidate.transpose();
  }
  return means;
}

// Cayley transform of a random skew-symmetric matrix, scaled so the largest principal
// rotation angle equals `angle`.
RowMatrixXd random_rotation(Rng& rng, std::size_t dim, double angle) {
  const auto d = static_cast<Index>(dim);
  if (angle == 0.0 || dim < 2) return RowMatrixXd::Identity(d, d);
  RowMatrixXd g(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) g(i, j) = rng.normal();
  }
  RowMatrixXd skew = g - g.transpose();
  const double spectral = Eigen::JacobiSVD<RowMatrixXd>(skew).singularValues()[0];
  skew *= std::tan(angle / 2.0) / spectral;
  const RowMatrixXd eye = RowMatrixXd::Identity(d, d);
  return (eye - skew).partialPivLu().solve(eye + skew);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (classes < 1) throw ValidationError("classes must be >= 1");
  if (dim < 1) throw ValidationError("dim must be >= 1");
  if (classes > samples) throw ValidationError("need at least as many samples as classes");
  if (!(cluster_spread >= 0.0) || !(proto_noise >= 0.0) || !(bias_scale >= 0.0) ||
      !(rotation_angle_scale >= 0.0)) {
    throw ValidationError("spreads, noise and shift scales must be >= 0");
  }
  if (rotation_angle_scale >= 3.14159) {
    throw ValidationError("rotation_angle_scale must be below pi");
  }
  if (!class_proportions.empty()) {
    if (class_proportions.size() != classes) {
      throw ValidationError("class_proportions has " + std::to_string(class_proportions.size()) +
                            " entries for " + std::to_string(classes) + " classes");
    }
    double total = 0.0;
    for (double p : class_proportions) {
      if (!(p >= 0.0)) throw ValidationError("class proportions must be >= 0");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError("class_proportions sum to " + std::to_string(total) + ", not 1");
    }
  }
}

std::vector<double> SyntheticSpec::proportions() const {
  if (!class_proportions.empty()) return class_proportions;
  return std::vector<double>(classes, 1.0 / static_cast<double>(classes));
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto d = static_cast<Index>(spec.dim);
  const auto k_count = static_cast<Index>(spec.classes);
  const auto m_count = static_cast<Index>(spec.samples);

  SyntheticDataset out;
  out.class_means = sample_class_means(rng, spec.classes, spec.dim);

  const RowMatrixXd rotation = random_rotation(rng, spec.dim, spec.rotation_angle_scale);
  const VectorXd bias = spec.bias_scale * rng.unit_vector(d);
  out.raw_prototypes.resize(k_count, d);
  for (Index k = 0; k < k_count; ++k) {
    const VectorXd mean = out.class_means.row(k).transpose();
    out.raw_prototypes.row(k) =
        (rotation * mean + bias + spec.proto_noise * rng.normal_vector(d)).transpose();
  }

  const std::vector<double> props = spec.proportions();
  std::vector<double> cdf(props.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < props.size(); ++k) cdf[k] = (acc += props[k]);

  out.labels.resize(spec.samples);
  out.raw_features.resize(m_count, d);
  for (Index i = 0; i < m_count; ++i) {
    const double u = rng.uniform() * acc;
    std::size_t y = 0;
    while (y + 1 < cdf.size() && u >= cdf[y]) ++y;
    out.labels[static_cast<std::size_t>(i)] = static_cast<int>(y);
    out.raw_features.row(i) = out.class_means.row(static_cast<Index>(y)) +
                              spec.cluster_spread * rng.normal_vector(d).transpose();
  }
  return out;
}

}  // namespace pouf
