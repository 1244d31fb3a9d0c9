#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pouf/types.hpp"

namespace pouf {

/// Dense row-major array of doubles with rank 0, 1 or 2.
///
/// A rank-0 tensor is a scalar, rank-1 a vector that views as a 1 x n row, rank-2 a matrix.
/// `matrix()` exposes the two-dimensional view used by every kernel.
class Tensor {
 public:
  using Map = Eigen::Map<RowMatrixXd>;
  using ConstMap = Eigen::Map<const RowMatrixXd>;

  Tensor() : data_(1, 0.0) {}
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor from_matrix(const Eigen::Ref<const RowMatrixXd>& m);
  static Tensor from_vector(const Eigen::Ref<const VectorXd>& v);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const noexcept { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept {
    return rank() == 0 ? 1 : shape_.back();
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  ConstMap matrix() const {
    return ConstMap(data_.data(), static_cast<Eigen::Index>(rows()),
                    static_cast<Eigen::Index>(cols()));
  }
  Map matrix() {
    return Map(data_.data(), static_cast<Eigen::Index>(rows()),
               static_cast<Eigen::Index>(cols()));
  }
  RowMatrixXd to_matrix() const { return matrix(); }

  /// The value of a one-element tensor.
  double item() const;

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  bool all_finite() const noexcept;
  std::string shape_string() const;

  /// Bitwise equality of shape and payload.
  friend bool operator==(const Tensor& a, const Tensor& b) noexcept;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace pouf
