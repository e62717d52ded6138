#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace gencnn {

/// Dense row-major tensor of 64-bit floats. Copies are cheap and share the
/// underlying buffer; every operation allocates a fresh output, so a tensor's
/// contents never change after the operation that produced it returns.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> values);  // rank-1

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
  bool defined() const { return static_cast<bool>(data_); }

  // rank-2 helpers; rank-1 tensors count as a single row
  int rows() const;
  int cols() const;

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }
  double& operator[](int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

  /// Deep copy with its own buffer.
  Tensor clone() const;
  /// Same buffer, new shape; element count must match.
  Tensor reshaped(std::vector<int> shape) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double v);

  std::string shape_str() const { return shape_str(shape_); }
  static std::string shape_str(const std::vector<int>& shape);

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> data_;
};

int64_t shape_size(const std::vector<int>& shape);

}  // namespace gencnn
