#include "gencnn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gencnn {

int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive, got " + Tensor::shape_str(shape));
    n *= d;
  }
  return n;
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  int64_t n = shape_size(shape);
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<double>>(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  if (shape_size(shape) != static_cast<int64_t>(values.size())) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<double>>(std::move(values));
  return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::row(std::vector<double> values) {
  int n = static_cast<int>(values.size());
  return from({n}, std::move(values));
}

int Tensor::rows() const {
  if (rank() == 1) return 1;
  if (rank() == 2) return shape_[0];
  throw std::logic_error("rows() on rank-" + std::to_string(rank()) + " tensor");
}

int Tensor::cols() const {
  if (rank() == 1) return shape_[0];
  if (rank() == 2) return shape_[1];
  throw std::logic_error("cols() on rank-" + std::to_string(rank()) + " tensor");
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  if (data_) t.data_ = std::make_shared<std::vector<double>>(*data_);
  return t;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
  if (shape_size(shape) != size()) {
    throw std::invalid_argument("cannot reshape " + shape_str() + " to " + shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

bool Tensor::all_finite() const {
  if (!data_) return true;
  for (double v : *data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) {
  if (data_) std::fill(data_->begin(), data_->end(), v);
}

std::string Tensor::shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

}  // namespace gencnn
