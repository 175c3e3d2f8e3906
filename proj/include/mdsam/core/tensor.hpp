#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdsam {

using Scalar = double;

// Dense row-major tensor. Layout conventions used throughout:
//   grids   (C, H, W)   index c*H*W + y*W + x
//   tokens  (N, D)      index n*D + d
//   weights follow the owning layer's documentation.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), Scalar(0));
  }

  Tensor(std::vector<int> shape, std::vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<long>(data_.size()) != count(shape_)) {
      throw std::invalid_argument("Tensor: data size does not match shape");
    }
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, Scalar v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor scalar(Scalar v) { return full({1}, v); }

  long size() const { return static_cast<long>(data_.size()); }
  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }

  int dim(int i) const {
    if (i < 0 || i >= rank()) throw std::out_of_range("Tensor::dim index");
    return shape_[static_cast<size_t>(i)];
  }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  Scalar operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  // (c, y, x) accessor for rank-3 grids.
  Scalar& at(int c, int y, int x) {
    return data_[static_cast<size_t>((static_cast<long>(c) * shape_[1] + y) * shape_[2] + x)];
  }
  Scalar at(int c, int y, int x) const {
    return data_[static_cast<size_t>((static_cast<long>(c) * shape_[1] + y) * shape_[2] + x)];
  }

  // (n, d) accessor for rank-2 matrices.
  Scalar& at(int n, int d) { return data_[static_cast<size_t>(static_cast<long>(n) * shape_[1] + d)]; }
  Scalar at(int n, int d) const { return data_[static_cast<size_t>(static_cast<long>(n) * shape_[1] + d)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (Scalar v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  Scalar item() const {
    if (size() != 1) throw std::logic_error("Tensor::item on non-scalar");
    return data_[0];
  }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(std::vector<int> new_shape) const {
    if (count(new_shape) != size()) {
      throw std::invalid_argument("Tensor::reshaped: element count mismatch (" +
                                  shape_str(shape_) + " -> " + shape_str(new_shape) + ")");
    }
    return Tensor(std::move(new_shape), data_);
  }

  static long count(const std::vector<int>& shape) {
    long n = 1;
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
      n *= d;
    }
    return n;
  }

  static std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) os << ",";
      os << shape[i];
    }
    os << ")";
    return os.str();
  }

  std::string shape_str() const { return shape_str(shape_); }

 private:
  std::vector<int> shape_;
  std::vector<Scalar> data_;
};

inline void check_shape(const Tensor& t, const std::vector<int>& expect, const char* what) {
  if (t.shape() != expect) {
    throw std::invalid_argument(std::string(what) + ": expected shape " +
                                Tensor::shape_str(expect) + ", got " + t.shape_str());
  }
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
  }
}

}  // namespace mdsam
