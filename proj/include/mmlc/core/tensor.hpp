#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmlc {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using FlatArray = Eigen::Array<S, Eigen::Dynamic, 1>;

// Dense n-d container, row-major, with Eigen map views for the math.
// Shape product always equals the flat length.
template <typename S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.setZero(count(shape_));
  }

  Tensor(std::vector<int> shape, FlatArray<S> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size()) {
      throw std::invalid_argument("tensor shape/data size mismatch");
    }
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor scalar(S v) {
    Tensor t({1});
    t.data_[0] = v;
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  Eigen::Index size() const { return data_.size(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  S& operator[](Eigen::Index i) { return data_[i]; }
  S operator[](Eigen::Index i) const { return data_[i]; }

  FlatArray<S>& array() { return data_; }
  const FlatArray<S>& array() const { return data_; }

  // 2-d view [rows, cols]; rows defaults to the leading extent.
  Eigen::Map<RowMat<S>> mat() {
    check2d();
    return {data_.data(), shape_[0], shape_[1]};
  }
  Eigen::Map<const RowMat<S>> mat() const {
    check2d();
    return {data_.data(), shape_[0], shape_[1]};
  }

  // Arbitrary [r, c] view over the flat storage (r*c must match size()).
  Eigen::Map<RowMat<S>> mat(Eigen::Index r, Eigen::Index c) {
    if (r * c != data_.size()) throw std::invalid_argument("bad mat view");
    return {data_.data(), r, c};
  }
  Eigen::Map<const RowMat<S>> mat(Eigen::Index r, Eigen::Index c) const {
    if (r * c != data_.size()) throw std::invalid_argument("bad mat view");
    return {data_.data(), r, c};
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const { return data_.isFinite().all(); }

  Tensor<S> reshaped(std::vector<int> shape) const {
    if (count(shape) != data_.size()) {
      throw std::invalid_argument("reshape changes element count");
    }
    return Tensor<S>(std::move(shape), data_);
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape_);
    out.array() = data_.template cast<T>();
    return out;
  }

  static std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
  }

  // Extents are non-negative; a zero extent makes an empty tensor, which is
  // how degenerate feature streams (d == 0) flow through concat and slice.
  static Eigen::Index count(const std::vector<int>& shape) {
    Eigen::Index n = 1;
    for (int e : shape) {
      if (e < 0) throw std::invalid_argument("negative tensor extent");
      n *= e;
    }
    return n;
  }

 private:
  void check2d() const {
    if (shape_.size() != 2) throw std::invalid_argument("expected 2-d tensor");
  }

  std::vector<int> shape_;
  FlatArray<S> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace mmlc
