#pragma once

#include <Eigen/Dense>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "minictx/rng.hpp"

namespace minictx {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowMajorMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajorMat>;
using ConstMatMap = Eigen::Map<const RowMajorMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

/// Named dense tensor: flat row-major storage plus a shape. Every learned
/// weight lives in one of these so that Adam, checkpointing and gradient
/// checking all walk the same registry.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::string name, std::vector<std::size_t> shape)
      : name_(std::move(name)), shape_(std::move(shape)) {
    data_.assign(count(shape_), 0.0);
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::size_t b) { return a * b; });
  }

  const std::string& name() const { return name_; }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return shape_.at(1); }

  /// 2-D view (row-major).
  MatMap mat() {
    assert(shape_.size() == 2);
    return MatMap(data_.data(), static_cast<Eigen::Index>(shape_[0]),
                  static_cast<Eigen::Index>(shape_[1]));
  }
  ConstMatMap mat() const {
    assert(shape_.size() == 2);
    return ConstMatMap(data_.data(), static_cast<Eigen::Index>(shape_[0]),
                       static_cast<Eigen::Index>(shape_[1]));
  }

  /// Flat 1-D view over any shape.
  VecMap vec() {
    return VecMap(data_.data(), static_cast<Eigen::Index>(data_.size()));
  }
  ConstVecMap vec() const {
    return ConstVecMap(data_.data(), static_cast<Eigen::Index>(data_.size()));
  }

  /// Slice k of a 3-D tensor as a row-major matrix over the last two dims.
  MatMap slice(std::size_t k) {
    assert(shape_.size() == 3 && k < shape_[0]);
    const std::size_t step = shape_[1] * shape_[2];
    return MatMap(data_.data() + k * step,
                  static_cast<Eigen::Index>(shape_[1]),
                  static_cast<Eigen::Index>(shape_[2]));
  }
  ConstMatMap slice(std::size_t k) const {
    assert(shape_.size() == 3 && k < shape_[0]);
    const std::size_t step = shape_[1] * shape_[2];
    return ConstMatMap(data_.data() + k * step,
                       static_cast<Eigen::Index>(shape_[1]),
                       static_cast<Eigen::Index>(shape_[2]));
  }

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

  /// Uniform init in [-bound, bound].
  void init_uniform(Rng& rng, double bound) {
    for (double& v : data_) v = rng.uniform(-bound, bound);
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::string name_;
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Ordered list of (tensor, gradient) pairs; the order fixes checkpoint
/// payload layout and the Adam/gradient-clip reduction order.
struct ParamRef {
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};
using ParamList = std::vector<ParamRef>;

inline std::size_t total_size(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value->size();
  return n;
}

/// Errors surfaced to the CLI as distinct exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace minictx
