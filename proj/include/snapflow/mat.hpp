#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <utility>
#include <vector>

namespace snapflow {

// Dense row-major matrix of 64-bit reals. Doubles as the action-chunk type
// (rows = horizon H, cols = action dim D). All numerics in this project are
// double precision; tolerances in the verification suite assume it.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Mat row(std::initializer_list<double> vals) {
    Mat m(1, vals.size());
    std::copy(vals.begin(), vals.end(), m.data_.begin());
    return m;
  }

  static Mat from_vector(std::size_t rows, std::size_t cols, std::vector<double> vals) {
    if (vals.size() != rows * cols) {
      throw std::invalid_argument("Mat::from_vector: shape mismatch with value count");
    }
    Mat m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_ = std::move(vals);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Mat& operator+=(const Mat& o) {
    require_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    require_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Mat& operator*=(double c) {
    for (double& v : data_) v *= c;
    return *this;
  }

  friend Mat operator+(Mat a, const Mat& b) { return a += b; }
  friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
  friend Mat operator*(Mat a, double c) { return a *= c; }
  friend Mat operator*(double c, Mat a) { return a *= c; }

  void clamp(double lo, double hi) {
    for (double& v : data_) v = std::min(hi, std::max(lo, v));
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void require_same_shape(const Mat& o) const {
    if (!same_shape(o)) throw std::invalid_argument("shape mismatch");
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(const Mat& a, const Mat& b) {
  a.require_same_shape(b);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double frob_norm(const Mat& a) { return std::sqrt(dot(a, a)); }

// Sum of squared entries; the building block for every loss in the trainer.
inline double sq_norm(const Mat& a) { return dot(a, a); }

// a += c * b
inline void axpy(Mat& a, double c, const Mat& b) {
  a.require_same_shape(b);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += c * b[k];
}

}  // namespace snapflow
