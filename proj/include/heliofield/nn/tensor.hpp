#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "heliofield/errors.hpp"

namespace heliofield::neural {

/// Dense row-major tensor. 2-D tensors double as matrices for the GEMM
/// helpers below; higher ranks are only used as flat storage with a shape
/// attached (images, parameter blocks).
template <class T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)), data(element_count(shape), T{}) {}

  Tensor(std::size_t r, std::size_t c) : Tensor(std::vector<std::size_t>{r, c}) {}

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           std::multiplies<>());
  }

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] bool empty() const { return data.empty(); }

  [[nodiscard]] std::size_t rows() const {
    require_2d();
    return shape[0];
  }
  [[nodiscard]] std::size_t cols() const {
    require_2d();
    return shape[1];
  }

  T& operator()(std::size_t i, std::size_t j) {
    return data[i * shape[1] + j];
  }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data[i * shape[1] + j];
  }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  [[nodiscard]] bool same_shape(const Tensor& other) const {
    return shape == other.shape;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  [[nodiscard]] bool all_finite() const {
    for (const T& v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  void require_2d() const {
    if (shape.size() != 2) {
      throw DataError("tensor is not 2-D (rank " +
                      std::to_string(shape.size()) + ")");
    }
  }
};

template <class T>
using EigenRowMajor =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
Eigen::Map<EigenRowMajor<T>> emap(Tensor<T>& t) {
  t.require_2d();
  return {t.data.data(), static_cast<Eigen::Index>(t.shape[0]),
          static_cast<Eigen::Index>(t.shape[1])};
}

template <class T>
Eigen::Map<const EigenRowMajor<T>> emap(const Tensor<T>& t) {
  t.require_2d();
  return {t.data.data(), static_cast<Eigen::Index>(t.shape[0]),
          static_cast<Eigen::Index>(t.shape[1])};
}

namespace detail {
inline void require(bool ok, const char* what) {
  if (!ok) throw DataError(std::string("shape mismatch in ") + what);
}
}  // namespace detail

/// C = A * B for A (m x k), B (k x n).
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.cols() == b.rows(), "matmul");
  Tensor<T> c(a.rows(), b.cols());
  emap(c).noalias() = emap(a) * emap(b);
  return c;
}

/// C = A^T * B for A (m x k), B (m x n) -> (k x n). Gradient of a weight
/// matrix from input activations and output deltas.
template <class T>
Tensor<T> matmul_at_b(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.rows() == b.rows(), "matmul_at_b");
  Tensor<T> c(a.cols(), b.cols());
  emap(c).noalias() = emap(a).transpose() * emap(b);
  return c;
}

/// C = A * B^T for A (m x k), B (n x k) -> (m x n). Backpropagated input
/// deltas from output deltas and weights.
template <class T>
Tensor<T> matmul_a_bt(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.cols() == b.cols(), "matmul_a_bt");
  Tensor<T> c(a.rows(), b.rows());
  emap(c).noalias() = emap(a) * emap(b).transpose();
  return c;
}

/// Y = X * W + 1 b^T (bias broadcast over rows).
template <class T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::require(b.shape.size() == 1 && b.shape[0] == w.cols(), "affine bias");
  Tensor<T> y = matmul(x, w);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += b[j];
  }
  return y;
}

/// Column sums of a 2-D tensor; gradient of a bias vector.
template <class T>
Tensor<T> col_sums(const Tensor<T>& a) {
  Tensor<T> out(std::vector<std::size_t>{a.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j);
  }
  return out;
}

/// Horizontal concatenation [A | B].
template <class T>
Tensor<T> hconcat(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.rows() == b.rows(), "hconcat");
  Tensor<T> c(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) c(i, a.cols() + j) = b(i, j);
  }
  return c;
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  detail::require(begin <= end && end <= a.cols(), "slice_cols");
  Tensor<T> c(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = begin; j < end; ++j) c(i, j - begin) = a(i, j);
  }
  return c;
}

}  // namespace heliofield::neural
