#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "vastopo/seed.hpp"
#include "vastopo/tensor.hpp"
#include "vastopo/volume.hpp"

namespace vt {

using namespace vastopo;

// Random binary mask; fill is the foreground probability.
inline LabelVolume random_mask(std::uint64_t seed, Dims d, double fill) {
  CounterRng rng(derive_seed(seed, "test/mask"));
  LabelVolume m(d, 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform01() < fill ? 1 : 0;
  return m;
}

inline Dims random_dims(CounterRng& rng, int lo, int hi) {
  return {static_cast<int>(rng.integer(lo, hi)), static_cast<int>(rng.integer(lo, hi)), static_cast<int>(rng.integer(lo, hi))};
}

inline nn::Tensor random_tensor(CounterRng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t = nn::Tensor::matrix(r, c);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const nn::Tensor& a, const nn::Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

// Plain triple loop, independent of the library gemm.
inline nn::Tensor naive_matmul(const nn::Tensor& a, const nn::Tensor& b) {
  nn::Tensor c = nn::Tensor::matrix(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

inline nn::Tensor naive_softmax_rows(const nn::Tensor& a) {
  nn::Tensor o = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, a(i, j));
    double s = 0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += std::exp(a(i, j) - m);
    for (std::size_t j = 0; j < a.cols(); ++j) o(i, j) = std::exp(a(i, j) - m) / s;
  }
  return o;
}

inline nn::Tensor naive_transpose(const nn::Tensor& a) {
  nn::Tensor t = nn::Tensor::matrix(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline nn::Tensor naive_relu(nn::Tensor a) {
  for (auto& v : a.data()) v = v > 0 ? v : 0;
  return a;
}

inline nn::Tensor naive_add_row(nn::Tensor a, const nn::Tensor& row) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) += row(0, j);
  return a;
}

}  // namespace vt
