#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace adalab {

// Dense row-major tensor. All computation is in 64-bit floats; checkpoints
// store 32-bit payloads.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  static Tensor zeros(std::vector<size_t> shape);
  static Tensor full(std::vector<size_t> shape, double value);
  static Tensor scalar(double v);
  static Tensor from(std::vector<size_t> shape, std::vector<double> values);

  size_t numel() const;
  size_t ndim() const { return shape.size(); }
  // 2-d views: rows = product of leading dims, cols = last dim.
  size_t rows() const;
  size_t cols() const;
  double& at(size_t r, size_t c);
  double at(size_t r, size_t c) const;

  bool all_finite() const;
  // Explicit non-finite detection; throws NumericError naming `what`.
  void check_finite(const std::string& what) const;
};

bool same_shape(const Tensor& a, const Tensor& b);
std::string shape_str(const Tensor& t);

constexpr double kLayerNormEps = 1e-5;

// Shared kernels. The tape ops and the cached decode path both call these so
// their forward values agree bit for bit.
void matmul_into(const double* a, size_t m, size_t k, const double* b, size_t n, double* out);
Tensor matmul_values(const Tensor& a, const Tensor& b);
void softmax_row(const double* x, size_t n, double* out);
void layer_norm_row(const double* x, size_t n, const double* gain, const double* bias, double* out);

Tensor random_normal(std::vector<size_t> shape, double stddev, std::mt19937_64& rng);
Tensor random_uniform(std::vector<size_t> shape, double lo, double hi, std::mt19937_64& rng);

}  // namespace adalab
