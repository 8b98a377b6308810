#include "adalab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "adalab/common.hpp"

namespace adalab {

static size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

Tensor Tensor::zeros(std::vector<size_t> shape) {
  Tensor t;
  t.data.assign(shape_numel(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::full(std::vector<size_t> shape, double value) {
  Tensor t;
  t.data.assign(shape_numel(shape), value);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::scalar(double v) { return full({1}, v); }

Tensor Tensor::from(std::vector<size_t> shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size())
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape product " + std::to_string(shape_numel(shape)));
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(values);
  return t;
}

size_t Tensor::numel() const { return data.size(); }

size_t Tensor::rows() const {
  if (shape.empty()) return 1;
  size_t r = 1;
  for (size_t i = 0; i + 1 < shape.size(); ++i) r *= shape[i];
  return r;
}

size_t Tensor::cols() const { return shape.empty() ? 1 : shape.back(); }

double& Tensor::at(size_t r, size_t c) { return data[r * cols() + c]; }
double Tensor::at(size_t r, size_t c) const { return data[r * cols() + c]; }

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::check_finite(const std::string& what) const {
  if (!all_finite()) throw NumericError("non-finite values in " + what);
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

std::string shape_str(const Tensor& t) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < t.shape.size(); ++i) {
    if (i) os << "x";
    os << t.shape[i];
  }
  os << "]";
  return os.str();
}

void matmul_into(const double* a, size_t m, size_t k, const double* b, size_t n, double* out) {
  std::memset(out, 0, m * n * sizeof(double));
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* orow = out + i * n;
    for (size_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      const double* brow = b + kk * n;
      for (size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape[1] != b.shape[0])
    throw ShapeError("matmul shape mismatch: " + shape_str(a) + " x " + shape_str(b));
  Tensor out = Tensor::zeros({a.shape[0], b.shape[1]});
  matmul_into(a.data.data(), a.shape[0], a.shape[1], b.data.data(), b.shape[1], out.data.data());
  return out;
}

void softmax_row(const double* x, size_t n, double* out) {
  double mx = x[0];
  for (size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  double inv = 1.0 / sum;
  for (size_t i = 0; i < n; ++i) out[i] *= inv;
}

void layer_norm_row(const double* x, size_t n, const double* gain, const double* bias, double* out) {
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = x[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  double inv = 1.0 / std::sqrt(var + kLayerNormEps);
  for (size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) * inv * gain[i] + bias[i];
}

Tensor random_normal(std::vector<size_t> shape, double stddev, std::mt19937_64& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data) v = dist(rng);
  return t;
}

Tensor random_uniform(std::vector<size_t> shape, double lo, double hi, std::mt19937_64& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data) v = dist(rng);
  return t;
}

}  // namespace adalab
