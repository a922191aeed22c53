#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dialogrank {

// Dense row-major matrix, double precision. Shapes must match exactly; there
// is no broadcasting, so shape bugs surface at the call site.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  double* row_ptr(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row_ptr(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }

  std::size_t size() const { return data.size(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// A trainable tensor: value plus a gradient buffer of the same shape. The
// gradient is zeroed between optimizer steps.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, int r, int c) : name(std::move(n)), value(r, c), grad(r, c) {}

  void zero_grad() { grad.fill(0.0); }
};

Matrix matmul(const Matrix& a, const Matrix& b);

// Numerically stable logistic function. The result is clamped into the open
// interval (0, 1): large negative inputs return the smallest positive double
// instead of underflowing to exactly 0.
double sigmoid(double x);

std::vector<double> tanh_vec(const std::vector<double>& v);
std::vector<double> relu_vec(const std::vector<double>& v);

// Central-difference check of analytic gradients. `loss` evaluates the loss
// at the parameters' current values; each Parameter's grad must already hold
// the analytic gradient. Returns the max over all entries of
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// Throws ValidationError if the loss is non-finite at any probe point.
double gradient_check(const std::function<double()>& loss,
                      std::span<Parameter* const> params, double eps);

}  // namespace dialogrank
