#include "dialogrank/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dialogrank/errors.hpp"

namespace dialogrank {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ValidationError("matmul shape mismatch: " + std::to_string(a.rows) + "x" +
                          std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                          std::to_string(b.cols));
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    double* orow = out.row_ptr(i);
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row_ptr(k);
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

double sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  if (s <= 0.0) return std::numeric_limits<double>::min();
  if (s >= 1.0) return std::nextafter(1.0, 0.0);
  return s;
}

std::vector<double> tanh_vec(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::tanh(x); });
  return out;
}

std::vector<double> relu_vec(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return x > 0.0 ? x : 0.0; });
  return out;
}

double gradient_check(const std::function<double()>& loss,
                      std::span<Parameter* const> params, double eps) {
  if (eps <= 0.0) throw ValidationError("gradient_check: eps must be positive");
  double max_rel = 0.0;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data[i];
      p->value.data[i] = saved + eps;
      const double up = loss();
      p->value.data[i] = saved - eps;
      const double down = loss();
      p->value.data[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw ValidationError("gradient_check: non-finite loss at parameter " + p->name);
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad.data[i];
      const double denom = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace dialogrank
