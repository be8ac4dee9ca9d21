#include "hrrpgnet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hrrpgnet/error.hpp"

namespace hrrpgnet {

namespace {

void require_nonempty(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix must be at least 1x1, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

void require_no_nan(std::span<const double> v, const char* op) {
  if (v.empty()) throw ShapeError(std::string(op) + ": empty input");
  for (double x : v) {
    if (std::isnan(x)) throw NumericError(std::string(op) + ": NaN input");
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
  require_nonempty(rows, cols);
  data_.assign(rows * cols, fill);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_nonempty(rows, cols);
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                     std::to_string(rows * cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  require_nonempty(rows_, cols_);
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

void require_same_shape(const Matrix& a, const Matrix& b, const char* context) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(context) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

namespace {

void axpy(double alpha, const double* __restrict x, double* __restrict y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

// Four consecutive axpy updates fused; each y[j] still receives the terms one at a time in order.
void axpy4(const double* alpha, const double* __restrict x0, const double* __restrict x1,
           const double* __restrict x2, const double* __restrict x3, double* __restrict y,
           std::size_t n) {
  const double a0 = alpha[0], a1 = alpha[1], a2 = alpha[2], a3 = alpha[3];
  for (std::size_t j = 0; j < n; ++j) {
    double acc = y[j];
    acc += a0 * x0[j];
    acc += a1 * x1[j];
    acc += a2 * x2[j];
    acc += a3 * x3[j];
    y[j] = acc;
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
  }
  // Every entry sums over k ascending, so blocking never changes the result.
  Matrix out(a.rows(), b.cols());
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  std::size_t k = 0;
  for (; k + 4 <= inner; k += 4) {
    const double* b0 = b.row_span(k).data();
    const double* b1 = b.row_span(k + 1).data();
    const double* b2 = b.row_span(k + 2).data();
    const double* b3 = b.row_span(k + 3).data();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double* coeff = a.row_span(i).data() + k;
      double* out_row = out.row_span(i).data();
      if (coeff[0] != 0.0 && coeff[1] != 0.0 && coeff[2] != 0.0 && coeff[3] != 0.0) {
        axpy4(coeff, b0, b1, b2, b3, out_row, n);
        continue;
      }
      for (std::size_t q = 0; q < 4; ++q) {
        if (coeff[q] != 0.0) axpy(coeff[q], b.row_span(k + q).data(), out_row, n);
      }
    }
  }
  for (; k < inner; ++k) {
    const double* b_row = b.row_span(k).data();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double aik = a(i, k);
      if (aik != 0.0) axpy(aik, b_row, out.row_span(i).data(), n);
    }
  }
  return out;
}

Matrix matmul_transposed_b(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_transposed_b: cannot multiply " + a.shape_string() + " by (" +
                     b.shape_string() + ")^T");
  }
  return matmul(a, b.transposed());
}

Matrix matmul_transposed_a(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_transposed_a: cannot multiply (" + a.shape_string() + ")^T by " +
                     b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row_span(k);
    auto b_row = b.row_span(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row_span(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

std::vector<double> softmax(std::span<const double> v) {
  require_no_nan(v, "softmax");
  const double peak = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - peak);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

std::vector<double> log_softmax(std::span<const double> v) {
  require_no_nan(v, "log_softmax");
  const double peak = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double x : v) total += std::exp(x - peak);
  const double log_total = std::log(total);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - peak - log_total;
  return out;
}

Matrix leaky_relu(const Matrix& x, double slope) {
  Matrix out = x;
  for (double& v : out.values()) {
    if (v < 0.0) v *= slope;
  }
  return out;
}

Matrix leaky_relu_backward(const Matrix& x, const Matrix& upstream, double slope) {
  require_same_shape(x, upstream, "leaky_relu_backward");
  Matrix out = upstream;
  auto xs = x.values();
  auto gs = out.values();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < 0.0) gs[i] *= slope;
  }
  return out;
}

double max_abs_difference(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_difference");
  double worst = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) worst = std::max(worst, std::abs(av[i] - bv[i]));
  return worst;
}

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace hrrpgnet
