#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hrrpgnet {

/// Dense row-major matrix of doubles. Always at least 1x1.
class Matrix {
 public:
  Matrix() : Matrix(1, 1) {}
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> values);
  static Matrix row(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row_span(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::string shape_string() const;
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Matrix transposed() const;
  void fill(double v);

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

/// Throws ShapeError naming both shapes unless a and b have identical shapes.
void require_same_shape(const Matrix& a, const Matrix& b, const char* context);

Matrix matmul(const Matrix& a, const Matrix& b);

/// a * b^T without materializing the transpose.
Matrix matmul_transposed_b(const Matrix& a, const Matrix& b);

/// a^T * b without materializing the transpose.
Matrix matmul_transposed_a(const Matrix& a, const Matrix& b);

/// Max-subtracted softmax. Throws NumericError on NaN input.
std::vector<double> softmax(std::span<const double> v);

/// Max-subtracted log-softmax. Throws NumericError on NaN input.
std::vector<double> log_softmax(std::span<const double> v);

Matrix leaky_relu(const Matrix& x, double slope);

/// Upstream gradient through leaky_relu; the derivative at exactly 0 is taken as 1.
Matrix leaky_relu_backward(const Matrix& x, const Matrix& upstream, double slope);

double max_abs_difference(const Matrix& a, const Matrix& b);

bool all_finite(std::span<const double> v) noexcept;

}  // namespace hrrpgnet
