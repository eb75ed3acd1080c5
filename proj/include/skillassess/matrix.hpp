// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace skillassess {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix identity(std::size_t n);

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// C += scale * A^T * B
void accumulate_tn(Matrix& c, const Matrix& a, const Matrix& b, double scale = 1.0);
// C += scale * A * B
void accumulate_nn(Matrix& c, const Matrix& a, const Matrix& b, double scale = 1.0);

void add_inplace(Matrix& a, const Matrix& b, double scale = 1.0);
void add_row_vector(Matrix& m, std::span<const double> v);
// out += column sums of m
void accumulate_column_sums(std::span<double> out, const Matrix& m);
std::vector<double> mean_rows(const Matrix& m);

double gelu(double x);
double gelu_grad(double x);

// Adam state for one flat parameter block.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  void resize(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
  }
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update. With lr == 0 the parameters are left bit-identical.
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 double lr, const AdamHyper& hyper = {});

}  // namespace skillassess
