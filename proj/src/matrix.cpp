// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/matrix.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "skillassess/error.hpp"
#include "skillassess/kernels.hpp"

namespace skillassess {

namespace {
void require(bool ok, const char* op, std::size_t a, std::size_t b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": inner dimension mismatch (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
  }
}
}  // namespace

void Matrix::fill(double v) {
  for (auto& x : data_) x = v;
}

bool Matrix::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  accumulate_nn(c, a, b);
  return c;
}

void accumulate_nn(Matrix& c, const Matrix& a, const Matrix& b, double scale) {
  require(a.cols() == b.rows(), "matmul", a.cols(), b.rows());
  require(c.rows() == a.rows() && c.cols() == b.cols(), "matmul(out)", c.rows(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p) * scale;
      if (aip != 0.0) kernels::axpy(aip, b.row(p), ci);
    }
  }
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  accumulate_tn(c, a, b);
  return c;
}

void accumulate_tn(Matrix& c, const Matrix& a, const Matrix& b, double scale) {
  require(a.rows() == b.rows(), "matmul_tn", a.rows(), b.rows());
  require(c.rows() == a.cols() && c.cols() == b.cols(), "matmul_tn(out)", c.rows(), a.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    auto bp = b.row(p);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double api = a(p, i) * scale;
      if (api != 0.0) kernels::axpy(api, bp, c.row(i));
    }
  }
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt", a.cols(), b.cols());
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = kernels::dot(a.row(i), b.row(j));
  }
  return c;
}

void add_inplace(Matrix& a, const Matrix& b, double scale) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add_inplace: shape mismatch");
  kernels::axpy(scale, b.data(), a.data());
}

void add_row_vector(Matrix& m, std::span<const double> v) {
  if (v.size() != m.cols()) throw ShapeError("add_row_vector: length mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) kernels::axpy(1.0, v, m.row(r));
}

void accumulate_column_sums(std::span<double> out, const Matrix& m) {
  if (out.size() != m.cols()) throw ShapeError("column sums: length mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) kernels::axpy(1.0, m.row(r), out);
}

std::vector<double> mean_rows(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  if (m.rows() == 0) return out;
  accumulate_column_sums(out, m);
  for (auto& x : out) x /= static_cast<double>(m.rows());
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 double lr, const AdamHyper& hyper) {
  if (params.size() != grads.size()) throw ShapeError("adam: grad length mismatch");
  if (state.m.size() != params.size()) state.resize(params.size());
  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grads[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
    if (lr == 0.0) continue;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
}

}  // namespace skillassess
