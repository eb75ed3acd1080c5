// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "skillassess/common.hpp"
#include "skillassess/kernels.hpp"
#include "skillassess/matrix.hpp"

using namespace skillassess;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  Rng rng(1);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 33u}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    double dot = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += a[i] * b[i];
      ss += a[i] * a[i];
    }
    CHECK(rel_err(kernels::scalar::dot(a.data(), b.data(), n), dot) < 1e-14);
    CHECK(rel_err(kernels::scalar::sum_squares(a.data(), n), ss) < 1e-14);
    auto y = b;
    kernels::scalar::axpy(0.5, a.data(), y.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(b[i] + 0.5 * a[i]).epsilon(1e-15));
    y = b;
    kernels::scalar::mul_inplace(a.data(), y.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == a[i] * b[i]);
  }
}

#if defined(SKILLASSESS_HAS_AVX2)
TEST_CASE("avx2 kernels agree with scalar reference") {
  if (!kernels::isa_supported(kernels::Isa::kAvx2)) {
    MESSAGE("AVX2 not available on this CPU; skipping equivalence check");
    return;
  }
  Rng rng(2);
  for (std::size_t n = 0; n < 70; ++n) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    CHECK(rel_err(kernels::avx2::dot(a.data(), b.data(), n), kernels::scalar::dot(a.data(), b.data(), n)) < 1e-12);
    CHECK(rel_err(kernels::avx2::sum_squares(a.data(), n), kernels::scalar::sum_squares(a.data(), n)) < 1e-12);
    auto y1 = b, y2 = b;
    kernels::avx2::axpy(-1.25, a.data(), y1.data(), n);
    kernels::scalar::axpy(-1.25, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(rel_err(y1[i], y2[i]) < 1e-14);
    y1 = b;
    y2 = b;
    kernels::avx2::mul_inplace(a.data(), y1.data(), n);
    kernels::scalar::mul_inplace(a.data(), y2.data(), n);
    CHECK(y1 == y2);
  }
}
#endif

TEST_CASE("dispatch honours forced ISA and higher-level ops agree across ISAs") {
  const auto original = kernels::active_isa();
  Rng rng(3);
  Matrix a(5, 9), b(9, 6);
  for (auto& x : a.data()) x = rng.normal();
  for (auto& x : b.data()) x = rng.normal();

  kernels::force_isa(kernels::Isa::kScalar);
  CHECK(kernels::active_isa() == kernels::Isa::kScalar);
  const Matrix ref = matmul(a, b);
  if (kernels::isa_supported(kernels::Isa::kAvx2)) {
    kernels::force_isa(kernels::Isa::kAvx2);
    CHECK(kernels::active_isa() == kernels::Isa::kAvx2);
    const Matrix fast = matmul(a, b);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(rel_err(fast.data()[i], ref.data()[i]) < 1e-12);
  }
  kernels::force_isa(original);
  CHECK(std::string(kernels::isa_name(kernels::Isa::kScalar)) == "scalar");
}

TEST_CASE("span kernels reject mismatched lengths") {
  std::vector<double> a(3, 1.0), b(4, 1.0);
  CHECK_THROWS(kernels::dot(a, b));
  CHECK_THROWS(kernels::axpy(1.0, a, b));
}
