// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Inner-loop arithmetic used by the mapper, the toy decoder and the probe.
//
// Every kernel has a scalar reference in `kernels::scalar` and, on x86-64,
// an AVX2+FMA variant in `kernels::avx2`. The unqualified entry points route
// through a table chosen once at first use from CPUID; force_isa overrides
// the choice.
//
// Variants agree to rounding only (different summation order), so
// bit-exact reproducibility holds per ISA, not across ISAs.

#pragma once

#include <cstddef>
#include <span>

namespace skillassess::kernels {

enum class Isa { kScalar, kAvx2 };

const char* isa_name(Isa isa);
Isa active_isa();
bool isa_supported(Isa isa);
// Overrides the runtime choice (tests). Throws if the ISA is not supported.
void force_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// y = x * y elementwise
void mul_inplace(std::span<const double> x, std::span<double> y);
double sum_squares(std::span<const double> x);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void mul_inplace(const double* x, double* y, std::size_t n);
double sum_squares(const double* x, std::size_t n);
}  // namespace scalar

#if defined(SKILLASSESS_HAS_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void mul_inplace(const double* x, double* y, std::size_t n);
double sum_squares(const double* x, std::size_t n);
}  // namespace avx2
#endif

}  // namespace skillassess::kernels
