// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>

#include "skillassess/error.hpp"
#include "skillassess/kernels.hpp"

namespace skillassess::kernels {

namespace {

struct Table {
  Isa isa;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*mul_inplace)(const double*, double*, std::size_t);
  double (*sum_squares)(const double*, std::size_t);
};

constexpr Table kScalarTable{Isa::kScalar, scalar::dot, scalar::axpy, scalar::mul_inplace,
                             scalar::sum_squares};
#if defined(SKILLASSESS_HAS_AVX2)
constexpr Table kAvx2Table{Isa::kAvx2, avx2::dot, avx2::axpy, avx2::mul_inplace,
                           avx2::sum_squares};
#endif

const Table* table_for(Isa isa) {
#if defined(SKILLASSESS_HAS_AVX2)
  if (isa == Isa::kAvx2) return &kAvx2Table;
#endif
  (void)isa;
  return &kScalarTable;
}

const Table* detect() {
  if (isa_supported(Isa::kAvx2)) return table_for(Isa::kAvx2);
  return &kScalarTable;
}

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> t{detect()};
  return t;
}

inline const Table& tbl() { return *current().load(std::memory_order_relaxed); }

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  if (isa == Isa::kScalar) return true;
#if defined(SKILLASSESS_HAS_AVX2)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return tbl().isa; }

void force_isa(Isa isa) {
  if (!isa_supported(isa)) throw Error(std::string("ISA not supported: ") + isa_name(isa));
  current().store(table_for(isa));
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  return tbl().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
  tbl().axpy(alpha, x.data(), y.data(), x.size());
}

void mul_inplace(std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("mul_inplace: length mismatch");
  tbl().mul_inplace(x.data(), y.data(), x.size());
}

double sum_squares(std::span<const double> x) { return tbl().sum_squares(x.data(), x.size()); }

}  // namespace skillassess::kernels
