// Copyright 2026 The marlhf-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MARLHF_SIMD_KERNELS_H_
#define MARLHF_SIMD_KERNELS_H_

#include <cstddef>
#include <span>
#include <string_view>

// Dense double-precision inner loops used by the covariance accumulators, the
// logistic MLE and the reward-model MLP. Every kernel has a scalar reference
// implementation; an AVX2+FMA variant is selected at runtime when the CPU
// supports it. Set MARLHF_SIMD=scalar in the environment to force the
// reference path (useful when bit-comparing runs across machines).
//
// All matrices are dense row-major.

namespace marlhf::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  // sum_k x[k] * y[k]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y = A x, A is rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols,
               const double* x, double* y);
  // y += A^T x, A is rows x cols, x has rows entries, y has cols entries
  void (*gemv_t_acc)(const double* a, std::size_t rows, std::size_t cols,
                     const double* x, double* y);
  // A += alpha * x y^T, A is rows x cols
  void (*ger)(double alpha, const double* x, std::size_t rows, const double* y,
              std::size_t cols, double* a);
  // x^T A x for square n x n A
  double (*quad_form)(const double* a, std::size_t n, const double* x);
};

const KernelTable& ScalarKernels();
// Returns nullptr when the variant was not compiled in.
const KernelTable* Avx2Kernels();

bool IsaSupported(Isa isa);
std::string_view IsaName(Isa isa);

// The table used by the span helpers below. Chosen once on first use.
const KernelTable& Active();
// Tests use this to pin a variant; throws std::invalid_argument when the ISA
// is unsupported on this machine.
void SetActive(Isa isa);

inline double Dot(std::span<const double> x, std::span<const double> y) {
  return Active().dot(x.data(), y.data(), x.size());
}

inline void Axpy(double a, std::span<const double> x, std::span<double> y) {
  Active().axpy(a, x.data(), y.data(), x.size());
}

inline void Gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
                 std::span<const double> x, std::span<double> y) {
  Active().gemv(a.data(), rows, cols, x.data(), y.data());
}

inline void GemvTransposedAcc(std::span<const double> a, std::size_t rows,
                              std::size_t cols, std::span<const double> x,
                              std::span<double> y) {
  Active().gemv_t_acc(a.data(), rows, cols, x.data(), y.data());
}

inline void Ger(double alpha, std::span<const double> x,
                std::span<const double> y, std::span<double> a) {
  Active().ger(alpha, x.data(), x.size(), y.data(), y.size(), a.data());
}

inline double QuadForm(std::span<const double> a, std::span<const double> x) {
  return Active().quad_form(a.data(), x.size(), x.data());
}

}  // namespace marlhf::simd

#endif  // MARLHF_SIMD_KERNELS_H_
