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

// Compiled with -mavx2 -mfma. Nothing in here may run before the dispatcher
// has confirmed CPU support.

#include <immintrin.h>

#include "marlhf/simd/kernels.h"

namespace marlhf::simd {
namespace {

inline double HorizontalSum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

double DotAvx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k + 4),
                           _mm256_loadu_pd(y + k + 4), acc1);
  }
  for (; k + 4 <= n; k += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k), acc0);
  }
  double acc = HorizontalSum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) acc += x[k] * y[k];
  return acc;
}

void AxpyAvx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d vy = _mm256_loadu_pd(y + k);
    _mm256_storeu_pd(y + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), vy));
  }
  for (; k < n; ++k) y[k] += a * x[k];
}

void GemvAvx2(const double* a, std::size_t rows, std::size_t cols,
              const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = DotAvx2(a + r * cols, x, cols);
}

void GemvTAccAvx2(const double* a, std::size_t rows, std::size_t cols,
                  const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != 0.0) AxpyAvx2(x[r], a + r * cols, y, cols);
  }
}

void GerAvx2(double alpha, const double* x, std::size_t rows, const double* y,
             std::size_t cols, double* a) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double scale = alpha * x[r];
    if (scale != 0.0) AxpyAvx2(scale, y, a + r * cols, cols);
  }
}

double QuadFormAvx2(const double* a, std::size_t n, const double* x) {
  double acc = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (x[r] != 0.0) acc += x[r] * DotAvx2(a + r * n, x, n);
  }
  return acc;
}

}  // namespace

const KernelTable* Avx2KernelsImpl() {
  static const KernelTable table{Isa::kAvx2, DotAvx2,  AxpyAvx2,    GemvAvx2,
                                 GemvTAccAvx2, GerAvx2, QuadFormAvx2};
  return &table;
}

}  // namespace marlhf::simd
