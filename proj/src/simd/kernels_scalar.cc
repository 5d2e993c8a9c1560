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

#include "marlhf/simd/kernels.h"

namespace marlhf::simd {
namespace {

double DotScalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += x[k] * y[k];
  return acc;
}

void AxpyScalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

void GemvScalar(const double* a, std::size_t rows, std::size_t cols,
                const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = DotScalar(a + r * cols, x, cols);
}

void GemvTAccScalar(const double* a, std::size_t rows, std::size_t cols,
                    const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != 0.0) AxpyScalar(x[r], a + r * cols, y, cols);
  }
}

void GerScalar(double alpha, const double* x, std::size_t rows, const double* y,
               std::size_t cols, double* a) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double scale = alpha * x[r];
    if (scale != 0.0) AxpyScalar(scale, y, a + r * cols, cols);
  }
}

double QuadFormScalar(const double* a, std::size_t n, const double* x) {
  double acc = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (x[r] != 0.0) acc += x[r] * DotScalar(a + r * n, x, n);
  }
  return acc;
}

}  // namespace

const KernelTable& ScalarKernels() {
  static const KernelTable table{Isa::kScalar,  DotScalar, AxpyScalar,
                                 GemvScalar,    GemvTAccScalar, GerScalar,
                                 QuadFormScalar};
  return table;
}

}  // namespace marlhf::simd
