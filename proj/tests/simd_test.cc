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

// AVX2 kernels against the scalar reference on random inputs of every
// length class (empty, sub-vector, tail, multiple of the vector width).

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "marlhf/linalg.h"
#include "marlhf/simd/kernels.h"

namespace marlhf::simd {
namespace {

std::vector<double> RandomVector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Relative tolerance for reductions whose summation order differs.
void ExpectClose(double want, double got, double scale) {
  EXPECT_NEAR(want, got, 1e-12 * std::max(1.0, scale));
}

class SimdEquivalenceTest : public ::testing::TestWithParam<std::size_t> {
 protected:
  void SetUp() override {
    if (!IsaSupported(Isa::kAvx2)) GTEST_SKIP() << "no AVX2 on this machine";
    scalar_ = &ScalarKernels();
    avx2_ = Avx2Kernels();
    ASSERT_NE(avx2_, nullptr);
  }

  const KernelTable* scalar_ = nullptr;
  const KernelTable* avx2_ = nullptr;
  std::mt19937_64 rng_{GetParam() * 7919 + 1};
};

TEST_P(SimdEquivalenceTest, Dot) {
  const std::size_t n = GetParam();
  const auto x = RandomVector(n, rng_), y = RandomVector(n, rng_);
  ExpectClose(scalar_->dot(x.data(), y.data(), n), avx2_->dot(x.data(), y.data(), n),
              static_cast<double>(n));
}

TEST_P(SimdEquivalenceTest, Axpy) {
  const std::size_t n = GetParam();
  const auto x = RandomVector(n, rng_);
  auto y1 = RandomVector(n, rng_);
  auto y2 = y1;
  scalar_->axpy(0.37, x.data(), y1.data(), n);
  avx2_->axpy(0.37, x.data(), y2.data(), n);
  for (std::size_t k = 0; k < n; ++k) ExpectClose(y1[k], y2[k], 1.0);
}

TEST_P(SimdEquivalenceTest, GemvAndTransposedAccumulate) {
  const std::size_t rows = GetParam() / 2 + 1, cols = GetParam();
  const auto a = RandomVector(rows * cols, rng_);
  const auto x = RandomVector(cols, rng_);
  std::vector<double> y1(rows), y2(rows);
  scalar_->gemv(a.data(), rows, cols, x.data(), y1.data());
  avx2_->gemv(a.data(), rows, cols, x.data(), y2.data());
  for (std::size_t r = 0; r < rows; ++r) ExpectClose(y1[r], y2[r], cols);

  const auto xr = RandomVector(rows, rng_);
  auto z1 = RandomVector(cols, rng_);
  auto z2 = z1;
  scalar_->gemv_t_acc(a.data(), rows, cols, xr.data(), z1.data());
  avx2_->gemv_t_acc(a.data(), rows, cols, xr.data(), z2.data());
  for (std::size_t c = 0; c < cols; ++c) ExpectClose(z1[c], z2[c], rows);
}

TEST_P(SimdEquivalenceTest, RankOneUpdate) {
  const std::size_t rows = GetParam() / 3 + 1, cols = GetParam();
  const auto x = RandomVector(rows, rng_), y = RandomVector(cols, rng_);
  auto a1 = RandomVector(rows * cols, rng_);
  auto a2 = a1;
  scalar_->ger(-1.5, x.data(), rows, y.data(), cols, a1.data());
  avx2_->ger(-1.5, x.data(), rows, y.data(), cols, a2.data());
  for (std::size_t k = 0; k < a1.size(); ++k) ExpectClose(a1[k], a2[k], 1.0);
}

TEST_P(SimdEquivalenceTest, QuadraticForm) {
  const std::size_t n = GetParam();
  const auto a = RandomVector(n * n, rng_), x = RandomVector(n, rng_);
  ExpectClose(scalar_->quad_form(a.data(), n, x.data()),
              avx2_->quad_form(a.data(), n, x.data()), static_cast<double>(n * n));
}

INSTANTIATE_TEST_SUITE_P(Lengths, SimdEquivalenceTest,
                         ::testing::Values(0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 63, 64, 257));

TEST(SimdDispatchTest, ScalarAlwaysAvailableAndSelectable) {
  EXPECT_TRUE(IsaSupported(Isa::kScalar));
  EXPECT_EQ(IsaName(Isa::kScalar), "scalar");
  const Isa before = Active().isa;
  SetActive(Isa::kScalar);
  EXPECT_EQ(Active().isa, Isa::kScalar);
  SetActive(before);
}

// A whole Gram-matrix workflow gives the same inverse norms on both paths.
TEST(SimdDispatchTest, RidgeGramAgreesAcrossIsas) {
  if (!IsaSupported(Isa::kAvx2)) GTEST_SKIP() << "no AVX2 on this machine";
  std::mt19937_64 rng(11);
  std::vector<std::vector<double>> rows;
  for (int k = 0; k < 40; ++k) rows.push_back(RandomVector(13, rng));
  const auto probe = RandomVector(13, rng);
  auto run = [&](Isa isa) {
    SetActive(isa);
    RidgeGram gram(13, 1.0);
    for (const auto& r : rows) gram.AddOuterDense(r);
    gram.Finalize();
    return gram.InverseNormDense(probe);
  };
  const Isa before = Active().isa;
  const double scalar = run(Isa::kScalar);
  const double avx2 = run(Isa::kAvx2);
  SetActive(before);
  EXPECT_NEAR(scalar, avx2, 1e-12);
}

}  // namespace
}  // namespace marlhf::simd
