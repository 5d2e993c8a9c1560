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

#include "marlhf/linalg.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "marlhf/common.h"
#include "marlhf/simd/kernels.h"

namespace marlhf {

namespace {
constexpr double kConditionWarning = 1e12;
}  // namespace

RidgeGram::RidgeGram(int dim, double ridge)
    : dim_(dim), ridge_(ridge), slot_of_(dim, -1) {
  if (dim < 0) throw DimensionError("negative dimension");
  if (!(ridge > 0.0)) throw ConfigError("ridge weight must be positive");
}

int RidgeGram::Find(int coordinate) const {
  if (coordinate < 0 || coordinate >= dim_) {
    throw DimensionError("coordinate out of range");
  }
  return slot_of_[coordinate];
}

int RidgeGram::Slot(int coordinate) {
  const int existing = Find(coordinate);
  if (existing >= 0) return existing;
  const std::size_t k = active_.size();
  if (k == capacity_) {
    const std::size_t grown = std::max<std::size_t>(8, capacity_ * 2);
    std::vector<double> next(grown * grown, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
      std::copy_n(block_.begin() + r * capacity_, k, next.begin() + r * grown);
    }
    block_.swap(next);
    capacity_ = grown;
  }
  active_.push_back(coordinate);
  slot_of_[coordinate] = static_cast<int>(k);
  return static_cast<int>(k);
}

void RidgeGram::AddOuter(const SparseVector& x, double weight) {
  if (finalized_) throw NumericalError("RidgeGram already finalized");
  std::vector<int> slots;
  slots.reserve(x.nnz());
  for (std::size_t p = 0; p < x.nnz(); ++p) {
    if (!std::isfinite(x.value[p])) {
      throw NumericalError("non-finite feature value");
    }
    slots.push_back(x.value[p] != 0.0 ? Slot(x.index[p]) : -1);
  }
  for (std::size_t p = 0; p < x.nnz(); ++p) {
    if (slots[p] < 0) continue;
    const double wp = weight * x.value[p];
    double* row = block_.data() + slots[p] * capacity_;
    for (std::size_t q = 0; q < x.nnz(); ++q) {
      if (slots[q] >= 0) row[slots[q]] += wp * x.value[q];
    }
  }
}

void RidgeGram::AddOuterDense(std::span<const double> x, double weight) {
  if (static_cast<int>(x.size()) != dim_) {
    throw DimensionError("dense update has wrong length");
  }
  SparseVector sparse;
  for (int k = 0; k < dim_; ++k) {
    if (x[k] != 0.0 || !std::isfinite(x[k])) sparse.Add(k, x[k]);
  }
  AddOuter(sparse, weight);
}

double RidgeGram::Finalize() {
  const Eigen::Index k = static_cast<Eigen::Index>(active_.size());
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) m(r, c) = block_[r * capacity_ + c];
    m(r, r) += ridge_;
  }
  // Symmetrize away accumulation round-off.
  m = 0.5 * (m + m.transpose()).eval();
  double condition = 1.0;
  inverse_.assign(static_cast<std::size_t>(k * k), 0.0);
  if (k > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("covariance is not positive definite");
    }
    const Eigen::VectorXd pivots = llt.matrixL().toDenseMatrix().diagonal();
    double lo = pivots.minCoeff();
    double hi = pivots.maxCoeff();
    if (k < dim_) {
      lo = std::min(lo, std::sqrt(ridge_));
      hi = std::max(hi, std::sqrt(ridge_));
    }
    condition = (hi / lo) * (hi / lo);
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) {
        inverse_[r * k + c] = 0.5 * (inv(r, c) + inv(c, r));
      }
    }
  }
  if (condition > kConditionWarning) {
    spdlog::warn("covariance condition number estimate {:.3e} exceeds {:.0e}",
                 condition, kConditionWarning);
  }
  // Compact the accumulation block to stride k for the dense accessors.
  std::vector<double> compact(static_cast<std::size_t>(k * k));
  for (Eigen::Index r = 0; r < k; ++r) {
    std::copy_n(block_.begin() + r * capacity_, k, compact.begin() + r * k);
  }
  block_.swap(compact);
  capacity_ = static_cast<std::size_t>(k);
  finalized_ = true;
  return condition;
}

double RidgeGram::InverseQuad(const SparseVector& x) const {
  if (!finalized_) throw NumericalError("RidgeGram not finalized");
  const std::size_t k = active_.size();
  double rest = 0.0;
  double acc = 0.0;
  std::vector<int> slots(x.nnz());
  for (std::size_t p = 0; p < x.nnz(); ++p) slots[p] = Find(x.index[p]);
  for (std::size_t p = 0; p < x.nnz(); ++p) {
    if (x.value[p] == 0.0) continue;
    if (slots[p] < 0) {
      rest += x.value[p] * x.value[p];
      continue;
    }
    const double* row = inverse_.data() + slots[p] * k;
    for (std::size_t q = 0; q < x.nnz(); ++q) {
      if (slots[q] >= 0) acc += x.value[p] * row[slots[q]] * x.value[q];
    }
  }
  return acc + rest / ridge_;
}

double RidgeGram::InverseQuadDense(std::span<const double> x) const {
  if (!finalized_) throw NumericalError("RidgeGram not finalized");
  if (static_cast<int>(x.size()) != dim_) {
    throw DimensionError("dense query has wrong length");
  }
  const std::size_t k = active_.size();
  std::vector<double> gathered(k);
  double total = 0.0;
  for (double v : x) total += v * v;
  double active_sq = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    gathered[s] = x[active_[s]];
    active_sq += gathered[s] * gathered[s];
  }
  const double rest = std::max(0.0, total - active_sq);
  return simd::QuadForm(inverse_, gathered) + rest / ridge_;
}

double RidgeGram::InverseNorm(const SparseVector& x) const {
  return std::sqrt(std::max(0.0, InverseQuad(x)));
}

double RidgeGram::InverseNormDense(std::span<const double> x) const {
  return std::sqrt(std::max(0.0, InverseQuadDense(x)));
}

double RidgeGram::QuadDense(std::span<const double> x) const {
  if (!finalized_) throw NumericalError("RidgeGram not finalized");
  if (static_cast<int>(x.size()) != dim_) {
    throw DimensionError("dense query has wrong length");
  }
  const std::size_t k = active_.size();
  std::vector<double> gathered(k);
  for (std::size_t s = 0; s < k; ++s) gathered[s] = x[active_[s]];
  double ridge_part = 0.0;
  for (double v : x) ridge_part += v * v;
  return simd::QuadForm(block_, gathered) + ridge_ * ridge_part;
}

std::vector<double> RidgeGram::Solve(std::span<const double> b) const {
  if (!finalized_) throw NumericalError("RidgeGram not finalized");
  if (static_cast<int>(b.size()) != dim_) {
    throw DimensionError("right-hand side has wrong length");
  }
  std::vector<double> out(b.begin(), b.end());
  for (double& v : out) v /= ridge_;
  const std::size_t k = active_.size();
  if (k == 0) return out;
  std::vector<double> gathered(k);
  std::vector<double> solved(k);
  for (std::size_t s = 0; s < k; ++s) gathered[s] = b[active_[s]];
  simd::Gemv(inverse_, k, k, gathered, solved);
  for (std::size_t s = 0; s < k; ++s) out[active_[s]] = solved[s];
  return out;
}

std::vector<double> RidgeGram::DenseMatrix() const {
  std::vector<double> out(static_cast<std::size_t>(dim_) * dim_, 0.0);
  for (int c = 0; c < dim_; ++c) out[c * dim_ + c] = ridge_;
  const std::size_t k = active_.size();
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      out[active_[r] * dim_ + active_[c]] += block_[r * capacity_ + c];
    }
  }
  return out;
}

std::vector<double> RidgeGram::DenseInverse() const {
  if (!finalized_) throw NumericalError("RidgeGram not finalized");
  std::vector<double> out(static_cast<std::size_t>(dim_) * dim_, 0.0);
  for (int c = 0; c < dim_; ++c) out[c * dim_ + c] = 1.0 / ridge_;
  const std::size_t k = active_.size();
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      out[active_[r] * dim_ + active_[c]] = inverse_[r * k + c];
    }
  }
  return out;
}

double RidgeGram::MinEigenvalue() const {
  const Eigen::Index k = static_cast<Eigen::Index>(active_.size());
  double lo = k < dim_ ? ridge_ : std::numeric_limits<double>::infinity();
  if (k == 0) return lo;
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) m(r, c) = block_[r * capacity_ + c];
    m(r, r) += ridge_;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m,
                                                     Eigen::EigenvaluesOnly);
  return std::min(lo, eig.eigenvalues().minCoeff());
}

}  // namespace marlhf
