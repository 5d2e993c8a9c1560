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

#ifndef MARLHF_LINALG_H_
#define MARLHF_LINALG_H_

#include <cstddef>
#include <span>
#include <vector>

namespace marlhf {

// Sparse vector as parallel (index, value) arrays; indices are unique but not
// required to be sorted.
struct SparseVector {
  std::vector<int> index;
  std::vector<double> value;

  void Add(int i, double v) {
    index.push_back(i);
    value.push_back(v);
  }
  std::size_t nnz() const { return index.size(); }
};

// Symmetric positive-definite matrix of the form ridge * I + sum_k w_k x_k x_k^T
// stored over its active support only: coordinates never touched by an update
// keep the ridge value on the diagonal and no off-diagonal mass, so they do
// not need to be materialized. This keeps tabular one-hot feature spaces with
// thousands of coordinates cheap when the data only visits a few hundred.
class RidgeGram {
 public:
  RidgeGram() = default;
  RidgeGram(int dim, double ridge);

  int dim() const { return dim_; }
  double ridge() const { return ridge_; }

  // Accumulates weight * x x^T. Must be called before Finalize().
  void AddOuter(const SparseVector& x, double weight = 1.0);
  void AddOuterDense(std::span<const double> x, double weight = 1.0);

  // Factorizes the active block and caches its inverse. Returns the
  // estimated condition number of the full matrix (ratio of extreme Cholesky
  // pivots squared, a lower bound on the true value).
  double Finalize();
  bool finalized() const { return finalized_; }

  // x^T M^{-1} x and its square root.
  double InverseQuad(const SparseVector& x) const;
  double InverseQuadDense(std::span<const double> x) const;
  double InverseNorm(const SparseVector& x) const;
  double InverseNormDense(std::span<const double> x) const;
  // x^T M x.
  double QuadDense(std::span<const double> x) const;

  // M^{-1} b for dense b.
  std::vector<double> Solve(std::span<const double> b) const;

  // Dense copies (dim x dim, row-major). Only sensible for small dims.
  std::vector<double> DenseMatrix() const;
  std::vector<double> DenseInverse() const;
  // Smallest eigenvalue of the full matrix (ridge bound included).
  double MinEigenvalue() const;

  std::size_t active_size() const { return active_.size(); }

 private:
  int Slot(int coordinate);
  int Find(int coordinate) const;

  int dim_ = 0;
  double ridge_ = 1.0;
  bool finalized_ = false;
  std::vector<int> slot_of_;      // coordinate -> active slot or -1
  std::vector<int> active_;       // active slot -> coordinate
  std::vector<double> block_;     // grows as active_ grows; k x k row-major
  std::size_t capacity_ = 0;      // row stride of block_
  std::vector<double> inverse_;   // k x k row-major, after Finalize()
};

}  // namespace marlhf

#endif  // MARLHF_LINALG_H_
