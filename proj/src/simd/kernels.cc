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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "marlhf/simd/kernels.h"

namespace marlhf::simd {

#if defined(MARLHF_HAVE_AVX2_TU)
const KernelTable* Avx2KernelsImpl();
#endif

const KernelTable* Avx2Kernels() {
#if defined(MARLHF_HAVE_AVX2_TU)
  return Avx2KernelsImpl();
#else
  return nullptr;
#endif
}

bool IsaSupported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(MARLHF_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

std::string_view IsaName(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

namespace {

const KernelTable* Select() {
  const char* forced = std::getenv("MARLHF_SIMD");
  if (forced != nullptr && std::string(forced) == "scalar") {
    return &ScalarKernels();
  }
  if (IsaSupported(Isa::kAvx2)) return Avx2Kernels();
  return &ScalarKernels();
}

std::atomic<const KernelTable*>& Slot() {
  static std::atomic<const KernelTable*> slot{Select()};
  return slot;
}

}  // namespace

const KernelTable& Active() { return *Slot().load(std::memory_order_acquire); }

void SetActive(Isa isa) {
  if (!IsaSupported(isa)) {
    throw std::invalid_argument("ISA not supported on this machine: " +
                                std::string(IsaName(isa)));
  }
  Slot().store(isa == Isa::kAvx2 ? Avx2Kernels() : &ScalarKernels(),
               std::memory_order_release);
}

}  // namespace marlhf::simd
