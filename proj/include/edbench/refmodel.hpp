#pragma once

#include <span>
#include <vector>

#include "edbench/model.hpp"

// Plain double-precision re-implementation of the forward pass, written
// with straight loops and no shared kernel code. It exists purely for
// verification: finite-difference gradient checks and cross-checks of the
// float32 implementation run against it. Keep it independent of model.cpp.

namespace edbench::refmodel {

// Logits at the final position.
std::vector<double> forward_logits(const Checkpoint& ckpt, std::span<const int> tokens,
                                   const Intervention* iv = nullptr);

// -log p(target | final position).
double nll(const Checkpoint& ckpt, std::span<const int> tokens, int target_token,
           const Intervention* iv = nullptr);

} // namespace edbench::refmodel
