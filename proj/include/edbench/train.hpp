#pragma once

#include <vector>

#include "edbench/model.hpp"

namespace edbench {

// Plain SGD with momentum on next-token cross-entropy. No dropout, no
// schedule; determinism over speed.
struct TrainConfig {
    int epochs = 40;
    double lr = 0.5;
    double momentum = 0.9;
    int batch_size = 8; // sequences per step
    uint64_t seed = 1;  // shuffle order
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> epoch_loss; // mean NLL per epoch
};

// Returns a new checkpoint; the input is untouched. Sequences with fewer
// than two tokens contribute nothing. Throws ValidationError on an empty
// corpus and aborts with a diagnostic if the loss becomes non-finite.
TrainResult train(const Checkpoint& start, const std::vector<std::vector<int>>& corpus,
                  const TrainConfig& hyper);

} // namespace edbench
