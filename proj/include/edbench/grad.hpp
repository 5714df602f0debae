#pragma once

#include <span>
#include <vector>

#include "edbench/model.hpp"

namespace edbench {

// Loss: negative log probability of `target_token` at the final position.
struct LossSpec {
    int target_token = 0;
};

struct MlpWeightGrads {
    std::vector<float> w_in, b_in, w_out, b_out;
};

// Gradient of the loss with respect to the MLP output vector added to the
// residual stream at (layer, position), parameters held fixed. With an
// active intervention at the same site this is the gradient with respect
// to the injected value.
std::vector<float> grad_wrt_hidden(const Checkpoint& ckpt, std::span<const int> tokens,
                                   int layer, int position, const LossSpec& loss,
                                   const Intervention* iv = nullptr);

MlpWeightGrads grad_wrt_mlp_weights(const Checkpoint& ckpt, std::span<const int> tokens,
                                    int layer, const LossSpec& loss);

// -log p(target | final position) for an already computed forward pass.
double nll_loss(const detail::ForwardCache& f, int vocab_size, int target_token);

namespace detail {

struct Grads {
    Params blocks;
    // gradient wrt the MLP output vector per layer, [L][T*d_model]
    std::vector<std::vector<float>> mlp_site;
};

// dlogits has one row per position ([T][vocab]); rows of zeros are skipped.
Grads backward(const Checkpoint& ckpt, const ForwardCache& f,
               std::span<const float> dlogits, const Intervention* iv = nullptr);

} // namespace detail

} // namespace edbench
