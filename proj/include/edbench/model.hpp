#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edbench/jsonio.hpp"
#include "edbench/tokenizer.hpp"

namespace edbench {

// Decoder-only transformer, GPT-2 style: learned token + position
// embeddings, pre-norm residual blocks (attention, then MLP with GeLU),
// final layer norm, untied unembedding. Parameters are float32; softmax
// and other reductions that feed metrics accumulate in float64.
struct ModelConfig {
    int n_layers = 2;
    int d_model = 64;
    int n_heads = 4;
    int d_mlp = 256;
    int vocab_size = 0;   // set from the tokenizer
    int max_seq_len = 64;
    uint64_t seed = 0;

    int head_dim() const { return d_model / n_heads; }
    void validate() const; // throws ValidationError

    jsonio::ojson to_json() const;
    static ModelConfig from_json(const jsonio::ojson& j);
    bool operator==(const ModelConfig&) const = default;
};

struct LayerParams {
    std::vector<float> ln1_g, ln1_b;
    std::vector<float> wq, bq, wk, bk, wv, bv; // [d_model x d_model], [d_model]
    std::vector<float> wo, bo;
    std::vector<float> ln2_g, ln2_b;
    std::vector<float> w_in, b_in;   // [d_mlp x d_model], [d_mlp]
    std::vector<float> w_out, b_out; // [d_model x d_mlp], [d_model]
};

struct Params {
    std::vector<float> tok_emb; // [vocab x d_model]
    std::vector<float> pos_emb; // [max_seq_len x d_model]
    std::vector<LayerParams> layers;
    std::vector<float> lnf_g, lnf_b;
    std::vector<float> unembed; // [vocab x d_model]
};

struct Checkpoint {
    ModelConfig config;
    Tokenizer tokenizer;
    Params params;
    std::string provenance = "unedited";
};

// Visits every parameter block in the serialized order. The callback gets
// (name, rows, cols, data); vectors have rows==1. This is the single
// source of truth for block layout: save/load, byte comparison and
// training all iterate through it.
using BlockVisitor = std::function<void(const std::string&, size_t, size_t, std::vector<float>&)>;
using ConstBlockVisitor =
    std::function<void(const std::string&, size_t, size_t, const std::vector<float>&)>;
void visit_blocks(Params& p, const ModelConfig& c, const BlockVisitor& fn);
void visit_blocks(const Params& p, const ModelConfig& c, const ConstBlockVisitor& fn);

// Seeded initialization; deterministic and platform-independent.
Checkpoint init_checkpoint(const ModelConfig& config, Tokenizer tokenizer,
                           std::string provenance = "unedited");

Params zero_like(const Params& p);
bool params_bit_equal(const Params& a, const Params& b);
uint64_t params_hash(const Params& p); // FNV over all blocks, layout order

// Probability vector over the vocabulary at the final position.
struct NextTokenDistribution {
    std::vector<double> p;
};

// Replaces the product W_out·key at (layer, position) with `value` before
// the output bias is added; the effective MLP output becomes value + b_out.
// Editors optimize in this product space so that the rank-one identity
// W_out_new · k* = v* holds exactly.
struct Intervention {
    int layer = 0;
    int position = 0;
    std::vector<float> value; // d_model
};

// Per (layer, position) MLP activations plus final-position logits.
// mlp_input is the layer-normed block input (d_model), mlp_hidden the
// post-GeLU key vector (d_mlp) that editors read, mlp_output the vector
// added to the residual stream (d_model, includes the output bias).
struct TraceRecord {
    int n_layers = 0, seq_len = 0, d_model = 0, d_mlp = 0;
    std::vector<float> mlp_input;  // [L][T][d_model]
    std::vector<float> mlp_hidden; // [L][T][d_mlp]
    std::vector<float> mlp_output; // [L][T][d_model]
    std::vector<float> final_logits; // [vocab]

    std::span<const float> input(int layer, int pos) const;
    std::span<const float> hidden(int layer, int pos) const;
    std::span<const float> output(int layer, int pos) const;
};

void validate_tokens(const Checkpoint& ckpt, std::span<const int> tokens);

NextTokenDistribution forward(const Checkpoint& ckpt, std::span<const int> tokens,
                              const Intervention* iv = nullptr);
TraceRecord forward_traced(const Checkpoint& ckpt, std::span<const int> tokens,
                           const Intervention* iv = nullptr);

NextTokenDistribution softmax64(std::span<const float> logits);

// Internal forward state reused by gradients and training.
namespace detail {

struct LayerCache {
    std::vector<float> xhat1, h1;         // [T][d]
    std::vector<float> rstd1, rstd2;      // [T]
    std::vector<float> q, k, v, ctx;      // [T][d]
    std::vector<float> att;               // [heads][T][T], causal rows
    std::vector<float> xa;                // [T][d] residual after attention
    std::vector<float> xhat2, h2;         // [T][d]
    std::vector<float> z, hidden;         // [T][d_mlp] pre/post GeLU
    std::vector<float> mlp_out;           // [T][d], includes bias
    std::vector<float> x_out;             // [T][d] residual after MLP
};

struct ForwardCache {
    int seq_len = 0;
    std::vector<int> tokens;
    std::vector<float> x0;       // [T][d] embedding sum
    std::vector<LayerCache> layers;
    std::vector<float> xhatf, hf; // [T][d]
    std::vector<float> rstdf;     // [T]
    std::vector<float> logits;    // [T][vocab]
};

ForwardCache run_forward(const Checkpoint& ckpt, std::span<const int> tokens,
                         const Intervention* iv);

} // namespace detail

} // namespace edbench
