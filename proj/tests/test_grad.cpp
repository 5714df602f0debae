#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "edbench/commands.hpp"
#include "edbench/errors.hpp"
#include "edbench/grad.hpp"
#include "edbench/refmodel.hpp"
#include "edbench/rng.hpp"

using namespace edbench;

namespace {

Checkpoint fixture_checkpoint(uint64_t seed = 0, int n_layers = 2) {
    const auto tok = Tokenizer::build({"the quick brown fox jumps over a lazy dog.",
                                       "pack my box with five dozen jugs, now!"});
    ModelConfig config;
    config.n_layers = n_layers;
    config.d_model = 32;
    config.n_heads = 4;
    config.d_mlp = 64;
    config.max_seq_len = 32;
    config.seed = seed;
    config.vocab_size = tok.vocab_size();
    return init_checkpoint(config, tok);
}

} // namespace

TEST_CASE("finite differences confirm both gradient paths") {
    const auto ckpt = fixture_checkpoint(0);
    const auto tokens = ckpt.tokenizer.encode("the quick brown fox jumps over");
    const auto res = run_grad_fd_suite(ckpt, tokens, 100, 123);
    CHECK(res.max_rel_hidden < 1e-3);
    CHECK(res.max_rel_weights < 1e-3);
}

TEST_CASE("a corrupted gradient is detected by the same suite") {
    const auto ckpt = fixture_checkpoint(0);
    const auto tokens = ckpt.tokenizer.encode("the quick brown fox");
    const auto res = run_grad_fd_suite(ckpt, tokens, 20, 11, /*fault=*/1e-2);
    CHECK((res.max_rel_hidden >= 1e-3 || res.max_rel_weights >= 1e-3));
}

TEST_CASE("gradient at a causally disconnected site is exactly zero") {
    const auto ckpt = fixture_checkpoint(1);
    const auto tokens = ckpt.tokenizer.encode("the quick brown fox jumps");
    const int top = ckpt.config.n_layers - 1;
    const LossSpec loss{2};
    // the loss reads only the final position; above the last attention
    // there is no path from earlier positions into it
    for (int pos = 0; pos + 1 < static_cast<int>(tokens.size()); ++pos) {
        const auto g = grad_wrt_hidden(ckpt, tokens, top, pos, loss);
        for (float x : g) CHECK(x == 0.0f);
    }
    // the final position itself is connected
    const auto g_final =
        grad_wrt_hidden(ckpt, tokens, top, static_cast<int>(tokens.size()) - 1, loss);
    double norm = 0.0;
    for (float x : g_final) norm += std::abs(static_cast<double>(x));
    CHECK(norm > 0.0);
}

TEST_CASE("zero unembedding makes the loss constant and weight grads vanish") {
    auto ckpt = fixture_checkpoint(2);
    std::fill(ckpt.params.unembed.begin(), ckpt.params.unembed.end(), 0.0f);
    const auto tokens = ckpt.tokenizer.encode("pack my box with five");
    for (int layer = 0; layer < ckpt.config.n_layers; ++layer) {
        const auto g = grad_wrt_mlp_weights(ckpt, tokens, layer, LossSpec{3});
        for (float x : g.w_in) CHECK(x == 0.0f);
        for (float x : g.b_in) CHECK(x == 0.0f);
        for (float x : g.w_out) CHECK(x == 0.0f);
        for (float x : g.b_out) CHECK(x == 0.0f);
    }
}

TEST_CASE("gradients are bit-identical across repeated invocations") {
    const auto ckpt = fixture_checkpoint(3);
    const auto tokens = ckpt.tokenizer.encode("the quick brown fox");
    const LossSpec loss{5};
    const auto a = grad_wrt_hidden(ckpt, tokens, 0, 2, loss);
    const auto b = grad_wrt_hidden(ckpt, tokens, 0, 2, loss);
    CHECK(a == b);
    const auto ga = grad_wrt_mlp_weights(ckpt, tokens, 1, loss);
    const auto gb = grad_wrt_mlp_weights(ckpt, tokens, 1, loss);
    CHECK(ga.w_in == gb.w_in);
    CHECK(ga.w_out == gb.w_out);
}

TEST_CASE("one full backward equals the per-layer gradient calls") {
    const auto ckpt = fixture_checkpoint(4);
    const auto tokens = ckpt.tokenizer.encode("the quick brown fox jumps over");
    const LossSpec loss{7};

    const auto f = detail::run_forward(ckpt, tokens, nullptr);
    const int V = ckpt.config.vocab_size;
    std::vector<float> dlogits(static_cast<size_t>(f.seq_len) * V, 0.0f);
    const float* last = f.logits.data() + static_cast<size_t>(f.seq_len - 1) * V;
    const auto dist = softmax64(std::span<const float>(last, static_cast<size_t>(V)));
    float* row = dlogits.data() + static_cast<size_t>(f.seq_len - 1) * V;
    for (int w = 0; w < V; ++w) row[w] = static_cast<float>(dist.p[static_cast<size_t>(w)]);
    row[loss.target_token] -= 1.0f;
    const auto full = detail::backward(ckpt, f, dlogits, nullptr);

    for (int layer = 0; layer < ckpt.config.n_layers; ++layer) {
        const auto single = grad_wrt_mlp_weights(ckpt, tokens, layer, loss);
        const auto& L = full.blocks.layers[static_cast<size_t>(layer)];
        CHECK(single.w_in == L.w_in);
        CHECK(single.b_in == L.b_in);
        CHECK(single.w_out == L.w_out);
        CHECK(single.b_out == L.b_out);
    }
}

TEST_CASE("invalid gradient sites are rejected") {
    const auto ckpt = fixture_checkpoint(5);
    const auto tokens = ckpt.tokenizer.encode("the quick");
    CHECK_THROWS_AS(grad_wrt_hidden(ckpt, tokens, 99, 0, LossSpec{0}), ValidationError);
    CHECK_THROWS_AS(grad_wrt_hidden(ckpt, tokens, 0, 99, LossSpec{0}), ValidationError);
    CHECK_THROWS_AS(grad_wrt_mlp_weights(ckpt, tokens, -1, LossSpec{0}), ValidationError);
    CHECK_THROWS_AS(grad_wrt_hidden(ckpt, tokens, 0, 0, LossSpec{-1}), ValidationError);
}
