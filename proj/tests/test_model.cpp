#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "edbench/errors.hpp"
#include "edbench/model.hpp"
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

std::vector<int> fixture_prompt(const Checkpoint& ckpt) {
    return ckpt.tokenizer.encode("the quick brown fox jumps over");
}

} // namespace

TEST_CASE("config invariants are enforced") {
    ModelConfig c;
    c.vocab_size = 10;
    CHECK_NOTHROW(c.validate());
    c.n_heads = 3; // 64 % 3 != 0
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = ModelConfig{};
    c.vocab_size = 10;
    c.d_mlp = 16; // < d_model
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("forward produces a normalized distribution for random inputs") {
    Rng rng(11);
    for (uint64_t seed = 0; seed < 4; ++seed) {
        const auto ckpt = fixture_checkpoint(seed);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<int> tokens{Tokenizer::kBos};
            const int len = 1 + static_cast<int>(rng.below(12));
            for (int i = 0; i < len; ++i) {
                tokens.push_back(static_cast<int>(rng.below(
                    static_cast<uint64_t>(ckpt.config.vocab_size))));
            }
            const auto dist = forward(ckpt, tokens);
            double sum = 0.0;
            for (double p : dist.p) {
                CHECK(p >= 0.0);
                sum += p;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("zero unembedding gives the exact uniform distribution") {
    auto ckpt = fixture_checkpoint(0, 1);
    std::fill(ckpt.params.unembed.begin(), ckpt.params.unembed.end(), 0.0f);
    const auto dist = forward(ckpt, fixture_prompt(ckpt));
    const double uniform = 1.0 / static_cast<double>(ckpt.config.vocab_size);
    for (double p : dist.p) CHECK(p == uniform);
}

TEST_CASE("forward is bit-identical across runs and threads") {
    const auto ckpt = fixture_checkpoint(0);
    const auto tokens = fixture_prompt(ckpt);
    const auto first = forward(ckpt, tokens);
    const auto second = forward(ckpt, tokens);
    CHECK(first.p == second.p);

    std::vector<NextTokenDistribution> results(8);
    std::vector<std::thread> pool;
    for (int t = 0; t < 8; ++t) {
        pool.emplace_back([&, t]() { results[static_cast<size_t>(t)] = forward(ckpt, tokens); });
    }
    for (auto& t : pool) t.join();
    for (const auto& r : results) CHECK(r.p == first.p);
}

TEST_CASE("invalid inputs are rejected") {
    const auto ckpt = fixture_checkpoint();
    std::vector<int> too_long(static_cast<size_t>(ckpt.config.max_seq_len) + 1, 2);
    CHECK_THROWS_AS(forward(ckpt, too_long), ValidationError);
    std::vector<int> bad_id{Tokenizer::kBos, ckpt.config.vocab_size};
    CHECK_THROWS_AS(forward(ckpt, bad_id), ValidationError);
    std::vector<int> empty;
    CHECK_THROWS_AS(forward(ckpt, empty), ValidationError);
}

TEST_CASE("traced forward matches the plain forward exactly") {
    const auto ckpt = fixture_checkpoint(3);
    const auto tokens = fixture_prompt(ckpt);
    const auto trace = forward_traced(ckpt, tokens);
    const auto dist = forward(ckpt, tokens);
    const auto from_trace = softmax64(trace.final_logits);
    for (size_t i = 0; i < dist.p.size(); ++i) CHECK(from_trace.p[i] == dist.p[i]);
}

TEST_CASE("trace covers every layer and position") {
    const auto ckpt = fixture_checkpoint(1, 2);
    const auto tokens = fixture_prompt(ckpt);
    const auto trace = forward_traced(ckpt, tokens);
    CHECK(trace.n_layers == 2);
    CHECK(trace.seq_len == static_cast<int>(tokens.size()));
    // one key/value pair per (layer, position)
    CHECK(trace.mlp_hidden.size() ==
          static_cast<size_t>(2 * trace.seq_len) * static_cast<size_t>(trace.d_mlp));
    CHECK(trace.mlp_output.size() ==
          static_cast<size_t>(2 * trace.seq_len) * static_cast<size_t>(trace.d_model));
}

TEST_CASE("trace recompute: output = W_out gelu(W_in input + b_in) + b_out") {
    const auto ckpt = fixture_checkpoint(5);
    const auto tokens = fixture_prompt(ckpt);
    const auto trace = forward_traced(ckpt, tokens);
    const int d = ckpt.config.d_model;
    const int m = ckpt.config.d_mlp;
    for (int l = 0; l < ckpt.config.n_layers; ++l) {
        const auto& L = ckpt.params.layers[static_cast<size_t>(l)];
        for (int t = 0; t < trace.seq_len; ++t) {
            const auto input = trace.input(l, t);
            const auto output = trace.output(l, t);
            // recompute in double from the traced MLP input
            std::vector<double> hidden(static_cast<size_t>(m));
            for (int i = 0; i < m; ++i) {
                double z = L.b_in[static_cast<size_t>(i)];
                for (int j = 0; j < d; ++j) {
                    z += static_cast<double>(L.w_in[static_cast<size_t>(i) * d + j]) * input[static_cast<size_t>(j)];
                }
                hidden[static_cast<size_t>(i)] =
                    0.5 * z * (1.0 + std::tanh(0.7978845608028654 * (z + 0.044715 * z * z * z)));
            }
            for (int i = 0; i < d; ++i) {
                double o = L.b_out[static_cast<size_t>(i)];
                for (int j = 0; j < m; ++j) {
                    o += static_cast<double>(L.w_out[static_cast<size_t>(i) * m + j]) * hidden[static_cast<size_t>(j)];
                }
                CHECK(std::abs(o - static_cast<double>(output[static_cast<size_t>(i)])) <=
                      1e-3 * (std::abs(o) + 1e-2));
            }
        }
    }
}

TEST_CASE("float forward agrees with the double-precision reference") {
    const auto ckpt = fixture_checkpoint(9);
    const auto tokens = fixture_prompt(ckpt);
    const auto trace = forward_traced(ckpt, tokens);
    const auto ref = refmodel::forward_logits(ckpt, tokens);
    for (size_t i = 0; i < ref.size(); ++i) {
        CHECK(std::abs(static_cast<double>(trace.final_logits[i]) - ref[i]) <= 1e-3);
    }
}

TEST_CASE("intervention replaces the MLP product at one site") {
    const auto ckpt = fixture_checkpoint(2);
    const auto tokens = fixture_prompt(ckpt);
    const int layer = 0;
    const int pos = 2;
    const auto base = forward_traced(ckpt, tokens);
    // re-inject the current product: nothing may change
    const auto& L = ckpt.params.layers[0];
    std::vector<float> v0(static_cast<size_t>(ckpt.config.d_model));
    for (int i = 0; i < ckpt.config.d_model; ++i) {
        v0[static_cast<size_t>(i)] =
            base.output(layer, pos)[static_cast<size_t>(i)] - L.b_out[static_cast<size_t>(i)];
    }
    Intervention same{layer, pos, v0};
    const auto replayed = forward_traced(ckpt, tokens, &same);
    for (size_t i = 0; i < base.final_logits.size(); ++i) {
        CHECK(replayed.final_logits[i] == doctest::Approx(base.final_logits[i]).epsilon(1e-5));
    }
    // a large injection at a causally connected site must change the logits
    Intervention big{layer, pos, std::vector<float>(static_cast<size_t>(ckpt.config.d_model), 5.0f)};
    const auto changed = forward(ckpt, tokens, &big);
    const auto base_dist = softmax64(base.final_logits);
    double diff = 0.0;
    for (size_t i = 0; i < changed.p.size(); ++i) diff += std::abs(changed.p[i] - base_dist.p[i]);
    CHECK(diff > 1e-6);
}

TEST_CASE("checkpoint init is platform-deterministic") {
    const auto a = fixture_checkpoint(42);
    const auto b = fixture_checkpoint(42);
    CHECK(params_bit_equal(a.params, b.params));
    const auto c = fixture_checkpoint(43);
    CHECK(!params_bit_equal(a.params, c.params));
    CHECK(params_hash(a.params) == params_hash(b.params));
    CHECK(params_hash(a.params) != params_hash(c.params));
}
