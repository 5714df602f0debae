#include "edbench/train.hpp"

#include <cmath>
#include <numeric>

#include "edbench/errors.hpp"
#include "edbench/grad.hpp"
#include "edbench/kernels.hpp"
#include "edbench/rng.hpp"

namespace edbench {

namespace {

// Zips the blocks of several Params with identical layout.
template <class Fn>
void zip_blocks(const ModelConfig& c, Params& a, Params& b, const Params& s, Fn&& fn) {
    std::vector<std::vector<float>*> av, bv;
    std::vector<const std::vector<float>*> sv;
    visit_blocks(a, c, [&av](const std::string&, size_t, size_t, std::vector<float>& blk) {
        av.push_back(&blk);
    });
    visit_blocks(b, c, [&bv](const std::string&, size_t, size_t, std::vector<float>& blk) {
        bv.push_back(&blk);
    });
    visit_blocks(s, c, [&sv](const std::string&, size_t, size_t, const std::vector<float>& blk) {
        sv.push_back(&blk);
    });
    for (size_t i = 0; i < av.size(); ++i) fn(*av[i], *bv[i], *sv[i]);
}

void accumulate(const ModelConfig& c, Params& dst, const Params& src) {
    std::vector<std::vector<float>*> dv;
    std::vector<const std::vector<float>*> sv;
    visit_blocks(dst, c, [&dv](const std::string&, size_t, size_t, std::vector<float>& blk) {
        dv.push_back(&blk);
    });
    visit_blocks(src, c, [&sv](const std::string&, size_t, size_t, const std::vector<float>& blk) {
        sv.push_back(&blk);
    });
    for (size_t i = 0; i < dv.size(); ++i) {
        kern::axpy(1.0f, sv[i]->data(), dv[i]->data(), dv[i]->size());
    }
}

} // namespace

TrainResult train(const Checkpoint& start, const std::vector<std::vector<int>>& corpus,
                  const TrainConfig& hyper) {
    if (corpus.empty()) throw ValidationError("training corpus is empty");
    if (hyper.epochs < 0 || hyper.batch_size < 1) {
        throw ValidationError("bad training hyperparameters");
    }
    for (const auto& seq : corpus) validate_tokens(start, seq);

    TrainResult result;
    result.checkpoint = start;
    if (hyper.epochs == 0) return result;

    Checkpoint& ckpt = result.checkpoint;
    const ModelConfig& c = ckpt.config;
    const int V = c.vocab_size;

    Params velocity = zero_like(ckpt.params);
    Rng rng(hyper.seed);
    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), size_t{0});

    const float lr = static_cast<float>(hyper.lr);
    const float mu = static_cast<float>(hyper.momentum);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_nll = 0.0;
        size_t epoch_positions = 0;

        for (size_t batch_start = 0; batch_start < order.size();
             batch_start += static_cast<size_t>(hyper.batch_size)) {
            const size_t batch_end =
                std::min(order.size(), batch_start + static_cast<size_t>(hyper.batch_size));

            // count predicted positions first so every sequence's gradient
            // carries the right 1/N weight
            size_t batch_positions = 0;
            for (size_t bi = batch_start; bi < batch_end; ++bi) {
                const auto& seq = corpus[order[bi]];
                if (seq.size() >= 2) batch_positions += seq.size() - 1;
            }
            if (batch_positions == 0) continue;
            const float inv_n = 1.0f / static_cast<float>(batch_positions);

            Params grad_sum = zero_like(ckpt.params);
            for (size_t bi = batch_start; bi < batch_end; ++bi) {
                const auto& seq = corpus[order[bi]];
                if (seq.size() < 2) continue;
                const auto f = detail::run_forward(ckpt, seq, nullptr);
                std::vector<float> dlogits(static_cast<size_t>(f.seq_len) * V, 0.0f);
                for (int t = 0; t + 1 < f.seq_len; ++t) {
                    const float* row_logits = f.logits.data() + static_cast<size_t>(t) * V;
                    auto dist = softmax64(std::span<const float>(row_logits, static_cast<size_t>(V)));
                    const int next = seq[static_cast<size_t>(t) + 1];
                    epoch_nll += -std::log(std::max(dist.p[static_cast<size_t>(next)], 1e-300));
                    float* drow = dlogits.data() + static_cast<size_t>(t) * V;
                    for (int w = 0; w < V; ++w) {
                        drow[w] = static_cast<float>(dist.p[static_cast<size_t>(w)]) * inv_n;
                    }
                    drow[next] -= inv_n;
                }
                auto g = detail::backward(ckpt, f, dlogits, nullptr);
                accumulate(c, grad_sum, g.blocks);
            }
            epoch_positions += batch_positions;

            zip_blocks(c, ckpt.params, velocity, grad_sum,
                       [lr, mu](std::vector<float>& w, std::vector<float>& vel,
                                const std::vector<float>& g) {
                           for (size_t i = 0; i < w.size(); ++i) {
                               vel[i] = mu * vel[i] - lr * g[i];
                               w[i] += vel[i];
                           }
                       });
        }

        const double mean_loss =
            epoch_positions > 0 ? epoch_nll / static_cast<double>(epoch_positions) : 0.0;
        if (!std::isfinite(mean_loss)) {
            throw ValidationError("training loss became non-finite at epoch " +
                                  std::to_string(epoch));
        }
        result.epoch_loss.push_back(mean_loss);
    }
    return result;
}

} // namespace edbench
