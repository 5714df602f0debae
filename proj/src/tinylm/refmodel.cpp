#include "edbench/refmodel.hpp"

#include <cmath>

#include "edbench/errors.hpp"

namespace edbench::refmodel {

namespace {

using dvec = std::vector<double>;

dvec layer_norm(const dvec& x, const std::vector<float>& g, const std::vector<float>& b) {
    const size_t d = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + 1e-5);
    dvec out(d);
    for (size_t i = 0; i < d; ++i) out[i] = (x[i] - mean) * rstd * g[i] + b[i];
    return out;
}

dvec matvec(const std::vector<float>& w, const dvec& x, const std::vector<float>* bias,
            size_t rows, size_t cols) {
    dvec y(rows, 0.0);
    for (size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < cols; ++j) acc += static_cast<double>(w[i * cols + j]) * x[j];
        y[i] = bias ? acc + (*bias)[i] : acc;
    }
    return y;
}

double gelu(double x) {
    const double c = 0.7978845608028654;
    return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

} // namespace

std::vector<double> forward_logits(const Checkpoint& ckpt, std::span<const int> tokens,
                                   const Intervention* iv) {
    validate_tokens(ckpt, tokens);
    const ModelConfig& c = ckpt.config;
    const Params& p = ckpt.params;
    const int T = static_cast<int>(tokens.size());
    const size_t d = static_cast<size_t>(c.d_model);
    const size_t m = static_cast<size_t>(c.d_mlp);
    const int H = c.n_heads;
    const size_t hd = static_cast<size_t>(c.head_dim());
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    std::vector<dvec> x(static_cast<size_t>(T), dvec(d));
    for (int t = 0; t < T; ++t) {
        for (size_t i = 0; i < d; ++i) {
            x[static_cast<size_t>(t)][i] =
                static_cast<double>(p.tok_emb[static_cast<size_t>(tokens[t]) * d + i]) +
                static_cast<double>(p.pos_emb[static_cast<size_t>(t) * d + i]);
        }
    }

    for (int l = 0; l < c.n_layers; ++l) {
        const LayerParams& L = p.layers[static_cast<size_t>(l)];
        std::vector<dvec> q(static_cast<size_t>(T)), k(static_cast<size_t>(T)),
            v(static_cast<size_t>(T));
        for (int t = 0; t < T; ++t) {
            dvec h1 = layer_norm(x[static_cast<size_t>(t)], L.ln1_g, L.ln1_b);
            q[static_cast<size_t>(t)] = matvec(L.wq, h1, &L.bq, d, d);
            k[static_cast<size_t>(t)] = matvec(L.wk, h1, &L.bk, d, d);
            v[static_cast<size_t>(t)] = matvec(L.wv, h1, &L.bv, d, d);
        }
        for (int t = 0; t < T; ++t) {
            dvec ctx(d, 0.0);
            for (int h = 0; h < H; ++h) {
                const size_t off = static_cast<size_t>(h) * hd;
                dvec scores(static_cast<size_t>(t) + 1);
                double max_s = -1e300;
                for (int j = 0; j <= t; ++j) {
                    double s = 0.0;
                    for (size_t i = 0; i < hd; ++i) {
                        s += q[static_cast<size_t>(t)][off + i] * k[static_cast<size_t>(j)][off + i];
                    }
                    scores[static_cast<size_t>(j)] = s * scale;
                    max_s = std::max(max_s, scores[static_cast<size_t>(j)]);
                }
                double denom = 0.0;
                for (double s : scores) denom += std::exp(s - max_s);
                for (int j = 0; j <= t; ++j) {
                    const double a = std::exp(scores[static_cast<size_t>(j)] - max_s) / denom;
                    for (size_t i = 0; i < hd; ++i) {
                        ctx[off + i] += a * v[static_cast<size_t>(j)][off + i];
                    }
                }
            }
            dvec attn_out = matvec(L.wo, ctx, &L.bo, d, d);
            for (size_t i = 0; i < d; ++i) x[static_cast<size_t>(t)][i] += attn_out[i];
        }
        for (int t = 0; t < T; ++t) {
            dvec h2 = layer_norm(x[static_cast<size_t>(t)], L.ln2_g, L.ln2_b);
            dvec mlp_out(d);
            if (iv && iv->layer == l && iv->position == t) {
                for (size_t i = 0; i < d; ++i) {
                    mlp_out[i] = static_cast<double>(iv->value[i]) + L.b_out[i];
                }
            } else {
                dvec z = matvec(L.w_in, h2, &L.b_in, m, d);
                dvec hid(m);
                for (size_t i = 0; i < m; ++i) hid[i] = gelu(z[i]);
                mlp_out = matvec(L.w_out, hid, &L.b_out, d, m);
            }
            for (size_t i = 0; i < d; ++i) x[static_cast<size_t>(t)][i] += mlp_out[i];
        }
    }

    dvec hf = layer_norm(x[static_cast<size_t>(T - 1)], p.lnf_g, p.lnf_b);
    return matvec(p.unembed, hf, nullptr, static_cast<size_t>(c.vocab_size), d);
}

double nll(const Checkpoint& ckpt, std::span<const int> tokens, int target_token,
           const Intervention* iv) {
    const auto logits = forward_logits(ckpt, tokens, iv);
    double max_l = -1e300;
    for (double l : logits) max_l = std::max(max_l, l);
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - max_l);
    const double logp = logits[static_cast<size_t>(target_token)] - max_l - std::log(denom);
    return -logp;
}

} // namespace edbench::refmodel
