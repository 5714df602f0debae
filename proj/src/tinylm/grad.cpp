#include "edbench/grad.hpp"

#include <algorithm>
#include <cmath>

#include "edbench/errors.hpp"
#include "edbench/kernels.hpp"

namespace edbench {

namespace {

float gelu_deriv(float x) {
    const float c = 0.7978845608028654f;
    const float a = 0.044715f;
    const float u = c * (x + a * x * x * x);
    const float t = std::tanh(u);
    return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * c * (1.0f + 3.0f * a * x * x);
}

// Backward through y = g * xhat + b given dy; accumulates dg/db and adds
// the input gradient into dx.
void layer_norm_backward(const float* dy, const float* xhat, float rstd, const float* g,
                         int d, float* dg, float* db, float* dx) {
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (int i = 0; i < d; ++i) {
        const double dxh = static_cast<double>(dy[i]) * g[i];
        mean_dxhat += dxh;
        mean_dxhat_xhat += dxh * xhat[i];
    }
    mean_dxhat /= d;
    mean_dxhat_xhat /= d;
    for (int i = 0; i < d; ++i) {
        dg[i] += dy[i] * xhat[i];
        db[i] += dy[i];
        const double dxh = static_cast<double>(dy[i]) * g[i];
        dx[i] += static_cast<float>(rstd * (dxh - mean_dxhat -
                                            static_cast<double>(xhat[i]) * mean_dxhat_xhat));
    }
}

} // namespace

double nll_loss(const detail::ForwardCache& f, int vocab_size, int target_token) {
    const float* last = f.logits.data() + static_cast<size_t>(f.seq_len - 1) * vocab_size;
    auto dist = softmax64(std::span<const float>(last, static_cast<size_t>(vocab_size)));
    return -std::log(std::max(dist.p[static_cast<size_t>(target_token)], 1e-300));
}

namespace detail {

Grads backward(const Checkpoint& ckpt, const ForwardCache& f,
               std::span<const float> dlogits, const Intervention* iv) {
    const ModelConfig& c = ckpt.config;
    const Params& p = ckpt.params;
    const int T = f.seq_len;
    const int d = c.d_model;
    const int m = c.d_mlp;
    const int H = c.n_heads;
    const int hd = c.head_dim();
    const int V = c.vocab_size;
    const float att_scale = 1.0f / std::sqrt(static_cast<float>(hd));
    const size_t td = static_cast<size_t>(T) * d;

    Grads g;
    g.blocks = zero_like(p);
    g.mlp_site.assign(static_cast<size_t>(c.n_layers), std::vector<float>(td, 0.0f));

    // unembedding + final layer norm
    std::vector<float> dx(td, 0.0f); // grad wrt top layer's x_out
    std::vector<float> dhf(static_cast<size_t>(d));
    for (int t = 0; t < T; ++t) {
        const float* dl = dlogits.data() + static_cast<size_t>(t) * V;
        bool nonzero = false;
        for (int w = 0; w < V; ++w) {
            if (dl[w] != 0.0f) { nonzero = true; break; }
        }
        if (!nonzero) continue;
        const size_t row = static_cast<size_t>(t) * d;
        kern::rank1_accum(g.blocks.unembed.data(), dl, f.hf.data() + row, 1.0f,
                          static_cast<size_t>(V), static_cast<size_t>(d));
        kern::matvec_t(p.unembed.data(), dl, dhf.data(), static_cast<size_t>(V),
                       static_cast<size_t>(d));
        layer_norm_backward(dhf.data(), f.xhatf.data() + row, f.rstdf[static_cast<size_t>(t)],
                            p.lnf_g.data(), d, g.blocks.lnf_g.data(), g.blocks.lnf_b.data(),
                            dx.data() + row);
    }

    std::vector<float> dxa(td), dq(td), dk(td), dv(td), dctx(td), dh1(td);
    std::vector<float> tmp_d(static_cast<size_t>(d));
    std::vector<float> dhid(static_cast<size_t>(m)), dz(static_cast<size_t>(m));
    std::vector<float> datt, ds;

    for (int l = c.n_layers - 1; l >= 0; --l) {
        const LayerParams& L = p.layers[static_cast<size_t>(l)];
        LayerParams& G = g.blocks.layers[static_cast<size_t>(l)];
        const LayerCache& lc = f.layers[static_cast<size_t>(l)];

        // residual: x_out = xa + mlp_out
        std::copy(dx.begin(), dx.end(), dxa.begin());
        std::vector<float>& site = g.mlp_site[static_cast<size_t>(l)];
        std::copy(dx.begin(), dx.end(), site.begin());

        // MLP backward
        for (int t = 0; t < T; ++t) {
            const size_t row = static_cast<size_t>(t) * d;
            const float* dmo = site.data() + row;
            for (int i = 0; i < d; ++i) G.b_out[static_cast<size_t>(i)] += dmo[i];
            if (iv && iv->layer == l && iv->position == t) {
                continue; // injected product: no path into w_out or the key
            }
            const float* hid = lc.hidden.data() + static_cast<size_t>(t) * m;
            kern::rank1_accum(G.w_out.data(), dmo, hid, 1.0f, static_cast<size_t>(d),
                              static_cast<size_t>(m));
            kern::matvec_t(L.w_out.data(), dmo, dhid.data(), static_cast<size_t>(d),
                           static_cast<size_t>(m));
            const float* z = lc.z.data() + static_cast<size_t>(t) * m;
            for (int i = 0; i < m; ++i) dz[static_cast<size_t>(i)] = dhid[static_cast<size_t>(i)] * gelu_deriv(z[i]);
            for (int i = 0; i < m; ++i) G.b_in[static_cast<size_t>(i)] += dz[static_cast<size_t>(i)];
            kern::rank1_accum(G.w_in.data(), dz.data(), lc.h2.data() + row, 1.0f,
                              static_cast<size_t>(m), static_cast<size_t>(d));
            kern::matvec_t(L.w_in.data(), dz.data(), tmp_d.data(), static_cast<size_t>(m),
                           static_cast<size_t>(d));
            layer_norm_backward(tmp_d.data(), lc.xhat2.data() + row,
                                lc.rstd2[static_cast<size_t>(t)], L.ln2_g.data(), d,
                                G.ln2_g.data(), G.ln2_b.data(), dxa.data() + row);
        }

        // residual: xa = x_in + attn_out; dxa now complete
        std::copy(dxa.begin(), dxa.end(), dx.begin()); // becomes dx_in
        std::fill(dctx.begin(), dctx.end(), 0.0f);
        for (int t = 0; t < T; ++t) {
            const size_t row = static_cast<size_t>(t) * d;
            const float* dao = dxa.data() + row;
            for (int i = 0; i < d; ++i) G.bo[static_cast<size_t>(i)] += dao[i];
            kern::rank1_accum(G.wo.data(), dao, lc.ctx.data() + row, 1.0f, static_cast<size_t>(d),
                              static_cast<size_t>(d));
            kern::matvec_t(L.wo.data(), dao, tmp_d.data(), static_cast<size_t>(d),
                           static_cast<size_t>(d));
            for (int i = 0; i < d; ++i) dctx[row + i] += tmp_d[static_cast<size_t>(i)];
        }

        std::fill(dq.begin(), dq.end(), 0.0f);
        std::fill(dk.begin(), dk.end(), 0.0f);
        std::fill(dv.begin(), dv.end(), 0.0f);
        for (int h = 0; h < H; ++h) {
            const int off = h * hd;
            for (int t = 0; t < T; ++t) {
                const float* att_row = lc.att.data() +
                                       (static_cast<size_t>(h) * T + static_cast<size_t>(t)) * T;
                const float* dctx_h = dctx.data() + static_cast<size_t>(t) * d + off;
                datt.assign(static_cast<size_t>(t) + 1, 0.0f);
                for (int j = 0; j <= t; ++j) {
                    datt[static_cast<size_t>(j)] =
                        kern::dot(dctx_h, lc.v.data() + static_cast<size_t>(j) * d + off,
                                  static_cast<size_t>(hd));
                    kern::axpy(att_row[j], dctx_h, dv.data() + static_cast<size_t>(j) * d + off,
                               static_cast<size_t>(hd));
                }
                double inner = 0.0;
                for (int j = 0; j <= t; ++j) {
                    inner += static_cast<double>(att_row[j]) * datt[static_cast<size_t>(j)];
                }
                ds.assign(static_cast<size_t>(t) + 1, 0.0f);
                for (int j = 0; j <= t; ++j) {
                    ds[static_cast<size_t>(j)] = static_cast<float>(
                        static_cast<double>(att_row[j]) * (datt[static_cast<size_t>(j)] - inner));
                }
                float* dq_h = dq.data() + static_cast<size_t>(t) * d + off;
                const float* q_h = lc.q.data() + static_cast<size_t>(t) * d + off;
                for (int j = 0; j <= t; ++j) {
                    const float s = ds[static_cast<size_t>(j)] * att_scale;
                    kern::axpy(s, lc.k.data() + static_cast<size_t>(j) * d + off, dq_h,
                               static_cast<size_t>(hd));
                    kern::axpy(s, q_h, dk.data() + static_cast<size_t>(j) * d + off,
                               static_cast<size_t>(hd));
                }
            }
        }

        std::fill(dh1.begin(), dh1.end(), 0.0f);
        for (int t = 0; t < T; ++t) {
            const size_t row = static_cast<size_t>(t) * d;
            const float* h1 = lc.h1.data() + row;
            struct Proj { const std::vector<float>& w; std::vector<float>& gw; std::vector<float>& gb; const std::vector<float>& grad; };
            const Proj projs[3] = {{L.wq, G.wq, G.bq, dq}, {L.wk, G.wk, G.bk, dk}, {L.wv, G.wv, G.bv, dv}};
            for (const auto& pr : projs) {
                const float* gv = pr.grad.data() + row;
                for (int i = 0; i < d; ++i) pr.gb[static_cast<size_t>(i)] += gv[i];
                kern::rank1_accum(pr.gw.data(), gv, h1, 1.0f, static_cast<size_t>(d),
                                  static_cast<size_t>(d));
                kern::matvec_t(pr.w.data(), gv, tmp_d.data(), static_cast<size_t>(d),
                               static_cast<size_t>(d));
                for (int i = 0; i < d; ++i) dh1[row + static_cast<size_t>(i)] += tmp_d[static_cast<size_t>(i)];
            }
            layer_norm_backward(dh1.data() + row, lc.xhat1.data() + row,
                                lc.rstd1[static_cast<size_t>(t)], L.ln1_g.data(), d,
                                G.ln1_g.data(), G.ln1_b.data(), dx.data() + row);
        }
    }

    // embeddings
    for (int t = 0; t < T; ++t) {
        const size_t row = static_cast<size_t>(t) * d;
        float* te = g.blocks.tok_emb.data() + static_cast<size_t>(f.tokens[static_cast<size_t>(t)]) * d;
        float* pe = g.blocks.pos_emb.data() + row;
        const float* dx0 = dx.data() + row;
        for (int i = 0; i < d; ++i) {
            te[i] += dx0[i];
            pe[i] += dx0[i];
        }
    }
    return g;
}

} // namespace detail

namespace {

std::vector<float> loss_dlogits(const detail::ForwardCache& f, int vocab_size,
                                const LossSpec& loss) {
    if (loss.target_token < 0 || loss.target_token >= vocab_size) {
        throw ValidationError("loss target token out of range");
    }
    std::vector<float> dlogits(static_cast<size_t>(f.seq_len) * vocab_size, 0.0f);
    const float* last = f.logits.data() + static_cast<size_t>(f.seq_len - 1) * vocab_size;
    auto dist = softmax64(std::span<const float>(last, static_cast<size_t>(vocab_size)));
    float* row = dlogits.data() + static_cast<size_t>(f.seq_len - 1) * vocab_size;
    for (int w = 0; w < vocab_size; ++w) row[w] = static_cast<float>(dist.p[static_cast<size_t>(w)]);
    row[loss.target_token] -= 1.0f;
    return dlogits;
}

} // namespace

std::vector<float> grad_wrt_hidden(const Checkpoint& ckpt, std::span<const int> tokens,
                                   int layer, int position, const LossSpec& loss,
                                   const Intervention* iv) {
    if (layer < 0 || layer >= ckpt.config.n_layers) throw ValidationError("layer out of range");
    if (position < 0 || position >= static_cast<int>(tokens.size())) {
        throw ValidationError("position out of range");
    }
    const auto f = detail::run_forward(ckpt, tokens, iv);
    const auto dlogits = loss_dlogits(f, ckpt.config.vocab_size, loss);
    auto g = detail::backward(ckpt, f, dlogits, iv);
    const auto& site = g.mlp_site[static_cast<size_t>(layer)];
    const size_t row = static_cast<size_t>(position) * ckpt.config.d_model;
    return {site.begin() + static_cast<std::ptrdiff_t>(row),
            site.begin() + static_cast<std::ptrdiff_t>(row + ckpt.config.d_model)};
}

MlpWeightGrads grad_wrt_mlp_weights(const Checkpoint& ckpt, std::span<const int> tokens,
                                    int layer, const LossSpec& loss) {
    if (layer < 0 || layer >= ckpt.config.n_layers) throw ValidationError("layer out of range");
    const auto f = detail::run_forward(ckpt, tokens, nullptr);
    const auto dlogits = loss_dlogits(f, ckpt.config.vocab_size, loss);
    auto g = detail::backward(ckpt, f, dlogits, nullptr);
    auto& L = g.blocks.layers[static_cast<size_t>(layer)];
    return {std::move(L.w_in), std::move(L.b_in), std::move(L.w_out), std::move(L.b_out)};
}

} // namespace edbench
