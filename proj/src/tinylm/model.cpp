#include "edbench/model.hpp"

#include <cmath>
#include <cstring>

#include "edbench/errors.hpp"
#include "edbench/kernels.hpp"
#include "edbench/rng.hpp"

namespace edbench {

void ModelConfig::validate() const {
    if (n_layers < 1 || d_model < 1 || n_heads < 1 || d_mlp < 1 || vocab_size < 1 ||
        max_seq_len < 1) {
        throw ValidationError("model dimensions must be >= 1");
    }
    if (d_model % n_heads != 0) throw ValidationError("d_model must be divisible by n_heads");
    if (d_mlp < d_model) throw ValidationError("d_mlp must be >= d_model");
}

jsonio::ojson ModelConfig::to_json() const {
    jsonio::ojson j;
    j["n_layers"] = n_layers;
    j["d_model"] = d_model;
    j["n_heads"] = n_heads;
    j["d_mlp"] = d_mlp;
    j["vocab_size"] = vocab_size;
    j["max_seq_len"] = max_seq_len;
    j["seed"] = seed;
    return j;
}

ModelConfig ModelConfig::from_json(const jsonio::ojson& j) {
    ModelConfig c;
    try {
        c.n_layers = j.at("n_layers").get<int>();
        c.d_model = j.at("d_model").get<int>();
        c.n_heads = j.at("n_heads").get<int>();
        c.d_mlp = j.at("d_mlp").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.max_seq_len = j.at("max_seq_len").get<int>();
        c.seed = j.at("seed").get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad model config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

template <class P, class Fn>
void visit_blocks_impl(P& p, const ModelConfig& c, const Fn& fn) {
    const auto d = static_cast<size_t>(c.d_model);
    const auto m = static_cast<size_t>(c.d_mlp);
    const auto v = static_cast<size_t>(c.vocab_size);
    const auto t = static_cast<size_t>(c.max_seq_len);
    fn("tok_emb", v, d, p.tok_emb);
    fn("pos_emb", t, d, p.pos_emb);
    for (size_t l = 0; l < p.layers.size(); ++l) {
        auto& L = p.layers[l];
        const std::string pre = "layer" + std::to_string(l) + ".";
        fn(pre + "ln1_g", size_t{1}, d, L.ln1_g);
        fn(pre + "ln1_b", size_t{1}, d, L.ln1_b);
        fn(pre + "wq", d, d, L.wq);
        fn(pre + "bq", size_t{1}, d, L.bq);
        fn(pre + "wk", d, d, L.wk);
        fn(pre + "bk", size_t{1}, d, L.bk);
        fn(pre + "wv", d, d, L.wv);
        fn(pre + "bv", size_t{1}, d, L.bv);
        fn(pre + "wo", d, d, L.wo);
        fn(pre + "bo", size_t{1}, d, L.bo);
        fn(pre + "ln2_g", size_t{1}, d, L.ln2_g);
        fn(pre + "ln2_b", size_t{1}, d, L.ln2_b);
        fn(pre + "w_in", m, d, L.w_in);
        fn(pre + "b_in", size_t{1}, m, L.b_in);
        fn(pre + "w_out", d, m, L.w_out);
        fn(pre + "b_out", size_t{1}, d, L.b_out);
    }
    fn("lnf_g", size_t{1}, d, p.lnf_g);
    fn("lnf_b", size_t{1}, d, p.lnf_b);
    fn("unembed", v, d, p.unembed);
}

} // namespace

void visit_blocks(Params& p, const ModelConfig& c, const BlockVisitor& fn) {
    visit_blocks_impl(p, c, fn);
}

void visit_blocks(const Params& p, const ModelConfig& c, const ConstBlockVisitor& fn) {
    visit_blocks_impl(p, c, fn);
}

Checkpoint init_checkpoint(const ModelConfig& config, Tokenizer tokenizer,
                           std::string provenance) {
    ModelConfig c = config;
    if (c.vocab_size == 0) c.vocab_size = tokenizer.vocab_size();
    c.validate();
    if (c.vocab_size != tokenizer.vocab_size()) {
        throw ValidationError("config vocab_size does not match tokenizer");
    }

    Checkpoint ckpt;
    ckpt.config = c;
    ckpt.tokenizer = std::move(tokenizer);
    ckpt.provenance = std::move(provenance);

    Params& p = ckpt.params;
    p.layers.resize(static_cast<size_t>(c.n_layers));
    // allocate in layout order, then fill
    visit_blocks(p, c, [](const std::string&, size_t r, size_t cols, std::vector<float>& b) {
        b.assign(r * cols, 0.0f);
    });

    Rng rng(c.seed);
    const float emb_std = 0.02f;
    // residual-path projections get a 1/sqrt(2L) shrink, as is usual for
    // pre-norm GPT stacks
    const float proj_std = 0.02f / std::sqrt(2.0f * static_cast<float>(c.n_layers));
    auto fill_normal = [&rng](std::vector<float>& b, float std_dev) {
        for (float& x : b) x = static_cast<float>(rng.normal()) * std_dev;
    };
    auto ones = [](std::vector<float>& b) { std::fill(b.begin(), b.end(), 1.0f); };

    fill_normal(p.tok_emb, emb_std);
    fill_normal(p.pos_emb, emb_std);
    for (auto& L : p.layers) {
        ones(L.ln1_g);
        fill_normal(L.wq, emb_std);
        fill_normal(L.wk, emb_std);
        fill_normal(L.wv, emb_std);
        fill_normal(L.wo, proj_std);
        ones(L.ln2_g);
        fill_normal(L.w_in, emb_std);
        fill_normal(L.w_out, proj_std);
    }
    ones(p.lnf_g);
    fill_normal(p.unembed, emb_std);
    return ckpt;
}

Params zero_like(const Params& p) {
    Params z;
    z.tok_emb.assign(p.tok_emb.size(), 0.0f);
    z.pos_emb.assign(p.pos_emb.size(), 0.0f);
    z.layers.resize(p.layers.size());
    for (size_t l = 0; l < p.layers.size(); ++l) {
        const auto& a = p.layers[l];
        auto& b = z.layers[l];
        auto zero = [](const std::vector<float>& src, std::vector<float>& dst) {
            dst.assign(src.size(), 0.0f);
        };
        zero(a.ln1_g, b.ln1_g); zero(a.ln1_b, b.ln1_b);
        zero(a.wq, b.wq); zero(a.bq, b.bq);
        zero(a.wk, b.wk); zero(a.bk, b.bk);
        zero(a.wv, b.wv); zero(a.bv, b.bv);
        zero(a.wo, b.wo); zero(a.bo, b.bo);
        zero(a.ln2_g, b.ln2_g); zero(a.ln2_b, b.ln2_b);
        zero(a.w_in, b.w_in); zero(a.b_in, b.b_in);
        zero(a.w_out, b.w_out); zero(a.b_out, b.b_out);
    }
    z.lnf_g.assign(p.lnf_g.size(), 0.0f);
    z.lnf_b.assign(p.lnf_b.size(), 0.0f);
    z.unembed.assign(p.unembed.size(), 0.0f);
    return z;
}

bool params_bit_equal(const Params& a, const Params& b) {
    bool equal = true;
    auto cmp = [&equal](const std::vector<float>& x, const std::vector<float>& y) {
        if (x.size() != y.size()) { equal = false; return; }
        if (!x.empty() &&
            std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) != 0) {
            equal = false;
        }
    };
    cmp(a.tok_emb, b.tok_emb);
    cmp(a.pos_emb, b.pos_emb);
    if (a.layers.size() != b.layers.size()) return false;
    for (size_t l = 0; l < a.layers.size(); ++l) {
        const auto& x = a.layers[l];
        const auto& y = b.layers[l];
        cmp(x.ln1_g, y.ln1_g); cmp(x.ln1_b, y.ln1_b);
        cmp(x.wq, y.wq); cmp(x.bq, y.bq);
        cmp(x.wk, y.wk); cmp(x.bk, y.bk);
        cmp(x.wv, y.wv); cmp(x.bv, y.bv);
        cmp(x.wo, y.wo); cmp(x.bo, y.bo);
        cmp(x.ln2_g, y.ln2_g); cmp(x.ln2_b, y.ln2_b);
        cmp(x.w_in, y.w_in); cmp(x.b_in, y.b_in);
        cmp(x.w_out, y.w_out); cmp(x.b_out, y.b_out);
    }
    cmp(a.lnf_g, b.lnf_g);
    cmp(a.lnf_b, b.lnf_b);
    cmp(a.unembed, b.unembed);
    return equal;
}

uint64_t params_hash(const Params& p) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const std::vector<float>& b) {
        if (!b.empty()) h = fnv1a64(b.data(), b.size() * sizeof(float), h);
    };
    mix(p.tok_emb);
    mix(p.pos_emb);
    for (const auto& L : p.layers) {
        mix(L.ln1_g); mix(L.ln1_b);
        mix(L.wq); mix(L.bq); mix(L.wk); mix(L.bk); mix(L.wv); mix(L.bv);
        mix(L.wo); mix(L.bo);
        mix(L.ln2_g); mix(L.ln2_b);
        mix(L.w_in); mix(L.b_in); mix(L.w_out); mix(L.b_out);
    }
    mix(p.lnf_g); mix(p.lnf_b); mix(p.unembed);
    return h;
}

void validate_tokens(const Checkpoint& ckpt, std::span<const int> tokens) {
    if (tokens.empty()) throw ValidationError("token sequence is empty");
    if (static_cast<int>(tokens.size()) > ckpt.config.max_seq_len) {
        throw ValidationError("token sequence longer than max_seq_len (" +
                              std::to_string(tokens.size()) + " > " +
                              std::to_string(ckpt.config.max_seq_len) + ")");
    }
    for (int id : tokens) {
        if (id < 0 || id >= ckpt.config.vocab_size) {
            throw ValidationError("token id out of range: " + std::to_string(id));
        }
    }
}

namespace {

constexpr float kLnEps = 1e-5f;

float gelu(float x) {
    const float c = 0.7978845608028654f; // sqrt(2/pi)
    const float u = c * (x + 0.044715f * x * x * x);
    return 0.5f * x * (1.0f + std::tanh(u));
}

// mean/var in double; normalization applied in float
void layer_norm(const float* x, const float* g, const float* b, int d, float* xhat,
                float* out, float* rstd_out) {
    double mean = 0.0;
    for (int i = 0; i < d; ++i) mean += x[i];
    mean /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
        const double dx = x[i] - mean;
        var += dx * dx;
    }
    var /= d;
    const float rstd = static_cast<float>(1.0 / std::sqrt(var + kLnEps));
    const float mu = static_cast<float>(mean);
    for (int i = 0; i < d; ++i) {
        xhat[i] = (x[i] - mu) * rstd;
        out[i] = xhat[i] * g[i] + b[i];
    }
    *rstd_out = rstd;
}

} // namespace

namespace detail {

ForwardCache run_forward(const Checkpoint& ckpt, std::span<const int> tokens,
                         const Intervention* iv) {
    validate_tokens(ckpt, tokens);
    const ModelConfig& c = ckpt.config;
    const Params& p = ckpt.params;
    const int T = static_cast<int>(tokens.size());
    const int d = c.d_model;
    const int m = c.d_mlp;
    const int H = c.n_heads;
    const int hd = c.head_dim();
    const float att_scale = 1.0f / std::sqrt(static_cast<float>(hd));

    if (iv) {
        if (iv->layer < 0 || iv->layer >= c.n_layers || iv->position < 0 ||
            iv->position >= T || static_cast<int>(iv->value.size()) != d) {
            throw ValidationError("invalid intervention site");
        }
    }

    ForwardCache f;
    f.seq_len = T;
    f.tokens.assign(tokens.begin(), tokens.end());
    f.x0.resize(static_cast<size_t>(T) * d);
    for (int t = 0; t < T; ++t) {
        const float* te = p.tok_emb.data() + static_cast<size_t>(tokens[t]) * d;
        const float* pe = p.pos_emb.data() + static_cast<size_t>(t) * d;
        float* x = f.x0.data() + static_cast<size_t>(t) * d;
        for (int i = 0; i < d; ++i) x[i] = te[i] + pe[i];
    }

    f.layers.resize(static_cast<size_t>(c.n_layers));
    const std::vector<float>* x_in = &f.x0;
    for (int l = 0; l < c.n_layers; ++l) {
        const LayerParams& L = p.layers[static_cast<size_t>(l)];
        LayerCache& lc = f.layers[static_cast<size_t>(l)];
        const size_t td = static_cast<size_t>(T) * d;
        lc.xhat1.resize(td); lc.h1.resize(td);
        lc.rstd1.resize(static_cast<size_t>(T));
        lc.q.resize(td); lc.k.resize(td); lc.v.resize(td); lc.ctx.resize(td);
        lc.att.assign(static_cast<size_t>(H) * T * T, 0.0f);
        lc.xa.resize(td);
        lc.xhat2.resize(td); lc.h2.resize(td);
        lc.rstd2.resize(static_cast<size_t>(T));
        lc.z.resize(static_cast<size_t>(T) * m);
        lc.hidden.resize(static_cast<size_t>(T) * m);
        lc.mlp_out.resize(td);
        lc.x_out.resize(td);

        for (int t = 0; t < T; ++t) {
            const float* x = x_in->data() + static_cast<size_t>(t) * d;
            layer_norm(x, L.ln1_g.data(), L.ln1_b.data(), d,
                       lc.xhat1.data() + static_cast<size_t>(t) * d,
                       lc.h1.data() + static_cast<size_t>(t) * d, &lc.rstd1[static_cast<size_t>(t)]);
            const float* h1 = lc.h1.data() + static_cast<size_t>(t) * d;
            kern::matvec(L.wq.data(), h1, L.bq.data(), lc.q.data() + static_cast<size_t>(t) * d,
                         static_cast<size_t>(d), static_cast<size_t>(d));
            kern::matvec(L.wk.data(), h1, L.bk.data(), lc.k.data() + static_cast<size_t>(t) * d,
                         static_cast<size_t>(d), static_cast<size_t>(d));
            kern::matvec(L.wv.data(), h1, L.bv.data(), lc.v.data() + static_cast<size_t>(t) * d,
                         static_cast<size_t>(d), static_cast<size_t>(d));
        }

        // causal attention, softmax accumulated in double
        for (int h = 0; h < H; ++h) {
            const int off = h * hd;
            for (int t = 0; t < T; ++t) {
                float* att_row = lc.att.data() +
                                 (static_cast<size_t>(h) * T + static_cast<size_t>(t)) * T;
                const float* qt = lc.q.data() + static_cast<size_t>(t) * d + off;
                float max_s = -1e30f;
                for (int j = 0; j <= t; ++j) {
                    const float s =
                        kern::dot(qt, lc.k.data() + static_cast<size_t>(j) * d + off,
                                  static_cast<size_t>(hd)) *
                        att_scale;
                    att_row[j] = s;
                    if (s > max_s) max_s = s;
                }
                double denom = 0.0;
                for (int j = 0; j <= t; ++j) denom += std::exp(static_cast<double>(att_row[j] - max_s));
                for (int j = 0; j <= t; ++j) {
                    att_row[j] = static_cast<float>(
                        std::exp(static_cast<double>(att_row[j] - max_s)) / denom);
                }
                float* ctx = lc.ctx.data() + static_cast<size_t>(t) * d + off;
                for (int i = 0; i < hd; ++i) ctx[i] = 0.0f;
                for (int j = 0; j <= t; ++j) {
                    kern::axpy(att_row[j], lc.v.data() + static_cast<size_t>(j) * d + off, ctx,
                               static_cast<size_t>(hd));
                }
            }
        }

        for (int t = 0; t < T; ++t) {
            const size_t row = static_cast<size_t>(t) * d;
            std::vector<float> attn_out(static_cast<size_t>(d));
            kern::matvec(L.wo.data(), lc.ctx.data() + row, L.bo.data(), attn_out.data(),
                         static_cast<size_t>(d), static_cast<size_t>(d));
            const float* x = x_in->data() + row;
            for (int i = 0; i < d; ++i) lc.xa[row + i] = x[i] + attn_out[static_cast<size_t>(i)];

            layer_norm(lc.xa.data() + row, L.ln2_g.data(), L.ln2_b.data(), d,
                       lc.xhat2.data() + row, lc.h2.data() + row, &lc.rstd2[static_cast<size_t>(t)]);

            float* z = lc.z.data() + static_cast<size_t>(t) * m;
            kern::matvec(L.w_in.data(), lc.h2.data() + row, L.b_in.data(), z,
                         static_cast<size_t>(m), static_cast<size_t>(d));
            float* hid = lc.hidden.data() + static_cast<size_t>(t) * m;
            for (int i = 0; i < m; ++i) hid[i] = gelu(z[i]);

            float* mo = lc.mlp_out.data() + row;
            if (iv && iv->layer == l && iv->position == t) {
                for (int i = 0; i < d; ++i) mo[i] = iv->value[static_cast<size_t>(i)] + L.b_out[static_cast<size_t>(i)];
            } else {
                kern::matvec(L.w_out.data(), hid, L.b_out.data(), mo, static_cast<size_t>(d),
                             static_cast<size_t>(m));
            }
            for (int i = 0; i < d; ++i) lc.x_out[row + i] = lc.xa[row + i] + mo[i];
        }
        x_in = &lc.x_out;
    }

    const size_t td = static_cast<size_t>(T) * d;
    f.xhatf.resize(td);
    f.hf.resize(td);
    f.rstdf.resize(static_cast<size_t>(T));
    f.logits.resize(static_cast<size_t>(T) * c.vocab_size);
    for (int t = 0; t < T; ++t) {
        const size_t row = static_cast<size_t>(t) * d;
        layer_norm(x_in->data() + row, p.lnf_g.data(), p.lnf_b.data(), d, f.xhatf.data() + row,
                   f.hf.data() + row, &f.rstdf[static_cast<size_t>(t)]);
        kern::matvec(p.unembed.data(), f.hf.data() + row, nullptr,
                     f.logits.data() + static_cast<size_t>(t) * c.vocab_size,
                     static_cast<size_t>(c.vocab_size), static_cast<size_t>(d));
    }
    return f;
}

} // namespace detail

NextTokenDistribution softmax64(std::span<const float> logits) {
    NextTokenDistribution out;
    out.p.resize(logits.size());
    float max_l = -1e30f;
    for (float l : logits) max_l = std::max(max_l, l);
    double denom = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out.p[i] = std::exp(static_cast<double>(logits[i]) - static_cast<double>(max_l));
        denom += out.p[i];
    }
    for (double& v : out.p) v /= denom;
    return out;
}

NextTokenDistribution forward(const Checkpoint& ckpt, std::span<const int> tokens,
                              const Intervention* iv) {
    const auto f = detail::run_forward(ckpt, tokens, iv);
    const int V = ckpt.config.vocab_size;
    const float* last = f.logits.data() + static_cast<size_t>(f.seq_len - 1) * V;
    return softmax64(std::span<const float>(last, static_cast<size_t>(V)));
}

TraceRecord forward_traced(const Checkpoint& ckpt, std::span<const int> tokens,
                           const Intervention* iv) {
    const auto f = detail::run_forward(ckpt, tokens, iv);
    const ModelConfig& c = ckpt.config;
    TraceRecord tr;
    tr.n_layers = c.n_layers;
    tr.seq_len = f.seq_len;
    tr.d_model = c.d_model;
    tr.d_mlp = c.d_mlp;
    const size_t T = static_cast<size_t>(f.seq_len);
    tr.mlp_input.resize(static_cast<size_t>(c.n_layers) * T * c.d_model);
    tr.mlp_hidden.resize(static_cast<size_t>(c.n_layers) * T * c.d_mlp);
    tr.mlp_output.resize(static_cast<size_t>(c.n_layers) * T * c.d_model);
    for (int l = 0; l < c.n_layers; ++l) {
        const auto& lc = f.layers[static_cast<size_t>(l)];
        std::copy(lc.h2.begin(), lc.h2.end(),
                  tr.mlp_input.begin() + static_cast<size_t>(l) * T * c.d_model);
        std::copy(lc.hidden.begin(), lc.hidden.end(),
                  tr.mlp_hidden.begin() + static_cast<size_t>(l) * T * c.d_mlp);
        std::copy(lc.mlp_out.begin(), lc.mlp_out.end(),
                  tr.mlp_output.begin() + static_cast<size_t>(l) * T * c.d_model);
    }
    const float* last = f.logits.data() + (T - 1) * c.vocab_size;
    tr.final_logits.assign(last, last + c.vocab_size);
    return tr;
}

std::span<const float> TraceRecord::input(int layer, int pos) const {
    const size_t off = (static_cast<size_t>(layer) * seq_len + pos) * d_model;
    return {mlp_input.data() + off, static_cast<size_t>(d_model)};
}

std::span<const float> TraceRecord::hidden(int layer, int pos) const {
    const size_t off = (static_cast<size_t>(layer) * seq_len + pos) * d_mlp;
    return {mlp_hidden.data() + off, static_cast<size_t>(d_mlp)};
}

std::span<const float> TraceRecord::output(int layer, int pos) const {
    const size_t off = (static_cast<size_t>(layer) * seq_len + pos) * d_model;
    return {mlp_output.data() + off, static_cast<size_t>(d_model)};
}

} // namespace edbench
