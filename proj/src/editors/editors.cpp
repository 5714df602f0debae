#include "edbench/editors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "edbench/errors.hpp"
#include "edbench/grad.hpp"
#include "edbench/rng.hpp"

namespace edbench {

const char* editor_name(EditorKind k) {
    switch (k) {
    case EditorKind::none: return "none";
    case EditorKind::rome: return "rome";
    case EditorKind::memit_lite: return "memit";
    case EditorKind::ft_l: return "ft-l";
    }
    return "?";
}

EditorKind editor_from_name(std::string_view name) {
    if (name == "none") return EditorKind::none;
    if (name == "rome") return EditorKind::rome;
    if (name == "memit" || name == "memit-lite") return EditorKind::memit_lite;
    if (name == "ft-l" || name == "ftl") return EditorKind::ft_l;
    throw ValidationError("unknown editor: " + std::string(name));
}

int EditorParams::resolve_layer(const ModelConfig& c) const {
    if (layer >= 0) return layer;
    return (c.n_layers + 1) / 2 - 1;
}

std::pair<int, int> EditorParams::resolve_range(const ModelConfig& c) const {
    int b = layer_begin, e = layer_end;
    if (b < 0) b = (c.n_layers + 1) / 2 - 1;
    if (e < 0) e = std::min(c.n_layers - 1, (c.n_layers + 1) / 2);
    return {b, e};
}

void EditorParams::validate(const ModelConfig& c) const {
    if (cov_lambda < 0 || v_lr <= 0 || v_max_steps < 1 || v_stop_p <= 0 || v_stop_p > 1 ||
        ftl_eps < 0 || ftl_lr <= 0 || ftl_steps < 1 || n_prefix < 1) {
        throw ValidationError("editor parameters must be positive");
    }
    if (kind == EditorKind::rome || kind == EditorKind::ft_l) {
        const int l = resolve_layer(c);
        if (l < 0 || l >= c.n_layers) throw ValidationError("editor layer out of range");
    }
    if (kind == EditorKind::memit_lite) {
        const auto [b, e] = resolve_range(c);
        if (b < 0 || e >= c.n_layers || b > e) {
            throw ValidationError("editor layer range invalid");
        }
    }
}

std::string EditorParams::to_kv() const {
    std::ostringstream os;
    os << "editor = " << editor_name(kind) << "\n";
    os << "layer = " << layer << "\n";
    os << "layer_begin = " << layer_begin << "\n";
    os << "layer_end = " << layer_end << "\n";
    os << "cov_lambda = " << jsonio::fmt_double(cov_lambda) << "\n";
    os << "v_lr = " << jsonio::fmt_double(v_lr) << "\n";
    os << "v_max_steps = " << v_max_steps << "\n";
    os << "v_stop_p = " << jsonio::fmt_double(v_stop_p) << "\n";
    os << "ftl_eps = " << jsonio::fmt_double(ftl_eps) << "\n";
    os << "ftl_lr = " << jsonio::fmt_double(ftl_lr) << "\n";
    os << "ftl_steps = " << ftl_steps << "\n";
    os << "n_prefix = " << n_prefix << "\n";
    return os.str();
}

EditorParams EditorParams::from_kv(std::string_view text) {
    EditorParams p;
    std::istringstream is{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw FormatError("editor config line " + std::to_string(lineno) +
                                  ": expected key = value");
            }
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "editor") p.kind = editor_from_name(value);
            else if (key == "layer") p.layer = std::stoi(value);
            else if (key == "layer_begin") p.layer_begin = std::stoi(value);
            else if (key == "layer_end") p.layer_end = std::stoi(value);
            else if (key == "cov_lambda") p.cov_lambda = std::stod(value);
            else if (key == "v_lr") p.v_lr = std::stod(value);
            else if (key == "v_max_steps") p.v_max_steps = std::stoi(value);
            else if (key == "v_stop_p") p.v_stop_p = std::stod(value);
            else if (key == "ftl_eps") p.ftl_eps = std::stod(value);
            else if (key == "ftl_lr") p.ftl_lr = std::stod(value);
            else if (key == "ftl_steps") p.ftl_steps = std::stoi(value);
            else if (key == "n_prefix") p.n_prefix = std::stoi(value);
            else throw FormatError("editor config line " + std::to_string(lineno) +
                                   ": unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw FormatError("editor config line " + std::to_string(lineno) + ": bad value");
        }
    }
    return p;
}

std::shared_ptr<const std::vector<double>> CovarianceCache::get(
    const Checkpoint& ckpt, const std::vector<std::string>& corpus, int layer, double lambda) {
    uint64_t key = params_hash(ckpt.params);
    key = fnv1a64(&layer, sizeof(layer), key);
    key = fnv1a64(&lambda, sizeof(lambda), key);
    for (const auto& line : corpus) key = fnv1a64(line.data(), line.size(), key);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    auto cov = std::make_shared<const std::vector<double>>(
        estimate_covariance(ckpt, corpus, layer, lambda));
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(key, std::move(cov)).first->second;
}

int subject_last_position(const Tokenizer& tok, const RewriteRequest& request,
                          const std::string& prefix) {
    const auto pos = request.prompt_template.find("{}");
    if (pos == std::string::npos) throw ValidationError("template has no {} placeholder");
    const std::string joined_prefix = prefix.empty() ? std::string() : prefix + " ";
    const std::string up_to_subject =
        joined_prefix + request.prompt_template.substr(0, pos) + request.subject;
    const std::string full =
        joined_prefix + fill_template(request.prompt_template, request.subject);

    const auto ids_upto = tok.encode(up_to_subject);
    const auto ids_full = tok.encode(full);
    if (ids_upto.size() > ids_full.size() ||
        !std::equal(ids_upto.begin(), ids_upto.end(), ids_full.begin())) {
        throw EditError("subject not found after tokenization: " + request.subject);
    }
    return static_cast<int>(ids_upto.size()) - 1;
}

std::vector<double> collect_key(const Checkpoint& ckpt, const std::vector<std::string>& corpus,
                                const RewriteRequest& request, int layer, int n_prefix,
                                uint64_t seed, std::vector<std::string>* prefixes_out) {
    if (layer < 0 || layer >= ckpt.config.n_layers) throw ValidationError("layer out of range");
    if (n_prefix < 1) throw ValidationError("n_prefix must be >= 1");

    std::vector<std::string> prefixes{""};
    if (!corpus.empty()) {
        Rng rng(seed);
        while (static_cast<int>(prefixes.size()) < n_prefix) {
            prefixes.push_back(corpus[rng.below(corpus.size())]);
        }
    }
    if (prefixes_out) *prefixes_out = prefixes;

    const std::string filled = fill_template(request.prompt_template, request.subject);
    const int m = ckpt.config.d_mlp;
    std::vector<double> mean(static_cast<size_t>(m), 0.0);
    for (const auto& prefix : prefixes) {
        const int subj_pos = subject_last_position(ckpt.tokenizer, request, prefix);
        const std::string text = prefix.empty() ? filled : prefix + " " + filled;
        const auto tokens = ckpt.tokenizer.encode(text);
        const auto trace = forward_traced(ckpt, tokens);
        const auto key = trace.hidden(layer, subj_pos);
        for (int i = 0; i < m; ++i) mean[static_cast<size_t>(i)] += key[static_cast<size_t>(i)];
    }
    for (double& v : mean) v /= static_cast<double>(prefixes.size());
    for (double v : mean) {
        if (!std::isfinite(v)) throw EditError("non-finite key activation");
    }
    return mean;
}

std::vector<double> estimate_covariance(const Checkpoint& ckpt,
                                        const std::vector<std::string>& corpus, int layer,
                                        double lambda) {
    if (layer < 0 || layer >= ckpt.config.n_layers) throw ValidationError("layer out of range");
    const size_t m = static_cast<size_t>(ckpt.config.d_mlp);
    std::vector<double> cov(m * m, 0.0);
    size_t count = 0;
    for (const auto& line : corpus) {
        const auto tokens = ckpt.tokenizer.encode(line);
        const auto trace = forward_traced(ckpt, tokens);
        for (int t = 0; t < trace.seq_len; ++t) {
            const auto key = trace.hidden(layer, t);
            for (size_t i = 0; i < m; ++i) {
                const double ki = key[i];
                double* row = cov.data() + i * m;
                for (size_t j = i; j < m; ++j) row[j] += ki * key[j];
            }
            ++count;
        }
    }
    if (count == 0) throw ValidationError("degenerate corpus: no positions for covariance");
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = i; j < m; ++j) {
            const double v = cov[i * m + j] / static_cast<double>(count);
            cov[i * m + j] = v;
            cov[j * m + i] = v;
        }
    }
    if (lambda > 0.0) {
        double mean_diag = 0.0;
        for (size_t i = 0; i < m; ++i) mean_diag += cov[i * m + i];
        mean_diag /= static_cast<double>(m);
        const double ridge = lambda * mean_diag;
        for (size_t i = 0; i < m; ++i) cov[i * m + i] += ridge;
    }
    return cov;
}

std::vector<double> cholesky_solve(const std::vector<double>& a, std::vector<double> b) {
    const size_t n = b.size();
    if (a.size() != n * n) throw ValidationError("cholesky: dimension mismatch");
    std::vector<double> l(a);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double s = l[i * n + j];
            for (size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
            if (i == j) {
                if (s <= 0.0) throw EditError("covariance is not positive definite");
                l[i * n + i] = std::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    for (size_t i = 0; i < n; ++i) { // L y = b
        double s = b[i];
        for (size_t k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
        b[i] = s / l[i * n + i];
    }
    for (size_t ii = n; ii-- > 0;) { // L^T x = y
        double s = b[ii];
        for (size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * b[k];
        b[ii] = s / l[ii * n + ii];
    }
    return b;
}

namespace {

double edit_loss(const Checkpoint& ckpt, std::span<const int> tokens, int target,
                 const Intervention* iv = nullptr) {
    const auto f = detail::run_forward(ckpt, tokens, iv);
    return nll_loss(f, ckpt.config.vocab_size, target);
}

int target_first_token(const Checkpoint& ckpt, const std::string& object) {
    const int id = ckpt.tokenizer.first_token(" " + object);
    if (id == Tokenizer::kUnk) throw EditError("edit target out of vocabulary: " + object);
    return id;
}

} // namespace

ValueSolve solve_value(const Checkpoint& ckpt, const RewriteRequest& request, int layer,
                       const EditorParams& params) {
    if (layer < 0 || layer >= ckpt.config.n_layers) throw ValidationError("layer out of range");
    const int subj_pos = subject_last_position(ckpt.tokenizer, request, "");
    const auto tokens = ckpt.tokenizer.encode(fill_template(request.prompt_template, request.subject));
    const int target = target_first_token(ckpt, request.target_new);
    const int d = ckpt.config.d_model;
    const auto& L = ckpt.params.layers[static_cast<size_t>(layer)];

    // start from the current product W_out * key at the site
    const auto trace = forward_traced(ckpt, tokens);
    const auto out_now = trace.output(layer, subj_pos);
    ValueSolve vs;
    vs.v.resize(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        vs.v[static_cast<size_t>(i)] = out_now[static_cast<size_t>(i)] - L.b_out[static_cast<size_t>(i)];
    }

    Intervention iv{layer, subj_pos, vs.v};
    double loss = edit_loss(ckpt, tokens, target, &iv);
    vs.trajectory.push_back(loss);
    if (std::exp(-loss) >= params.v_stop_p) {
        vs.converged = true;
        vs.final_loss = loss;
        return vs;
    }

    const double stop_loss = -std::log(params.v_stop_p);
    double step = params.v_lr;
    const LossSpec spec{target};
    for (int iter = 0; iter < params.v_max_steps; ++iter) {
        iv.value = vs.v;
        const auto grad = grad_wrt_hidden(ckpt, tokens, layer, subj_pos, spec, &iv);
        double gnorm2 = 0.0;
        for (float g : grad) gnorm2 += static_cast<double>(g) * g;
        if (gnorm2 < 1e-24) break; // stationary; nothing to improve

        bool accepted = false;
        while (step > 1e-12) {
            Intervention trial = iv;
            for (int i = 0; i < d; ++i) {
                trial.value[static_cast<size_t>(i)] =
                    vs.v[static_cast<size_t>(i)] -
                    static_cast<float>(step) * grad[static_cast<size_t>(i)];
            }
            const double trial_loss = edit_loss(ckpt, tokens, target, &trial);
            if (trial_loss <= loss + 1e-12) {
                vs.v = trial.value;
                loss = trial_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        vs.trajectory.push_back(loss);
        vs.iterations = iter + 1;
        if (loss <= stop_loss) break;
    }
    vs.final_loss = loss;
    vs.converged = loss <= stop_loss;
    return vs;
}

RankOneUpdate solve_rank_one(const std::vector<float>& w, size_t rows, size_t cols,
                             const std::vector<double>& k, const std::vector<double>& v_target,
                             const std::vector<double>& cov) {
    if (k.size() != cols || v_target.size() != rows || w.size() != rows * cols) {
        throw ValidationError("rank-one solve: dimension mismatch");
    }
    const auto ck = cholesky_solve(cov, k);
    double denom = 0.0;
    for (size_t j = 0; j < cols; ++j) denom += ck[j] * k[j];
    if (std::abs(denom) < 1e-10) throw EditError("degenerate key: (C^-1 k)^T k ~ 0");

    RankOneUpdate up;
    up.row.resize(cols);
    for (size_t j = 0; j < cols; ++j) up.row[j] = static_cast<float>(ck[j] / denom);

    // re-measure row^T k after float rounding so that W_new k hits v_target
    // to float precision
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) s += static_cast<double>(up.row[j]) * k[j];
    if (std::abs(s) < 1e-10) throw EditError("degenerate key after rounding");

    up.u.resize(rows);
    for (size_t i = 0; i < rows; ++i) {
        double wk = 0.0;
        const float* row = w.data() + i * cols;
        for (size_t j = 0; j < cols; ++j) wk += static_cast<double>(row[j]) * k[j];
        up.u[i] = static_cast<float>((v_target[i] - wk) / s);
    }
    return up;
}

void apply_rank_one(std::vector<float>& w, const RankOneUpdate& up, size_t rows, size_t cols) {
    if (up.u.size() != rows || up.row.size() != cols || w.size() != rows * cols) {
        throw ValidationError("rank-one apply: dimension mismatch");
    }
    for (size_t i = 0; i < rows; ++i) {
        float* row = w.data() + i * cols;
        const float ui = up.u[i];
        for (size_t j = 0; j < cols; ++j) row[j] += ui * up.row[j];
    }
}

namespace {

LayerEditDiag apply_layer_edit(Checkpoint& model, const std::vector<std::string>& corpus,
                               const RewriteRequest& request, int layer,
                               const EditorParams& params, uint64_t seed, double residual_scale,
                               CovarianceCache* cache) {
    LayerEditDiag diag;
    diag.layer = layer;

    const uint64_t prefix_seed = derive_seed(seed, 0x6b65u + static_cast<uint64_t>(layer));
    diag.k_star = collect_key(model, corpus, request, layer, params.n_prefix, prefix_seed,
                              &diag.prefixes);

    std::shared_ptr<const std::vector<double>> cov_holder;
    const std::vector<double>* cov;
    if (cache) {
        cov_holder = cache->get(model, corpus, layer, params.cov_lambda);
        cov = cov_holder.get();
    } else {
        cov_holder = std::make_shared<const std::vector<double>>(
            estimate_covariance(model, corpus, layer, params.cov_lambda));
        cov = cov_holder.get();
    }

    auto vs = solve_value(model, request, layer, params);
    diag.v_iterations = vs.iterations;
    diag.v_final_loss = vs.final_loss;
    diag.v_converged = vs.converged;
    diag.loss_trajectory = std::move(vs.trajectory);
    diag.v_star = vs.v;

    const size_t d = static_cast<size_t>(model.config.d_model);
    const size_t m = static_cast<size_t>(model.config.d_mlp);
    auto& w_out = model.params.layers[static_cast<size_t>(layer)].w_out;

    // target in product space; scale < 1 moves only part of the residual
    std::vector<double> v_target(d);
    if (residual_scale == 1.0) {
        for (size_t i = 0; i < d; ++i) v_target[i] = static_cast<double>(vs.v[i]);
    } else {
        for (size_t i = 0; i < d; ++i) {
            double wk = 0.0;
            const float* row = w_out.data() + i * m;
            for (size_t j = 0; j < m; ++j) wk += static_cast<double>(row[j]) * diag.k_star[j];
            v_target[i] = wk + residual_scale * (static_cast<double>(vs.v[i]) - wk);
        }
    }

    const auto up = solve_rank_one(w_out, d, m, diag.k_star, v_target, *cov);
    apply_rank_one(w_out, up, d, m);

    double u2 = 0.0, r2 = 0.0, umax = 0.0, rmax = 0.0;
    for (float x : up.u) { u2 += static_cast<double>(x) * x; umax = std::max(umax, std::abs(static_cast<double>(x))); }
    for (float x : up.row) { r2 += static_cast<double>(x) * x; rmax = std::max(rmax, std::abs(static_cast<double>(x))); }
    diag.delta_frob = std::sqrt(u2 * r2);
    diag.delta_linf = umax * rmax;
    double k2 = 0.0, v2 = 0.0;
    for (double x : diag.k_star) k2 += x * x;
    for (float x : vs.v) v2 += static_cast<double>(x) * x;
    diag.k_norm = std::sqrt(k2);
    diag.v_norm = std::sqrt(v2);
    diag.residual_dir = up.u;
    diag.row_dir = up.row;
    return diag;
}

} // namespace

EditOutcome none_edit(const Checkpoint& ckpt) {
    EditOutcome out;
    out.pre = ckpt;
    out.post = ckpt;
    return out;
}

EditOutcome rome_edit(const Checkpoint& ckpt, const std::vector<std::string>& corpus,
                      const RewriteRequest& request, const EditorParams& params, uint64_t seed,
                      CovarianceCache* cache) {
    request.validate();
    params.validate(ckpt.config);
    const int layer = params.resolve_layer(ckpt.config);

    EditOutcome out;
    out.pre = ckpt;
    out.post = ckpt;
    out.layers.push_back(
        apply_layer_edit(out.post, corpus, request, layer, params, seed, 1.0, cache));
    out.touched_layers.push_back(layer);
    out.post.provenance = "rome@L" + std::to_string(layer) + "/" + request.subject;
    out.delta_frob = out.layers.back().delta_frob;
    out.delta_linf = out.layers.back().delta_linf;
    return out;
}

EditOutcome memit_lite_edit(const Checkpoint& ckpt, const std::vector<std::string>& corpus,
                            const RewriteRequest& request, const EditorParams& params,
                            uint64_t seed, CovarianceCache* cache) {
    request.validate();
    params.validate(ckpt.config);
    const auto [first, last] = params.resolve_range(ckpt.config);

    EditOutcome out;
    out.pre = ckpt;
    out.post = ckpt;
    const int span = last - first + 1;
    double frob2 = 0.0;
    for (int l = first; l <= last; ++l) {
        const double scale = 1.0 / static_cast<double>(span - (l - first));
        out.layers.push_back(
            apply_layer_edit(out.post, corpus, request, l, params, seed, scale, cache));
        out.touched_layers.push_back(l);
        frob2 += out.layers.back().delta_frob * out.layers.back().delta_frob;
        out.delta_linf = std::max(out.delta_linf, out.layers.back().delta_linf);
    }
    out.delta_frob = std::sqrt(frob2);
    out.post.provenance = "memit@L" + std::to_string(first) + "-" + std::to_string(last) + "/" +
                          request.subject;
    return out;
}

EditOutcome ftl_edit(const Checkpoint& ckpt, const RewriteRequest& request,
                     const EditorParams& params) {
    request.validate();
    params.validate(ckpt.config);
    const int layer = params.resolve_layer(ckpt.config);
    const auto tokens =
        ckpt.tokenizer.encode(fill_template(request.prompt_template, request.subject));
    const int target = target_first_token(ckpt, request.target_new);

    EditOutcome out;
    out.pre = ckpt;
    out.post = ckpt;
    auto& L = out.post.params.layers[static_cast<size_t>(layer)];
    std::vector<float>* blocks[4] = {&L.w_in, &L.b_in, &L.w_out, &L.b_out};

    // feasible interval per weight: the widest float range still within
    // eps of the original in exact arithmetic
    const double eps = params.ftl_eps;
    std::vector<std::vector<float>> lo(4), hi(4), orig(4);
    for (int b = 0; b < 4; ++b) {
        orig[b] = *blocks[b];
        lo[b].resize(orig[b].size());
        hi[b].resize(orig[b].size());
        for (size_t i = 0; i < orig[b].size(); ++i) {
            const double o = orig[b][i];
            float h = static_cast<float>(o + eps);
            while (static_cast<double>(h) - o > eps) h = std::nextafterf(h, -1e30f);
            float l = static_cast<float>(o - eps);
            while (o - static_cast<double>(l) > eps) l = std::nextafterf(l, 1e30f);
            hi[b][i] = h;
            lo[b][i] = l;
        }
    }

    double loss = edit_loss(out.post, tokens, target);
    if (!std::isfinite(loss)) throw EditError("ft-l: non-finite loss before first step");
    out.ftl_loss_trajectory.push_back(loss);
    out.ftl_linf_trajectory.push_back(0.0);

    const LossSpec spec{target};
    double lr = params.ftl_lr;
    for (int step = 0; step < params.ftl_steps; ++step) {
        const auto g = grad_wrt_mlp_weights(out.post, tokens, layer, spec);
        const std::vector<float>* gblocks[4] = {&g.w_in, &g.b_in, &g.w_out, &g.b_out};

        std::vector<std::vector<float>> saved(4);
        for (int b = 0; b < 4; ++b) saved[b] = *blocks[b];

        bool accepted = false;
        double try_lr = lr;
        for (int halving = 0; halving < 25 && try_lr > 0; ++halving) {
            bool changed = false;
            for (int b = 0; b < 4; ++b) {
                auto& blk = *blocks[b];
                const auto& gb = *gblocks[b];
                for (size_t i = 0; i < blk.size(); ++i) {
                    float next = saved[b][i] - static_cast<float>(try_lr) * gb[i];
                    next = std::min(std::max(next, lo[b][i]), hi[b][i]);
                    if (next != blk[i]) changed = true;
                    blk[i] = next;
                }
            }
            const double trial_loss = edit_loss(out.post, tokens, target);
            if (!std::isfinite(trial_loss)) throw EditError("ft-l: loss became non-finite");
            if (trial_loss <= loss + 1e-12) {
                loss = trial_loss;
                accepted = changed;
                break;
            }
            for (int b = 0; b < 4; ++b) *blocks[b] = saved[b];
            try_lr *= 0.5;
        }
        if (!accepted) {
            for (int b = 0; b < 4; ++b) *blocks[b] = saved[b];
            break; // projection boundary or flat loss: no further progress
        }
        out.ftl_loss_trajectory.push_back(loss);
        double linf = 0.0;
        for (int b = 0; b < 4; ++b) {
            for (size_t i = 0; i < blocks[b]->size(); ++i) {
                linf = std::max(linf, std::abs(static_cast<double>((*blocks[b])[i]) -
                                               static_cast<double>(orig[b][i])));
            }
        }
        out.ftl_linf_trajectory.push_back(linf);
    }

    out.touched_layers.push_back(layer);
    double frob2 = 0.0, linf = 0.0;
    for (int b = 0; b < 4; ++b) {
        for (size_t i = 0; i < blocks[b]->size(); ++i) {
            const double dlt = static_cast<double>((*blocks[b])[i]) -
                               static_cast<double>(orig[b][i]);
            frob2 += dlt * dlt;
            linf = std::max(linf, std::abs(dlt));
        }
    }
    out.delta_frob = std::sqrt(frob2);
    out.delta_linf = linf;
    out.post.provenance = "ft-l@L" + std::to_string(layer) + "/" + request.subject;
    return out;
}

EditOutcome run_editor(const Checkpoint& ckpt, const std::vector<std::string>& corpus,
                       const RewriteRequest& request, const EditorParams& params, uint64_t seed,
                       CovarianceCache* cache) {
    switch (params.kind) {
    case EditorKind::none: return none_edit(ckpt);
    case EditorKind::rome: return rome_edit(ckpt, corpus, request, params, seed, cache);
    case EditorKind::memit_lite:
        return memit_lite_edit(ckpt, corpus, request, params, seed, cache);
    case EditorKind::ft_l: return ftl_edit(ckpt, request, params);
    }
    throw ValidationError("unhandled editor kind");
}

EfficacyReport efficacy_check(const EditOutcome& outcome, const RewriteRequest& request) {
    const auto tokens = outcome.pre.tokenizer.encode(
        fill_template(request.prompt_template, request.subject));
    const auto id_true = outcome.pre.tokenizer.first_token(" " + request.target_true);
    const auto id_new = outcome.pre.tokenizer.first_token(" " + request.target_new);
    const auto dist_pre = forward(outcome.pre, tokens);
    const auto dist_post = forward(outcome.post, tokens);
    EfficacyReport r;
    r.p_pre_correct = dist_pre.p[static_cast<size_t>(id_true)];
    r.p_pre_new = dist_pre.p[static_cast<size_t>(id_new)];
    r.p_post_correct = dist_post.p[static_cast<size_t>(id_true)];
    r.p_post_new = dist_post.p[static_cast<size_t>(id_new)];
    r.success = r.p_post_new > r.p_post_correct;
    return r;
}

} // namespace edbench
