#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "edbench/counterfact.hpp"
#include "edbench/model.hpp"

namespace edbench {

enum class EditorKind { none, rome, memit_lite, ft_l };
const char* editor_name(EditorKind k);
EditorKind editor_from_name(std::string_view name);

struct EditorParams {
    EditorKind kind = EditorKind::rome;
    int layer = -1;                       // rome/ft-l target; -1 = ceil(n/2)-1
    int layer_begin = -1, layer_end = -1; // memit inclusive range; -1 = defaults
    double cov_lambda = 1e-4;             // ridge, scaled by the mean diagonal
    double v_lr = 0.1;                    // value solve step size (halved on increase)
    int v_max_steps = 100;
    double v_stop_p = 0.95;               // stop once p(target_new first token) reaches this
    double ftl_eps = 5e-4;                // L-inf radius around the original weights
    double ftl_lr = 5e-4;
    int ftl_steps = 25;
    int n_prefix = 5;                     // context variants for k* (first one is empty)

    int resolve_layer(const ModelConfig& c) const;
    std::pair<int, int> resolve_range(const ModelConfig& c) const;
    void validate(const ModelConfig& c) const;

    // Flat key=value configuration ('#' comments, one pair per line).
    std::string to_kv() const;
    static EditorParams from_kv(std::string_view text);
};

// Diagnostics for one rank-one layer edit.
struct LayerEditDiag {
    int layer = 0;
    int v_iterations = 0;
    double v_final_loss = 0.0;
    bool v_converged = true;
    double k_norm = 0.0, v_norm = 0.0;
    double delta_frob = 0.0, delta_linf = 0.0;
    std::vector<double> loss_trajectory;
    std::vector<std::string> prefixes;  // context variants used for k*
    std::vector<double> k_star;         // d_mlp
    std::vector<float> v_star;          // d_model, product space (W_out k)
    std::vector<float> residual_dir;    // u: applied delta is u * row_dir^T
    std::vector<float> row_dir;         // (C^-1 k*) / ((C^-1 k*)^T k*)
};

struct EditOutcome {
    Checkpoint pre;
    Checkpoint post;
    std::vector<int> touched_layers;
    std::vector<LayerEditDiag> layers;           // rome / memit-lite
    std::vector<double> ftl_loss_trajectory;     // ft-l, accepted steps
    std::vector<double> ftl_linf_trajectory;     // max |delta| after each step
    double delta_frob = 0.0, delta_linf = 0.0;   // aggregate over touched blocks
};

// Caches covariance matrices keyed by (weights hash, layer, corpus hash,
// lambda). Safe to share across case workers.
class CovarianceCache {
public:
    std::shared_ptr<const std::vector<double>> get(const Checkpoint& ckpt,
                                                   const std::vector<std::string>& corpus,
                                                   int layer, double lambda);

private:
    std::mutex mu_;
    std::map<uint64_t, std::shared_ptr<const std::vector<double>>> cache_;
};

// Index (BOS-based) of the subject's last token inside the optionally
// prefixed, filled prompt. Throws EditError if the subject does not end on
// a token boundary.
int subject_last_position(const Tokenizer& tok, const RewriteRequest& request,
                          const std::string& prefix);

// Mean over n_prefix context variants (empty prefix first, then seeded
// corpus lines) of the MLP hidden ("key") activation at the subject's last
// token. prefixes_out, if given, receives the variants used.
std::vector<double> collect_key(const Checkpoint& ckpt, const std::vector<std::string>& corpus,
                                const RewriteRequest& request, int layer, int n_prefix,
                                uint64_t seed, std::vector<std::string>* prefixes_out = nullptr);

// (1/M) sum of k k^T over all corpus positions, plus lambda*mean(diag)*I.
// Returned row-major [d_mlp x d_mlp], symmetric positive definite for
// lambda > 0.
std::vector<double> estimate_covariance(const Checkpoint& ckpt,
                                        const std::vector<std::string>& corpus, int layer,
                                        double lambda);

struct ValueSolve {
    std::vector<float> v; // product space: desired W_out k at the site
    int iterations = 0;
    double final_loss = 0.0;
    bool converged = false;
    std::vector<double> trajectory; // loss at accepted iterates, including start
};

// Gradient descent (with step halving on loss increase) on the vector that
// replaces the W_out product at (layer, subject-last token), minimizing
// -log p(first token of target_new) at the prompt's final position.
ValueSolve solve_value(const Checkpoint& ckpt, const RewriteRequest& request, int layer,
                       const EditorParams& params);

// Rank-one solution of W_new k = v_target: row = C^-1 k normalized so that
// row^T k == 1 (re-measured after float rounding), u = (v_target - W k)/s.
struct RankOneUpdate {
    std::vector<float> u;   // rows
    std::vector<float> row; // cols
};
RankOneUpdate solve_rank_one(const std::vector<float>& w, size_t rows, size_t cols,
                             const std::vector<double>& k, const std::vector<double>& v_target,
                             const std::vector<double>& cov);
void apply_rank_one(std::vector<float>& w, const RankOneUpdate& up, size_t rows, size_t cols);

// Solves A x = b for symmetric positive definite A (row-major n x n).
std::vector<double> cholesky_solve(const std::vector<double>& a, std::vector<double> b);

EditOutcome none_edit(const Checkpoint& ckpt);
EditOutcome rome_edit(const Checkpoint& ckpt, const std::vector<std::string>& corpus,
                      const RewriteRequest& request, const EditorParams& params, uint64_t seed,
                      CovarianceCache* cache = nullptr);
EditOutcome memit_lite_edit(const Checkpoint& ckpt, const std::vector<std::string>& corpus,
                            const RewriteRequest& request, const EditorParams& params,
                            uint64_t seed, CovarianceCache* cache = nullptr);
EditOutcome ftl_edit(const Checkpoint& ckpt, const RewriteRequest& request,
                     const EditorParams& params);
EditOutcome run_editor(const Checkpoint& ckpt, const std::vector<std::string>& corpus,
                       const RewriteRequest& request, const EditorParams& params, uint64_t seed,
                       CovarianceCache* cache = nullptr);

struct EfficacyReport {
    double p_pre_correct = 0.0, p_pre_new = 0.0;
    double p_post_correct = 0.0, p_post_new = 0.0;
    bool success = false; // p_post_new > p_post_correct on the edit prompt
};
EfficacyReport efficacy_check(const EditOutcome& outcome, const RewriteRequest& request);

} // namespace edbench
