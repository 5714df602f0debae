#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edbench/counterfact.hpp"
#include "edbench/model.hpp"

namespace edbench {

enum class Variant { base, plus };
const char* variant_name(Variant v);
Variant variant_from_name(std::string_view name);

// Per-prompt specificity measurement. Probabilities are the post-edit
// model's for the first token of " " + object (leading-space convention);
// nkl compares the pre- and post-edit next-token distributions on the
// same prompt, in nats.
struct PromptMeasurement {
    int64_t case_id = 0;
    int prompt_index = 0;
    Variant variant = Variant::base;
    std::string prompt;
    double p_post_correct = 0.0;
    double p_post_new = 0.0;
    bool ns_indicator = false; // p_post_correct > p_post_new, strict
    double nm_value = 0.0;     // p_post_correct - p_post_new
    double nkl_value = 0.0;
    bool valid = true;
    std::string error;
};

struct AggregateStat {
    std::string metric;
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int64_t n_samples = 0;
    int64_t bootstrap_n = 0;
    double level = 0.0;
};

// Probability of the first tokenizer token of " " + object. Throws
// ValidationError if that token is out of vocabulary.
double first_token_prob(const NextTokenDistribution& dist, const Tokenizer& tok,
                        const std::string& object);

// Means over valid measurements; throw ValidationError when empty.
double ns(const std::vector<PromptMeasurement>& ms);
double nm(const std::vector<PromptMeasurement>& ms);

// KL(p_pre || p_post) in nats, 64-bit accumulation. Terms with
// p_pre[w] == 0 contribute nothing; p_post is floored at 1e-10 before the
// ratio, and the sum is clamped at zero so the non-negativity contract
// survives the floor.
double nkl(const NextTokenDistribution& p_pre, const NextTokenDistribution& p_post);

// Runs both models on the prompt and fills every measurement field.
// Encoding problems (object out of vocabulary) mark the measurement
// invalid instead of throwing.
PromptMeasurement evaluate_prompt(const Checkpoint& pre, const Checkpoint& post,
                                  const std::string& prompt, const RewriteRequest& request);

// Percentile bootstrap over per-prompt values: N resamples with
// replacement, CI bounds at the (1 +/- level)/2 quantiles of the resample
// means (linear interpolation between order statistics).
AggregateStat bootstrap_ci(const std::vector<double>& values, int64_t n_resamples,
                           double level, uint64_t seed);

} // namespace edbench
