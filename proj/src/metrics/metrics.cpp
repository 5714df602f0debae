#include "edbench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "edbench/errors.hpp"
#include "edbench/rng.hpp"

namespace edbench {

const char* variant_name(Variant v) { return v == Variant::base ? "base" : "plus"; }

Variant variant_from_name(std::string_view name) {
    if (name == "base") return Variant::base;
    if (name == "plus") return Variant::plus;
    throw FormatError("unknown variant: " + std::string(name));
}

double first_token_prob(const NextTokenDistribution& dist, const Tokenizer& tok,
                        const std::string& object) {
    if (object.empty()) throw ValidationError("object string is empty");
    const int id = tok.first_token(" " + object);
    if (id == Tokenizer::kUnk) {
        throw ValidationError("object is out of vocabulary: " + object);
    }
    if (static_cast<size_t>(id) >= dist.p.size()) {
        throw ValidationError("token id exceeds distribution size");
    }
    return dist.p[static_cast<size_t>(id)];
}

namespace {

template <class Fn>
double mean_over_valid(const std::vector<PromptMeasurement>& ms, Fn&& value) {
    double sum = 0.0;
    int64_t n = 0;
    for (const auto& m : ms) {
        if (!m.valid) continue;
        sum += value(m);
        ++n;
    }
    if (n == 0) throw ValidationError("no valid measurements to aggregate");
    return sum / static_cast<double>(n);
}

} // namespace

double ns(const std::vector<PromptMeasurement>& ms) {
    return mean_over_valid(ms, [](const PromptMeasurement& m) {
        return m.ns_indicator ? 1.0 : 0.0;
    });
}

double nm(const std::vector<PromptMeasurement>& ms) {
    return mean_over_valid(ms, [](const PromptMeasurement& m) { return m.nm_value; });
}

double nkl(const NextTokenDistribution& p_pre, const NextTokenDistribution& p_post) {
    if (p_pre.p.size() != p_post.p.size()) {
        throw ValidationError("distribution length mismatch in nkl");
    }
    constexpr double kFloor = 1e-10;
    double sum = 0.0;
    for (size_t w = 0; w < p_pre.p.size(); ++w) {
        const double pre = p_pre.p[w];
        if (pre == 0.0) continue;
        const double post = std::max(p_post.p[w], kFloor);
        sum += pre * std::log(pre / post);
    }
    return std::max(sum, 0.0);
}

PromptMeasurement evaluate_prompt(const Checkpoint& pre, const Checkpoint& post,
                                  const std::string& prompt, const RewriteRequest& request) {
    PromptMeasurement m;
    m.prompt = prompt;
    try {
        const auto tokens = pre.tokenizer.encode(prompt);
        const auto dist_pre = forward(pre, tokens);
        const auto dist_post = forward(post, tokens);
        m.p_post_correct = first_token_prob(dist_post, post.tokenizer, request.target_true);
        m.p_post_new = first_token_prob(dist_post, post.tokenizer, request.target_new);
        m.ns_indicator = m.p_post_correct > m.p_post_new;
        m.nm_value = m.p_post_correct - m.p_post_new;
        m.nkl_value = nkl(dist_pre, dist_post);
    } catch (const std::exception& e) {
        m.valid = false;
        m.error = e.what();
        m.p_post_correct = m.p_post_new = m.nm_value = m.nkl_value = 0.0;
        m.ns_indicator = false;
    }
    return m;
}

AggregateStat bootstrap_ci(const std::vector<double>& values, int64_t n_resamples,
                           double level, uint64_t seed) {
    if (values.empty()) throw ValidationError("bootstrap over empty sample");
    if (n_resamples < 1) throw ValidationError("bootstrap needs at least one resample");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must be in (0,1)");

    const size_t n = values.size();
    double total = 0.0;
    for (double v : values) total += v;
    const double sample_mean = total / static_cast<double>(n);

    Rng rng(seed);
    std::vector<double> means(static_cast<size_t>(n_resamples));
    for (auto& m : means) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += values[rng.below(n)];
        m = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());

    // type-7 quantile (linear interpolation between order statistics)
    auto quantile = [&means](double q) {
        const double pos = q * static_cast<double>(means.size() - 1);
        const size_t lo = static_cast<size_t>(pos);
        const size_t hi = std::min(lo + 1, means.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return means[lo] * (1.0 - frac) + means[hi] * frac;
    };

    AggregateStat stat;
    stat.mean = sample_mean;
    stat.ci_low = quantile((1.0 - level) / 2.0);
    stat.ci_high = quantile((1.0 + level) / 2.0);
    stat.n_samples = static_cast<int64_t>(n);
    stat.bootstrap_n = n_resamples;
    stat.level = level;
    return stat;
}

} // namespace edbench
