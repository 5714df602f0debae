#pragma once

#include <string>
#include <vector>

#include "edbench/jsonio.hpp"

namespace edbench {

// One requested model edit: fill prompt_template's "{}" with subject,
// retarget the completion from target_true to target_new.
struct RewriteRequest {
    std::string prompt_template; // contains exactly one "{}"
    std::string subject;
    std::string target_true;
    std::string target_new;
    std::string relation_id;
    std::string target_true_id; // optional dataset ids, kept for round-trips
    std::string target_new_id;

    void validate() const; // throws ValidationError
};

struct CaseRecord {
    int64_t case_id = 0;
    RewriteRequest requested_rewrite;
    std::vector<std::string> paraphrase_prompts;
    std::vector<std::string> neighborhood_prompts;
    std::vector<std::string> attribute_prompts;
    std::vector<std::string> generation_prompts;
    // original parsed object; unknown fields ride along for round-trips
    jsonio::ojson raw;
};

struct PlusCase {
    CaseRecord base;
    std::vector<std::string> plus_neighborhood_prompts;
};

// Parses a JSON array of case objects (field names as in the dataset
// format). Errors name the offending case index.
std::vector<CaseRecord> parse_counterfact(std::string_view json_text);

// Parses one case object; `index` is used in error messages and as the
// fallback case_id.
CaseRecord case_from_json(const jsonio::ojson& j, int64_t index);

// Serializes cases back to a JSON array, preserving unknown fields and key
// order. If with_plus is set, each object gains "plus_neighborhood_prompts".
std::string serialize_cases(const std::vector<CaseRecord>& cases,
                            const std::vector<PlusCase>* plus = nullptr);

// "{}" -> subject (first occurrence, no re-scan), then one space and
// target_new; a "." is appended unless the text already ends in . ! or ?.
std::string fill_template(const std::string& tmpl, const std::string& subject);
std::string edit_sentence(const RewriteRequest& request);

// Prepends the edit sentence plus one space to every neighborhood prompt.
PlusCase to_plus(const CaseRecord& c);

} // namespace edbench
