#include "edbench/counterfact.hpp"

#include "edbench/errors.hpp"

namespace edbench {

void RewriteRequest::validate() const {
    const auto first = prompt_template.find("{}");
    if (first == std::string::npos) {
        throw ValidationError("rewrite template has no {} placeholder");
    }
    if (prompt_template.find("{}", first + 2) != std::string::npos) {
        throw ValidationError("rewrite template has more than one {} placeholder");
    }
    if (subject.empty() || target_true.empty() || target_new.empty()) {
        throw ValidationError("rewrite subject/targets must be non-empty");
    }
    if (target_true == target_new) {
        throw ValidationError("rewrite target_new equals target_true");
    }
}

namespace {

std::vector<std::string> string_list(const jsonio::ojson& j, const char* key, int64_t case_idx) {
    if (!j.contains(key)) return {};
    const auto& arr = j.at(key);
    if (!arr.is_array()) {
        throw FormatError("case " + std::to_string(case_idx) + ": " + key + " is not an array");
    }
    std::vector<std::string> out;
    out.reserve(arr.size());
    for (const auto& el : arr) {
        if (!el.is_string()) {
            throw FormatError("case " + std::to_string(case_idx) + ": " + key +
                              " contains a non-string entry");
        }
        out.push_back(el.get<std::string>());
    }
    return out;
}

CaseRecord parse_case(const jsonio::ojson& j, int64_t index) {
    if (!j.is_object()) {
        throw FormatError("case " + std::to_string(index) + ": not a JSON object");
    }
    CaseRecord c;
    c.raw = j;
    c.case_id = j.contains("case_id") ? j.at("case_id").get<int64_t>() : index;
    if (!j.contains("requested_rewrite")) {
        throw FormatError("case " + std::to_string(index) + ": missing requested_rewrite");
    }
    const auto& rr = j.at("requested_rewrite");
    try {
        c.requested_rewrite.prompt_template = rr.at("prompt").get<std::string>();
        c.requested_rewrite.subject = rr.at("subject").get<std::string>();
        c.requested_rewrite.target_true = rr.at("target_true").at("str").get<std::string>();
        c.requested_rewrite.target_new = rr.at("target_new").at("str").get<std::string>();
        if (rr.contains("relation_id")) {
            c.requested_rewrite.relation_id = rr.at("relation_id").get<std::string>();
        }
        if (rr.at("target_true").contains("id")) {
            c.requested_rewrite.target_true_id = rr.at("target_true").at("id").get<std::string>();
        }
        if (rr.at("target_new").contains("id")) {
            c.requested_rewrite.target_new_id = rr.at("target_new").at("id").get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("case " + std::to_string(index) + ": bad requested_rewrite: " + e.what());
    }
    try {
        c.requested_rewrite.validate();
    } catch (const ValidationError& e) {
        throw FormatError("case " + std::to_string(index) + ": " + e.what());
    }
    c.paraphrase_prompts = string_list(j, "paraphrase_prompts", index);
    c.neighborhood_prompts = string_list(j, "neighborhood_prompts", index);
    c.attribute_prompts = string_list(j, "attribute_prompts", index);
    c.generation_prompts = string_list(j, "generation_prompts", index);
    if (c.neighborhood_prompts.empty()) {
        throw FormatError("case " + std::to_string(index) + ": neighborhood_prompts is empty");
    }
    return c;
}

} // namespace

CaseRecord case_from_json(const jsonio::ojson& j, int64_t index) { return parse_case(j, index); }

std::vector<CaseRecord> parse_counterfact(std::string_view json_text) {
    const auto doc = jsonio::parse(json_text);
    if (!doc.is_array()) throw FormatError("expected a JSON array of cases");
    std::vector<CaseRecord> cases;
    cases.reserve(doc.size());
    int64_t index = 0;
    for (const auto& el : doc) {
        cases.push_back(parse_case(el, index));
        ++index;
    }
    return cases;
}

std::string serialize_cases(const std::vector<CaseRecord>& cases,
                            const std::vector<PlusCase>* plus) {
    if (plus && plus->size() != cases.size()) {
        throw ValidationError("plus case count does not match cases");
    }
    jsonio::ojson arr = jsonio::ojson::array();
    for (size_t i = 0; i < cases.size(); ++i) {
        jsonio::ojson obj = cases[i].raw;
        if (plus) obj["plus_neighborhood_prompts"] = (*plus)[i].plus_neighborhood_prompts;
        arr.push_back(std::move(obj));
    }
    return jsonio::dump(arr);
}

std::string fill_template(const std::string& tmpl, const std::string& subject) {
    const auto pos = tmpl.find("{}");
    if (pos == std::string::npos) throw ValidationError("template has no {} placeholder");
    std::string out = tmpl;
    out.replace(pos, 2, subject); // single left-to-right substitution
    return out;
}

std::string edit_sentence(const RewriteRequest& request) {
    std::string s = fill_template(request.prompt_template, request.subject);
    s += ' ';
    s += request.target_new;
    if (!s.empty() && s.back() != '.' && s.back() != '!' && s.back() != '?') s += '.';
    return s;
}

PlusCase to_plus(const CaseRecord& c) {
    PlusCase out;
    out.base = c;
    const std::string edit = edit_sentence(c.requested_rewrite);
    out.plus_neighborhood_prompts.reserve(c.neighborhood_prompts.size());
    for (const auto& prompt : c.neighborhood_prompts) {
        out.plus_neighborhood_prompts.push_back(edit + " " + prompt);
    }
    return out;
}

} // namespace edbench
