#include "edbench/report.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "edbench/errors.hpp"
#include "edbench/rng.hpp"

namespace edbench {

const char* tool_version() { return "0.1.0"; }

jsonio::ojson RunManifest::to_json() const {
    jsonio::ojson j;
    j["tool_version"] = tool_version;
    j["command"] = command;
    j["seed"] = seed;
    j["timestamp"] = timestamp;
    j["model_label"] = model_label;
    j["model_config"] = model_config;
    j["editor"] = editor;
    j["editor_params"] = editor_params_kv;
    j["dataset_path"] = dataset_path;
    j["dataset_hash"] = dataset_hash;
    j["checkpoint_path"] = checkpoint_path;
    j["checkpoint_hash"] = checkpoint_hash;
    j["bootstrap_n"] = bootstrap_n;
    j["level"] = level;
    j["threads"] = threads;
    j["cases"] = cases_selector;
    return j;
}

std::string record_to_json(const RecordLine& r) {
    jsonio::ojson j;
    j["model"] = r.model;
    j["editor"] = r.editor;
    j["case_id"] = r.m.case_id;
    j["variant"] = variant_name(r.m.variant);
    j["prompt_index"] = r.m.prompt_index;
    j["prompt"] = r.m.prompt;
    j["p_post_correct"] = r.m.p_post_correct;
    j["p_post_new"] = r.m.p_post_new;
    j["ns"] = r.m.ns_indicator ? 1 : 0;
    j["nm"] = r.m.nm_value;
    j["nkl"] = r.m.nkl_value;
    j["valid"] = r.m.valid;
    if (!r.m.valid) j["error"] = r.m.error;
    return jsonio::dump(j);
}

std::vector<RecordLine> parse_records(std::string_view jsonl, RunManifest* manifest_out) {
    std::vector<RecordLine> out;
    size_t pos = 0;
    int lineno = 0;
    while (pos < jsonl.size()) {
        size_t end = jsonl.find('\n', pos);
        if (end == std::string_view::npos) end = jsonl.size();
        const auto line = jsonl.substr(pos, end - pos);
        pos = end + 1;
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        const auto j = jsonio::parse(line);
        if (j.contains("manifest")) {
            if (manifest_out) {
                const auto& m = j.at("manifest");
                manifest_out->command = m.value("command", "");
                manifest_out->seed = m.value("seed", uint64_t{0});
                manifest_out->timestamp = m.value("timestamp", "");
                manifest_out->model_label = m.value("model_label", "");
                manifest_out->bootstrap_n = m.value("bootstrap_n", int64_t{1000});
                manifest_out->level = m.value("level", 0.99);
            }
            continue;
        }
        try {
            RecordLine r;
            r.model = j.at("model").get<std::string>();
            r.editor = j.at("editor").get<std::string>();
            r.m.case_id = j.at("case_id").get<int64_t>();
            r.m.variant = variant_from_name(j.at("variant").get<std::string>());
            r.m.prompt_index = j.at("prompt_index").get<int>();
            r.m.prompt = j.value("prompt", "");
            r.m.p_post_correct = j.at("p_post_correct").get<double>();
            r.m.p_post_new = j.at("p_post_new").get<double>();
            r.m.ns_indicator = j.at("ns").get<int>() != 0;
            r.m.nm_value = j.at("nm").get<double>();
            r.m.nkl_value = j.at("nkl").get<double>();
            r.m.valid = j.at("valid").get<bool>();
            r.m.error = j.value("error", "");
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("records line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

int editor_order(std::string_view editor) {
    if (editor == "none") return 0;
    if (editor == "rome") return 1;
    if (editor == "memit") return 2;
    if (editor == "ft-l") return 3;
    return 4;
}

std::vector<ReportRow> aggregate_records(const std::vector<RecordLine>& records,
                                         int64_t bootstrap_n, double level, uint64_t seed) {
    std::vector<RecordLine> sorted = records;
    std::stable_sort(sorted.begin(), sorted.end(), [](const RecordLine& a, const RecordLine& b) {
        if (a.model != b.model) return a.model < b.model;
        const int ea = editor_order(a.editor), eb = editor_order(b.editor);
        if (ea != eb) return ea < eb;
        if (a.editor != b.editor) return a.editor < b.editor;
        if (a.m.case_id != b.m.case_id) return a.m.case_id < b.m.case_id;
        if (a.m.variant != b.m.variant) return a.m.variant < b.m.variant;
        return a.m.prompt_index < b.m.prompt_index;
    });

    std::vector<ReportRow> rows;
    size_t i = 0;
    while (i < sorted.size()) {
        const std::string& model = sorted[i].model;
        const std::string& editor = sorted[i].editor;
        size_t j = i;
        while (j < sorted.size() && sorted[j].model == model && sorted[j].editor == editor) ++j;

        ReportRow row;
        row.model = model;
        row.editor = editor;
        std::vector<double> values[3][2]; // metric x variant
        std::set<int64_t> cases;
        for (size_t k = i; k < j; ++k) {
            const auto& m = sorted[k].m;
            cases.insert(m.case_id);
            if (!m.valid) {
                ++row.n_invalid;
                continue;
            }
            const int vi = m.variant == Variant::base ? 0 : 1;
            values[0][vi].push_back(m.ns_indicator ? 1.0 : 0.0);
            values[1][vi].push_back(m.nm_value);
            values[2][vi].push_back(m.nkl_value);
        }
        row.n_cases = static_cast<int64_t>(cases.size());

        static const char* metric_names[3] = {"ns", "nm", "nkl"};
        for (int mi = 0; mi < 3; ++mi) {
            for (int vi = 0; vi < 2; ++vi) {
                if (values[mi][vi].empty()) continue;
                const std::string variant = vi == 0 ? "base" : "plus";
                std::string key = std::string(metric_names[mi]) + "/" + variant;
                uint64_t cell_seed = seed;
                cell_seed = fnv1a64(model.data(), model.size(), cell_seed);
                cell_seed = fnv1a64(editor.data(), editor.size(), cell_seed);
                cell_seed = fnv1a64(key.data(), key.size(), cell_seed);
                auto stat = bootstrap_ci(values[mi][vi], bootstrap_n, level,
                                         derive_seed(seed, cell_seed));
                stat.metric = key;
                row.cells[key] = std::move(stat);
            }
        }
        rows.push_back(std::move(row));
        i = j;
    }
    return rows;
}

namespace {

jsonio::ojson stat_to_json(const AggregateStat& s) {
    jsonio::ojson j;
    j["mean"] = s.mean;
    j["ci_low"] = s.ci_low;
    j["ci_high"] = s.ci_high;
    j["n_samples"] = s.n_samples;
    j["bootstrap_n"] = s.bootstrap_n;
    j["level"] = s.level;
    return j;
}

} // namespace

std::string report_to_json(const ReportTable& table) {
    jsonio::ojson j;
    j["manifest"] = table.manifest.to_json();
    jsonio::ojson rows = jsonio::ojson::array();
    for (const auto& row : table.rows) {
        jsonio::ojson r;
        r["model"] = row.model;
        r["editor"] = row.editor;
        jsonio::ojson cells;
        for (const auto& [key, stat] : row.cells) cells[key] = stat_to_json(stat);
        r["cells"] = std::move(cells);
        r["n_cases"] = row.n_cases;
        r["n_invalid"] = row.n_invalid;
        r["n_failed"] = row.n_failed;
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    jsonio::ojson failures = jsonio::ojson::array();
    for (const auto& f : table.failures) {
        failures.push_back({{"editor", f.editor}, {"case_id", f.case_id}, {"error", f.error}});
    }
    j["failures"] = std::move(failures);
    return jsonio::dump(j) + "\n";
}

std::string report_to_csv(const ReportTable& table) {
    std::string out = "# manifest: " + jsonio::dump(table.manifest.to_json()) + "\n";
    out += "model,editor,metric,variant,mean,ci_low,ci_high,n_samples,n_invalid,bootstrap_n,level\n";
    for (const auto& row : table.rows) {
        for (const auto& [key, stat] : row.cells) {
            const auto slash = key.find('/');
            out += row.model + "," + row.editor + "," + key.substr(0, slash) + "," +
                   key.substr(slash + 1) + "," + jsonio::fmt_double(stat.mean) + "," +
                   jsonio::fmt_double(stat.ci_low) + "," + jsonio::fmt_double(stat.ci_high) + "," +
                   std::to_string(stat.n_samples) + "," + std::to_string(row.n_invalid) + "," +
                   std::to_string(stat.bootstrap_n) + "," + jsonio::fmt_double(stat.level) + "\n";
        }
    }
    return out;
}

std::string plot_data_csv(const ReportTable& table) {
    std::string out = "# manifest: " + jsonio::dump(table.manifest.to_json()) + "\n";
    out += "series,metric,variant,editor,model,mean,ci_low,ci_high\n";
    static const char* metrics[3] = {"ns", "nm", "nkl"};
    static const char* variants[2] = {"base", "plus"};
    for (const char* metric : metrics) {
        for (const char* variant : variants) {
            const std::string key = std::string(metric) + "/" + variant;
            for (const auto& row : table.rows) {
                auto it = row.cells.find(key);
                if (it == row.cells.end()) continue;
                const auto& stat = it->second;
                out += row.editor + std::string(":") + variant + "," + metric + "," + variant +
                       "," + row.editor + "," + row.model + "," + jsonio::fmt_double(stat.mean) +
                       "," + jsonio::fmt_double(stat.ci_low) + "," +
                       jsonio::fmt_double(stat.ci_high) + "\n";
            }
        }
    }
    return out;
}

} // namespace edbench
