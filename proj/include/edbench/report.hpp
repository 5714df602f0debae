#pragma once

#include <map>
#include <string>
#include <vector>

#include "edbench/metrics.hpp"

namespace edbench {

// Everything needed to reproduce a run bit-for-bit. Embedded in every
// output artifact (first line of record streams, header of reports).
struct RunManifest {
    std::string tool_version;
    std::string command;
    uint64_t seed = 0;
    std::string timestamp; // caller-supplied for reproducible runs
    std::string model_label;
    jsonio::ojson model_config;
    std::string editor;
    std::string editor_params_kv;
    std::string dataset_path;
    std::string dataset_hash; // fnv1a64, hex
    std::string checkpoint_path;
    std::string checkpoint_hash;
    int64_t bootstrap_n = 1000;
    double level = 0.99;
    int threads = 1;
    std::string cases_selector;

    jsonio::ojson to_json() const;
};

const char* tool_version();

// One streamed per-prompt record.
struct RecordLine {
    std::string model;
    std::string editor;
    PromptMeasurement m;
};

std::string record_to_json(const RecordLine& r); // single line, no newline
std::vector<RecordLine> parse_records(std::string_view jsonl,
                                      RunManifest* manifest_out = nullptr);

struct ReportRow {
    std::string model;
    std::string editor;
    std::map<std::string, AggregateStat> cells; // "<metric>/<variant>"
    int64_t n_invalid = 0;
    int64_t n_cases = 0;
    int64_t n_failed = 0;
};

struct CaseFailure {
    std::string editor;
    int64_t case_id = 0;
    std::string error;
};

struct ReportTable {
    RunManifest manifest;
    std::vector<ReportRow> rows;
    std::vector<CaseFailure> failures;
};

// Canonical row order: model label, then fixed editor order
// (none, rome, memit, ft-l). Both eval and re-aggregation use this.
int editor_order(std::string_view editor);

// Groups records into (model, editor) rows, sorts measurements by
// (case_id, variant, prompt_index) and bootstraps each metric/variant
// cell. Cell seeds derive from (seed, model, editor, metric, variant), so
// re-aggregation reproduces the original table bit-for-bit.
std::vector<ReportRow> aggregate_records(const std::vector<RecordLine>& records,
                                         int64_t bootstrap_n, double level, uint64_t seed);

std::string report_to_json(const ReportTable& table);
std::string report_to_csv(const ReportTable& table);

// Plot-data series: one row per (metric, variant, editor, model) cell;
// series id is "<editor>:<variant>" so each metric has editors x variants
// series.
std::string plot_data_csv(const ReportTable& table);

} // namespace edbench
