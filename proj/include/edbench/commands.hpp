#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edbench/editors.hpp"
#include "edbench/factworld.hpp"
#include "edbench/train.hpp"

// Command entry points behind the CLI. They are callable directly so tests
// can run whole pipelines in-process. Exit codes: 0 success, 2 validation
// failure (thrown as exceptions and mapped by the CLI), 3 when more than
// the allowed fraction of cases failed during evaluation.

namespace edbench {

struct GenWorldArgs {
    uint64_t seed = 0;
    WorldSizes sizes;
    GenOptions options;
    std::string out_path;
    bool quiet = false;
};
int cmd_gen_world(const GenWorldArgs& args);

struct TrainArgs {
    std::string world_path;
    ModelConfig config; // vocab_size filled from the world's tokenizer
    TrainConfig train;
    std::string out_path;
    bool quiet = false;
};
int cmd_train(const TrainArgs& args);

struct EvalArgs {
    std::string checkpoint_path;
    std::string dataset_path; // factworld JSON or dataset case array
    std::string out_dir;
    EditorParams editor;
    std::string cases_selector; // "" = all, else e.g. "0-9,12"
    uint64_t seed = 0;
    int64_t bootstrap_n = 1000;
    double level = 0.99;
    int threads = 1;
    std::string timestamp;        // "" = wall clock; pin for reproducible bytes
    double fail_threshold = 0.10; // exit 3 above this fraction of failed cases
    bool quiet = false;
};
int cmd_eval(const EvalArgs& args);

struct ReportArgs {
    std::vector<std::string> record_paths;
    std::string out_dir;
    int64_t bootstrap_n = 1000;
    double level = 0.99;
    uint64_t seed = 0;
    std::string timestamp;
    bool quiet = false;
};
int cmd_report(const ReportArgs& args);

struct GenPlusArgs {
    std::string in_path;
    std::string out_path;
    bool quiet = false;
};
int cmd_gen_plus(const GenPlusArgs& args);

struct GradcheckArgs {
    std::string checkpoint_path; // "" = fresh seed-0 fixture model
    int n_coords = 100;
    uint64_t seed = 0;
    double tolerance = 1e-3;
    bool fault_injection = false; // perturbs analytic gradients; must fail
    bool quiet = false;
};
int cmd_gradcheck(const GradcheckArgs& args);

// Helpers shared with tests.
std::vector<int64_t> parse_case_selector(const std::string& selector, int64_t max_cases);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
std::string model_label(const ModelConfig& c);

// Finite-difference comparison result for one gradient suite.
struct GradCheckResult {
    double max_rel_hidden = 0.0;
    double max_rel_weights = 0.0;
};
GradCheckResult run_grad_fd_suite(const Checkpoint& ckpt, std::span<const int> tokens,
                                  int n_coords, uint64_t seed, double fault = 0.0);

} // namespace edbench
