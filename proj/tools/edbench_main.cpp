// edbench: train a small transformer on a synthetic fact world, apply
// single-fact weight edits, and measure their side effects on neighborhood
// prompts (base and edit-prepended variants) with bootstrap confidence
// intervals.

#include <cstdio>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "edbench/commands.hpp"
#include "edbench/errors.hpp"

namespace {

edbench::EditorParams load_editor_params(const std::string& config_path,
                                         const std::string& editor_flag) {
    edbench::EditorParams params;
    if (!config_path.empty()) {
        params = edbench::EditorParams::from_kv(edbench::read_file(config_path));
    }
    if (!editor_flag.empty()) params.kind = edbench::editor_from_name(editor_flag);
    return params;
}

void apply_train_config(const std::string& config_path, edbench::ModelConfig& model,
                        edbench::TrainConfig& train) {
    if (config_path.empty()) return;
    std::istringstream is{edbench::read_file(config_path)};
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw edbench::FormatError("train config line " + std::to_string(lineno) +
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
        if (key == "n_layers") model.n_layers = std::stoi(value);
        else if (key == "d_model") model.d_model = std::stoi(value);
        else if (key == "n_heads") model.n_heads = std::stoi(value);
        else if (key == "d_mlp") model.d_mlp = std::stoi(value);
        else if (key == "max_seq_len") model.max_seq_len = std::stoi(value);
        else if (key == "epochs") train.epochs = std::stoi(value);
        else if (key == "lr") train.lr = std::stod(value);
        else if (key == "momentum") train.momentum = std::stod(value);
        else if (key == "batch_size") train.batch_size = std::stoi(value);
        else {
            throw edbench::FormatError("train config line " + std::to_string(lineno) +
                                       ": unknown key " + key);
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"model-edit specificity benchmark"};
    app.require_subcommand(1);

    // gen-world
    edbench::GenWorldArgs gw;
    auto* gen_world_cmd = app.add_subcommand("gen-world", "generate a synthetic fact world");
    gen_world_cmd->add_option("--seed", gw.seed, "world seed");
    gen_world_cmd->add_option("--relations", gw.sizes.n_relations, "number of relations");
    gen_world_cmd->add_option("--subjects", gw.sizes.subjects_per_relation,
                              "subjects per relation");
    gen_world_cmd->add_option("--objects", gw.sizes.n_objects, "object inventory size");
    gen_world_cmd->add_option("--fact-reps", gw.options.fact_reps,
                              "canonical verbalizations per fact");
    gen_world_cmd->add_option("--primer-reps", gw.options.primer_reps,
                              "repetitions of paraphrase primer lines");
    gen_world_cmd->add_option("--out", gw.out_path, "output world JSON")->required();

    // train
    edbench::TrainArgs tr;
    std::string train_config;
    auto* train_cmd = app.add_subcommand("train", "build tokenizer and train a checkpoint");
    train_cmd->add_option("--world", tr.world_path, "world JSON")->required();
    train_cmd->add_option("--config", train_config, "model/training key=value file");
    train_cmd->add_option("--seed", tr.config.seed, "model init seed");
    train_cmd->add_option("--train-seed", tr.train.seed, "shuffle seed");
    train_cmd->add_option("--layers", tr.config.n_layers, "transformer layers");
    train_cmd->add_option("--d-model", tr.config.d_model, "model width");
    train_cmd->add_option("--heads", tr.config.n_heads, "attention heads");
    train_cmd->add_option("--d-mlp", tr.config.d_mlp, "MLP hidden width");
    train_cmd->add_option("--epochs", tr.train.epochs, "training epochs");
    train_cmd->add_option("--lr", tr.train.lr, "learning rate");
    train_cmd->add_option("--momentum", tr.train.momentum, "SGD momentum");
    train_cmd->add_option("--batch-size", tr.train.batch_size, "sequences per step");
    train_cmd->add_option("--out", tr.out_path, "output checkpoint path")->required();

    // eval
    edbench::EvalArgs ev;
    std::string eval_editor = "none";
    std::string eval_config;
    auto* eval_cmd = app.add_subcommand("eval", "edit per case and measure specificity");
    eval_cmd->add_option("--checkpoint", ev.checkpoint_path, "unedited checkpoint")->required();
    eval_cmd->add_option("--dataset", ev.dataset_path, "factworld JSON or case array")->required();
    eval_cmd->add_option("--out", ev.out_dir, "output directory")->required();
    eval_cmd->add_option("--editor", eval_editor, "none|rome|memit|ft-l");
    eval_cmd->add_option("--config", eval_config, "editor key=value file");
    eval_cmd->add_option("--cases", ev.cases_selector, "case selection, e.g. 0-9,12");
    eval_cmd->add_option("--seed", ev.seed, "run seed");
    eval_cmd->add_option("--bootstrap-n", ev.bootstrap_n, "bootstrap resamples");
    eval_cmd->add_option("--level", ev.level, "confidence level");
    eval_cmd->add_option("--threads", ev.threads, "case worker threads");
    eval_cmd->add_option("--timestamp", ev.timestamp, "pin manifest timestamp");

    // report
    edbench::ReportArgs rp;
    auto* report_cmd = app.add_subcommand("report", "re-aggregate streamed records");
    report_cmd->add_option("--records", rp.record_paths, "records.jsonl files")->required();
    report_cmd->add_option("--out", rp.out_dir, "output directory")->required();
    report_cmd->add_option("--seed", rp.seed, "bootstrap seed");
    report_cmd->add_option("--bootstrap-n", rp.bootstrap_n, "bootstrap resamples");
    report_cmd->add_option("--level", rp.level, "confidence level");
    report_cmd->add_option("--timestamp", rp.timestamp, "pin manifest timestamp");

    // gen-plus
    edbench::GenPlusArgs gp;
    auto* gen_plus_cmd =
        app.add_subcommand("gen-plus", "prepend each case's edit sentence to its prompts");
    gen_plus_cmd->add_option("--in", gp.in_path, "input case array JSON")->required();
    gen_plus_cmd->add_option("--out", gp.out_path, "output JSON")->required();

    // gradcheck
    edbench::GradcheckArgs gc;
    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference check of the gradient paths");
    gradcheck_cmd->add_option("--checkpoint", gc.checkpoint_path,
                              "checkpoint to check (default: fresh fixture model)");
    gradcheck_cmd->add_option("--coords", gc.n_coords, "random coordinates per suite");
    gradcheck_cmd->add_option("--seed", gc.seed, "sampling seed");
    gradcheck_cmd->add_option("--tolerance", gc.tolerance, "max relative error");
    gradcheck_cmd->add_flag("--fault-injection", gc.fault_injection,
                            "perturb analytic gradients (self-test; must fail)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen_world_cmd->parsed()) return edbench::cmd_gen_world(gw);
        if (train_cmd->parsed()) {
            apply_train_config(train_config, tr.config, tr.train);
            return edbench::cmd_train(tr);
        }
        if (eval_cmd->parsed()) {
            ev.editor = load_editor_params(eval_config, eval_editor);
            return edbench::cmd_eval(ev);
        }
        if (report_cmd->parsed()) return edbench::cmd_report(rp);
        if (gen_plus_cmd->parsed()) return edbench::cmd_gen_plus(gp);
        if (gradcheck_cmd->parsed()) return edbench::cmd_gradcheck(gc);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
