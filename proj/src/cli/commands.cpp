#include "edbench/commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "edbench/checkpoint_io.hpp"
#include "edbench/errors.hpp"
#include "edbench/grad.hpp"
#include "edbench/metrics.hpp"
#include "edbench/refmodel.hpp"
#include "edbench/report.hpp"
#include "edbench/rng.hpp"

namespace edbench {

namespace {

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::string_view content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ValidationError("write failed: " + path);
}

std::string model_label(const ModelConfig& c) {
    return "tlm-L" + std::to_string(c.n_layers) + "-d" + std::to_string(c.d_model) + "-m" +
           std::to_string(c.d_mlp);
}

std::vector<int64_t> parse_case_selector(const std::string& selector, int64_t max_cases) {
    std::vector<int64_t> out;
    if (selector.empty()) {
        for (int64_t i = 0; i < max_cases; ++i) out.push_back(i);
        return out;
    }
    size_t pos = 0;
    while (pos < selector.size()) {
        size_t comma = selector.find(',', pos);
        if (comma == std::string::npos) comma = selector.size();
        const std::string part = selector.substr(pos, comma - pos);
        pos = comma + 1;
        if (part.empty()) continue;
        try {
            const auto dash = part.find('-');
            if (dash == std::string::npos) {
                out.push_back(std::stoll(part));
            } else {
                const int64_t lo = std::stoll(part.substr(0, dash));
                const int64_t hi = std::stoll(part.substr(dash + 1));
                if (hi < lo) throw ValidationError("bad case range: " + part);
                for (int64_t i = lo; i <= hi; ++i) out.push_back(i);
            }
        } catch (const std::invalid_argument&) {
            throw ValidationError("bad case selector: " + part);
        } catch (const std::out_of_range&) {
            throw ValidationError("bad case selector: " + part);
        }
    }
    for (int64_t id : out) {
        if (id < 0 || id >= max_cases) {
            throw ValidationError("case id out of range: " + std::to_string(id) +
                                  " (dataset has " + std::to_string(max_cases) + ")");
        }
    }
    return out;
}

int cmd_gen_world(const GenWorldArgs& args) {
    const FactWorld world = gen_world(args.seed, args.sizes, args.options);
    write_file(args.out_path, world_to_json(world));
    if (!args.quiet) {
        std::printf("world: %d relations, %zu facts, %zu cases, %zu corpus lines -> %s\n",
                    args.sizes.n_relations, world.facts.size(), world.cases.size(),
                    world.corpus.size(), args.out_path.c_str());
    }
    return 0;
}

int cmd_train(const TrainArgs& args) {
    const FactWorld world = world_from_json(read_file(args.world_path));
    const Tokenizer tok = Tokenizer::build(world.corpus);

    ModelConfig config = args.config;
    config.vocab_size = tok.vocab_size();
    Checkpoint init = init_checkpoint(config, tok, "unedited");

    const auto corpus_tokens = encode_corpus(tok, world.corpus);
    const auto result = train(init, corpus_tokens, args.train);
    save_checkpoint(result.checkpoint, args.out_path);

    const double recall = fact_recall(result.checkpoint, world);
    if (!args.quiet) {
        std::printf("trained %s: %d epochs, final loss %.4f, fact recall %.3f -> %s\n",
                    model_label(config).c_str(), args.train.epochs,
                    result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back(), recall,
                    args.out_path.c_str());
    }
    return 0;
}

namespace {

struct CaseWork {
    int64_t case_id = 0;
    bool failed = false;
    std::string error;
    std::vector<RecordLine> records; // this editor's measurements
    jsonio::ojson efficacy;
};

jsonio::ojson efficacy_to_json(const std::string& editor, int64_t case_id,
                               const EfficacyReport& r) {
    jsonio::ojson j;
    j["editor"] = editor;
    j["case_id"] = case_id;
    j["failed"] = false;
    j["success"] = r.success;
    j["p_pre_correct"] = r.p_pre_correct;
    j["p_pre_new"] = r.p_pre_new;
    j["p_post_correct"] = r.p_post_correct;
    j["p_post_new"] = r.p_post_new;
    return j;
}

CaseWork eval_case(const Checkpoint& pristine, const std::string& pristine_bytes,
                   const std::vector<std::string>& corpus, const CaseRecord& c,
                   const EditorParams& params, uint64_t run_seed, const std::string& label,
                   CovarianceCache* cache) {
    CaseWork work;
    work.case_id = c.case_id;

    // no edit accumulation: every case starts from the pristine checkpoint
    if (checkpoint_to_bytes(pristine) != pristine_bytes) {
        throw ValidationError("pristine checkpoint was mutated between cases");
    }

    const std::string editor = editor_name(params.kind);
    try {
        const uint64_t case_seed = derive_seed(run_seed, static_cast<uint64_t>(c.case_id));
        const EditOutcome outcome = run_editor(pristine, corpus, c.requested_rewrite, params,
                                               case_seed, cache);
        work.efficacy = efficacy_to_json(editor, c.case_id,
                                         efficacy_check(outcome, c.requested_rewrite));

        const PlusCase plus = to_plus(c);
        for (int vi = 0; vi < 2; ++vi) {
            const auto& prompts =
                vi == 0 ? c.neighborhood_prompts : plus.plus_neighborhood_prompts;
            for (size_t i = 0; i < prompts.size(); ++i) {
                PromptMeasurement m =
                    evaluate_prompt(outcome.pre, outcome.post, prompts[i], c.requested_rewrite);
                m.case_id = c.case_id;
                m.prompt_index = static_cast<int>(i);
                m.variant = vi == 0 ? Variant::base : Variant::plus;
                work.records.push_back({label, editor, std::move(m)});
            }
        }
    } catch (const std::exception& e) {
        work.failed = true;
        work.error = e.what();
        work.records.clear();
        work.efficacy = jsonio::ojson{
            {"editor", editor}, {"case_id", c.case_id}, {"failed", true}, {"error", e.what()}};
    }
    return work;
}

} // namespace

int cmd_eval(const EvalArgs& args) {
    const Checkpoint pristine = load_checkpoint(args.checkpoint_path);
    const std::string pristine_bytes = checkpoint_to_bytes(pristine);
    const std::string dataset_text = read_file(args.dataset_path);

    std::vector<CaseRecord> cases;
    std::vector<std::string> corpus;
    const auto doc_start = dataset_text.find_first_not_of(" \t\r\n");
    if (doc_start != std::string::npos && dataset_text[doc_start] == '[') {
        cases = parse_counterfact(dataset_text);
    } else {
        const FactWorld world = world_from_json(dataset_text);
        cases = world.cases;
        corpus = world.corpus;
    }
    if (cases.empty()) throw ValidationError("dataset has no cases");
    if (corpus.empty() &&
        (args.editor.kind == EditorKind::rome || args.editor.kind == EditorKind::memit_lite)) {
        throw ValidationError("this editor needs a training corpus; use a factworld dataset");
    }

    const auto selected_ids = parse_case_selector(args.cases_selector, static_cast<int64_t>(cases.size()));
    std::vector<const CaseRecord*> selected;
    for (int64_t id : selected_ids) selected.push_back(&cases[static_cast<size_t>(id)]);

    const std::string label = model_label(pristine.config);
    args.editor.validate(pristine.config);

    RunManifest manifest;
    manifest.tool_version = tool_version();
    manifest.command = "eval";
    manifest.seed = args.seed;
    manifest.timestamp = args.timestamp.empty() ? now_utc() : args.timestamp;
    manifest.model_label = label;
    manifest.model_config = pristine.config.to_json();
    manifest.editor = editor_name(args.editor.kind);
    manifest.editor_params_kv = args.editor.to_kv();
    manifest.dataset_path = args.dataset_path;
    manifest.dataset_hash = hex64(fnv1a64(dataset_text.data(), dataset_text.size()));
    manifest.checkpoint_hash = hex64(fnv1a64(pristine_bytes.data(), pristine_bytes.size()));
    manifest.checkpoint_path = args.checkpoint_path;
    manifest.bootstrap_n = args.bootstrap_n;
    manifest.level = args.level;
    manifest.threads = args.threads;
    manifest.cases_selector = args.cases_selector;

    // editors to run: the unedited baseline row plus the requested editor
    std::vector<EditorParams> editors;
    {
        EditorParams none = args.editor;
        none.kind = EditorKind::none;
        editors.push_back(none);
        if (args.editor.kind != EditorKind::none) editors.push_back(args.editor);
    }

    CovarianceCache cache;
    std::vector<CaseWork> results(editors.size() * selected.size());
    std::atomic<size_t> next{0};
    const int n_threads = std::max(1, args.threads);
    auto worker = [&]() {
        for (;;) {
            const size_t idx = next.fetch_add(1);
            if (idx >= results.size()) return;
            const size_t ei = idx / selected.size();
            const size_t ci = idx % selected.size();
            results[idx] = eval_case(pristine, pristine_bytes, corpus, *selected[ci],
                                     editors[ei], args.seed, label, &cache);
        }
    };
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // canonical emission order: editor, then case order
    std::string records_text =
        jsonio::dump(jsonio::ojson{{"manifest", manifest.to_json()}}) + "\n";
    std::string efficacy_text = records_text;
    std::vector<RecordLine> all_records;
    std::vector<CaseFailure> failures;
    int64_t n_failed_editor = 0;
    for (size_t ei = 0; ei < editors.size(); ++ei) {
        for (size_t ci = 0; ci < selected.size(); ++ci) {
            auto& work = results[ei * selected.size() + ci];
            efficacy_text += jsonio::dump(work.efficacy) + "\n";
            if (work.failed) {
                failures.push_back({editor_name(editors[ei].kind), work.case_id, work.error});
                if (editors[ei].kind == args.editor.kind) ++n_failed_editor;
                continue;
            }
            for (auto& r : work.records) {
                records_text += record_to_json(r) + "\n";
                all_records.push_back(std::move(r));
            }
        }
    }

    ReportTable table;
    table.manifest = manifest;
    table.rows = aggregate_records(all_records, args.bootstrap_n, args.level, args.seed);
    table.failures = failures;
    for (auto& row : table.rows) {
        for (const auto& f : failures) {
            if (f.editor == row.editor) ++row.n_failed;
        }
    }

    namespace fs = std::filesystem;
    fs::create_directories(args.out_dir);
    write_file((fs::path(args.out_dir) / "records.jsonl").string(), records_text);
    write_file((fs::path(args.out_dir) / "efficacy.jsonl").string(), efficacy_text);
    write_file((fs::path(args.out_dir) / "report.json").string(), report_to_json(table));
    write_file((fs::path(args.out_dir) / "report.csv").string(), report_to_csv(table));

    const double fail_fraction =
        selected.empty() ? 0.0
                         : static_cast<double>(n_failed_editor) / static_cast<double>(selected.size());
    if (!args.quiet) {
        std::printf("eval: %zu cases x %zu editors, %zu failures -> %s\n", selected.size(),
                    editors.size(), failures.size(), args.out_dir.c_str());
        for (const auto& row : table.rows) {
            for (const auto& [key, stat] : row.cells) {
                std::printf("  %-6s %-8s mean=%.6g ci=[%.6g, %.6g] n=%lld\n", row.editor.c_str(),
                            key.c_str(), stat.mean, stat.ci_low, stat.ci_high,
                            static_cast<long long>(stat.n_samples));
            }
        }
    }
    return fail_fraction > args.fail_threshold ? 3 : 0;
}

int cmd_report(const ReportArgs& args) {
    if (args.record_paths.empty()) throw ValidationError("no record files given");
    std::vector<RecordLine> records;
    RunManifest manifest;
    manifest.tool_version = tool_version();
    manifest.command = "report";
    manifest.seed = args.seed;
    manifest.timestamp = args.timestamp.empty() ? now_utc() : args.timestamp;
    manifest.bootstrap_n = args.bootstrap_n;
    manifest.level = args.level;
    uint64_t input_hash = 0xcbf29ce484222325ull;
    for (const auto& path : args.record_paths) {
        const std::string text = read_file(path);
        input_hash = fnv1a64(text.data(), text.size(), input_hash);
        auto part = parse_records(text, nullptr);
        records.insert(records.end(), std::make_move_iterator(part.begin()),
                       std::make_move_iterator(part.end()));
    }
    manifest.dataset_path = args.record_paths.front();
    manifest.dataset_hash = hex64(input_hash);

    ReportTable table;
    table.manifest = manifest;
    table.rows = aggregate_records(records, args.bootstrap_n, args.level, args.seed);

    namespace fs = std::filesystem;
    fs::create_directories(args.out_dir);
    write_file((fs::path(args.out_dir) / "report.json").string(), report_to_json(table));
    write_file((fs::path(args.out_dir) / "report.csv").string(), report_to_csv(table));
    write_file((fs::path(args.out_dir) / "plot_data.csv").string(), plot_data_csv(table));
    if (!args.quiet) {
        std::printf("report: %zu records -> %s\n", records.size(), args.out_dir.c_str());
    }
    return 0;
}

int cmd_gen_plus(const GenPlusArgs& args) {
    const std::string text = read_file(args.in_path);
    const auto cases = parse_counterfact(text);
    bool already = false;
    for (const auto& c : cases) {
        if (c.raw.contains("plus_neighborhood_prompts")) already = true;
    }
    if (already) {
        std::fprintf(stderr,
                     "warning: input already contains plus_neighborhood_prompts; "
                     "prepending again (the transformation is unconditional)\n");
    }
    std::vector<PlusCase> plus;
    plus.reserve(cases.size());
    for (const auto& c : cases) plus.push_back(to_plus(c));
    write_file(args.out_path, serialize_cases(cases, &plus) + "\n");
    if (!args.quiet) {
        std::printf("gen-plus: %zu cases -> %s\n", cases.size(), args.out_path.c_str());
    }
    return 0;
}

GradCheckResult run_grad_fd_suite(const Checkpoint& ckpt, std::span<const int> tokens,
                                  int n_coords, uint64_t seed, double fault) {
    const ModelConfig& c = ckpt.config;
    const int T = static_cast<int>(tokens.size());
    Rng rng(derive_seed(seed, 0xfd));
    const double h = 1e-3;
    GradCheckResult result;

    // hidden-vector gradients, checked through the replacement semantics
    for (int trial = 0; trial < n_coords; ++trial) {
        const int layer = static_cast<int>(rng.below(static_cast<uint64_t>(c.n_layers)));
        const int pos = static_cast<int>(rng.below(static_cast<uint64_t>(T)));
        const int coord = static_cast<int>(rng.below(static_cast<uint64_t>(c.d_model)));
        const int target = static_cast<int>(rng.below(static_cast<uint64_t>(c.vocab_size)));

        const auto trace = forward_traced(ckpt, tokens);
        const auto out_site = trace.output(layer, pos);
        const auto& b_out = ckpt.params.layers[static_cast<size_t>(layer)].b_out;
        std::vector<float> v0(static_cast<size_t>(c.d_model));
        for (int i = 0; i < c.d_model; ++i) {
            v0[static_cast<size_t>(i)] = out_site[static_cast<size_t>(i)] - b_out[static_cast<size_t>(i)];
        }
        Intervention iv{layer, pos, v0};
        auto analytic = grad_wrt_hidden(ckpt, tokens, layer, pos, LossSpec{target}, &iv);
        if (fault != 0.0) {
            for (auto& g : analytic) g += static_cast<float>(fault);
        }

        Intervention ip = iv, im = iv;
        ip.value[static_cast<size_t>(coord)] = static_cast<float>(v0[static_cast<size_t>(coord)] + h);
        im.value[static_cast<size_t>(coord)] = static_cast<float>(v0[static_cast<size_t>(coord)] - h);
        const double eff_h = static_cast<double>(ip.value[static_cast<size_t>(coord)]) -
                             static_cast<double>(im.value[static_cast<size_t>(coord)]);
        const double fd = (refmodel::nll(ckpt, tokens, target, &ip) -
                           refmodel::nll(ckpt, tokens, target, &im)) /
                          eff_h;

        // coordinates far below the gradient's own scale sit at the float32
        // noise floor; compare those against 3e-3 of the largest coordinate
        double linf = 0.0;
        for (float g : analytic) linf = std::max(linf, std::abs(static_cast<double>(g)));
        const double an = analytic[static_cast<size_t>(coord)];
        const double denom = std::max({std::abs(fd), std::abs(an), 3e-3 * linf, 1e-10});
        result.max_rel_hidden = std::max(result.max_rel_hidden, std::abs(fd - an) / denom);
    }

    // MLP weight gradients
    for (int trial = 0; trial < n_coords; ++trial) {
        const int layer = static_cast<int>(rng.below(static_cast<uint64_t>(c.n_layers)));
        const int target = static_cast<int>(rng.below(static_cast<uint64_t>(c.vocab_size)));
        const auto grads = grad_wrt_mlp_weights(ckpt, tokens, layer, LossSpec{target});
        const std::vector<float>* gblocks[4] = {&grads.w_in, &grads.b_in, &grads.w_out,
                                                &grads.b_out};
        const int block = static_cast<int>(rng.below(4));
        const auto& gb = *gblocks[block];
        const size_t coord = rng.below(gb.size());

        Checkpoint perturbed = ckpt;
        auto& L = perturbed.params.layers[static_cast<size_t>(layer)];
        std::vector<float>* blocks[4] = {&L.w_in, &L.b_in, &L.w_out, &L.b_out};
        const float orig = (*blocks[block])[coord];
        (*blocks[block])[coord] = static_cast<float>(static_cast<double>(orig) + h);
        const double up = static_cast<double>((*blocks[block])[coord]);
        const double loss_p = refmodel::nll(perturbed, tokens, target);
        (*blocks[block])[coord] = static_cast<float>(static_cast<double>(orig) - h);
        const double down = static_cast<double>((*blocks[block])[coord]);
        const double loss_m = refmodel::nll(perturbed, tokens, target);
        (*blocks[block])[coord] = orig;
        const double fd = (loss_p - loss_m) / (up - down);

        double an = gb[coord];
        if (fault != 0.0) an += fault;
        double linf = 0.0;
        for (const auto* blk : gblocks) {
            for (float g : *blk) linf = std::max(linf, std::abs(static_cast<double>(g)));
        }
        const double denom = std::max({std::abs(fd), std::abs(an), 3e-3 * linf, 1e-10});
        result.max_rel_weights = std::max(result.max_rel_weights, std::abs(fd - an) / denom);
    }
    return result;
}

int cmd_gradcheck(const GradcheckArgs& args) {
    Checkpoint ckpt;
    std::vector<int> tokens;
    if (args.checkpoint_path.empty()) {
        // self-contained fixture: a fresh model over a small synthetic world
        const FactWorld world = gen_world(args.seed, {2, 4, 3}, {2, 1, 32, 5});
        const Tokenizer tok = Tokenizer::build(world.corpus);
        ModelConfig config;
        config.seed = args.seed;
        config.vocab_size = tok.vocab_size();
        ckpt = init_checkpoint(config, tok, "gradcheck-fixture");
        tokens = tok.encode(world.corpus.front());
        if (tokens.size() > 12) tokens.resize(12);
    } else {
        ckpt = load_checkpoint(args.checkpoint_path);
        Rng rng(args.seed);
        tokens.push_back(Tokenizer::kBos);
        for (int i = 0; i < 11; ++i) {
            tokens.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(ckpt.config.vocab_size))));
        }
    }

    const auto res = run_grad_fd_suite(ckpt, tokens, args.n_coords, args.seed,
                                       args.fault_injection ? 1e-2 : 0.0);
    const bool ok = res.max_rel_hidden < args.tolerance && res.max_rel_weights < args.tolerance;
    std::printf("gradcheck: hidden max rel err %.3e, weights max rel err %.3e (tolerance %.1e) %s\n",
                res.max_rel_hidden, res.max_rel_weights, args.tolerance, ok ? "OK" : "FAIL");
    return ok ? 0 : 1;
}

} // namespace edbench
