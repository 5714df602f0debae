#include "edbench/factworld.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "edbench/errors.hpp"
#include "edbench/rng.hpp"

namespace edbench {

namespace {

// Statement frames. Every frame starts with a function word so that
// subjects and objects always appear mid-sentence and therefore tokenize
// to their space-prefixed unit, and every frame ends right before the
// object slot. {n} is the relation noun, {} the subject.
const std::vector<std::string> kFrames = {
    "The {n} of {} is",
    "For {} the {n} is",
    "As for {} the {n} is",
    "People say the {n} of {} is",
    "Regarding {} the {n} is",
    "It is known that the {n} of {} is",
};

const std::unordered_set<std::string> kReservedWords = {
    "The", "For", "As", "People", "Regarding", "It",
    "the", "for", "say", "is", "known", "that", "of",
};

std::string instantiate_frame(const std::string& frame, const std::string& noun) {
    std::string out = frame;
    const auto pos = out.find("{n}");
    out.replace(pos, 3, noun);
    return out;
}

std::string make_name(Rng& rng, bool capitalized) {
    static const std::vector<std::string> onsets = {
        "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
        "br", "dr", "gr", "kl", "pl", "pr", "st", "tr",
    };
    static const std::vector<std::string> vowels = {"a", "e", "i", "o", "u", "ai", "ou"};
    static const std::vector<std::string> codas = {"", "l", "n", "r", "s", "t", "k", "m"};
    std::string name;
    const int syllables = 2 + static_cast<int>(rng.below(2));
    for (int s = 0; s < syllables; ++s) {
        name += onsets[rng.below(onsets.size())];
        name += vowels[rng.below(vowels.size())];
    }
    name += codas[rng.below(codas.size())];
    if (capitalized) name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    return name;
}

std::string unique_name(Rng& rng, bool capitalized, std::unordered_set<std::string>& used) {
    for (int tries = 0; tries < 1000; ++tries) {
        std::string name = make_name(rng, capitalized);
        if (kReservedWords.contains(name)) continue;
        if (used.insert(name).second) return name;
    }
    throw ValidationError("name space exhausted; reduce world sizes");
}

jsonio::ojson case_to_raw(const CaseRecord& c) {
    jsonio::ojson rr;
    rr["prompt"] = c.requested_rewrite.prompt_template;
    rr["relation_id"] = c.requested_rewrite.relation_id;
    rr["target_new"] = {{"str", c.requested_rewrite.target_new}, {"id", c.requested_rewrite.target_new_id}};
    rr["target_true"] = {{"str", c.requested_rewrite.target_true}, {"id", c.requested_rewrite.target_true_id}};
    rr["subject"] = c.requested_rewrite.subject;
    jsonio::ojson j;
    j["case_id"] = c.case_id;
    j["requested_rewrite"] = std::move(rr);
    j["paraphrase_prompts"] = c.paraphrase_prompts;
    j["neighborhood_prompts"] = c.neighborhood_prompts;
    j["attribute_prompts"] = c.attribute_prompts;
    j["generation_prompts"] = c.generation_prompts;
    return j;
}

} // namespace

const Relation& FactWorld::relation(const std::string& id) const {
    for (const auto& r : relations) {
        if (r.id == id) return r;
    }
    throw ValidationError("unknown relation id: " + id);
}

FactWorld gen_world(uint64_t seed, const WorldSizes& sizes, const GenOptions& opts) {
    if (sizes.n_relations < 1) throw ValidationError("need at least one relation");
    if (sizes.subjects_per_relation < 2) {
        throw ValidationError("need >= 2 subjects per relation so neighborhoods exist");
    }
    if (sizes.n_objects < 2) {
        throw ValidationError("need >= 2 objects so counterfactual targets exist");
    }
    if (opts.fact_reps < 1 || opts.primer_reps < 0 || opts.max_line_units < 8 ||
        opts.max_neighborhood_prompts < 5) {
        throw ValidationError("bad world generation options");
    }

    FactWorld w;
    w.seed = seed;
    w.sizes = sizes;
    w.options = opts;

    Rng rng(derive_seed(seed, 0xfac7));
    std::unordered_set<std::string> used;

    for (int o = 0; o < sizes.n_objects; ++o) w.objects.push_back(unique_name(rng, true, used));
    for (int r = 0; r < sizes.n_relations; ++r) {
        for (int s = 0; s < sizes.subjects_per_relation; ++s) {
            w.subjects.push_back(unique_name(rng, true, used));
        }
    }
    for (int i = 0; i < 3; ++i) w.primer_subjects.push_back(unique_name(rng, true, used));
    for (int i = 0; i < 3; ++i) w.primer_objects.push_back(unique_name(rng, true, used));

    // rotate the canonical frame across relations so that every frame's
    // wording appears in some relation's training sentences
    for (int r = 0; r < sizes.n_relations; ++r) {
        Relation rel;
        rel.id = "R" + std::to_string(r);
        rel.noun = unique_name(rng, false, used);
        const size_t canonical = static_cast<size_t>(r) % kFrames.size();
        rel.canonical_template = instantiate_frame(kFrames[canonical], rel.noun);
        for (size_t f = 0; f < kFrames.size(); ++f) {
            if (f == canonical) continue;
            rel.paraphrase_templates.push_back(instantiate_frame(kFrames[f], rel.noun));
        }
        w.relations.push_back(std::move(rel));
    }

    // facts: subjects of a relation share objects in groups of >= 2
    std::unordered_map<std::string, int> object_index;
    for (int o = 0; o < sizes.n_objects; ++o) object_index[w.objects[static_cast<size_t>(o)]] = o;
    const int groups = std::max(1, std::min(sizes.n_objects, sizes.subjects_per_relation / 2));
    for (int r = 0; r < sizes.n_relations; ++r) {
        std::vector<size_t> object_order(static_cast<size_t>(sizes.n_objects));
        for (size_t i = 0; i < object_order.size(); ++i) object_order[i] = i;
        rng.shuffle(object_order);
        for (int s = 0; s < sizes.subjects_per_relation; ++s) {
            const auto& subject =
                w.subjects[static_cast<size_t>(r) * sizes.subjects_per_relation + s];
            const auto& object = w.objects[object_order[static_cast<size_t>(s % groups)]];
            w.facts.push_back({subject, "R" + std::to_string(r), object});
        }
    }

    // cases: one per fact whose (relation, object) group has another subject
    std::unordered_map<std::string, std::vector<std::string>> group; // rel|obj -> subjects
    for (const auto& f : w.facts) group[f.relation_id + "|" + f.object].push_back(f.subject);

    int64_t case_id = 0;
    for (const auto& f : w.facts) {
        const auto& members = group[f.relation_id + "|" + f.object];
        if (members.size() < 2) continue;
        const Relation& rel = w.relation(f.relation_id);

        CaseRecord c;
        c.case_id = case_id++;
        c.requested_rewrite.prompt_template = rel.canonical_template;
        c.requested_rewrite.subject = f.subject;
        c.requested_rewrite.target_true = f.object;
        c.requested_rewrite.relation_id = f.relation_id;
        c.requested_rewrite.target_true_id =
            "O" + std::to_string(object_index.at(f.object));
        // counterfactual target: any other object
        for (;;) {
            const auto& cand = w.objects[rng.below(w.objects.size())];
            if (cand != f.object) {
                c.requested_rewrite.target_new = cand;
                c.requested_rewrite.target_new_id = "O" + std::to_string(object_index.at(cand));
                break;
            }
        }

        for (size_t pi = 0; pi < 2 && pi < rel.paraphrase_templates.size(); ++pi) {
            c.paraphrase_prompts.push_back(fill_template(rel.paraphrase_templates[pi], f.subject));
        }
        std::vector<std::string> prompts;
        for (const auto& neighbor : members) {
            if (neighbor == f.subject) continue;
            for (const auto& tmpl : rel.paraphrase_templates) {
                prompts.push_back(fill_template(tmpl, neighbor));
            }
        }
        if (static_cast<int>(prompts.size()) > opts.max_neighborhood_prompts) {
            rng.shuffle(prompts);
            prompts.resize(static_cast<size_t>(opts.max_neighborhood_prompts));
        }
        c.neighborhood_prompts = std::move(prompts);
        c.raw = case_to_raw(c);
        w.cases.push_back(std::move(c));
    }

    // corpus: canonical fact sentences plus paraphrase-frame primer lines
    // about held-out entities, shuffled and packed into training lines
    std::vector<std::string> sentences;
    for (const auto& f : w.facts) {
        const Relation& rel = w.relation(f.relation_id);
        const std::string line = fill_template(rel.canonical_template, f.subject) + " " + f.object + ".";
        for (int k = 0; k < opts.fact_reps; ++k) sentences.push_back(line);
    }
    size_t primer_ix = 0;
    for (const auto& rel : w.relations) {
        for (const auto& tmpl : rel.paraphrase_templates) {
            for (int k = 0; k < opts.primer_reps; ++k) {
                const auto& ps = w.primer_subjects[primer_ix % w.primer_subjects.size()];
                const auto& po = w.primer_objects[(primer_ix / w.primer_subjects.size()) %
                                                  w.primer_objects.size()];
                ++primer_ix;
                sentences.push_back(fill_template(tmpl, ps) + " " + po + ".");
            }
        }
    }
    rng.shuffle(sentences);

    std::string line;
    int line_units = 1; // BOS
    for (const auto& s : sentences) {
        const int units = static_cast<int>(split_units(s, TokenScheme::word_punct).size());
        if (!line.empty() && line_units + units > opts.max_line_units) {
            w.corpus.push_back(line);
            line.clear();
            line_units = 1;
        }
        if (!line.empty()) line += ' ';
        line += s;
        line_units += units;
    }
    if (!line.empty()) w.corpus.push_back(line);

    validate_world(w);
    return w;
}

void validate_world(const FactWorld& world) {
    std::set<std::pair<std::string, std::string>> subject_facts; // (subject|rel, obj)
    std::unordered_map<std::string, std::vector<Fact>> by_rel_obj;
    for (const auto& f : world.facts) {
        subject_facts.insert({f.subject + "|" + f.relation_id, f.object});
        by_rel_obj[f.relation_id + "|" + f.object].push_back(f);
    }

    for (const auto& c : world.cases) {
        c.requested_rewrite.validate();
        const auto& rr = c.requested_rewrite;
        if (!subject_facts.contains({rr.subject + "|" + rr.relation_id, rr.target_true})) {
            throw ValidationError("case " + std::to_string(c.case_id) +
                                  ": rewrite does not match a true fact");
        }
        if (static_cast<int>(c.neighborhood_prompts.size()) < 5) {
            throw ValidationError("case " + std::to_string(c.case_id) +
                                  ": fewer than 5 neighborhood prompts");
        }
        const Relation& rel = world.relation(rr.relation_id);
        for (const auto& prompt : c.neighborhood_prompts) {
            bool ok = false;
            for (const auto& nf : by_rel_obj[rr.relation_id + "|" + rr.target_true]) {
                if (nf.subject == rr.subject) continue;
                for (const auto& tmpl : rel.paraphrase_templates) {
                    if (fill_template(tmpl, nf.subject) == prompt) {
                        ok = true;
                        break;
                    }
                }
                if (ok) break;
            }
            if (!ok) {
                throw ValidationError("case " + std::to_string(c.case_id) +
                                      ": neighborhood prompt not derived from a shared fact: " +
                                      prompt);
            }
        }
    }
}

std::string world_to_json(const FactWorld& world) {
    jsonio::ojson j;
    j["format"] = "factworld-v1";
    j["seed"] = world.seed;
    j["sizes"] = {{"n_relations", world.sizes.n_relations},
                  {"subjects_per_relation", world.sizes.subjects_per_relation},
                  {"n_objects", world.sizes.n_objects}};
    j["options"] = {{"fact_reps", world.options.fact_reps},
                    {"primer_reps", world.options.primer_reps},
                    {"max_line_units", world.options.max_line_units},
                    {"max_neighborhood_prompts", world.options.max_neighborhood_prompts}};
    jsonio::ojson rels = jsonio::ojson::array();
    for (const auto& r : world.relations) {
        rels.push_back({{"id", r.id},
                        {"noun", r.noun},
                        {"canonical_template", r.canonical_template},
                        {"paraphrase_templates", r.paraphrase_templates}});
    }
    j["relations"] = std::move(rels);
    j["subjects"] = world.subjects;
    j["objects"] = world.objects;
    j["primer_subjects"] = world.primer_subjects;
    j["primer_objects"] = world.primer_objects;
    jsonio::ojson facts = jsonio::ojson::array();
    for (const auto& f : world.facts) {
        facts.push_back({{"subject", f.subject}, {"relation_id", f.relation_id}, {"object", f.object}});
    }
    j["facts"] = std::move(facts);
    jsonio::ojson cases = jsonio::ojson::array();
    for (const auto& c : world.cases) cases.push_back(c.raw);
    j["cases"] = std::move(cases);
    j["corpus"] = world.corpus;
    j["validated_cases"] = world.cases.size();
    return jsonio::dump(j);
}

FactWorld world_from_json(std::string_view text) {
    const auto j = jsonio::parse(text);
    try {
        if (!j.contains("format") || j.at("format").get<std::string>() != "factworld-v1") {
            throw FormatError("not a factworld-v1 document");
        }
        FactWorld w;
        w.seed = j.at("seed").get<uint64_t>();
        w.sizes.n_relations = j.at("sizes").at("n_relations").get<int>();
        w.sizes.subjects_per_relation = j.at("sizes").at("subjects_per_relation").get<int>();
        w.sizes.n_objects = j.at("sizes").at("n_objects").get<int>();
        w.options.fact_reps = j.at("options").at("fact_reps").get<int>();
        w.options.primer_reps = j.at("options").at("primer_reps").get<int>();
        w.options.max_line_units = j.at("options").at("max_line_units").get<int>();
        w.options.max_neighborhood_prompts = j.at("options").at("max_neighborhood_prompts").get<int>();
        for (const auto& r : j.at("relations")) {
            Relation rel;
            rel.id = r.at("id").get<std::string>();
            rel.noun = r.at("noun").get<std::string>();
            rel.canonical_template = r.at("canonical_template").get<std::string>();
            rel.paraphrase_templates = r.at("paraphrase_templates").get<std::vector<std::string>>();
            w.relations.push_back(std::move(rel));
        }
        w.subjects = j.at("subjects").get<std::vector<std::string>>();
        w.objects = j.at("objects").get<std::vector<std::string>>();
        w.primer_subjects = j.at("primer_subjects").get<std::vector<std::string>>();
        w.primer_objects = j.at("primer_objects").get<std::vector<std::string>>();
        for (const auto& f : j.at("facts")) {
            w.facts.push_back({f.at("subject").get<std::string>(),
                               f.at("relation_id").get<std::string>(),
                               f.at("object").get<std::string>()});
        }
        int64_t index = 0;
        for (const auto& c : j.at("cases")) {
            w.cases.push_back(case_from_json(c, index));
            ++index;
        }
        w.corpus = j.at("corpus").get<std::vector<std::string>>();
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad factworld document: ") + e.what());
    }
}

double fact_recall(const Checkpoint& ckpt, const FactWorld& world) {
    if (world.facts.empty()) return 0.0;
    int correct = 0;
    for (const auto& f : world.facts) {
        const Relation& rel = world.relation(f.relation_id);
        const auto tokens = ckpt.tokenizer.encode(fill_template(rel.canonical_template, f.subject));
        const auto dist = forward(ckpt, tokens);
        const int want = ckpt.tokenizer.first_token(" " + f.object);
        int argmax = 0;
        for (size_t i = 1; i < dist.p.size(); ++i) {
            if (dist.p[i] > dist.p[static_cast<size_t>(argmax)]) argmax = static_cast<int>(i);
        }
        if (argmax == want) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(world.facts.size());
}

std::vector<std::vector<int>> encode_corpus(const Tokenizer& tok,
                                            const std::vector<std::string>& lines) {
    std::vector<std::vector<int>> out;
    out.reserve(lines.size());
    for (const auto& line : lines) out.push_back(tok.encode(line));
    return out;
}

} // namespace edbench
