#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edbench/counterfact.hpp"
#include "edbench/model.hpp"

namespace edbench {

// Synthetic closed world of (subject, relation, object) facts with enough
// structure for editing experiments: relations verbalize through one
// canonical statement frame used in the training corpus plus five
// paraphrase frames used for neighborhood prompts. Subjects sharing a
// relation and object form each other's neighborhoods.

struct WorldSizes {
    int n_relations = 6;
    int subjects_per_relation = 12;
    int n_objects = 10;
};

struct GenOptions {
    int fact_reps = 8;    // canonical verbalizations per fact in the corpus
    int primer_reps = 4;  // repetitions of each paraphrase-frame primer line
    int max_line_units = 56;
    int max_neighborhood_prompts = 10;
};

struct Relation {
    std::string id;
    std::string noun;
    std::string canonical_template;                // "{}" marks the subject
    std::vector<std::string> paraphrase_templates; // reserved for prompts
};

struct Fact {
    std::string subject;
    std::string relation_id;
    std::string object;
};

struct FactWorld {
    uint64_t seed = 0;
    WorldSizes sizes;
    GenOptions options;
    std::vector<Relation> relations;
    std::vector<std::string> subjects;
    std::vector<std::string> objects;
    std::vector<std::string> primer_subjects; // corpus-only entities that
    std::vector<std::string> primer_objects;  // demonstrate paraphrase frames
    std::vector<Fact> facts;
    std::vector<CaseRecord> cases;
    std::vector<std::string> corpus; // packed multi-sentence training lines

    const Relation& relation(const std::string& id) const;
};

// Deterministic in (seed, sizes, options). Throws ValidationError on
// infeasible sizes (need >= 2 subjects per relation and >= 2 objects).
FactWorld gen_world(uint64_t seed, const WorldSizes& sizes, const GenOptions& opts = {});

// Exhaustive consistency check: every neighborhood prompt must be a
// paraphrase frame filled with a different subject that shares the case's
// (relation, true object). Throws ValidationError with details.
void validate_world(const FactWorld& world);

std::string world_to_json(const FactWorld& world);
FactWorld world_from_json(std::string_view text);

// Fraction of facts whose canonical prompt makes the first token of the
// true object the argmax next token. Used as the training fixture gate.
double fact_recall(const Checkpoint& ckpt, const FactWorld& world);

std::vector<std::vector<int>> encode_corpus(const Tokenizer& tok,
                                            const std::vector<std::string>& lines);

} // namespace edbench
