#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "r2kg/kg_store.hpp"
#include "r2kg/prompt.hpp"

namespace testsupport {

inline std::string fixture_path(const std::string& rel) {
    return std::string(R2KG_SOURCE_DIR) + "/fixtures/" + rel;
}

inline std::string prompt_path(const std::string& rel) {
    return std::string(R2KG_SOURCE_DIR) + "/prompts/" + rel;
}

inline r2kg::KnowledgeGraph graph_from_string(const std::string& tsv,
                                              r2kg::GraphFormat format =
                                                  r2kg::GraphFormat::triple_tsv) {
    std::istringstream in(tsv);
    return r2kg::load_graph(in, format);
}

inline r2kg::KnowledgeGraph load_fixture_graph(const std::string& rel, r2kg::GraphFormat format) {
    std::ifstream in(fixture_path(rel), std::ios::binary);
    if (!in) throw std::runtime_error("missing fixture graph: " + rel);
    return r2kg::load_graph(in, format);
}

// Tiny in-memory prompt set for tests that exercise the loop, not the wording.
inline r2kg::PromptSet test_prompt_set(std::size_t few_shot_count = 3) {
    r2kg::PromptSet set;
    set.operator_system = {"OPERATOR INSTRUCTIONS\n{{few_shot}}"};
    set.supervisor_system = {"SUPERVISOR INSTRUCTIONS\n{{few_shot}}"};
    set.single_answer_system = {"SINGLE ANSWER INSTRUCTIONS\n{{few_shot}}"};
    set.paraphrase_system = {"PARAPHRASE INTO {{count}} VARIANTS"};
    for (std::size_t i = 0; i < few_shot_count; ++i) {
        set.few_shot_blocks.push_back("fewshot block " + std::to_string(i));
    }
    return set;
}

// Random surface forms stressing the wire grammar: spaces, unicode, tildes in
// relations, commas in entities.
inline std::string random_entity(std::mt19937& rng) {
    static const std::vector<std::string> atoms = {
        "Roberto", "Baggio", "F.C.", "Ünïcode", "서울", "D.C.", "Washington,", "al-Khwarizmi",
        "Łódź", "von", "Neumann", "1909", "Bologna"};
    std::uniform_int_distribution<std::size_t> pick(0, atoms.size() - 1);
    std::uniform_int_distribution<int> len(1, 3);
    std::string out;
    int n = len(rng);
    for (int i = 0; i < n; ++i) {
        if (!out.empty()) out += " ";
        out += atoms[pick(rng)];
    }
    return out;
}

inline std::string random_relation(std::mt19937& rng, bool allow_inverse = true) {
    static const std::vector<std::string> names = {
        "directed_by", "in_language", "member of sports team", "starring", "release_year",
        "écrit_par", "located in"};
    std::uniform_int_distribution<std::size_t> pick(0, names.size() - 1);
    std::string rel = names[pick(rng)];
    if (allow_inverse && std::uniform_int_distribution<int>(0, 3)(rng) == 0) {
        rel = "~" + rel;
    }
    return rel;
}

inline r2kg::KnowledgeGraph random_graph(std::mt19937& rng, std::size_t max_facts,
                                         bool temporal = false) {
    std::uniform_int_distribution<std::size_t> fact_count(1, max_facts);
    std::uniform_int_distribution<int> entity_id(0, 40);
    std::uniform_int_distribution<int> rel_id(0, 7);
    std::uniform_int_distribution<int> year(1900, 2020);
    std::size_t n = fact_count(rng);
    std::ostringstream tsv;
    for (std::size_t i = 0; i < n; ++i) {
        tsv << "entity " << entity_id(rng) << "\trel" << rel_id(rng) << "\tentity "
            << entity_id(rng);
        if (temporal) {
            int a = year(rng), b = year(rng);
            tsv << '\t' << std::min(a, b) << '\t' << std::max(a, b);
        }
        tsv << '\n';
    }
    return graph_from_string(tsv.str(), temporal ? r2kg::GraphFormat::quintuple_tsv
                                                 : r2kg::GraphFormat::triple_tsv);
}

} // namespace testsupport
