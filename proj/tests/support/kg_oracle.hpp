#pragma once

// Linear-scan reference for the KG store. Deliberately index-free: every
// query walks the full fact list, so it can disagree with the indexed store
// only if the store is wrong.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "r2kg/fact.hpp"
#include "r2kg/kg_store.hpp"

namespace testsupport {

inline std::vector<std::string> oracle_relations(const r2kg::KnowledgeGraph& g,
                                                 const std::string& entity) {
    std::set<std::string> names;
    for (const r2kg::Fact& f : g.facts()) {
        if (f.head == entity) names.insert(f.relation);
        if (f.tail == entity) names.insert("~" + f.relation);
    }
    return {names.begin(), names.end()};
}

inline std::vector<r2kg::Fact> oracle_explore(const r2kg::KnowledgeGraph& g,
                                              const std::string& entity,
                                              const std::vector<std::string>& relations) {
    std::vector<r2kg::Fact> out;
    std::vector<std::string> seen_rels;
    for (const std::string& rel : relations) {
        if (std::find(seen_rels.begin(), seen_rels.end(), rel) != seen_rels.end()) continue;
        seen_rels.push_back(rel);
        const bool inverse = !rel.empty() && rel.front() == '~';
        const std::string stored = inverse ? rel.substr(1) : rel;
        for (const r2kg::Fact& f : g.facts()) {
            if (!inverse && f.head == entity && f.relation == stored) {
                out.push_back(f);
            } else if (inverse && f.tail == entity && f.relation == stored) {
                out.push_back(r2kg::Fact{entity, "~" + f.relation, f.head, f.start_time,
                                         f.end_time});
            }
        }
    }
    return out;
}

inline std::vector<std::string> all_entities(const r2kg::KnowledgeGraph& g) {
    std::set<std::string> entities;
    for (const r2kg::Fact& f : g.facts()) {
        entities.insert(f.head);
        entities.insert(f.tail);
    }
    return {entities.begin(), entities.end()};
}

} // namespace testsupport
