#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "r2kg/fact.hpp"
#include "r2kg/text.hpp"

namespace r2kg {

enum class GraphFormat { triple_tsv, quintuple_tsv };

inline std::string_view to_string(GraphFormat f) {
    return f == GraphFormat::triple_tsv ? "triple-tsv" : "quintuple-tsv";
}

inline GraphFormat graph_format_from_string(std::string_view s) {
    if (s == "triple-tsv") return GraphFormat::triple_tsv;
    if (s == "quintuple-tsv") return GraphFormat::quintuple_tsv;
    throw std::invalid_argument("unknown graph format: " + std::string(s));
}

class LoadError : public std::runtime_error {
public:
    LoadError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Immutable indexed KG snapshot. Built once by load_graph, then shared freely
// across sessions; every member is const after construction.
class KnowledgeGraph {
public:
    const std::vector<Fact>& facts() const { return facts_; }
    GraphFormat format() const { return format_; }
    std::size_t size() const { return facts_.size(); }

    bool has_entity(std::string_view raw) const {
        std::string e = text::normalize_surface(raw);
        return fwd_rels_.count(e) > 0 || rev_rels_.count(e) > 0;
    }

    // All relation names at `raw`: outgoing verbatim, incoming prefixed with
    // the inverse marker. Sorted; unknown entity yields an empty list.
    std::vector<std::string> relations_of(std::string_view raw) const {
        std::string e = text::normalize_surface(raw);
        std::set<std::string> names;
        if (auto it = fwd_rels_.find(e); it != fwd_rels_.end()) {
            names.insert(it->second.begin(), it->second.end());
        }
        if (auto it = rev_rels_.find(e); it != rev_rels_.end()) {
            for (const auto& r : it->second) names.insert(kInverseMarker + r);
        }
        return {names.begin(), names.end()};
    }

    // Fact views at `raw` along the given relations, stored order. A name with
    // the inverse marker walks incoming edges and renders them head-side-out:
    // (e, ~r, stored head). Time fields carry through untouched.
    std::vector<Fact> explore(std::string_view raw, std::span<const std::string> relations) const {
        if (relations.empty()) {
            throw std::invalid_argument("ExploreKG requires at least one relation");
        }
        std::string e = text::normalize_surface(raw);
        std::vector<Fact> views;
        std::unordered_set<std::string> done;
        for (const auto& rel_raw : relations) {
            std::string rel = text::normalize_surface(rel_raw);
            if (rel.empty() || !done.insert(rel).second) continue;
            bool inverse = rel.front() == kInverseMarker;
            std::string stored_rel = inverse ? text::trim(rel.substr(1)) : rel;
            auto it = pair_index_.find(pair_key(e, stored_rel, inverse));
            if (it == pair_index_.end()) continue;
            for (std::size_t idx : it->second) {
                const Fact& f = facts_[idx];
                if (inverse) {
                    views.push_back(Fact{e, std::string(1, kInverseMarker) + f.relation, f.head,
                                         f.start_time, f.end_time});
                } else {
                    views.push_back(f);
                }
            }
        }
        return views;
    }

    friend KnowledgeGraph load_graph(std::istream& in, GraphFormat format);

private:
    static std::string pair_key(const std::string& entity, const std::string& relation,
                                bool inverse) {
        std::string key = inverse ? "<" : ">";
        key += entity;
        key += '\x1f';
        key += relation;
        return key;
    }

    void index_fact(std::size_t idx) {
        const Fact& f = facts_[idx];
        fwd_rels_[f.head].insert(f.relation);
        rev_rels_[f.tail].insert(f.relation);
        pair_index_[pair_key(f.head, f.relation, false)].push_back(idx);
        pair_index_[pair_key(f.tail, f.relation, true)].push_back(idx);
    }

    std::vector<Fact> facts_;
    GraphFormat format_ = GraphFormat::triple_tsv;
    std::unordered_map<std::string, std::set<std::string>> fwd_rels_;
    std::unordered_map<std::string, std::set<std::string>> rev_rels_;
    std::unordered_map<std::string, std::vector<std::size_t>> pair_index_;
};

// TSV loader: head<TAB>relation<TAB>tail[<TAB>start<TAB>end], UTF-8, one fact
// per line, '#' lines are comments, duplicates collapse. Tabs cannot occur
// inside fields, so a wrong field count is the only framing failure mode.
inline KnowledgeGraph load_graph(std::istream& in, GraphFormat format) {
    const std::size_t expected_fields = format == GraphFormat::triple_tsv ? 3 : 5;
    KnowledgeGraph g;
    g.format_ = format;
    std::unordered_set<Fact, FactHash> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;

        std::vector<std::string> fields = text::split(line, '\t');
        if (fields.size() != expected_fields) {
            throw LoadError(line_no, "expected " + std::to_string(expected_fields) +
                                         " tab-separated fields, got " +
                                         std::to_string(fields.size()));
        }

        Fact f;
        f.head = text::normalize_surface(fields[0]);
        f.relation = text::normalize_surface(fields[1]);
        f.tail = text::normalize_surface(fields[2]);
        if (f.head.empty() || f.relation.empty() || f.tail.empty()) {
            throw LoadError(line_no, "empty field");
        }
        if (f.relation.front() == kInverseMarker) {
            throw LoadError(line_no, "relation may not start with the reserved inverse marker '~'");
        }
        if (expected_fields == 5) {
            auto parse_year = [&](const std::string& raw, const char* which) {
                std::string t = text::trim(raw);
                int value = 0;
                auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
                if (ec != std::errc() || ptr != t.data() + t.size()) {
                    throw LoadError(line_no, std::string(which) + " time is not an integer: '" +
                                                 raw + "'");
                }
                return value;
            };
            f.start_time = parse_year(fields[3], "start");
            f.end_time = parse_year(fields[4], "end");
            if (*f.start_time > *f.end_time) {
                throw LoadError(line_no, "start time after end time");
            }
        }
        if (seen.insert(f).second) {
            g.facts_.push_back(std::move(f));
            g.index_fact(g.facts_.size() - 1);
        }
    }
    return g;
}

inline void save_graph(std::ostream& out, const KnowledgeGraph& g) {
    for (const Fact& f : g.facts()) {
        out << f.head << '\t' << f.relation << '\t' << f.tail;
        if (f.is_temporal()) {
            out << '\t' << *f.start_time << '\t' << *f.end_time;
        }
        out << '\n';
    }
}

} // namespace r2kg
