#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "r2kg/action.hpp"
#include "r2kg/fact.hpp"
#include "r2kg/kg_store.hpp"
#include "r2kg/text.hpp"

namespace r2kg {

enum class ChatRole { operator_agent, server, supervisor };

inline std::string_view to_string(ChatRole role) {
    switch (role) {
        case ChatRole::operator_agent: return "operator";
        case ChatRole::server: return "server";
        default: return "supervisor";
    }
}

inline ChatRole chat_role_from_string(std::string_view s) {
    if (s == "operator") return ChatRole::operator_agent;
    if (s == "server") return ChatRole::server;
    if (s == "supervisor") return ChatRole::supervisor;
    throw std::invalid_argument("unknown chat role: " + std::string(s));
}

struct ChatEntry {
    ChatRole role;
    std::string text;
    int iteration = 0; // 1-based turn that produced the entry
    bool operator==(const ChatEntry&) const = default;
};

// Everything collected while reasoning over one query: the chat log the
// Operator sees, the evidence stacks the Supervisor audits, and the budget.
// Stacks only grow; revisiting an earlier hop happens through the chat log.
struct SessionState {
    std::string query;
    std::vector<std::string> topic_entities;
    std::vector<std::string> seen_entities;
    std::vector<std::string> relation_stack_order;
    std::unordered_map<std::string, std::set<std::string>> relation_stack;
    std::vector<Fact> fact_stack;
    std::unordered_set<Fact, FactHash> fact_stack_index;
    std::vector<ChatEntry> chat_log;
    int iteration = 0;
    int limit = 1;

    bool has_seen(const std::string& entity) const {
        for (const auto& e : seen_entities) {
            if (e == entity) return true;
        }
        return false;
    }
};

// Evidence handed to the Supervisor: explored facts and entity-wise relation
// lists, both in exploration order.
struct EvidenceSnapshot {
    std::vector<Fact> facts;
    std::vector<std::pair<std::string, std::vector<std::string>>> relations;
};

struct TurnResult {
    std::string reply;
    bool verification_requested = false;
};

inline SessionState new_session(std::string query, const std::vector<std::string>& topic_entities,
                                int limit) {
    if (limit < 1) throw std::invalid_argument("iteration limit must be at least 1");
    if (topic_entities.empty()) throw std::invalid_argument("at least one topic entity required");
    SessionState s;
    s.query = std::move(query);
    s.limit = limit;
    for (const auto& raw : topic_entities) {
        std::string e = text::normalize_surface(raw);
        if (e.empty()) throw std::invalid_argument("topic entity is empty");
        if (!s.has_seen(e)) {
            s.topic_entities.push_back(e);
            s.seen_entities.push_back(std::move(e));
        }
    }
    return s;
}

namespace detail {

inline void merge_relations(SessionState& s, const std::string& entity,
                            const std::vector<std::string>& relations) {
    if (relations.empty()) return;
    auto [it, inserted] = s.relation_stack.try_emplace(entity);
    if (inserted) s.relation_stack_order.push_back(entity);
    it->second.insert(relations.begin(), relations.end());
}

inline void merge_fact(SessionState& s, const Fact& view) {
    if (!s.fact_stack_index.insert(view).second) return;
    s.fact_stack.push_back(view);
    if (!s.has_seen(view.head)) s.seen_entities.push_back(view.head);
    if (!s.has_seen(view.tail)) s.seen_entities.push_back(view.tail);
}

} // namespace detail

// Execute one Operator turn. All actions run in request order; the whole turn
// costs one iteration no matter how many parallel calls it carries. Bad calls
// never throw out of here: the diagnostic goes into the reply so the Operator
// can self-correct on the next turn.
inline TurnResult apply_actions(SessionState& s, const KnowledgeGraph& g,
                                const std::string& operator_text,
                                const std::vector<AgentAction>& actions) {
    if (s.iteration >= s.limit) throw std::logic_error("iteration budget already exhausted");

    TurnResult result;
    std::vector<std::pair<AgentAction, ActionResult>> sections;
    sections.reserve(actions.size());

    for (const AgentAction& action : actions) {
        if (const auto* get = std::get_if<GetRelationCall>(&action)) {
            std::vector<std::string> relations = g.relations_of(get->entity);
            detail::merge_relations(s, text::normalize_surface(get->entity), relations);
            sections.emplace_back(action, RelationResult{std::move(relations)});
        } else if (const auto* exp = std::get_if<ExploreCall>(&action)) {
            try {
                std::vector<Fact> views = g.explore(exp->entity, exp->relations);
                for (const Fact& v : views) detail::merge_fact(s, v);
                sections.emplace_back(action, TripleResult{std::move(views)});
            } catch (const std::invalid_argument& e) {
                sections.emplace_back(action, Diagnostic{e.what()});
            }
        } else {
            result.verification_requested = true;
            sections.emplace_back(action, VerificationAck{});
        }
    }

    s.iteration += 1;
    result.reply = render_server_reply(sections);
    s.chat_log.push_back({ChatRole::operator_agent, operator_text, s.iteration});
    s.chat_log.push_back({ChatRole::server, result.reply, s.iteration});
    return result;
}

// A turn that failed to parse still burns budget; the Operator gets the
// diagnostic echoed back and may retry within the remaining iterations.
inline TurnResult apply_parse_failure(SessionState& s, const ParseFailure& failure) {
    if (s.iteration >= s.limit) throw std::logic_error("iteration budget already exhausted");
    s.iteration += 1;
    TurnResult result{render_format_error(failure.diagnostic), false};
    s.chat_log.push_back({ChatRole::operator_agent, failure.raw_text, s.iteration});
    s.chat_log.push_back({ChatRole::server, result.reply, s.iteration});
    return result;
}

inline void append_supervisor_entry(SessionState& s, const std::string& message) {
    s.chat_log.push_back({ChatRole::supervisor, message, s.iteration});
}

inline EvidenceSnapshot snapshot_evidence(const SessionState& s) {
    EvidenceSnapshot snap;
    snap.facts = s.fact_stack;
    snap.relations.reserve(s.relation_stack_order.size());
    for (const auto& entity : s.relation_stack_order) {
        const auto& rels = s.relation_stack.at(entity);
        snap.relations.emplace_back(entity, std::vector<std::string>(rels.begin(), rels.end()));
    }
    return snap;
}

// --- Transcript persistence: JSONL, one {role, text, iteration} per entry ---

inline std::string transcript_to_jsonl(const std::vector<ChatEntry>& log,
                                       std::optional<int> trial = std::nullopt) {
    std::string out;
    for (const ChatEntry& entry : log) {
        nlohmann::ordered_json j;
        if (trial) j["trial"] = *trial;
        j["role"] = to_string(entry.role);
        j["text"] = entry.text;
        j["iteration"] = entry.iteration;
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<ChatEntry> transcript_from_jsonl(const std::string& jsonl) {
    std::vector<ChatEntry> log;
    for (const auto& line : text::split_lines(jsonl)) {
        if (text::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        log.push_back({chat_role_from_string(j.at("role").get<std::string>()),
                       j.at("text").get<std::string>(), j.at("iteration").get<int>()});
    }
    return log;
}

} // namespace r2kg
