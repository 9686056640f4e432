#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "r2kg/fact.hpp"
#include "r2kg/text.hpp"

namespace r2kg {

// --- Operator call language ---------------------------------------------
//
// One helper call per line, any number of lines per turn:
//
//   GetRelation(<entity>)
//   ExploreKG(<entity>, [<relation>, <relation>, ...])
//   Verification()
//
// Entities may contain anything except parentheses (and, for ExploreKG, the
// opening bracket); relations may carry a leading '~'. Lines that do not
// match are treated as reasoning prose and skipped, as long as at least one
// line parses.

struct GetRelationCall {
    std::string entity;
    bool operator==(const GetRelationCall&) const = default;
};

struct ExploreCall {
    std::string entity;
    std::vector<std::string> relations; // non-empty, duplicate-free, order kept
    bool operator==(const ExploreCall&) const = default;
};

struct VerificationCall {
    bool operator==(const VerificationCall&) const = default;
};

using AgentAction = std::variant<GetRelationCall, ExploreCall, VerificationCall>;

struct ParseFailure {
    std::string raw_text;
    std::string diagnostic;
};

using OperatorTurn = std::variant<std::vector<AgentAction>, ParseFailure>;

namespace detail {

inline bool valid_entity(const std::string& e) {
    return !e.empty() && e.find('(') == std::string::npos && e.find(')') == std::string::npos;
}

inline std::optional<AgentAction> parse_get_relation(std::string_view args_and_rest) {
    auto close = args_and_rest.find(')');
    if (close == std::string_view::npos) return std::nullopt;
    std::string entity = text::trim(args_and_rest.substr(0, close));
    if (!valid_entity(entity)) return std::nullopt;
    return AgentAction{GetRelationCall{std::move(entity)}};
}

inline std::optional<AgentAction> parse_explore(std::string_view args_and_rest) {
    auto open_bracket = args_and_rest.find('[');
    if (open_bracket == std::string_view::npos) return std::nullopt;
    std::string entity = text::trim(args_and_rest.substr(0, open_bracket));
    if (entity.empty() || entity.back() != ',') return std::nullopt;
    entity = text::trim(entity.substr(0, entity.size() - 1));
    if (!valid_entity(entity) || entity.find('[') != std::string::npos) return std::nullopt;

    auto close_bracket = args_and_rest.find(']', open_bracket);
    if (close_bracket == std::string_view::npos) return std::nullopt;
    std::string_view list = args_and_rest.substr(open_bracket + 1, close_bracket - open_bracket - 1);

    std::vector<std::string> relations;
    for (const auto& part : text::split(list, ',')) {
        std::string rel = text::trim(part);
        if (rel.empty()) continue;
        if (std::find(relations.begin(), relations.end(), rel) == relations.end()) {
            relations.push_back(std::move(rel));
        }
    }
    if (relations.empty()) return std::nullopt;

    std::string after = text::trim(args_and_rest.substr(close_bracket + 1));
    if (after.empty() || after.front() != ')') return std::nullopt;
    return AgentAction{ExploreCall{std::move(entity), std::move(relations)}};
}

inline std::optional<AgentAction> parse_verification(std::string_view args_and_rest) {
    auto close = args_and_rest.find(')');
    if (close == std::string_view::npos) return std::nullopt;
    if (!text::trim(args_and_rest.substr(0, close)).empty()) return std::nullopt;
    return AgentAction{VerificationCall{}};
}

// First helper-call occurrence in the line wins; the rest of the line is prose.
inline std::optional<AgentAction> parse_call_line(std::string_view line) {
    struct Head {
        std::string_view name;
        std::optional<AgentAction> (*parse)(std::string_view);
    };
    static constexpr Head heads[] = {
        {"GetRelation(", &parse_get_relation},
        {"ExploreKG(", &parse_explore},
        {"Verification(", &parse_verification},
    };
    std::size_t best_pos = std::string_view::npos;
    const Head* best = nullptr;
    for (const Head& h : heads) {
        auto pos = line.find(h.name);
        if (pos != std::string_view::npos && pos < best_pos) {
            best_pos = pos;
            best = &h;
        }
    }
    if (best == nullptr) return std::nullopt;
    return best->parse(line.substr(best_pos + best->name.size()));
}

} // namespace detail

inline OperatorTurn parse_operator_turn(const std::string& turn_text) {
    std::vector<AgentAction> actions;
    for (const auto& line : text::split_lines(turn_text)) {
        if (auto action = detail::parse_call_line(line)) {
            actions.push_back(std::move(*action));
        }
    }
    if (actions.empty()) {
        return ParseFailure{turn_text,
                            "no helper call found; expected GetRelation(<entity>), "
                            "ExploreKG(<entity>, [<relations>]) or Verification(), one per line"};
    }
    return actions;
}

// The exact text the grammar guarantees to re-parse; prompt examples use it.
inline std::string canonical_render(const AgentAction& action) {
    return std::visit(
        [](const auto& call) -> std::string {
            using T = std::decay_t<decltype(call)>;
            if constexpr (std::is_same_v<T, GetRelationCall>) {
                return "GetRelation(" + call.entity + ")";
            } else if constexpr (std::is_same_v<T, ExploreCall>) {
                return "ExploreKG(" + call.entity + ", [" + text::join(call.relations, ", ") + "])";
            } else {
                return "Verification()";
            }
        },
        action);
}

// --- Supervisor verdict language ------------------------------------------
//
//   ANSWER: label | label | ...     (one line)
//   FEEDBACK: free-form guidance    (rest of the message)
//
// ANSWER wins when both markers appear.

struct Answer {
    std::vector<std::string> labels; // non-empty, each trimmed and non-empty
    bool operator==(const Answer&) const = default;
};

struct Feedback {
    std::string guidance;
    bool operator==(const Feedback&) const = default;
};

using VerificationOutcome = std::variant<Answer, Feedback>;
using SupervisorTurn = std::variant<Answer, Feedback, ParseFailure>;

inline SupervisorTurn parse_supervisor_turn(const std::string& turn_text) {
    constexpr std::string_view answer_marker = "ANSWER:";
    constexpr std::string_view feedback_marker = "FEEDBACK:";

    const std::vector<std::string> lines = text::split_lines(turn_text);
    for (const auto& raw_line : lines) {
        std::string line = text::trim(raw_line);
        if (!line.starts_with(answer_marker)) continue;
        std::vector<std::string> labels;
        for (const auto& part : text::split(line.substr(answer_marker.size()), '|')) {
            std::string label = text::trim(part);
            if (!label.empty()) labels.push_back(std::move(label));
        }
        if (labels.empty()) {
            return ParseFailure{turn_text, "ANSWER line carries no labels"};
        }
        return Answer{std::move(labels)};
    }

    auto marker_pos = turn_text.find(feedback_marker);
    if (marker_pos != std::string::npos) {
        std::string guidance = text::trim(turn_text.substr(marker_pos + feedback_marker.size()));
        if (guidance.empty()) {
            return ParseFailure{turn_text, "FEEDBACK marker carries no guidance"};
        }
        return Feedback{std::move(guidance)};
    }
    return ParseFailure{turn_text, "neither ANSWER: nor FEEDBACK: marker present"};
}

// --- Server reply rendering -------------------------------------------------

struct RelationResult {
    std::vector<std::string> relations;
};

struct TripleResult {
    std::vector<Fact> facts;
};

struct VerificationAck {};

struct Diagnostic {
    std::string message;
};

using ActionResult = std::variant<RelationResult, TripleResult, VerificationAck, Diagnostic>;

inline std::string render_format_error(const std::string& diagnostic) {
    return "FORMAT ERROR: " + diagnostic;
}

namespace detail {

inline std::string entity_of(const AgentAction& action) {
    if (const auto* g = std::get_if<GetRelationCall>(&action)) return g->entity;
    if (const auto* x = std::get_if<ExploreCall>(&action)) return x->entity;
    return {};
}

inline std::string render_section(const AgentAction& action, const ActionResult& result) {
    if (const auto* diag = std::get_if<Diagnostic>(&result)) {
        return render_format_error(diag->message);
    }
    if (std::holds_alternative<VerificationAck>(result)) {
        return "Verification requested.";
    }
    const std::string entity = entity_of(action);
    if (const auto* rels = std::get_if<RelationResult>(&result)) {
        if (rels->relations.empty()) return "Relations(" + entity + "): NO RESULT";
        std::vector<std::string> sorted = rels->relations;
        std::sort(sorted.begin(), sorted.end());
        return "Relations(" + entity + "): " + text::join(sorted, ", ");
    }
    const auto& facts = std::get<TripleResult>(result).facts;
    if (facts.empty()) return "Triples(" + entity + "): NO RESULT";
    std::string out = "Triples(" + entity + "):";
    for (const Fact& f : facts) out += "\n" + f.to_bracket_string();
    return out;
}

} // namespace detail

// Deterministic text block, one section per action in request order.
inline std::string render_server_reply(
    const std::vector<std::pair<AgentAction, ActionResult>>& results) {
    std::vector<std::string> sections;
    sections.reserve(results.size());
    for (const auto& [action, result] : results) {
        sections.push_back(detail::render_section(action, result));
    }
    return text::join(sections, "\n");
}

} // namespace r2kg
