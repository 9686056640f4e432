#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "r2kg/gateway.hpp"
#include "r2kg/session.hpp"
#include "r2kg/text.hpp"

namespace r2kg {

// Text template with {{name}} slots. Unresolved slots are config errors.
struct PromptTemplate {
    std::string text;

    static PromptTemplate from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open prompt template: " + path);
        std::stringstream buf;
        buf << in.rdbuf();
        return PromptTemplate{buf.str()};
    }

    std::string render(const std::map<std::string, std::string>& slots) const {
        std::string out;
        out.reserve(text.size());
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto open = text.find("{{", pos);
            if (open == std::string::npos) {
                out.append(text, pos, std::string::npos);
                break;
            }
            auto close = text.find("}}", open + 2);
            if (close == std::string::npos) {
                out.append(text, pos, std::string::npos);
                break;
            }
            out.append(text, pos, open - pos);
            std::string name = text.substr(open + 2, close - open - 2);
            auto it = slots.find(name);
            if (it == slots.end()) {
                throw std::invalid_argument("unresolved prompt slot: " + name);
            }
            out += it->second;
            pos = close + 2;
        }
        return out;
    }
};

// The templates one experiment runs with. Porting to a new dataset means
// swapping few-shot blocks; everything else stays fixed.
struct PromptSet {
    PromptTemplate operator_system;      // slot: few_shot
    PromptTemplate supervisor_system;    // slot: few_shot
    PromptTemplate single_answer_system; // slot: few_shot
    PromptTemplate paraphrase_system;    // slot: count
    std::vector<std::string> few_shot_blocks; // >= 1

    void validate() const {
        if (few_shot_blocks.empty()) {
            throw std::invalid_argument("prompt set needs at least one few-shot block");
        }
    }
};

struct PromptSetPaths {
    std::string operator_system;
    std::string supervisor_system;
    std::string single_answer_system;
    std::string paraphrase_system;
    std::vector<std::string> few_shot_blocks;
};

inline PromptSet load_prompt_set(const PromptSetPaths& paths) {
    PromptSet set;
    set.operator_system = PromptTemplate::from_file(paths.operator_system);
    set.supervisor_system = PromptTemplate::from_file(paths.supervisor_system);
    set.single_answer_system = PromptTemplate::from_file(paths.single_answer_system);
    set.paraphrase_system = PromptTemplate::from_file(paths.paraphrase_system);
    for (const auto& p : paths.few_shot_blocks) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open few-shot block: " + p);
        std::stringstream buf;
        buf << in.rdbuf();
        set.few_shot_blocks.push_back(buf.str());
    }
    set.validate();
    return set;
}

// --- Message assembly -------------------------------------------------------

inline std::string render_evidence_block(const std::string& query, const EvidenceSnapshot& ev) {
    std::string out = "Question: " + query + "\n";
    out += "Collected triples:\n";
    if (ev.facts.empty()) {
        out += "(none)\n";
    } else {
        for (const Fact& f : ev.facts) out += f.to_bracket_string() + "\n";
    }
    out += "Relation lists:\n";
    if (ev.relations.empty()) {
        out += "(none)\n";
    } else {
        for (const auto& [entity, rels] : ev.relations) {
            out += entity + ": " + text::join(rels, ", ") + "\n";
        }
    }
    return out;
}

inline std::string render_task_opening(const SessionState& s) {
    return "Question: " + s.query + "\nTopic entities: [" + text::join(s.topic_entities, ", ") +
           "]";
}

// Chat log -> chat-completion messages. Operator entries replay as assistant
// turns; server output and supervisor feedback reach the Operator as user
// turns, merged when a verification turn produced both.
inline std::vector<ChatMessage> build_operator_messages(const PromptSet& prompts,
                                                        std::size_t few_shot_index,
                                                        const SessionState& s) {
    std::vector<ChatMessage> messages;
    messages.push_back({MessageRole::system,
                        prompts.operator_system.render(
                            {{"few_shot", prompts.few_shot_blocks.at(few_shot_index)}})});

    std::string pending_user = render_task_opening(s);
    for (const ChatEntry& entry : s.chat_log) {
        if (entry.role == ChatRole::operator_agent) {
            messages.push_back({MessageRole::user, pending_user});
            pending_user.clear();
            messages.push_back({MessageRole::assistant, entry.text});
        } else {
            if (!pending_user.empty()) pending_user += "\n";
            pending_user += entry.role == ChatRole::supervisor
                                ? "Supervisor feedback: " + entry.text
                                : entry.text;
        }
    }
    messages.push_back({MessageRole::user, pending_user});
    return messages;
}

inline std::vector<ChatMessage> build_supervisor_messages(const PromptSet& prompts,
                                                          std::size_t few_shot_index,
                                                          const std::string& query,
                                                          const EvidenceSnapshot& evidence) {
    return {{MessageRole::system,
             prompts.supervisor_system.render(
                 {{"few_shot", prompts.few_shot_blocks.at(few_shot_index)}})},
            {MessageRole::user, render_evidence_block(query, evidence)}};
}

inline std::vector<ChatMessage> build_single_answer_messages(const PromptSet& prompts,
                                                             std::size_t few_shot_index,
                                                             const std::string& query,
                                                             const EvidenceSnapshot& evidence) {
    return {{MessageRole::system,
             prompts.single_answer_system.render(
                 {{"few_shot", prompts.few_shot_blocks.at(few_shot_index)}})},
            {MessageRole::user, render_evidence_block(query, evidence)}};
}

inline std::vector<ChatMessage> build_paraphrase_messages(const PromptSet& prompts,
                                                          const std::string& query, int count) {
    return {{MessageRole::system,
             prompts.paraphrase_system.render({{"count", std::to_string(count)}})},
            {MessageRole::user, query}};
}

// Accepts "1. variant", "1) variant" or bare lines, in order.
inline std::vector<std::string> parse_paraphrase_variants(const std::string& response_text,
                                                          int count) {
    std::vector<std::string> variants;
    for (const auto& raw : text::split_lines(response_text)) {
        std::string line = text::trim(raw);
        if (line.empty()) continue;
        std::size_t i = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
            line = text::trim(line.substr(i + 1));
            if (line.empty()) continue;
        }
        variants.push_back(line);
        if (static_cast<int>(variants.size()) == count) break;
    }
    if (static_cast<int>(variants.size()) < count) {
        throw GatewayError("paraphrase response yielded " + std::to_string(variants.size()) +
                           " variants, need " + std::to_string(count));
    }
    return variants;
}

} // namespace r2kg
