#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "r2kg/action.hpp"
#include "r2kg/gateway.hpp"
#include "r2kg/kg_store.hpp"
#include "r2kg/prompt.hpp"
#include "r2kg/session.hpp"

namespace r2kg {

enum class RunMode { dual, single_sc };

inline std::string_view to_string(RunMode m) {
    return m == RunMode::dual ? "dual" : "single_sc";
}

inline RunMode run_mode_from_string(std::string_view s) {
    if (s == "dual") return RunMode::dual;
    if (s == "single_sc") return RunMode::single_sc;
    throw std::invalid_argument("unknown run mode: " + std::string(s));
}

enum class TrialStrategy { multi_prompt, paraphrase, sampling_variation };

inline std::string_view to_string(TrialStrategy s) {
    switch (s) {
        case TrialStrategy::multi_prompt: return "multi_prompt";
        case TrialStrategy::paraphrase: return "paraphrase";
        default: return "sampling_variation";
    }
}

inline TrialStrategy trial_strategy_from_string(std::string_view s) {
    if (s == "multi_prompt") return TrialStrategy::multi_prompt;
    if (s == "paraphrase") return TrialStrategy::paraphrase;
    if (s == "sampling_variation") return TrialStrategy::sampling_variation;
    throw std::invalid_argument("unknown trial strategy: " + std::string(s));
}

struct SamplingParams {
    double top_p = 0.95;
    double temperature = 0.95;
    bool operator==(const SamplingParams&) const = default;
};

struct RunConfig {
    RunMode mode = RunMode::dual;
    int iteration_limit = 15; // T; single_sc conventionally runs with 10
    int trials = 3;
    TrialStrategy strategy = TrialStrategy::multi_prompt;
    SamplingParams sampling{};                  // applied to every call unless varied
    std::vector<SamplingParams> trial_sampling; // per-trial, sampling_variation only
    int max_tokens = 16384;
    std::string operator_model = "operator";
    std::string supervisor_model = "supervisor";
    unsigned seed = 0;

    void validate(std::size_t few_shot_count) const {
        if (iteration_limit < 1) throw std::invalid_argument("iteration limit must be >= 1");
        if (mode == RunMode::single_sc) {
            if (trials < 2) throw std::invalid_argument("single_sc requires at least 2 trials");
            if (strategy == TrialStrategy::sampling_variation &&
                trial_sampling.size() < static_cast<std::size_t>(trials)) {
                throw std::invalid_argument("sampling_variation needs one sampling pair per trial");
            }
            if (strategy == TrialStrategy::multi_prompt &&
                few_shot_count < static_cast<std::size_t>(trials)) {
                throw std::invalid_argument("multi_prompt needs one few-shot block per trial");
            }
        }
    }
};

enum class AbstainReason { limit_exceeded, trial_disagreement, trial_abstained, hard_failure };

inline std::string_view to_string(AbstainReason r) {
    switch (r) {
        case AbstainReason::limit_exceeded: return "limit_exceeded";
        case AbstainReason::trial_disagreement: return "trial_disagreement";
        case AbstainReason::trial_abstained: return "trial_abstained";
        default: return "hard_failure";
    }
}

inline AbstainReason abstain_reason_from_string(std::string_view s) {
    if (s == "limit_exceeded") return AbstainReason::limit_exceeded;
    if (s == "trial_disagreement") return AbstainReason::trial_disagreement;
    if (s == "trial_abstained") return AbstainReason::trial_abstained;
    if (s == "hard_failure") return AbstainReason::hard_failure;
    throw std::invalid_argument("unknown abstain reason: " + std::string(s));
}

struct RunStats {
    int operator_calls = 0;
    int supervisor_calls = 0;
    int iterations = 0;
};

struct ReasoningResult {
    std::optional<std::vector<std::string>> labels; // set iff answered
    std::optional<AbstainReason> abstain_reason;
    std::vector<std::vector<ChatEntry>> transcripts; // one per trial
    RunStats stats;

    bool answered() const { return labels.has_value(); }
};

// --- Unanimity over trial outcomes ------------------------------------------

inline std::set<std::string> normalized_label_set(const std::vector<std::string>& labels) {
    std::set<std::string> out;
    for (const auto& l : labels) out.insert(text::normalize_label(l));
    return out;
}

struct UnanimityVerdict {
    std::optional<std::vector<std::string>> labels;
    std::optional<AbstainReason> reason;
};

// A trial outcome is a label list, or nullopt for an abstained trial. Any
// abstaining trial abstains the whole sample; otherwise all label SETS must
// agree after normalization.
inline UnanimityVerdict unanimity_verdict(
    const std::vector<std::optional<std::vector<std::string>>>& trials) {
    if (trials.empty()) throw std::invalid_argument("no trials to combine");
    for (const auto& t : trials) {
        if (!t.has_value()) return {std::nullopt, AbstainReason::trial_abstained};
    }
    const std::set<std::string> first = normalized_label_set(*trials.front());
    for (std::size_t i = 1; i < trials.size(); ++i) {
        if (normalized_label_set(*trials[i]) != first) {
            return {std::nullopt, AbstainReason::trial_disagreement};
        }
    }
    // Surface forms from the first trial, deduplicated under normalization.
    std::vector<std::string> labels;
    std::set<std::string> taken;
    for (const auto& l : *trials.front()) {
        if (taken.insert(text::normalize_label(l)).second) labels.push_back(l);
    }
    return {labels, std::nullopt};
}

// --- Trial input materialization ---------------------------------------------

struct TrialInput {
    std::string query;
    std::size_t few_shot_index = 0;
    SamplingParams sampling{};
};

// Pure given its inputs; the paraphrase strategy receives the rewritten
// queries that a gateway call produced upstream.
inline std::vector<TrialInput> materialize_trial_inputs(
    const RunConfig& cfg, std::size_t few_shot_count, const std::string& query,
    const std::vector<std::string>& paraphrased = {}) {
    std::vector<TrialInput> inputs;
    inputs.reserve(cfg.trials);
    switch (cfg.strategy) {
        case TrialStrategy::multi_prompt: {
            if (few_shot_count < static_cast<std::size_t>(cfg.trials)) {
                throw std::invalid_argument("multi_prompt needs one few-shot block per trial");
            }
            std::vector<std::size_t> indices(few_shot_count);
            std::iota(indices.begin(), indices.end(), 0);
            if (few_shot_count > static_cast<std::size_t>(cfg.trials)) {
                std::mt19937 rng(cfg.seed);
                std::shuffle(indices.begin(), indices.end(), rng);
            }
            for (int t = 0; t < cfg.trials; ++t) {
                inputs.push_back({query, indices[t], cfg.sampling});
            }
            break;
        }
        case TrialStrategy::paraphrase: {
            if (paraphrased.size() < static_cast<std::size_t>(cfg.trials)) {
                throw std::invalid_argument("paraphrase strategy needs one variant per trial");
            }
            for (int t = 0; t < cfg.trials; ++t) {
                inputs.push_back({paraphrased[t], 0, cfg.sampling});
            }
            break;
        }
        case TrialStrategy::sampling_variation: {
            if (cfg.trial_sampling.size() < static_cast<std::size_t>(cfg.trials)) {
                throw std::invalid_argument("sampling_variation needs one sampling pair per trial");
            }
            for (int t = 0; t < cfg.trials; ++t) {
                inputs.push_back({query, 0, cfg.trial_sampling[t]});
            }
            break;
        }
    }
    return inputs;
}

// --- Dual-agent loop ----------------------------------------------------------

namespace detail {

inline CompletionRequest make_request(const std::string& model,
                                      std::vector<ChatMessage> messages,
                                      const SamplingParams& sampling, int max_tokens) {
    CompletionRequest req;
    req.model_id = model;
    req.messages = std::move(messages);
    req.top_p = sampling.top_p;
    req.temperature = sampling.temperature;
    req.max_tokens = max_tokens;
    return req;
}

} // namespace detail

// One Operator turn per iteration until the Supervisor answers or the budget
// runs out. Gateway failures abstain the sample instead of crashing a batch.
inline ReasoningResult run_dual(const std::string& query,
                                const std::vector<std::string>& topic_entities,
                                const KnowledgeGraph& graph, Gateway& operator_gateway,
                                Gateway& supervisor_gateway, const PromptSet& prompts,
                                const RunConfig& cfg, std::size_t few_shot_index = 0,
                                std::optional<SamplingParams> sampling_override = std::nullopt) {
    const SamplingParams sampling = sampling_override.value_or(cfg.sampling);
    SessionState session = new_session(query, topic_entities, cfg.iteration_limit);
    ReasoningResult result;

    auto finish = [&](std::optional<std::vector<std::string>> labels,
                      std::optional<AbstainReason> reason) {
        result.labels = std::move(labels);
        result.abstain_reason = reason;
        result.stats.iterations = session.iteration;
        result.transcripts = {session.chat_log};
        return result;
    };

    while (session.iteration < session.limit) {
        CompletionResult op;
        try {
            op = operator_gateway.complete(
                AgentRole::operator_agent,
                detail::make_request(cfg.operator_model,
                                     build_operator_messages(prompts, few_shot_index, session),
                                     sampling, cfg.max_tokens));
        } catch (const GatewayError& e) {
            session.chat_log.push_back(
                {ChatRole::server, std::string("GATEWAY ERROR: ") + e.what(), session.iteration});
            return finish(std::nullopt, AbstainReason::hard_failure);
        }
        result.stats.operator_calls += 1;

        OperatorTurn turn = parse_operator_turn(op.content);
        TurnResult turn_result;
        if (const auto* failure = std::get_if<ParseFailure>(&turn)) {
            turn_result = apply_parse_failure(session, *failure);
        } else {
            turn_result =
                apply_actions(session, graph, op.content, std::get<std::vector<AgentAction>>(turn));
        }

        if (!turn_result.verification_requested) continue;

        CompletionResult sup;
        try {
            sup = supervisor_gateway.complete(
                AgentRole::supervisor_agent,
                detail::make_request(cfg.supervisor_model,
                                     build_supervisor_messages(prompts, few_shot_index, query,
                                                               snapshot_evidence(session)),
                                     sampling, cfg.max_tokens));
        } catch (const GatewayError& e) {
            session.chat_log.push_back(
                {ChatRole::server, std::string("GATEWAY ERROR: ") + e.what(), session.iteration});
            return finish(std::nullopt, AbstainReason::hard_failure);
        }
        result.stats.supervisor_calls += 1;
        append_supervisor_entry(session, sup.content);

        SupervisorTurn verdict = parse_supervisor_turn(sup.content);
        if (const auto* answer = std::get_if<Answer>(&verdict)) {
            return finish(answer->labels, std::nullopt);
        }
        // Feedback continues the loop. An unparseable Supervisor turn is
        // treated as feedback: the raw text is already in the chat log and
        // the budget semantics stay intact.
    }
    return finish(std::nullopt, AbstainReason::limit_exceeded);
}

// --- Single-agent trial ---------------------------------------------------------

enum class TrialAbstain { budget, unparseable_answer, hard_failure };

struct TrialOutcome {
    std::optional<std::vector<std::string>> labels;
    std::optional<TrialAbstain> reason;
    std::vector<ChatEntry> transcript;
    RunStats stats;

    bool answered() const { return labels.has_value(); }
};

// Same exploration loop, but Verification() is answered by the same backend
// over the evidence snapshot. There is no feedback path: a turn that does not
// parse into an answer abstains the trial.
inline TrialOutcome run_single_trial(const std::string& query,
                                     const std::vector<std::string>& topic_entities,
                                     const KnowledgeGraph& graph, Gateway& gateway,
                                     const PromptSet& prompts, const RunConfig& cfg,
                                     const TrialInput& input) {
    SessionState session = new_session(query, topic_entities, cfg.iteration_limit);
    session.query = input.query; // a paraphrased trial reasons over its variant
    TrialOutcome outcome;

    auto finish = [&](std::optional<std::vector<std::string>> labels,
                      std::optional<TrialAbstain> reason) {
        outcome.labels = std::move(labels);
        outcome.reason = reason;
        outcome.stats.iterations = session.iteration;
        outcome.transcript = session.chat_log;
        return outcome;
    };

    while (session.iteration < session.limit) {
        CompletionResult op;
        try {
            op = gateway.complete(
                AgentRole::operator_agent,
                detail::make_request(cfg.operator_model,
                                     build_operator_messages(prompts, input.few_shot_index,
                                                             session),
                                     input.sampling, cfg.max_tokens));
        } catch (const GatewayError& e) {
            session.chat_log.push_back(
                {ChatRole::server, std::string("GATEWAY ERROR: ") + e.what(), session.iteration});
            return finish(std::nullopt, TrialAbstain::hard_failure);
        }
        outcome.stats.operator_calls += 1;

        OperatorTurn turn = parse_operator_turn(op.content);
        TurnResult turn_result;
        if (const auto* failure = std::get_if<ParseFailure>(&turn)) {
            turn_result = apply_parse_failure(session, *failure);
        } else {
            turn_result =
                apply_actions(session, graph, op.content, std::get<std::vector<AgentAction>>(turn));
        }

        if (!turn_result.verification_requested) continue;

        CompletionResult ans;
        try {
            ans = gateway.complete(
                AgentRole::operator_agent,
                detail::make_request(cfg.operator_model,
                                     build_single_answer_messages(prompts, input.few_shot_index,
                                                                  session.query,
                                                                  snapshot_evidence(session)),
                                     input.sampling, cfg.max_tokens));
        } catch (const GatewayError& e) {
            session.chat_log.push_back(
                {ChatRole::server, std::string("GATEWAY ERROR: ") + e.what(), session.iteration});
            return finish(std::nullopt, TrialAbstain::hard_failure);
        }
        outcome.stats.operator_calls += 1;
        append_supervisor_entry(session, ans.content);

        SupervisorTurn verdict = parse_supervisor_turn(ans.content);
        if (const auto* answer = std::get_if<Answer>(&verdict)) {
            return finish(answer->labels, std::nullopt);
        }
        return finish(std::nullopt, TrialAbstain::unparseable_answer);
    }
    return finish(std::nullopt, TrialAbstain::budget);
}

// --- Strict self-consistency ---------------------------------------------------

// Runs every trial, then commits only on unanimous label sets. A single
// abstaining trial abstains the sample.
inline ReasoningResult run_single_sc(const std::string& query,
                                     const std::vector<std::string>& topic_entities,
                                     const KnowledgeGraph& graph, Gateway& gateway,
                                     const PromptSet& prompts, const RunConfig& cfg) {
    cfg.validate(prompts.few_shot_blocks.size());
    ReasoningResult result;

    std::vector<std::string> paraphrased;
    if (cfg.strategy == TrialStrategy::paraphrase) {
        try {
            CompletionResult res = gateway.complete(
                AgentRole::operator_agent,
                detail::make_request(cfg.operator_model,
                                     build_paraphrase_messages(prompts, query, cfg.trials),
                                     cfg.sampling, cfg.max_tokens));
            result.stats.operator_calls += 1;
            paraphrased = parse_paraphrase_variants(res.content, cfg.trials);
        } catch (const GatewayError& e) {
            result.abstain_reason = AbstainReason::hard_failure;
            result.transcripts = {{{ChatRole::server, std::string("GATEWAY ERROR: ") + e.what(), 0}}};
            return result;
        }
    }

    std::vector<TrialInput> inputs =
        materialize_trial_inputs(cfg, prompts.few_shot_blocks.size(), query, paraphrased);

    std::vector<std::optional<std::vector<std::string>>> trial_labels;
    for (const TrialInput& input : inputs) {
        TrialOutcome outcome =
            run_single_trial(query, topic_entities, graph, gateway, prompts, cfg, input);
        trial_labels.push_back(outcome.labels);
        result.stats.operator_calls += outcome.stats.operator_calls;
        result.stats.iterations = std::max(result.stats.iterations, outcome.stats.iterations);
        result.transcripts.push_back(std::move(outcome.transcript));
    }

    UnanimityVerdict verdict = unanimity_verdict(trial_labels);
    result.labels = std::move(verdict.labels);
    result.abstain_reason = verdict.reason;
    return result;
}

} // namespace r2kg
