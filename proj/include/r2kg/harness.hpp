#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "r2kg/dataset.hpp"
#include "r2kg/gateway.hpp"
#include "r2kg/kg_store.hpp"
#include "r2kg/metrics.hpp"
#include "r2kg/orchestrator.hpp"
#include "r2kg/prompt.hpp"

namespace r2kg {

namespace fs = std::filesystem;

struct BackendSpec {
    enum class Type { http, scripted };
    Type type = Type::http;
    std::string endpoint;    // http
    std::string model;       // model id forwarded on requests
    fs::path script_path;    // scripted
};

// The single source of experiment truth; everything a run needs lives here,
// except the API key which only ever comes from the environment.
struct ExperimentManifest {
    std::string adapter;
    fs::path dataset_path;
    fs::path graph_path;
    GraphFormat graph_format = GraphFormat::triple_tsv;
    RunConfig run;
    PromptSetPaths prompts;
    BackendSpec operator_backend;
    BackendSpec supervisor_backend;
    fs::path output_dir;
    int concurrency = 4;
};

class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

inline BackendSpec parse_backend(const nlohmann::json& j, const fs::path& base) {
    BackendSpec spec;
    const std::string type = j.at("type").get<std::string>();
    if (type == "http") {
        spec.type = BackendSpec::Type::http;
        spec.endpoint = j.at("endpoint").get<std::string>();
    } else if (type == "scripted") {
        spec.type = BackendSpec::Type::scripted;
        spec.script_path = resolve(base, j.at("script").get<std::string>());
    } else {
        throw ManifestError("backend type must be http or scripted, got " + type);
    }
    spec.model = j.value("model", std::string("default"));
    return spec;
}

} // namespace detail

inline ExperimentManifest load_manifest(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ManifestError("cannot open manifest: " + manifest_path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("manifest is not valid JSON: " + std::string(e.what()));
    }

    const fs::path base = manifest_path.parent_path();
    ExperimentManifest m;
    try {
        m.adapter = j.at("dataset").at("adapter").get<std::string>();
        m.dataset_path = detail::resolve(base, j.at("dataset").at("path").get<std::string>());
        m.graph_path = detail::resolve(base, j.at("graph").at("path").get<std::string>());
        m.graph_format = graph_format_from_string(j.at("graph").at("format").get<std::string>());

        const auto& run = j.at("run");
        m.run.mode = run_mode_from_string(run.at("mode").get<std::string>());
        m.run.iteration_limit =
            run.value("iteration_limit", m.run.mode == RunMode::dual ? 15 : 10);
        m.run.trials = run.value("trials", 3);
        if (run.contains("strategy")) {
            m.run.strategy = trial_strategy_from_string(run["strategy"].get<std::string>());
        }
        m.run.sampling.top_p = run.value("top_p", 0.95);
        m.run.sampling.temperature = run.value("temperature", 0.95);
        // Temporal and fact-verification style datasets default to the
        // smaller budget; multi-hop QA gets the larger one.
        const bool small_budget = m.adapter == "cron-style" || m.adapter == "factkg-style";
        m.run.max_tokens = run.value("max_tokens", small_budget ? 8192 : 16384);
        if (run.contains("trial_sampling")) {
            for (const auto& ts : run["trial_sampling"]) {
                m.run.trial_sampling.push_back(
                    {ts.at("top_p").get<double>(), ts.at("temperature").get<double>()});
            }
        }
        m.run.seed = j.value("seed", 0u);

        const auto& prompts = j.at("prompts");
        m.prompts.operator_system =
            detail::resolve(base, prompts.at("operator_system").get<std::string>()).string();
        m.prompts.supervisor_system =
            detail::resolve(base, prompts.at("supervisor_system").get<std::string>()).string();
        m.prompts.single_answer_system =
            detail::resolve(base, prompts.at("single_answer_system").get<std::string>()).string();
        m.prompts.paraphrase_system =
            detail::resolve(base, prompts.at("paraphrase_system").get<std::string>()).string();
        for (const auto& p : prompts.at("few_shot_blocks")) {
            m.prompts.few_shot_blocks.push_back(
                detail::resolve(base, p.get<std::string>()).string());
        }

        m.operator_backend = detail::parse_backend(j.at("backends").at("operator"), base);
        m.run.operator_model = m.operator_backend.model;
        if (m.run.mode == RunMode::dual) {
            m.supervisor_backend = detail::parse_backend(j.at("backends").at("supervisor"), base);
            m.run.supervisor_model = m.supervisor_backend.model;
        }

        m.output_dir = detail::resolve(base, j.at("output_dir").get<std::string>());
        m.concurrency = j.value("concurrency", 4);
        if (m.concurrency < 1) throw ManifestError("concurrency must be >= 1");
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("manifest field error: " + std::string(e.what()));
    }
    return m;
}

// --- Scripted backend fixtures ----------------------------------------------
//
// {"samples": {"<id>": {"operator": [{"response": ..., "expect_contains"?: ...}],
//                       "supervisor": [...]}}}

struct SampleScript {
    std::vector<ScriptedBackend::Entry> operator_entries;
    std::vector<ScriptedBackend::Entry> supervisor_entries;
};

class ScriptLibrary {
public:
    static ScriptLibrary load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw ScriptError("cannot open script file: " + path.string());
        nlohmann::json j = nlohmann::json::parse(in);
        ScriptLibrary lib;
        for (const auto& [id, entry] : j.at("samples").items()) {
            SampleScript script;
            script.operator_entries = parse_entries(entry, "operator");
            script.supervisor_entries = parse_entries(entry, "supervisor");
            lib.samples_.emplace(id, std::move(script));
        }
        return lib;
    }

    const SampleScript& for_sample(const std::string& id) const {
        auto it = samples_.find(id);
        if (it == samples_.end()) throw ScriptError("no script for sample id: " + id);
        return it->second;
    }

private:
    static std::vector<ScriptedBackend::Entry> parse_entries(const nlohmann::json& sample,
                                                             const char* role) {
        std::vector<ScriptedBackend::Entry> entries;
        if (!sample.contains(role)) return entries;
        for (const auto& e : sample[role]) {
            entries.push_back({e.value("expect_contains", std::string{}),
                               e.at("response").get<std::string>(), e.value("truncated", false)});
        }
        return entries;
    }

    std::map<std::string, SampleScript> samples_;
};

// --- Per-sample result records ------------------------------------------------

struct SampleResult {
    std::string id;
    std::optional<std::vector<std::string>> labels;
    std::optional<AbstainReason> reason;
    int iterations = 0;
    int operator_calls = 0;
    int supervisor_calls = 0;
    std::string transcript_path;
};

inline nlohmann::ordered_json to_json(const SampleResult& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["verdict"] = r.labels ? "answered" : "abstained";
    if (r.labels) j["labels"] = *r.labels;
    if (r.reason) j["reason"] = to_string(*r.reason);
    j["iterations"] = r.iterations;
    j["operator_calls"] = r.operator_calls;
    j["supervisor_calls"] = r.supervisor_calls;
    j["transcript_path"] = r.transcript_path;
    return j;
}

inline SampleResult sample_result_from_json(const nlohmann::json& j) {
    SampleResult r;
    r.id = j.at("id").get<std::string>();
    if (j.at("verdict").get<std::string>() == "answered") {
        r.labels = j.at("labels").get<std::vector<std::string>>();
    } else if (j.contains("reason")) {
        r.reason = abstain_reason_from_string(j.at("reason").get<std::string>());
    }
    r.iterations = j.value("iterations", 0);
    r.operator_calls = j.value("operator_calls", 0);
    r.supervisor_calls = j.value("supervisor_calls", 0);
    r.transcript_path = j.value("transcript_path", std::string{});
    return r;
}

// --- Experiment execution ------------------------------------------------------

namespace detail {

inline std::shared_ptr<Backend> make_backend(const BackendSpec& spec, const ScriptLibrary* library,
                                             const std::string& sample_id, bool supervisor_role) {
    if (spec.type == BackendSpec::Type::http) {
        HttpBackendConfig config;
        config.endpoint = spec.endpoint;
        return std::make_shared<HttpBackend>(config);
    }
    const SampleScript& script = library->for_sample(sample_id);
    return std::make_shared<ScriptedBackend>(supervisor_role ? script.supervisor_entries
                                                             : script.operator_entries);
}

inline std::string transcript_file_content(const ReasoningResult& result) {
    std::string out;
    const bool tag_trials = result.transcripts.size() > 1;
    for (std::size_t t = 0; t < result.transcripts.size(); ++t) {
        out += transcript_to_jsonl(result.transcripts[t],
                                   tag_trials ? std::optional<int>(static_cast<int>(t)) : std::nullopt);
    }
    return out;
}

} // namespace detail

// Runs every dataset sample through the orchestrator with bounded concurrency
// and persists results, transcripts, metrics, and call statistics. Re-running
// a directory skips ids already present in results.jsonl, so completed runs
// are idempotent and interrupted ones resume.
inline fs::path run_experiment(const ExperimentManifest& m) {
    std::ifstream graph_in(m.graph_path, std::ios::binary);
    if (!graph_in) throw ManifestError("cannot open graph: " + m.graph_path.string());
    const KnowledgeGraph graph = load_graph(graph_in, m.graph_format);

    const PromptSet prompts = load_prompt_set(m.prompts);
    m.run.validate(prompts.few_shot_blocks.size());

    IngestResult dataset = ingest_file(m.adapter, m.dataset_path.string());
    for (const auto& e : dataset.errors) std::cerr << "[ingest] " << e << "\n";

    fs::create_directories(m.output_dir / "transcripts");

    // Gold labels travel with the run so `report` needs nothing external.
    {
        std::ofstream gold(m.output_dir / "gold.jsonl", std::ios::trunc);
        for (const DatasetSample& s : dataset.samples) {
            nlohmann::ordered_json j;
            j["id"] = s.id;
            j["labels"] = s.gold_labels;
            j["kind"] = to_string(s.kind);
            gold << j.dump() << "\n";
        }
    }

    // Samples whose topic entities are unknown to the graph cannot be
    // explored at all; they are skipped and counted, not abstained.
    std::vector<DatasetSample> runnable;
    std::size_t skipped_unresolved = 0;
    for (const DatasetSample& s : dataset.samples) {
        bool resolvable = true;
        for (const auto& e : s.topic_entities) {
            if (!graph.has_entity(e)) {
                std::cerr << "[skip] sample " << s.id << ": topic entity '" << e
                          << "' not in graph\n";
                resolvable = false;
            }
        }
        if (resolvable) {
            runnable.push_back(s);
        } else {
            ++skipped_unresolved;
        }
    }

    const fs::path results_path = m.output_dir / "results.jsonl";
    std::map<std::string, SampleResult> completed;
    if (fs::exists(results_path)) {
        std::ifstream in(results_path);
        std::string line;
        while (std::getline(in, line)) {
            if (text::trim(line).empty()) continue;
            SampleResult r = sample_result_from_json(nlohmann::json::parse(line));
            completed.emplace(r.id, std::move(r));
        }
    }

    std::vector<const DatasetSample*> pending;
    for (const DatasetSample& s : runnable) {
        if (!completed.count(s.id)) pending.push_back(&s);
    }

    auto counters = std::make_shared<CallCounters>();
    std::optional<ScriptLibrary> operator_scripts;
    std::optional<ScriptLibrary> supervisor_scripts;
    if (m.operator_backend.type == BackendSpec::Type::scripted) {
        operator_scripts = ScriptLibrary::load(m.operator_backend.script_path);
    }
    if (m.run.mode == RunMode::dual && m.supervisor_backend.type == BackendSpec::Type::scripted) {
        supervisor_scripts = ScriptLibrary::load(m.supervisor_backend.script_path);
    }

    std::mutex io_mutex;
    std::ofstream results_append(results_path, std::ios::app);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= pending.size()) return;
            {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (first_error) return;
            }
            const DatasetSample& sample = *pending[i];
            try {
                Gateway operator_gateway(
                    detail::make_backend(m.operator_backend,
                                         operator_scripts ? &*operator_scripts : nullptr,
                                         sample.id, false),
                    counters);

                ReasoningResult result;
                if (m.run.mode == RunMode::dual) {
                    Gateway supervisor_gateway(
                        detail::make_backend(m.supervisor_backend,
                                             supervisor_scripts ? &*supervisor_scripts : nullptr,
                                             sample.id, true),
                        counters);
                    result = run_dual(sample.query, sample.topic_entities, graph,
                                      operator_gateway, supervisor_gateway, prompts, m.run);
                } else {
                    result = run_single_sc(sample.query, sample.topic_entities, graph,
                                           operator_gateway, prompts, m.run);
                }

                SampleResult record;
                record.id = sample.id;
                record.labels = result.labels;
                record.reason = result.abstain_reason;
                record.iterations = result.stats.iterations;
                record.operator_calls = result.stats.operator_calls;
                record.supervisor_calls = result.stats.supervisor_calls;
                record.transcript_path = "transcripts/" + sample.id + ".jsonl";

                std::ofstream transcript(m.output_dir / record.transcript_path, std::ios::trunc);
                transcript << detail::transcript_file_content(result);

                std::lock_guard<std::mutex> lock(io_mutex);
                results_append << to_json(record).dump() << "\n";
                results_append.flush();
                completed.emplace(record.id, std::move(record));
            } catch (const ScriptError&) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            } catch (const std::exception& e) {
                // Anything unexpected abstains this sample, never the batch.
                SampleResult record;
                record.id = sample.id;
                record.reason = AbstainReason::hard_failure;
                record.transcript_path = "transcripts/" + sample.id + ".jsonl";
                std::ofstream transcript(m.output_dir / record.transcript_path, std::ios::trunc);
                transcript << transcript_to_jsonl(
                    {{ChatRole::server, std::string("HARNESS ERROR: ") + e.what(), 0}});
                std::lock_guard<std::mutex> lock(io_mutex);
                results_append << to_json(record).dump() << "\n";
                results_append.flush();
                completed.emplace(record.id, std::move(record));
            }
        }
    };

    const std::size_t width =
        std::min<std::size_t>(static_cast<std::size_t>(m.concurrency),
                              std::max<std::size_t>(pending.size(), 1));
    std::vector<std::thread> threads;
    threads.reserve(width);
    for (std::size_t t = 0; t < width; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    results_append.close();
    if (first_error) std::rethrow_exception(first_error);

    // Canonical rewrite: dataset order, so repeated runs are byte-identical.
    {
        std::ofstream out(results_path, std::ios::trunc);
        for (const DatasetSample& s : runnable) {
            auto it = completed.find(s.id);
            if (it != completed.end()) out << to_json(it->second).dump() << "\n";
        }
    }

    // Metric report over the run's own gold labels.
    std::vector<EvalRecord> eval_records;
    for (const DatasetSample& s : runnable) {
        auto it = completed.find(s.id);
        if (it == completed.end()) continue;
        eval_records.push_back(EvalRecord::make(s.id, s.gold_labels, it->second.labels));
    }
    if (!eval_records.empty()) {
        MetricReport report = compute_report(eval_records);
        std::ofstream(m.output_dir / "report.json") << report_to_json(report).dump(2) << "\n";
        std::ofstream(m.output_dir / "report.txt")
            << render_report_table({{"overall", report}});
    }

    // Call accounting, Table-3 style.
    {
        std::uint64_t op_total = 0, sup_total = 0;
        std::size_t n = 0, answered = 0;
        std::uint64_t sup_on_answered = 0;
        for (const DatasetSample& s : runnable) {
            auto it = completed.find(s.id);
            if (it == completed.end()) continue;
            ++n;
            op_total += it->second.operator_calls;
            sup_total += it->second.supervisor_calls;
            if (it->second.labels) {
                ++answered;
                sup_on_answered += it->second.supervisor_calls;
            }
        }
        nlohmann::ordered_json stats;
        stats["n_samples"] = n;
        stats["n_answered"] = answered;
        stats["n_skipped_unresolved"] = skipped_unresolved;
        stats["total_operator_calls"] = op_total;
        stats["total_supervisor_calls"] = sup_total;
        stats["mean_operator_calls"] = n ? static_cast<double>(op_total) / n : 0.0;
        stats["mean_supervisor_calls"] = n ? static_cast<double>(sup_total) / n : 0.0;
        stats["mean_supervisor_calls_per_answered"] =
            answered ? nlohmann::ordered_json(static_cast<double>(sup_on_answered) / answered)
                     : nlohmann::ordered_json(nullptr);
        stats["gateway"] = {{"operator_calls", counters->snapshot().operator_calls},
                            {"supervisor_calls", counters->snapshot().supervisor_calls},
                            {"operator_prompt_tokens", counters->snapshot().operator_prompt_tokens},
                            {"operator_completion_tokens",
                             counters->snapshot().operator_completion_tokens},
                            {"supervisor_prompt_tokens",
                             counters->snapshot().supervisor_prompt_tokens},
                            {"supervisor_completion_tokens",
                             counters->snapshot().supervisor_completion_tokens}};
        std::ofstream(m.output_dir / "stats.json") << stats.dump(2) << "\n";
    }

    return m.output_dir;
}

// --- Reporting over a finished run directory -----------------------------------

struct RunReport {
    std::vector<std::pair<std::string, MetricReport>> rows; // "overall" first
    std::string table;
    nlohmann::ordered_json json;
};

inline RunReport build_report(const fs::path& run_dir, std::optional<fs::path> gold_path,
                              bool group_by_kind) {
    const fs::path results_path = run_dir / "results.jsonl";
    const fs::path gold = gold_path.value_or(run_dir / "gold.jsonl");
    if (!fs::exists(results_path)) {
        throw std::runtime_error("no results.jsonl in " + run_dir.string());
    }
    if (!fs::exists(gold)) {
        throw std::runtime_error("missing gold labels: " + gold.string());
    }

    struct GoldEntry {
        std::vector<std::string> labels;
        std::string kind;
    };
    std::map<std::string, GoldEntry> gold_by_id;
    {
        std::ifstream in(gold);
        std::string line;
        while (std::getline(in, line)) {
            if (text::trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            gold_by_id[j.at("id").get<std::string>()] = {
                j.at("labels").get<std::vector<std::string>>(),
                j.value("kind", std::string("multi_label"))};
        }
    }

    std::vector<EvalRecord> records;
    std::map<std::string, std::vector<EvalRecord>> by_kind;
    {
        std::ifstream in(results_path);
        std::string line;
        while (std::getline(in, line)) {
            if (text::trim(line).empty()) continue;
            SampleResult r = sample_result_from_json(nlohmann::json::parse(line));
            auto it = gold_by_id.find(r.id);
            if (it == gold_by_id.end()) {
                throw std::runtime_error("no gold labels for sample id: " + r.id);
            }
            EvalRecord record = EvalRecord::make(r.id, it->second.labels, r.labels);
            if (group_by_kind) by_kind[it->second.kind].push_back(record);
            records.push_back(std::move(record));
        }
    }
    if (records.empty()) throw std::runtime_error("results.jsonl holds no records");

    RunReport out;
    out.rows.emplace_back("overall", compute_report(records));
    for (const auto& [kind, group] : by_kind) {
        out.rows.emplace_back(kind, compute_report(group));
    }
    out.table = render_report_table(out.rows);
    out.json = nlohmann::ordered_json::object();
    for (const auto& [name, report] : out.rows) out.json[name] = report_to_json(report);
    return out;
}

// --- Call statistics over a finished run directory -------------------------------

struct CallStatsReport {
    std::size_t n_samples = 0;
    std::size_t n_answered = 0;
    std::uint64_t total_operator_calls = 0;
    std::uint64_t total_supervisor_calls = 0;
    double mean_operator_calls = 0.0;
    double mean_supervisor_calls = 0.0;
    std::optional<double> mean_supervisor_calls_per_answered;
};

inline CallStatsReport call_stats_from_results(const fs::path& run_dir) {
    const fs::path results_path = run_dir / "results.jsonl";
    if (!fs::exists(results_path)) {
        throw std::runtime_error("no results.jsonl in " + run_dir.string());
    }
    CallStatsReport r;
    std::uint64_t sup_on_answered = 0;
    std::ifstream in(results_path);
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        SampleResult s = sample_result_from_json(nlohmann::json::parse(line));
        ++r.n_samples;
        r.total_operator_calls += s.operator_calls;
        r.total_supervisor_calls += s.supervisor_calls;
        if (s.labels) {
            ++r.n_answered;
            sup_on_answered += s.supervisor_calls;
        }
    }
    if (r.n_samples > 0) {
        r.mean_operator_calls = static_cast<double>(r.total_operator_calls) / r.n_samples;
        r.mean_supervisor_calls = static_cast<double>(r.total_supervisor_calls) / r.n_samples;
    }
    if (r.n_answered > 0) {
        r.mean_supervisor_calls_per_answered =
            static_cast<double>(sup_on_answered) / r.n_answered;
    }
    return r;
}

inline std::string render_call_stats(const CallStatsReport& r) {
    std::ostringstream os;
    os << "samples                        " << r.n_samples << "\n"
       << "answered                       " << r.n_answered << "\n"
       << "total operator calls           " << r.total_operator_calls << "\n"
       << "total supervisor calls         " << r.total_supervisor_calls << "\n"
       << "mean operator calls            " << r.mean_operator_calls << "\n"
       << "mean supervisor calls          " << r.mean_supervisor_calls << "\n"
       << "supervisor calls per answered  ";
    if (r.mean_supervisor_calls_per_answered) {
        os << *r.mean_supervisor_calls_per_answered;
    } else {
        os << "n/a";
    }
    os << "\n";
    return os.str();
}

// --- Transcript replay ------------------------------------------------------------

inline std::string render_transcript_text(const std::string& jsonl) {
    std::string out;
    for (const auto& line : text::split_lines(jsonl)) {
        if (text::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        out += "--- ";
        if (j.contains("trial")) out += "trial " + std::to_string(j["trial"].get<int>()) + " | ";
        out += "turn " + std::to_string(j.at("iteration").get<int>()) + " | " +
               j.at("role").get<std::string>() + " ---\n";
        out += j.at("text").get<std::string>();
        out += "\n";
    }
    return out;
}

} // namespace r2kg
