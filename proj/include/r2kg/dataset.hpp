#pragma once

#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "r2kg/text.hpp"

namespace r2kg {

enum class TaskKind { boolean_task, single_label, multi_label };

inline std::string_view to_string(TaskKind k) {
    switch (k) {
        case TaskKind::boolean_task: return "boolean";
        case TaskKind::single_label: return "single_label";
        default: return "multi_label";
    }
}

inline TaskKind task_kind_from_string(std::string_view s) {
    if (s == "boolean") return TaskKind::boolean_task;
    if (s == "single_label") return TaskKind::single_label;
    if (s == "multi_label") return TaskKind::multi_label;
    throw std::invalid_argument("unknown task kind: " + std::string(s));
}

struct DatasetSample {
    std::string id;
    std::string query;
    std::vector<std::string> topic_entities;
    std::vector<std::string> gold_labels;
    TaskKind kind = TaskKind::multi_label;
};

struct IngestResult {
    std::vector<DatasetSample> samples;
    std::size_t bad_lines = 0;
    std::vector<std::string> errors; // "line N: why", capped
};

class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string canonical_boolean(const std::string& raw) {
    std::string folded = text::normalize_label(raw);
    if (folded == "true") return "True";
    if (folded == "false") return "False";
    throw std::invalid_argument("boolean label must be True or False, got '" + raw + "'");
}

inline void check_sample(DatasetSample& s) {
    if (s.id.empty()) throw std::invalid_argument("missing sample id");
    if (text::trim(s.query).empty()) throw std::invalid_argument("empty question");
    if (s.topic_entities.empty()) throw std::invalid_argument("no topic entities");
    for (const auto& e : s.topic_entities) {
        if (text::trim(e).empty()) throw std::invalid_argument("empty topic entity");
    }
    if (s.gold_labels.empty()) throw std::invalid_argument("no gold labels");
    if (s.kind == TaskKind::boolean_task) {
        if (s.gold_labels.size() != 1) {
            throw std::invalid_argument("boolean sample must carry exactly one label");
        }
        s.gold_labels[0] = canonical_boolean(s.gold_labels[0]);
    }
}

inline DatasetSample parse_generic_jsonl(const nlohmann::json& j) {
    DatasetSample s;
    s.id = j.at("id").get<std::string>();
    s.query = j.at("question").get<std::string>();
    s.topic_entities = j.at("entities").get<std::vector<std::string>>();
    s.gold_labels = j.at("labels").get<std::vector<std::string>>();
    s.kind = task_kind_from_string(j.at("kind").get<std::string>());
    return s;
}

// MetaQA test lines: "who directed [Some Movie]\tanswer|answer|answer"
inline DatasetSample parse_metaqa_line(const std::string& line, std::size_t line_no) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::invalid_argument("expected question<TAB>answers");
    std::string question = line.substr(0, tab);
    auto open = question.find('[');
    auto close = question.find(']', open == std::string::npos ? 0 : open);
    if (open == std::string::npos || close == std::string::npos || close <= open + 1) {
        throw std::invalid_argument("no [topic entity] in question");
    }
    DatasetSample s;
    s.id = "metaqa-" + std::to_string(line_no);
    s.query = question;
    s.topic_entities = {question.substr(open + 1, close - open - 1)};
    for (const auto& part : text::split(line.substr(tab + 1), '|')) {
        std::string label = text::trim(part);
        if (!label.empty()) s.gold_labels.push_back(std::move(label));
    }
    s.kind = TaskKind::multi_label;
    return s;
}

inline DatasetSample parse_factkg_jsonl(const nlohmann::json& j) {
    DatasetSample s;
    s.id = j.at("id").get<std::string>();
    s.query = j.at("claim").get<std::string>();
    s.topic_entities = j.at("entities").get<std::vector<std::string>>();
    s.gold_labels = {j.at("label").get<bool>() ? "True" : "False"};
    s.kind = TaskKind::boolean_task;
    return s;
}

inline DatasetSample parse_cron_jsonl(const nlohmann::json& j) {
    DatasetSample s;
    s.id = j.at("id").get<std::string>();
    s.query = j.at("question").get<std::string>();
    s.topic_entities = j.at("entities").get<std::vector<std::string>>();
    s.gold_labels = j.at("labels").get<std::vector<std::string>>();
    s.kind = s.gold_labels.size() == 1 ? TaskKind::single_label : TaskKind::multi_label;
    return s;
}

} // namespace detail

// Normalizes one of the supported on-disk layouts into DatasetSample records.
// Bad lines are reported individually; more than 10% of them aborts the whole
// ingest, a sign the adapter does not match the file.
inline IngestResult ingest(const std::string& adapter_id, std::istream& in) {
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    std::size_t content_lines = 0;

    auto record_error = [&](const std::string& why) {
        ++result.bad_lines;
        if (result.errors.size() < 50) {
            result.errors.push_back("line " + std::to_string(line_no) + ": " + why);
        }
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        ++content_lines;
        try {
            DatasetSample s;
            if (adapter_id == "generic-jsonl") {
                s = detail::parse_generic_jsonl(nlohmann::json::parse(line));
            } else if (adapter_id == "metaqa-style") {
                s = detail::parse_metaqa_line(line, line_no);
            } else if (adapter_id == "factkg-style") {
                s = detail::parse_factkg_jsonl(nlohmann::json::parse(line));
            } else if (adapter_id == "cron-style") {
                s = detail::parse_cron_jsonl(nlohmann::json::parse(line));
            } else {
                throw IngestError("unknown dataset adapter: " + adapter_id);
            }
            detail::check_sample(s);
            result.samples.push_back(std::move(s));
        } catch (const IngestError&) {
            throw;
        } catch (const std::exception& e) {
            record_error(e.what());
        }
    }

    if (content_lines > 0 && result.bad_lines * 10 > content_lines) {
        std::ostringstream os;
        os << "ingest aborted: " << result.bad_lines << " of " << content_lines
           << " lines failed to parse (adapter " << adapter_id << ")";
        for (const auto& e : result.errors) os << "\n  " << e;
        throw IngestError(os.str());
    }
    return result;
}

inline IngestResult ingest_file(const std::string& adapter_id, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open dataset file: " + path);
    return ingest(adapter_id, in);
}

} // namespace r2kg
