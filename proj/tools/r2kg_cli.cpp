#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "r2kg/r2kg.hpp"

namespace {

int cmd_load_kg(const std::string& path, const std::string& format,
                const std::optional<std::string>& out_path,
                const std::optional<std::string>& entity) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        return 1;
    }
    r2kg::KnowledgeGraph g = r2kg::load_graph(in, r2kg::graph_format_from_string(format));
    std::cout << "facts: " << g.size() << "\n";

    if (entity) {
        auto relations = g.relations_of(*entity);
        std::cout << "Relations(" << *entity << "): ";
        if (relations.empty()) {
            std::cout << "NO RESULT";
        } else {
            std::cout << r2kg::text::join(relations, ", ");
        }
        std::cout << "\n";
    }
    if (out_path) {
        std::ofstream out(*out_path, std::ios::binary | std::ios::trunc);
        r2kg::save_graph(out, g);
        std::cout << "wrote " << *out_path << "\n";
    }
    return 0;
}

int cmd_run(const std::string& manifest_path) {
    r2kg::ExperimentManifest manifest = r2kg::load_manifest(manifest_path);
    auto dir = r2kg::run_experiment(manifest);
    std::cout << "run directory: " << dir.string() << "\n";
    std::ifstream report(dir / "report.txt");
    if (report) std::cout << report.rdbuf();
    return 0;
}

int cmd_report(const std::string& run_dir, const std::optional<std::string>& gold,
               bool group_by_kind, const std::optional<std::string>& json_out,
               std::optional<double> min_coverage, std::optional<double> min_hit) {
    std::optional<r2kg::fs::path> gold_path;
    if (gold) gold_path = *gold;
    r2kg::RunReport report = r2kg::build_report(run_dir, gold_path, group_by_kind);
    std::cout << report.table;
    if (json_out) {
        std::ofstream out(*json_out, std::ios::trunc);
        out << report.json.dump(2) << "\n";
    }

    const r2kg::MetricReport& overall = report.rows.front().second;
    if (min_coverage && overall.coverage < *min_coverage) {
        std::cerr << "gate failed: coverage " << overall.coverage << " < " << *min_coverage
                  << "\n";
        return 1;
    }
    if (min_hit && (!overall.hit_rate || *overall.hit_rate < *min_hit)) {
        std::cerr << "gate failed: hit rate below " << *min_hit << "\n";
        return 1;
    }
    return 0;
}

int cmd_replay(const std::string& transcript_path) {
    std::ifstream in(transcript_path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open " << transcript_path << "\n";
        return 1;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    std::cout << r2kg::render_transcript_text(buf.str());
    return 0;
}

int cmd_stats(const std::string& run_dir) {
    std::cout << r2kg::render_call_stats(r2kg::call_stats_from_results(run_dir));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-agent knowledge-graph reasoning harness with abstention"};
    app.require_subcommand(1);

    std::string kg_path, kg_format = "triple-tsv";
    std::optional<std::string> kg_out, kg_entity;
    auto* load_kg = app.add_subcommand("load-kg", "Load a TSV knowledge graph and inspect it");
    load_kg->add_option("path", kg_path, "graph TSV file")->required();
    load_kg->add_option("--format", kg_format, "triple-tsv or quintuple-tsv");
    load_kg->add_option("--out", kg_out, "re-serialize the graph to this path");
    load_kg->add_option("--entity", kg_entity, "print the relation list of this entity");

    std::string manifest_path;
    auto* run = app.add_subcommand("run", "Execute an experiment manifest");
    run->add_option("manifest", manifest_path, "manifest JSON file")->required();

    std::string report_dir;
    std::optional<std::string> report_gold, report_json;
    bool report_group = false;
    std::optional<double> min_coverage, min_hit;
    auto* report = app.add_subcommand("report", "Render metrics for a finished run");
    report->add_option("run_dir", report_dir, "run output directory")->required();
    report->add_option("--gold", report_gold, "gold JSONL (defaults to the run's gold.jsonl)");
    report->add_flag("--group-by-kind", report_group, "add one row per task kind");
    report->add_option("--json", report_json, "also write the report as JSON here");
    report->add_option("--min-coverage", min_coverage, "exit non-zero below this coverage");
    report->add_option("--min-hit", min_hit, "exit non-zero below this hit rate");

    std::string transcript_path;
    auto* replay = app.add_subcommand("replay", "Re-render a transcript JSONL as text");
    replay->add_option("transcript", transcript_path, "transcript JSONL file")->required();

    std::string stats_dir;
    auto* stats = app.add_subcommand("stats", "Operator/Supervisor call statistics for a run");
    stats->add_option("run_dir", stats_dir, "run output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (load_kg->parsed()) return cmd_load_kg(kg_path, kg_format, kg_out, kg_entity);
        if (run->parsed()) return cmd_run(manifest_path);
        if (report->parsed()) {
            return cmd_report(report_dir, report_gold, report_group, report_json, min_coverage,
                              min_hit);
        }
        if (replay->parsed()) return cmd_replay(transcript_path);
        if (stats->parsed()) return cmd_stats(stats_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
