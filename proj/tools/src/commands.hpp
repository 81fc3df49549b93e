#pragma once

#include "rate/gateway.hpp"
#include "rate/metrics.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rate::cli {

enum class MetricKind { Rate, GembaDa, GembaMqm };

std::string_view to_string(MetricKind m);
std::optional<MetricKind> parse_metric(std::string_view s);

/// Bad flags, config files or inputs; the CLI exits non-zero on these.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct RunConfig {
    std::filesystem::path dataset;
    MetricKind metric = MetricKind::Rate;
    bool no_search = false;
    bool no_compare = false;
    int max_rounds = 10;
    int reinit_budget = 2;
    GatewayConfig gateway;
    std::optional<std::filesystem::path> fixtures;        // scripted mode when set
    std::optional<std::filesystem::path> record_fixtures; // live mode: write replayable fixtures
    std::filesystem::path out_dir = ".";
    int parallel = 1;

    void validate() const;
};

/// Flat "key = value" document; '#' starts a comment. Unknown keys are errors.
std::map<std::string, std::string> parse_config_text(std::string_view text);

/// Applies key/value settings (from a file or from flags) onto `config`.
void apply_settings(RunConfig& config, const std::map<std::string, std::string>& settings);

/// Parses a comma-separated ablation list such as "no_search,no_compare".
void apply_ablation(RunConfig& config, std::string_view list);

struct EvaluateSummary {
    std::size_t scored = 0;
    std::size_t failed = 0;
};

/// Writes scores.jsonl (and trajectories.jsonl for the agentic metric) to
/// config.out_dir. Per-candidate failures are recorded, not thrown.
EvaluateSummary cmd_evaluate(const RunConfig& config);

struct ScoreEntry {
    std::optional<double> score;
    bool failed = false;
};

/// (segment id, system id) -> score line
using ScoreTable = std::map<std::pair<std::string, std::string>, ScoreEntry>;

ScoreTable load_scores(const std::filesystem::path& path);

/// Builds one report per scope ("all" plus each domain present).
std::vector<metrics::MetricReport> build_reports(std::span<const SegmentRecord> dataset, const ScoreTable& scores);

/// Writes report.json and report.csv to out_dir.
std::vector<metrics::MetricReport> cmd_meta(const std::filesystem::path& scores, const std::filesystem::path& dataset,
                                            const std::filesystem::path& out_dir);

/// Reads either a dataset file (JSON-lines) or a .json annotation map
/// {annotator: {segment: [scores...]}} and writes iaa.json to out_dir.
IaaMatrix cmd_iaa(const std::filesystem::path& annotations, const std::filesystem::path& out_dir);

/// Entry point shared by the binary and tests. Returns the process exit code.
int run(int argc, const char* const* argv);

} // namespace rate::cli
