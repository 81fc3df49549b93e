#include "commands.hpp"

#include "rate/baselines.hpp"
#include "rate/orchestrator.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace rate::cli {

using nlohmann::json;

std::string_view to_string(MetricKind m) {
    switch (m) {
    case MetricKind::Rate: return "rate";
    case MetricKind::GembaDa: return "gemba_da";
    case MetricKind::GembaMqm: return "gemba_mqm";
    }
    return "rate";
}

std::optional<MetricKind> parse_metric(std::string_view s) {
    for (auto m : {MetricKind::Rate, MetricKind::GembaDa, MetricKind::GembaMqm})
        if (to_string(m) == s)
            return m;
    return std::nullopt;
}

void RunConfig::validate() const {
    if (dataset.empty())
        throw ConfigError("no dataset given (--dataset)");
    if (max_rounds < 1)
        throw ConfigError("max_rounds must be at least 1");
    if (reinit_budget < 0)
        throw ConfigError("reinit_budget must be non-negative");
    if (parallel < 1)
        throw ConfigError("parallel must be at least 1");
    if ((no_search || no_compare) && metric != MetricKind::Rate)
        throw ConfigError("ablation flags only apply to --metric rate");
    if (!fixtures) {
        if (gateway.llm_endpoint.empty())
            throw ConfigError("live mode needs llm.endpoint (or pass --fixtures for scripted mode)");
        if (metric == MetricKind::Rate && !no_search && gateway.search_endpoint.empty())
            throw ConfigError("live mode needs search.endpoint unless no_search is set");
    }
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const int n = std::stoi(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{} expects an integer, got '{}'", key, v));
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{} expects a number, got '{}'", key, v));
    }
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("cannot write " + p.string());
    out << content;
}

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string{};
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    for (std::size_t w = 0; w < count; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
                fn(i);
        });
    for (auto& t : pool)
        t.join();
}

std::string score_line(const std::string& segment, const std::string& system, const std::optional<double>& score) {
    nlohmann::ordered_json j;
    j["segment_id"] = segment;
    j["system_id"] = system;
    j["score"] = score ? nlohmann::ordered_json(*score) : nlohmann::ordered_json(nullptr);
    j["failed"] = !score.has_value();
    return j.dump();
}

} // namespace

std::map<std::string, std::string> parse_config_text(std::string_view text) {
    std::map<std::string, std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const auto t = trim(line);
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(fmt::format("config line {}: expected key = value", n));
        out[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
    }
    return out;
}

void apply_ablation(RunConfig& config, std::string_view list) {
    std::string item;
    std::istringstream in{std::string(list)};
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty() || item == "none")
            continue;
        if (item == "no_search")
            config.no_search = true;
        else if (item == "no_compare")
            config.no_compare = true;
        else
            throw ConfigError("unknown ablation '" + item + "' (expected no_search, no_compare)");
    }
}

void apply_settings(RunConfig& config, const std::map<std::string, std::string>& settings) {
    for (const auto& [key, value] : settings) {
        if (key == "dataset")
            config.dataset = value;
        else if (key == "metric") {
            const auto m = parse_metric(value);
            if (!m)
                throw ConfigError("unknown metric '" + value + "' (expected rate, gemba_da, gemba_mqm)");
            config.metric = *m;
        } else if (key == "ablation")
            apply_ablation(config, value);
        else if (key == "max_rounds")
            config.max_rounds = to_int(key, value);
        else if (key == "reinit_budget")
            config.reinit_budget = to_int(key, value);
        else if (key == "fixtures")
            config.fixtures = value;
        else if (key == "record_fixtures")
            config.record_fixtures = value;
        else if (key == "out")
            config.out_dir = value;
        else if (key == "parallel")
            config.parallel = to_int(key, value);
        else if (key == "llm.endpoint")
            config.gateway.llm_endpoint = value;
        else if (key == "llm.model")
            config.gateway.llm_model = value;
        else if (key == "llm.max_output")
            config.gateway.max_output = to_int(key, value);
        else if (key == "search.endpoint")
            config.gateway.search_endpoint = value;
        else if (key == "gateway.timeout_s")
            config.gateway.timeout_s = to_double(key, value);
        else if (key == "gateway.retries")
            config.gateway.retries = to_int(key, value);
        else if (key == "gateway.backoff_ms")
            config.gateway.initial_backoff = std::chrono::milliseconds(to_int(key, value));
        else
            throw ConfigError("unknown config key '" + key + "'");
    }
}

EvaluateSummary cmd_evaluate(const RunConfig& config) {
    config.validate();
    const auto dataset = load_dataset(config.dataset);
    std::filesystem::create_directories(config.out_dir);

    std::shared_ptr<ChatGateway> chat;
    std::shared_ptr<SearchGateway> search;
    std::shared_ptr<FixtureRecorder> recorder;
    if (config.fixtures) {
        auto f = load_fixtures(*config.fixtures);
        chat = std::make_shared<ScriptedChatGateway>(std::move(f.chat));
        search = std::make_shared<ScriptedSearchGateway>(std::move(f.search));
    } else {
        auto gw = config.gateway;
        gw.llm_api_key = env_or_empty("LLM_API_KEY");
        gw.search_api_key = env_or_empty("SEARCH_API_KEY");
        const RetryPolicy policy{gw.retries, gw.initial_backoff, 2.0};
        chat = std::make_shared<RetryingChatGateway>(std::make_shared<HttpChatGateway>(gw), policy);
        search = std::make_shared<RetryingSearchGateway>(std::make_shared<HttpSearchGateway>(gw), policy);
        if (config.record_fixtures) {
            recorder = std::make_shared<FixtureRecorder>();
            chat = std::make_shared<RecordingChatGateway>(chat, recorder);
            search = std::make_shared<RecordingSearchGateway>(search, recorder);
        }
    }

    const SamplingOptions sampling{0.0, config.gateway.max_output};
    const AgentRuntime rt{*chat, *search, sampling};

    // one slot per segment, written in dataset order afterwards
    std::vector<std::vector<std::optional<double>>> scores(dataset.size());
    std::vector<std::vector<Trajectory>> trajectories(dataset.size());

    if (config.metric == MetricKind::Rate) {
        OrchestratorConfig oc;
        oc.max_rounds = config.max_rounds;
        oc.reinit_budget = config.reinit_budget;
        oc.no_search = config.no_search;
        oc.no_compare = config.no_compare;
        oc.sampling = sampling;
        const Orchestrator orchestrator(rt, oc);
        parallel_for(dataset.size(), config.parallel, [&](std::size_t i) {
            auto r = orchestrator.evaluate_segment(dataset[i]);
            scores[i] = std::move(r.scores);
            trajectories[i] = std::move(r.trajectories);
        });
    } else {
        const baselines::GembaDa da(*chat, sampling);
        const baselines::GembaMqm mqm(*chat, sampling);
        parallel_for(dataset.size(), config.parallel, [&](std::size_t i) {
            const auto& seg = dataset[i];
            for (const auto& c : seg.candidates) {
                std::optional<double> s;
                try {
                    s = config.metric == MetricKind::GembaDa
                            ? static_cast<double>(da.score(seg.direction, seg.source, c.text).value)
                            : mqm.score(seg.direction, seg.source, c.text);
                } catch (const Error& e) {
                    std::cerr << fmt::format("{} / {}: {}\n", seg.id, c.system_id, e.what());
                }
                scores[i].push_back(s);
            }
        });
    }

    EvaluateSummary summary;
    {
        JsonlSink sink(config.out_dir / "scores.jsonl");
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            for (std::size_t c = 0; c < dataset[i].candidates.size(); ++c) {
                const auto& s = scores[i][c];
                sink.append_line(score_line(dataset[i].id, dataset[i].candidates[c].system_id, s));
                ++(s ? summary.scored : summary.failed);
            }
        }
    }
    if (config.metric == MetricKind::Rate) {
        JsonlSink sink(config.out_dir / "trajectories.jsonl");
        for (const auto& seg : trajectories)
            for (const auto& t : seg)
                sink.append(to_json(t));
    }
    if (recorder)
        write_file(*config.record_fixtures, serialize_fixtures(recorder->fixtures()));
    return summary;
}

ScoreTable load_scores(const std::filesystem::path& path) {
    ScoreTable table;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty())
            continue;
        try {
            const auto j = json::parse(line);
            ScoreEntry e;
            e.failed = j.value("failed", false);
            if (const auto it = j.find("score"); it != j.end() && !it->is_null())
                e.score = it->get<double>();
            if (!e.failed && !e.score)
                throw SchemaError(n, "score", "missing for a candidate not marked failed");
            const auto key = std::pair{j.at("segment_id").get<std::string>(), j.at("system_id").get<std::string>()};
            if (!table.emplace(key, e).second)
                throw SchemaError(n, "segment_id", "duplicate score for " + key.first + " / " + key.second);
        } catch (const json::exception& e) {
            throw SchemaError(n, "<root>", e.what());
        }
    }
    return table;
}

namespace {

struct MatrixBuild {
    metrics::ScoreMatrix matrix;
    std::size_t excluded_cells = 0;
    std::size_t excluded_segments = 0;
};

MatrixBuild build_matrix(std::span<const SegmentRecord> dataset, const ScoreTable& scores, Direction direction,
                         std::optional<Domain> domain) {
    MatrixBuild b;
    b.matrix.direction = direction;
    b.matrix.domain = domain;
    bool systems_fixed = false;
    for (const auto& seg : dataset) {
        if (seg.direction != direction || (domain && seg.domain != *domain))
            continue;
        if (!systems_fixed) {
            for (const auto& c : seg.candidates)
                b.matrix.systems.push_back(c.system_id);
            systems_fixed = true;
        }
        if (seg.candidates.size() != b.matrix.systems.size())
            throw ConfigError(fmt::format("segment '{}' has {} systems, expected {}", seg.id, seg.candidates.size(),
                                          b.matrix.systems.size()));

        std::vector<double> metric_row(b.matrix.systems.size()), human_row(b.matrix.systems.size());
        std::size_t failed_here = 0;
        for (std::size_t k = 0; k < b.matrix.systems.size(); ++k) {
            const auto& sys = b.matrix.systems[k];
            const auto cand = std::find_if(seg.candidates.begin(), seg.candidates.end(),
                                           [&](const CandidateTranslation& c) { return c.system_id == sys; });
            if (cand == seg.candidates.end())
                throw ConfigError(fmt::format("segment '{}' lacks system '{}'", seg.id, sys));
            const auto entry = scores.find({seg.id, sys});
            if (entry == scores.end())
                throw ConfigError(fmt::format("no score for segment '{}' system '{}'", seg.id, sys));
            const auto human = cand->effective_human_score();
            if (!human)
                throw ConfigError(fmt::format("segment '{}' system '{}' has no human score", seg.id, sys));
            if (entry->second.failed || !entry->second.score) {
                ++failed_here;
                continue;
            }
            metric_row[k] = *entry->second.score;
            human_row[k] = rate::to_double(*human);
        }
        if (failed_here > 0) {
            b.excluded_cells += failed_here;
            ++b.excluded_segments;
            continue;
        }
        b.matrix.segments.push_back(seg.id);
        b.matrix.metric.push_back(std::move(metric_row));
        b.matrix.human.push_back(std::move(human_row));
    }
    return b;
}

metrics::MetricReport report_for(std::span<const SegmentRecord> dataset, const ScoreTable& scores,
                                 std::optional<Domain> domain) {
    metrics::MetricReport r;
    r.scope = domain ? std::string(to_string(*domain)) : std::string("all");
    for (Direction d : {Direction::ZhEn, Direction::EnZh}) {
        const bool present = std::any_of(dataset.begin(), dataset.end(), [&](const SegmentRecord& s) {
            return s.direction == d && (!domain || s.domain == *domain);
        });
        if (!present)
            continue;
        auto b = build_matrix(dataset, scores, d, domain);
        r.excluded_cells += b.excluded_cells;
        r.excluded_segments += b.excluded_segments;
        r.directions.push_back(metrics::direction_stats(b.matrix));
    }
    try {
        if (!r.directions.empty())
            r.meta = metrics::meta_score(r.directions);
    } catch (const PreconditionError&) {
        r.meta.reset();
    }
    return r;
}

} // namespace

std::vector<metrics::MetricReport> build_reports(std::span<const SegmentRecord> dataset, const ScoreTable& scores) {
    for (const auto& [key, _] : scores) {
        const bool known = std::any_of(dataset.begin(), dataset.end(), [&](const SegmentRecord& s) {
            return s.id == key.first && std::any_of(s.candidates.begin(), s.candidates.end(),
                                                    [&](const CandidateTranslation& c) { return c.system_id == key.second; });
        });
        if (!known)
            throw ConfigError(fmt::format("score for unknown segment/system '{}' / '{}'", key.first, key.second));
    }

    std::vector<metrics::MetricReport> out;
    out.push_back(report_for(dataset, scores, std::nullopt));
    for (Domain d : {Domain::SNS, Domain::CrossCulture, Domain::Poetry, Domain::Literature}) {
        if (std::any_of(dataset.begin(), dataset.end(), [&](const SegmentRecord& s) { return s.domain == d; }))
            out.push_back(report_for(dataset, scores, d));
    }
    return out;
}

std::vector<metrics::MetricReport> cmd_meta(const std::filesystem::path& scores, const std::filesystem::path& dataset,
                                            const std::filesystem::path& out_dir) {
    const auto data = load_dataset(dataset);
    const auto table = load_scores(scores);
    auto reports = build_reports(data, table);

    std::filesystem::create_directories(out_dir);
    json j;
    j["reports"] = json::array();
    for (const auto& r : reports)
        j["reports"].push_back(metrics::to_json(r));
    write_file(out_dir / "report.json", j.dump(2) + "\n");

    std::string csv = metrics::report_csv_header() + "\n";
    for (const auto& r : reports)
        csv += metrics::report_csv_row(r) + "\n";
    write_file(out_dir / "report.csv", csv);
    return reports;
}

IaaMatrix cmd_iaa(const std::filesystem::path& annotations, const std::filesystem::path& out_dir) {
    Annotations ann;
    if (annotations.extension() == ".json") {
        try {
            const auto j = json::parse(read_file(annotations));
            ann = j.get<Annotations>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("annotation map: ") + e.what());
        }
    } else {
        ann = annotations_from_dataset(load_dataset(annotations));
    }
    auto m = compute_iaa(ann);
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "iaa.json", to_json(m).dump(2) + "\n");
    return m;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Reflective agentic translation evaluation and meta-evaluation"};
    app.require_subcommand(1);

    RunConfig config;
    std::string config_file, metric, ablation, dataset, fixtures, record, out = ".";
    int max_rounds = 0, parallel = 0;

    auto* eval = app.add_subcommand("evaluate", "Score every candidate of a dataset");
    eval->add_option("--config", config_file, "Flat key = value config file");
    auto* o_dataset = eval->add_option("--dataset", dataset, "Dataset (JSON-lines)");
    auto* o_metric = eval->add_option("--metric", metric, "rate | gemba_da | gemba_mqm");
    auto* o_ablation = eval->add_option("--ablation", ablation, "Comma list of no_search, no_compare");
    auto* o_rounds = eval->add_option("--max-rounds", max_rounds, "Core Agent round limit");
    auto* o_fixtures = eval->add_option("--fixtures", fixtures, "Replay fixtures instead of live services");
    auto* o_record = eval->add_option("--record-fixtures", record, "Write replay fixtures of a live run");
    auto* o_out = eval->add_option("--out", out, "Output directory");
    auto* o_parallel = eval->add_option("--parallel", parallel, "Concurrent segment evaluations");

    std::string scores_path, meta_dataset, meta_out = ".";
    auto* meta = app.add_subcommand("meta", "Meta-evaluate scores against human judgements");
    meta->add_option("--scores", scores_path, "scores.jsonl")->required();
    meta->add_option("--dataset", meta_dataset, "Dataset (JSON-lines)")->required();
    meta->add_option("--out", meta_out, "Output directory");

    std::string ann_path, iaa_out = ".";
    auto* iaa = app.add_subcommand("iaa", "Inter-annotator agreement heatmap matrix");
    iaa->add_option("--annotations", ann_path, "Dataset (JSON-lines) or annotation map (.json)")->required();
    iaa->add_option("--out", iaa_out, "Output directory");

    std::string qc_dataset;
    double qc_threshold = kDefaultQcThreshold;
    auto* qc = app.add_subcommand("qc", "Per-segment annotator agreement check");
    qc->add_option("--dataset", qc_dataset, "Dataset (JSON-lines)")->required();
    qc->add_option("--threshold", qc_threshold, "Minimum pairwise Pearson r");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*eval) {
            if (!config_file.empty())
                apply_settings(config, parse_config_text(read_file(config_file)));
            std::map<std::string, std::string> flags;
            if (*o_dataset) flags["dataset"] = dataset;
            if (*o_metric) flags["metric"] = metric;
            if (*o_rounds) flags["max_rounds"] = std::to_string(max_rounds);
            if (*o_fixtures) flags["fixtures"] = fixtures;
            if (*o_record) flags["record_fixtures"] = record;
            if (*o_out) flags["out"] = out;
            if (*o_parallel) flags["parallel"] = std::to_string(parallel);
            apply_settings(config, flags);
            if (*o_ablation) {
                config.no_search = config.no_compare = false;
                apply_ablation(config, ablation);
            }
            const auto s = cmd_evaluate(config);
            std::cout << fmt::format("scored {} candidates, {} failed; outputs in {}\n", s.scored, s.failed,
                                     config.out_dir.string());
        } else if (*meta) {
            for (const auto& r : cmd_meta(scores_path, meta_dataset, meta_out))
                std::cout << fmt::format("{}: meta {}\n", r.scope, r.meta ? fmt::format("{:.1f}", *r.meta) : "n/a");
        } else if (*iaa) {
            const auto m = cmd_iaa(ann_path, iaa_out);
            std::cout << fmt::format("{} annotators; matrix written to {}\n", m.annotators.size(),
                                     (std::filesystem::path(iaa_out) / "iaa.json").string());
        } else if (*qc) {
            int reannotate = 0;
            for (const auto& seg : load_dataset(qc_dataset)) {
                const auto r = qc_segment(seg, qc_threshold);
                if (r.verdict == QcVerdict::Reannotate) {
                    ++reannotate;
                    std::cout << seg.id << ": reannotate\n";
                }
            }
            std::cout << fmt::format("{} segment(s) flagged\n", reannotate);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace rate::cli
