#pragma once

#include "rate/dataset.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rate::metrics {

/// Sample Pearson correlation. Throws UndefinedStatistic for a constant
/// vector and PreconditionError for mismatched or too short inputs.
double pearson(std::span<const double> x, std::span<const double> y);

/// 1-based fractional ranks; tied values share their mean rank.
std::vector<double> average_ranks(std::span<const double> v);

/// Pearson of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

/// Segment x system scores for one direction (optionally one domain).
struct ScoreMatrix {
    std::vector<std::string> segments;
    std::vector<std::string> systems;
    std::vector<std::vector<double>> metric; // [segment][system]
    std::vector<std::vector<double>> human;  // [segment][system]
    Direction direction = Direction::ZhEn;
    std::optional<Domain> domain;

    /// Throws PreconditionError when the two grids disagree in shape.
    void validate() const;
};

struct SystemScores {
    std::vector<double> metric;
    std::vector<double> human;
};

/// Column-wise means over segments.
SystemScores system_scores(const ScoreMatrix& m);

/// Fraction of system pairs with distinct human scores that the metric orders
/// the same way. Throws UndefinedStatistic when every pair is tied for humans.
double system_pairwise_accuracy(std::span<const double> metric_sys, std::span<const double> human_sys);

struct AccT {
    double accuracy = 0.0;
    double epsilon = 0.0;
};

/// Segment-level pairwise accuracy with an optimised tie threshold on metric
/// differences. Candidate thresholds are 0 and the midpoints between
/// consecutive distinct |metric delta| values; the smallest best one wins.
AccT segment_acc_t(const ScoreMatrix& m);

struct Correlations {
    double pearson = 0.0;
    double spearman = 0.0;
};

/// Pearson/Spearman over all (segment, system) cells pooled together.
Correlations segment_correlations(const ScoreMatrix& m);

/// Six statistics for one translation direction, each scaled by 100.
struct DirectionStats {
    Direction direction = Direction::ZhEn;
    std::optional<double> sys_acc;
    std::optional<double> sys_pearson;
    std::optional<double> sys_spearman;
    std::optional<double> seg_acc_t;
    std::optional<double> seg_pearson;
    std::optional<double> seg_spearman;
    double acc_t_epsilon = 0.0;

    std::vector<std::optional<double>> values() const;
    /// Mean of the six statistics; throws PreconditionError if any is missing.
    double meta() const;
};

/// Mean of every statistic across the given directions.
double meta_score(std::span<const DirectionStats> directions);

/// Computes all six statistics for one matrix. Statistics that are undefined
/// on this input are left empty.
DirectionStats direction_stats(const ScoreMatrix& m);

struct MetricReport {
    std::string scope; // "all" or a domain name
    std::vector<DirectionStats> directions;
    std::optional<double> meta;
    std::size_t excluded_cells = 0;
    std::size_t excluded_segments = 0;
};

nlohmann::json to_json(const DirectionStats& s);
nlohmann::json to_json(const MetricReport& r);

/// CSV header in the column order of the published results table.
std::string report_csv_header();
std::string report_csv_row(const MetricReport& r);

} // namespace rate::metrics
