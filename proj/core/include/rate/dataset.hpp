#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rate {

using Rational = boost::rational<std::int64_t>;

enum class Domain { SNS, CrossCulture, Poetry, Literature };
enum class Direction { ZhEn, EnZh };

std::string_view to_string(Domain d);
std::string_view to_string(Direction d);
std::optional<Domain> parse_domain(std::string_view s);
std::optional<Direction> parse_direction(std::string_view s);

struct AnnotatorScore {
    std::string annotator_id;
    int score = 0; // SQM level 0..4
};

struct CandidateTranslation {
    std::string system_id;
    std::string text;
    std::vector<AnnotatorScore> annotator_scores;
    std::optional<Rational> human_score;

    /// human_score if present, otherwise the mean of annotator_scores.
    std::optional<Rational> effective_human_score() const;
};

struct SegmentRecord {
    std::string id;
    Domain domain = Domain::SNS;
    Direction direction = Direction::ZhEn;
    std::string source;
    std::optional<std::string> reference;
    std::vector<CandidateTranslation> candidates;

    /// Throws PreconditionError; for reference-based consumers.
    const std::string& require_reference() const;
};

// JSON-lines I/O. Field names are the file contract; unknown keys are ignored.
std::vector<SegmentRecord> load_dataset(const std::filesystem::path& path);
std::vector<SegmentRecord> parse_dataset(std::string_view jsonl);
SegmentRecord segment_from_json(const nlohmann::json& j, std::size_t line);
nlohmann::json to_json(const SegmentRecord& seg);
std::string serialize_dataset(std::span<const SegmentRecord> segments);

/// Exact arithmetic mean of integer SQM ratings.
Rational aggregate_human_score(std::span<const int> annotator_scores);

inline double to_double(const Rational& r) {
    return boost::rational_cast<double>(r);
}

struct PairwiseAgreement {
    std::string annotator_i;
    std::string annotator_j;
    std::optional<double> r; // nullopt when either score vector is constant
};

enum class QcVerdict { Pass, Reannotate };

struct QcResult {
    std::string segment_id;
    std::vector<PairwiseAgreement> pairwise_r;
    QcVerdict verdict = QcVerdict::Reannotate;
};

inline constexpr double kDefaultQcThreshold = 0.7;

/// Pairwise Pearson agreement between the annotators of one segment. Every
/// annotator must have scored every candidate; needs at least two annotators.
QcResult qc_segment(const SegmentRecord& segment, double threshold = kDefaultQcThreshold);

/// annotator id -> (segment id -> per-system score vector)
using Annotations = std::map<std::string, std::map<std::string, std::vector<double>>>;

struct IaaMatrix {
    std::vector<std::string> annotators; // sorted
    std::vector<std::vector<std::optional<double>>> r;
};

/// Pearson of element-wise summed score vectors over each annotator pair's
/// shared segments. Entries are empty when the pair shares no segment or the
/// summed vectors are constant.
IaaMatrix compute_iaa(const Annotations& annotations);

/// Collects per-annotator score vectors (in candidate order) from a dataset.
/// An annotator contributes a segment only if they scored every candidate.
Annotations annotations_from_dataset(std::span<const SegmentRecord> segments);

nlohmann::json to_json(const IaaMatrix& m);

} // namespace rate
