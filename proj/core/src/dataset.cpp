#include "rate/dataset.hpp"

#include "rate/error.hpp"
#include "rate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace rate {

using nlohmann::json;

std::string_view to_string(Domain d) {
    switch (d) {
    case Domain::SNS: return "SNS";
    case Domain::CrossCulture: return "CrossCulture";
    case Domain::Poetry: return "Poetry";
    case Domain::Literature: return "Literature";
    }
    return "?";
}

std::string_view to_string(Direction d) {
    return d == Direction::ZhEn ? "ZhEn" : "EnZh";
}

std::optional<Domain> parse_domain(std::string_view s) {
    for (Domain d : {Domain::SNS, Domain::CrossCulture, Domain::Poetry, Domain::Literature})
        if (to_string(d) == s)
            return d;
    return std::nullopt;
}

std::optional<Direction> parse_direction(std::string_view s) {
    for (Direction d : {Direction::ZhEn, Direction::EnZh})
        if (to_string(d) == s)
            return d;
    return std::nullopt;
}

std::optional<Rational> CandidateTranslation::effective_human_score() const {
    if (human_score)
        return human_score;
    if (annotator_scores.empty())
        return std::nullopt;
    std::vector<int> scores;
    for (const auto& a : annotator_scores)
        scores.push_back(a.score);
    return aggregate_human_score(scores);
}

const std::string& SegmentRecord::require_reference() const {
    if (!reference)
        throw PreconditionError(fmt::format("segment '{}' has no reference translation", id));
    return *reference;
}

Rational aggregate_human_score(std::span<const int> annotator_scores) {
    if (annotator_scores.empty())
        throw PreconditionError("cannot aggregate an empty list of annotator scores");
    std::int64_t sum = 0;
    for (int s : annotator_scores)
        sum += s;
    return Rational(sum, static_cast<std::int64_t>(annotator_scores.size()));
}

namespace {

const json& require(const json& j, const char* key, std::size_t line) {
    const auto it = j.find(key);
    if (it == j.end())
        throw SchemaError(line, key, "missing");
    return *it;
}

std::string require_string(const json& j, const char* key, std::size_t line) {
    const auto& v = require(j, key, line);
    if (!v.is_string())
        throw SchemaError(line, key, "expected a string");
    return v.get<std::string>();
}

// Accepts a JSON number or a "p/q" string.
Rational parse_rational(const json& v, std::size_t line, const std::string& field) {
    if (v.is_number_integer())
        return Rational(v.get<std::int64_t>());
    if (v.is_number_float()) {
        // smallest denominator that reproduces the float; means of up to 64 ratings
        const double d = v.get<double>();
        for (std::int64_t den = 1; den <= 64; ++den) {
            const double n = d * static_cast<double>(den);
            if (std::abs(n - std::round(n)) < 1e-9)
                return Rational(static_cast<std::int64_t>(std::llround(n)), den);
        }
        throw SchemaError(line, field, fmt::format("cannot represent {} as an exact rational; write it as \"p/q\"", d));
    }
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        const auto slash = s.find('/');
        try {
            if (slash == std::string::npos)
                return Rational(std::stoll(s));
            return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
        } catch (const std::exception&) {
            throw SchemaError(line, field, "malformed rational '" + s + "'");
        }
    }
    throw SchemaError(line, field, "expected a number");
}

json rational_to_json(const Rational& r) {
    if (r.denominator() == 1)
        return r.numerator();
    return fmt::format("{}/{}", r.numerator(), r.denominator());
}

CandidateTranslation candidate_from_json(const json& j, std::size_t line, std::size_t index) {
    const auto prefix = fmt::format("candidates[{}].", index);
    if (!j.is_object())
        throw SchemaError(line, fmt::format("candidates[{}]", index), "expected an object");

    CandidateTranslation c;
    auto str = [&](const char* key) {
        const auto it = j.find(key);
        if (it == j.end())
            throw SchemaError(line, prefix + key, "missing");
        if (!it->is_string())
            throw SchemaError(line, prefix + key, "expected a string");
        return it->get<std::string>();
    };
    c.system_id = str("system_id");
    c.text = str("text");

    if (const auto it = j.find("annotator_scores"); it != j.end() && !it->is_null()) {
        if (!it->is_array())
            throw SchemaError(line, prefix + "annotator_scores", "expected an array");
        for (const auto& entry : *it) {
            if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() || !entry[1].is_number_integer())
                throw SchemaError(line, prefix + "annotator_scores", "expected [annotator_id, integer score]");
            const int score = entry[1].get<int>();
            if (score < 0 || score > 4)
                throw SchemaError(line, prefix + "annotator_scores",
                                  fmt::format("score {} outside 0..4", score));
            c.annotator_scores.push_back({entry[0].get<std::string>(), score});
        }
    }

    if (const auto it = j.find("human_score"); it != j.end() && !it->is_null()) {
        c.human_score = parse_rational(*it, line, prefix + "human_score");
        if (*c.human_score < 0 || *c.human_score > 4)
            throw SchemaError(line, prefix + "human_score", "outside 0..4");
        if (!c.annotator_scores.empty()) {
            std::vector<int> scores;
            for (const auto& a : c.annotator_scores)
                scores.push_back(a.score);
            if (aggregate_human_score(scores) != *c.human_score)
                throw SchemaError(line, prefix + "human_score", "does not equal the mean of annotator_scores");
        }
    }
    return c;
}

} // namespace

SegmentRecord segment_from_json(const json& j, std::size_t line) {
    if (!j.is_object())
        throw SchemaError(line, "<root>", "expected a JSON object");
    SegmentRecord seg;
    seg.id = require_string(j, "id", line);
    if (seg.id.empty())
        throw SchemaError(line, "id", "empty");

    const auto domain = parse_domain(require_string(j, "domain", line));
    if (!domain)
        throw SchemaError(line, "domain", "expected one of SNS, CrossCulture, Poetry, Literature");
    seg.domain = *domain;

    const auto direction = parse_direction(require_string(j, "direction", line));
    if (!direction)
        throw SchemaError(line, "direction", "expected ZhEn or EnZh");
    seg.direction = *direction;

    seg.source = require_string(j, "source", line);

    if (const auto it = j.find("reference"); it != j.end() && !it->is_null()) {
        if (!it->is_string())
            throw SchemaError(line, "reference", "expected a string or null");
        seg.reference = it->get<std::string>();
    }

    const auto& cands = require(j, "candidates", line);
    if (!cands.is_array())
        throw SchemaError(line, "candidates", "expected an array");
    if (cands.empty())
        throw SchemaError(line, "candidates", "must not be empty");
    for (std::size_t i = 0; i < cands.size(); ++i)
        seg.candidates.push_back(candidate_from_json(cands[i], line, i));
    return seg;
}

json to_json(const SegmentRecord& seg) {
    json j;
    j["id"] = seg.id;
    j["domain"] = to_string(seg.domain);
    j["direction"] = to_string(seg.direction);
    j["source"] = seg.source;
    j["reference"] = seg.reference ? json(*seg.reference) : json(nullptr);
    j["candidates"] = json::array();
    for (const auto& c : seg.candidates) {
        json cj;
        cj["system_id"] = c.system_id;
        cj["text"] = c.text;
        cj["annotator_scores"] = json::array();
        for (const auto& a : c.annotator_scores)
            cj["annotator_scores"].push_back(json::array({a.annotator_id, a.score}));
        cj["human_score"] = c.human_score ? rational_to_json(*c.human_score) : json(nullptr);
        j["candidates"].push_back(std::move(cj));
    }
    return j;
}

std::vector<SegmentRecord> parse_dataset(std::string_view jsonl) {
    std::vector<SegmentRecord> out;
    std::set<std::string> seen;
    std::istringstream in{std::string(jsonl)};
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); }))
            continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw SchemaError(line, "<root>", std::string("invalid JSON: ") + e.what());
        }
        auto seg = segment_from_json(j, line);
        if (!seen.insert(seg.id).second)
            throw SchemaError(line, "id", "duplicate segment id '" + seg.id + "'");
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<SegmentRecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open dataset file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    if (in.bad())
        throw Error("failed reading dataset file " + path.string());
    return parse_dataset(buffer.str());
}

std::string serialize_dataset(std::span<const SegmentRecord> segments) {
    std::string out;
    for (const auto& s : segments) {
        out += to_json(s).dump();
        out += '\n';
    }
    return out;
}

QcResult qc_segment(const SegmentRecord& segment, double threshold) {
    // annotator -> per-candidate scores, in candidate order
    std::map<std::string, std::vector<double>> vectors;
    for (std::size_t c = 0; c < segment.candidates.size(); ++c) {
        for (const auto& a : segment.candidates[c].annotator_scores) {
            auto& v = vectors[a.annotator_id];
            if (v.size() != c)
                throw PreconditionError(fmt::format("segment '{}': annotator '{}' scored candidate {} twice or skipped one",
                                                    segment.id, a.annotator_id, c));
            v.push_back(a.score);
        }
    }
    for (const auto& [id, v] : vectors)
        if (v.size() != segment.candidates.size())
            throw PreconditionError(fmt::format("segment '{}': annotator '{}' did not score every candidate",
                                                segment.id, id));
    if (vectors.size() < 2)
        throw PreconditionError(fmt::format("segment '{}' needs at least two annotators for QC", segment.id));

    QcResult out;
    out.segment_id = segment.id;
    bool all_pass = true;
    for (auto i = vectors.begin(); i != vectors.end(); ++i) {
        for (auto j = std::next(i); j != vectors.end(); ++j) {
            PairwiseAgreement p{i->first, j->first, std::nullopt};
            try {
                p.r = metrics::pearson(i->second, j->second);
            } catch (const UndefinedStatistic&) {
            }
            if (!p.r || *p.r < threshold)
                all_pass = false;
            out.pairwise_r.push_back(std::move(p));
        }
    }
    out.verdict = all_pass ? QcVerdict::Pass : QcVerdict::Reannotate;
    return out;
}

IaaMatrix compute_iaa(const Annotations& annotations) {
    IaaMatrix out;
    for (const auto& [id, _] : annotations)
        out.annotators.push_back(id);
    const auto n = out.annotators.size();
    out.r.assign(n, std::vector<std::optional<double>>(n));

    // vector length must agree per segment across annotators
    std::map<std::string, std::size_t> width;
    for (const auto& [annotator, segs] : annotations) {
        for (const auto& [seg, v] : segs) {
            const auto [it, inserted] = width.emplace(seg, v.size());
            if (!inserted && it->second != v.size())
                throw PreconditionError(fmt::format("segment '{}': annotator '{}' has a {}-dim vector, expected {}",
                                                    seg, annotator, v.size(), it->second));
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = annotations.at(out.annotators[i]);
        for (std::size_t j = i; j < n; ++j) {
            const auto& b = annotations.at(out.annotators[j]);
            std::vector<double> sum_a, sum_b;
            bool any = false;
            for (const auto& [seg, va] : a) {
                const auto it = b.find(seg);
                if (it == b.end())
                    continue;
                if (!any) {
                    sum_a.assign(va.size(), 0.0);
                    sum_b.assign(va.size(), 0.0);
                    any = true;
                } else if (va.size() != sum_a.size()) {
                    throw PreconditionError("shared segments carry score vectors of different lengths");
                }
                for (std::size_t k = 0; k < va.size(); ++k) {
                    sum_a[k] += va[k];
                    sum_b[k] += it->second[k];
                }
            }
            if (!any)
                continue;
            try {
                const double r = metrics::pearson(sum_a, sum_b);
                out.r[i][j] = r;
                out.r[j][i] = r;
            } catch (const UndefinedStatistic&) {
            } catch (const PreconditionError&) {
            }
        }
    }
    return out;
}

Annotations annotations_from_dataset(std::span<const SegmentRecord> segments) {
    Annotations out;
    for (const auto& seg : segments) {
        std::map<std::string, std::vector<double>> vectors;
        std::map<std::string, std::size_t> counts;
        for (std::size_t c = 0; c < seg.candidates.size(); ++c) {
            for (const auto& a : seg.candidates[c].annotator_scores) {
                auto& v = vectors[a.annotator_id];
                v.resize(seg.candidates.size(), 0.0);
                v[c] = a.score;
                ++counts[a.annotator_id];
            }
        }
        for (auto& [id, v] : vectors)
            if (counts[id] == seg.candidates.size())
                out[id][seg.id] = std::move(v);
    }
    return out;
}

json to_json(const IaaMatrix& m) {
    json j;
    j["annotators"] = m.annotators;
    j["matrix"] = json::array();
    for (const auto& row : m.r) {
        json jr = json::array();
        for (const auto& cell : row)
            jr.push_back(cell ? json(*cell) : json(nullptr));
        j["matrix"].push_back(std::move(jr));
    }
    return j;
}

} // namespace rate
