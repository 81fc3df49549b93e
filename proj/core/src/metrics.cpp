#include "rate/metrics.hpp"

#include "rate/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace rate::metrics {

namespace {

void require_paired(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw PreconditionError(fmt::format("correlation inputs differ in length ({} vs {})", x.size(), y.size()));
    if (x.size() < 2)
        throw PreconditionError("correlation needs at least two observations");
}

int sign(double v) {
    return (v > 0.0) - (v < 0.0);
}

} // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
    require_paired(x, y);
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    const bool x_const = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    const bool y_const = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (x_const || y_const || sxx == 0.0 || syy == 0.0)
        throw UndefinedStatistic("Pearson correlation is undefined for a constant vector");

    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });

    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]])
            ++j;
        // positions i..j (0-based) share ranks i+1..j+1
        const double mean_rank = (static_cast<double>(i + j) / 2.0) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    require_paired(x, y);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

void ScoreMatrix::validate() const {
    if (metric.size() != segments.size() || human.size() != segments.size())
        throw PreconditionError("score matrix row count does not match segment list");
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (metric[s].size() != systems.size() || human[s].size() != systems.size())
            throw PreconditionError(fmt::format("score matrix row '{}' does not match system list", segments[s]));
    }
}

SystemScores system_scores(const ScoreMatrix& m) {
    m.validate();
    SystemScores out{std::vector<double>(m.systems.size(), 0.0), std::vector<double>(m.systems.size(), 0.0)};
    if (m.segments.empty())
        return out;
    for (std::size_t s = 0; s < m.segments.size(); ++s) {
        for (std::size_t k = 0; k < m.systems.size(); ++k) {
            out.metric[k] += m.metric[s][k];
            out.human[k] += m.human[s][k];
        }
    }
    const auto n = static_cast<double>(m.segments.size());
    for (std::size_t k = 0; k < m.systems.size(); ++k) {
        out.metric[k] /= n;
        out.human[k] /= n;
    }
    return out;
}

double system_pairwise_accuracy(std::span<const double> metric_sys, std::span<const double> human_sys) {
    require_paired(metric_sys, human_sys);
    std::size_t agree = 0, total = 0;
    for (std::size_t i = 0; i < metric_sys.size(); ++i) {
        for (std::size_t j = i + 1; j < metric_sys.size(); ++j) {
            const int h = sign(human_sys[i] - human_sys[j]);
            if (h == 0)
                continue;
            ++total;
            if (sign(metric_sys[i] - metric_sys[j]) == h)
                ++agree;
        }
    }
    if (total == 0)
        throw UndefinedStatistic("every system pair is tied under human scores");
    return static_cast<double>(agree) / static_cast<double>(total);
}

AccT segment_acc_t(const ScoreMatrix& m) {
    m.validate();

    struct Pair {
        double gap;     // |metric delta|
        bool human_tie;
        bool agrees;    // human delta != 0 and metric delta has the same sign
    };
    std::vector<Pair> pairs;
    for (std::size_t s = 0; s < m.segments.size(); ++s) {
        const auto& mr = m.metric[s];
        const auto& hr = m.human[s];
        for (std::size_t i = 0; i < m.systems.size(); ++i) {
            for (std::size_t j = i + 1; j < m.systems.size(); ++j) {
                const double md = mr[i] - mr[j];
                const int h = sign(hr[i] - hr[j]);
                pairs.push_back({std::fabs(md), h == 0, h != 0 && sign(md) == h});
            }
        }
    }
    if (pairs.empty())
        throw UndefinedStatistic("Acc-t needs at least one same-segment system pair");

    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.gap < b.gap; });

    std::vector<double> gaps;
    gaps.reserve(pairs.size());
    for (const auto& p : pairs)
        if (gaps.empty() || gaps.back() != p.gap)
            gaps.push_back(p.gap);

    std::vector<double> candidates{0.0};
    for (std::size_t t = 0; t + 1 < gaps.size(); ++t)
        candidates.push_back((gaps[t] + gaps[t + 1]) / 2.0);

    const auto agree_total = static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(), [](const Pair& p) { return p.agrees; }));

    std::size_t cursor = 0, ties_within = 0, agree_within = 0;
    std::size_t best_count = 0;
    double best_eps = 0.0;
    bool have_best = false;
    for (double eps : candidates) {
        while (cursor < pairs.size() && pairs[cursor].gap <= eps) {
            ties_within += pairs[cursor].human_tie ? 1 : 0;
            agree_within += pairs[cursor].agrees ? 1 : 0;
            ++cursor;
        }
        const std::size_t count = ties_within + (agree_total - agree_within);
        if (!have_best || count > best_count) {
            best_count = count;
            best_eps = eps;
            have_best = true;
        }
    }
    return {static_cast<double>(best_count) / static_cast<double>(pairs.size()), best_eps};
}

Correlations segment_correlations(const ScoreMatrix& m) {
    m.validate();
    std::vector<double> metric, human;
    for (std::size_t s = 0; s < m.segments.size(); ++s) {
        metric.insert(metric.end(), m.metric[s].begin(), m.metric[s].end());
        human.insert(human.end(), m.human[s].begin(), m.human[s].end());
    }
    return {pearson(metric, human), spearman(metric, human)};
}

std::vector<std::optional<double>> DirectionStats::values() const {
    return {sys_acc, sys_pearson, sys_spearman, seg_acc_t, seg_pearson, seg_spearman};
}

double DirectionStats::meta() const {
    const auto v = values();
    double sum = 0.0;
    for (const auto& s : v) {
        if (!s)
            throw PreconditionError(fmt::format("missing statistic for direction {}", to_string(direction)));
        sum += *s;
    }
    return sum / static_cast<double>(v.size());
}

double meta_score(std::span<const DirectionStats> directions) {
    if (directions.empty())
        throw PreconditionError("meta score needs at least one direction");
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& d : directions) {
        for (const auto& s : d.values()) {
            if (!s)
                throw PreconditionError(fmt::format("missing statistic for direction {}", to_string(d.direction)));
            sum += *s;
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

DirectionStats direction_stats(const ScoreMatrix& m) {
    m.validate();
    DirectionStats out;
    out.direction = m.direction;

    auto scaled = [](auto&& fn) -> std::optional<double> {
        try {
            return 100.0 * fn();
        } catch (const UndefinedStatistic&) {
            return std::nullopt;
        } catch (const PreconditionError&) {
            return std::nullopt;
        }
    };

    if (!m.segments.empty()) {
        const auto sys = system_scores(m);
        out.sys_acc = scaled([&] { return system_pairwise_accuracy(sys.metric, sys.human); });
        out.sys_pearson = scaled([&] { return pearson(sys.metric, sys.human); });
        out.sys_spearman = scaled([&] { return spearman(sys.metric, sys.human); });
        out.seg_acc_t = scaled([&] {
            const auto r = segment_acc_t(m);
            out.acc_t_epsilon = r.epsilon;
            return r.accuracy;
        });
        out.seg_pearson = scaled([&] { return segment_correlations(m).pearson; });
        out.seg_spearman = scaled([&] { return segment_correlations(m).spearman; });
    }
    return out;
}

nlohmann::json to_json(const DirectionStats& s) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j;
    j["direction"] = to_string(s.direction);
    j["sys_acc"] = opt(s.sys_acc);
    j["sys_pearson"] = opt(s.sys_pearson);
    j["sys_spearman"] = opt(s.sys_spearman);
    j["seg_acc_t"] = opt(s.seg_acc_t);
    j["seg_acc_t_epsilon"] = s.acc_t_epsilon;
    j["seg_pearson"] = opt(s.seg_pearson);
    j["seg_spearman"] = opt(s.seg_spearman);
    const auto v = s.values();
    const bool complete = std::all_of(v.begin(), v.end(), [](const auto& x) { return x.has_value(); });
    j["meta"] = complete ? nlohmann::json(s.meta()) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json j;
    j["scope"] = r.scope;
    j["directions"] = nlohmann::json::array();
    for (const auto& d : r.directions)
        j["directions"].push_back(to_json(d));
    j["meta"] = r.meta ? nlohmann::json(*r.meta) : nlohmann::json(nullptr);
    j["excluded_cells"] = r.excluded_cells;
    j["excluded_segments"] = r.excluded_segments;
    return j;
}

std::string report_csv_header() {
    std::string h = "scope,meta";
    for (const char* dir : {"zh_en", "en_zh"})
        for (const char* col : {"sys_acc", "sys_pearson", "sys_spearman", "seg_acc_t", "seg_pearson", "seg_spearman"})
            h += fmt::format(",{}_{}", dir, col);
    return h;
}

std::string report_csv_row(const MetricReport& r) {
    auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string{}; };
    std::string row = r.scope + "," + cell(r.meta);
    for (Direction dir : {Direction::ZhEn, Direction::EnZh}) {
        const auto it = std::find_if(r.directions.begin(), r.directions.end(),
                                     [&](const DirectionStats& d) { return d.direction == dir; });
        for (std::size_t k = 0; k < 6; ++k)
            row += "," + (it == r.directions.end() ? std::string{} : cell(it->values()[k]));
    }
    return row;
}

} // namespace rate::metrics
