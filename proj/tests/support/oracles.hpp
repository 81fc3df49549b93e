#pragma once

// Independent reference implementations, written the slow and obvious way.

#include "rate/dataset.hpp"
#include "rate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

namespace rate::oracle {

/// Single-pass textbook formula in long double.
inline std::optional<long double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const long double n = static_cast<long double>(x.size());
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const long double a = x[i], b = y[i];
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    const long double vx = n * sxx - sx * sx;
    const long double vy = n * syy - sy * sy;
    if (vx <= 0 || vy <= 0)
        return std::nullopt;
    return (n * sxy - sx * sy) / std::sqrt(vx * vy);
}

/// Rank = 1 + #smaller + (#equal - 1) / 2, counted pairwise.
inline std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double w : v) {
            less += w < v[i];
            equal += w == v[i];
        }
        r[i] = 1.0 + less + (equal - 1.0) / 2.0;
    }
    return r;
}

inline std::optional<long double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

inline int sign(double d) {
    return (d > 0) - (d < 0);
}

/// Enumerates every unordered system pair.
inline std::optional<double> pairwise_accuracy(const std::vector<double>& metric, const std::vector<double>& human) {
    int agree = 0, total = 0;
    for (std::size_t i = 0; i < metric.size(); ++i)
        for (std::size_t j = i + 1; j < metric.size(); ++j) {
            if (human[i] == human[j])
                continue;
            ++total;
            agree += sign(metric[i] - metric[j]) == sign(human[i] - human[j]);
        }
    if (total == 0)
        return std::nullopt;
    return static_cast<double>(agree) / total;
}

struct AccT {
    double accuracy;
    double epsilon;
};

/// Counts concordant same-segment pairs for one threshold.
inline int acc_t_hits(const metrics::ScoreMatrix& m, double eps, int* pairs = nullptr) {
    int hits = 0, n = 0;
    for (std::size_t s = 0; s < m.segments.size(); ++s)
        for (std::size_t i = 0; i < m.systems.size(); ++i)
            for (std::size_t j = i + 1; j < m.systems.size(); ++j) {
                const double dm = m.metric[s][i] - m.metric[s][j];
                const double dh = m.human[s][i] - m.human[s][j];
                ++n;
                if (dh == 0)
                    hits += std::fabs(dm) <= eps;
                else
                    hits += std::fabs(dm) > eps && sign(dm) == sign(dh);
            }
    if (pairs)
        *pairs = n;
    return hits;
}

/// Counts every threshold of the candidate grid (0 plus the midpoints between
/// consecutive distinct |metric delta| values) directly and keeps the
/// smallest best one.
inline AccT acc_t(const metrics::ScoreMatrix& m) {
    std::set<double> deltas;
    for (std::size_t s = 0; s < m.segments.size(); ++s)
        for (std::size_t i = 0; i < m.systems.size(); ++i)
            for (std::size_t j = i + 1; j < m.systems.size(); ++j)
                deltas.insert(std::fabs(m.metric[s][i] - m.metric[s][j]));
    const std::vector<double> d(deltas.begin(), deltas.end());

    std::vector<double> grid{0.0};
    for (std::size_t k = 0; k + 1 < d.size(); ++k)
        grid.push_back((d[k] + d[k + 1]) / 2.0);

    int pairs = 0;
    int best = -1;
    double eps = 0.0;
    for (double e : grid)
        if (const int h = acc_t_hits(m, e, &pairs); h > best) {
            best = h;
            eps = e;
        }
    return {static_cast<double>(best) / pairs, eps};
}

inline std::vector<double> column_means(const std::vector<std::vector<double>>& g) {
    std::vector<double> out(g.front().size(), 0.0);
    for (std::size_t j = 0; j < out.size(); ++j) {
        long double s = 0;
        for (const auto& row : g)
            s += row[j];
        out[j] = static_cast<double>(s / g.size());
    }
    return out;
}

inline std::vector<double> flatten(const std::vector<std::vector<double>>& g) {
    std::vector<double> out;
    for (const auto& row : g)
        out.insert(out.end(), row.begin(), row.end());
    return out;
}

/// Materialises both summed vectors over the shared segments, then Pearson.
inline std::optional<long double> iaa_entry(const Annotations& a, const std::string& i, const std::string& j) {
    std::vector<double> si, sj;
    for (const auto& [seg, vi] : a.at(i)) {
        const auto it = a.at(j).find(seg);
        if (it == a.at(j).end())
            continue;
        if (si.empty()) {
            si.assign(vi.size(), 0.0);
            sj.assign(vi.size(), 0.0);
        }
        for (std::size_t k = 0; k < vi.size(); ++k) {
            si[k] += vi[k];
            sj[k] += it->second[k];
        }
    }
    if (si.empty())
        return std::nullopt;
    return pearson(si, sj);
}

} // namespace rate::oracle
