#include "oracles.hpp"

#include "rate/error.hpp"
#include "rate/metrics.hpp"

#include <random>

#include <doctest.h>
#include <nlohmann/json.hpp>

using namespace rate;
using namespace rate::metrics;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, bool integral) {
    std::uniform_real_distribution<double> u(0.0, 4.0);
    std::uniform_int_distribution<int> level(0, 4);
    std::vector<double> v(n);
    for (auto& x : v)
        x = integral ? level(rng) : u(rng);
    return v;
}

bool constant(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

ScoreMatrix random_matrix(std::mt19937_64& rng, std::size_t segs, std::size_t systems) {
    ScoreMatrix m;
    for (std::size_t s = 0; s < segs; ++s) {
        m.segments.push_back("s" + std::to_string(s));
        m.metric.push_back(random_vector(rng, systems, rng() % 2));
        m.human.push_back(random_vector(rng, systems, true));
    }
    for (std::size_t k = 0; k < systems; ++k)
        m.systems.push_back("m" + std::to_string(k));
    return m;
}

} // namespace

TEST_CASE("pearson examples") {
    const std::vector<double> x{1, 2, 3, 4};
    std::vector<double> neg;
    for (double v : x)
        neg.push_back(-v);
    CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));
    const std::vector<double> y{1, 3, 2, 5};
    CHECK(std::fabs(pearson(x, y) - static_cast<double>(*oracle::pearson(x, y))) < 1e-12);
}

TEST_CASE("pearson rejects degenerate input") {
    const std::vector<double> c{2, 2, 2};
    const std::vector<double> x{1, 2, 3};
    CHECK_THROWS_AS(pearson(c, x), UndefinedStatistic);
    CHECK_THROWS_AS(pearson(x, c), UndefinedStatistic);
    const std::vector<double> one{1};
    CHECK_THROWS_AS(pearson(one, one), PreconditionError);
    const std::vector<double> two{1, 2};
    CHECK_THROWS_AS(pearson(x, two), PreconditionError);
}

TEST_CASE("average ranks share ties") {
    const std::vector<double> v{10, 20, 20, 40};
    CHECK(average_ranks(v) == std::vector<double>{1, 2.5, 2.5, 4});
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
        const auto r = random_vector(rng, 1 + rng() % 30, true);
        CHECK(average_ranks(r) == oracle::ranks(r));
    }
}

TEST_CASE("spearman examples") {
    const std::vector<double> x{1, 2, 2, 3};
    const std::vector<double> y{10, 20, 20, 40};
    CHECK(spearman(x, y) == doctest::Approx(1.0));
    const std::vector<double> a{0.1, 0.5, 0.9, 3.0};
    std::vector<double> cubed, reversed(a.rbegin(), a.rend());
    for (double v : a)
        cubed.push_back(v * v * v + 7);
    CHECK(spearman(a, cubed) == doctest::Approx(1.0));
    CHECK(spearman(a, reversed) == doctest::Approx(-1.0));
}

TEST_CASE("correlations are symmetric and transform invariant") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 2 + rng() % 40;
        auto x = random_vector(rng, n, t % 2);
        auto y = random_vector(rng, n, t % 3 == 0);
        if (constant(x) || constant(y))
            continue;
        CHECK(pearson(x, y) == doctest::Approx(pearson(y, x)).epsilon(1e-12));
        CHECK(spearman(x, y) == doctest::Approx(spearman(y, x)).epsilon(1e-12));
        std::vector<double> affine, monotone;
        for (double v : x) {
            affine.push_back(3.5 * v - 2.0);
            monotone.push_back(std::exp(v));
        }
        CHECK(pearson(affine, y) == doctest::Approx(pearson(x, y)).epsilon(1e-9));
        CHECK(spearman(monotone, y) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
        const double r = pearson(x, y);
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("system scores are column means") {
    ScoreMatrix one{{"s"}, {"a", "b"}, {{1.0, 3.0}}, {{2.0, 2.0}}};
    CHECK(system_scores(one).metric == std::vector<double>{1.0, 3.0});
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const auto m = random_matrix(rng, 3, 2);
        const auto s = system_scores(m);
        const auto mo = oracle::column_means(m.metric);
        const auto ho = oracle::column_means(m.human);
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(s.metric[j] == doctest::Approx(mo[j]).epsilon(1e-15));
            CHECK(s.human[j] == doctest::Approx(ho[j]).epsilon(1e-15));
        }
    }
}

TEST_CASE("score matrix shape is validated") {
    ScoreMatrix bad{{"s"}, {"a", "b"}, {{1.0, 3.0}}, {{2.0}}};
    CHECK_THROWS_AS(bad.validate(), PreconditionError);
    CHECK_THROWS_AS(system_scores(bad), PreconditionError);
}

TEST_CASE("system pairwise accuracy") {
    const std::vector<double> h{1, 2, 3, 4};
    const std::vector<double> neg{-1, -2, -3, -4};
    CHECK(system_pairwise_accuracy(h, h) == 1.0);
    CHECK(system_pairwise_accuracy(neg, h) == 0.0);
    const std::vector<double> tied{2, 2, 2};
    const std::vector<double> any{1, 2, 3};
    CHECK_THROWS_AS(system_pairwise_accuracy(any, tied), UndefinedStatistic);

    std::mt19937_64 rng(17);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 2 + rng() % 9;
        const auto m = random_vector(rng, n, rng() % 2);
        const auto hu = random_vector(rng, n, true);
        const auto want = oracle::pairwise_accuracy(m, hu);
        if (!want) {
            CHECK_THROWS_AS(system_pairwise_accuracy(m, hu), UndefinedStatistic);
            continue;
        }
        CHECK(system_pairwise_accuracy(m, hu) == *want);
        std::vector<double> squashed;
        for (double v : m)
            squashed.push_back(std::atan(v) * 10 + 1);
        CHECK(system_pairwise_accuracy(squashed, hu) == *want);
    }
}

TEST_CASE("acc-t: perfect metric with mirrored ties") {
    ScoreMatrix m{{"s1", "s2"}, {"a", "b", "c"}, {{1, 1, 3}, {0, 2, 2}}, {{1, 1, 3}, {0, 2, 2}}};
    const auto r = segment_acc_t(m);
    CHECK(r.accuracy == 1.0);
    CHECK(r.epsilon == 0.0);
}

TEST_CASE("acc-t: threshold absorbs small noise on human ties") {
    ScoreMatrix m{{"s1", "s2"}, {"a", "b", "c"}, {{1.0, 1.01, 3.0}, {0.0, 2.0, 1.99}}, {{1, 1, 3}, {0, 2, 2}}};
    const auto r = segment_acc_t(m);
    CHECK(r.accuracy == 1.0);
    CHECK(r.epsilon >= 0.01);
    const auto o = oracle::acc_t(m);
    CHECK(r.accuracy == o.accuracy);
    CHECK(r.epsilon == o.epsilon);
}

TEST_CASE("acc-t matches the exhaustive grid oracle") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 200; ++t) {
        const auto m = random_matrix(rng, 1 + rng() % 6, 2 + rng() % 4);
        const auto got = segment_acc_t(m);
        const auto want = oracle::acc_t(m);
        CHECK(got.accuracy == want.accuracy);
        CHECK(got.epsilon == want.epsilon);
    }
}

TEST_CASE("acc-t needs a pair") {
    ScoreMatrix m{{"s"}, {"a"}, {{1.0}}, {{1.0}}};
    CHECK_THROWS_AS(segment_acc_t(m), UndefinedStatistic);
}

TEST_CASE("segment correlations pool every cell") {
    ScoreMatrix m{{"s1", "s2"}, {"a", "b"}, {{1, 2}, {3, 0}}, {{1, 2}, {3, 0}}};
    auto c = segment_correlations(m);
    CHECK(c.pearson == doctest::Approx(1.0));
    CHECK(c.spearman == doctest::Approx(1.0));
    for (auto& row : m.metric)
        for (auto& v : row)
            v = 2 * v + 3;
    CHECK(segment_correlations(m).pearson == doctest::Approx(1.0));

    std::mt19937_64 rng(29);
    for (int t = 0; t < 50; ++t) {
        const auto r = random_matrix(rng, 4, 3);
        const auto fm = oracle::flatten(r.metric);
        const auto fh = oracle::flatten(r.human);
        if (constant(fm) || constant(fh))
            continue;
        const auto got = segment_correlations(r);
        CHECK(std::fabs(got.pearson - static_cast<double>(*oracle::pearson(fm, fh))) < 1e-12);
        CHECK(std::fabs(got.spearman - static_cast<double>(*oracle::spearman(fm, fh))) < 1e-12);
    }
}

TEST_CASE("meta score") {
    DirectionStats zh{Direction::ZhEn, 97.8, 99.3, 99.7, 61.9, 74.5, 66.4};
    DirectionStats en{Direction::EnZh, 88.9, 97.7, 92.7, 59.5, 65.3, 60.1};
    CHECK(zh.meta() == doctest::Approx((97.8 + 99.3 + 99.7 + 61.9 + 74.5 + 66.4) / 6));
    const std::vector<DirectionStats> both{zh, en};
    CHECK(meta_score(both) == doctest::Approx((zh.meta() + en.meta()) / 2));

    DirectionStats flat{Direction::ZhEn, 42.0, 42.0, 42.0, 42.0, 42.0, 42.0};
    const std::vector<DirectionStats> same{flat, flat};
    CHECK(meta_score(same) == doctest::Approx(42.0));

    DirectionStats missing = zh;
    missing.sys_acc.reset();
    CHECK_THROWS_AS(missing.meta(), PreconditionError);
    const std::vector<DirectionStats> with_gap{zh, missing};
    CHECK_THROWS_AS(meta_score(with_gap), PreconditionError);
}

TEST_CASE("direction stats on a perfect metric are all 100") {
    ScoreMatrix m{{"s1", "s2", "s3"}, {"a", "b", "c"}, {{0, 2, 4}, {1, 1, 3}, {2, 4, 0}}, {}};
    m.human = m.metric;
    const auto s = direction_stats(m);
    for (const auto& v : s.values()) {
        REQUIRE(v.has_value());
        CHECK(*v == doctest::Approx(100.0));
    }
    CHECK(s.meta() == doctest::Approx(100.0));
}

TEST_CASE("direction stats leave undefined statistics empty") {
    ScoreMatrix m{{"s1"}, {"a", "b"}, {{1, 1}}, {{2, 2}}};
    const auto s = direction_stats(m);
    CHECK_FALSE(s.sys_acc.has_value());
    CHECK_FALSE(s.sys_pearson.has_value());
    CHECK(s.seg_acc_t.has_value());
}

TEST_CASE("report serialisation") {
    MetricReport r;
    r.scope = "all";
    r.directions.push_back({Direction::ZhEn, 100, 100, 100, 100, 100, 100});
    r.directions.push_back({Direction::EnZh, 50, 50, 50, 50, 50, std::nullopt});
    const auto j = to_json(r);
    CHECK(j["scope"] == "all");
    CHECK(j["directions"].size() == 2);
    const auto header = report_csv_header();
    const auto row = report_csv_row(r);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
    CHECK(header.rfind("scope,meta,", 0) == 0);
}
