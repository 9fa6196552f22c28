#include "olps/metrics.hpp"
#include "olps/rewards.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace olps;
using namespace olps::metrics;

namespace {

// Brute force over every ordered (peak, trough) pair.
double mdd_brute(const std::vector<double>& v) {
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i; j < v.size(); ++j) worst = std::min(worst, (v[j] - v[i]) / v[i]);
    return worst;
}

double cvar_sorted(std::vector<double> xs, double alpha) {
    std::sort(xs.begin(), xs.end());
    std::size_t k = 1;
    while (static_cast<double>(k) < alpha * static_cast<double>(xs.size()) - 1e-9) ++k;
    double s = 0;
    for (std::size_t i = 0; i < k; ++i) s += xs[i];
    return s / static_cast<double>(k);
}

} // namespace

TEST(PortfolioReturns, Cases) {
    EXPECT_EQ(portfolio_returns(std::vector<double>{5, 5, 5}), (std::vector<double>{0, 0}));
    EXPECT_EQ(portfolio_returns(std::vector<double>{100, 110, 105}), (std::vector<double>{10, -5}));
    EXPECT_EQ(portfolio_returns(std::vector<double>{100, 110, 105}, 2), (std::vector<double>{5}));
}

TEST(RateOfReturn, Cases) {
    EXPECT_NEAR(rate_of_return(std::vector<double>{100000, 128000}, 1)[0], 0.28, 1e-15);
    EXPECT_EQ(rate_of_return(std::vector<double>{7, 7, 7}), (std::vector<double>{0, 0}));
    const std::vector<double> v{100, 120, 90, 110};
    std::vector<double> scaled;
    for (double x : v) scaled.push_back(10 * x);
    const auto a = rate_of_return(v), b = rate_of_return(scaled);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(Sortino, AllBelowThresholdMatchesHandFormula) {
    const std::vector<double> r{-0.01, -0.01, -0.01, -0.01};
    // mean -0.01, sigma_d = sqrt(4 * 1e-4 / 4) = 0.01 -> -1
    EXPECT_NEAR(sortino(r).value, -1.0, 1e-12);
    const std::vector<double> mixed{0.02, -0.01, 0.03, -0.02};
    // mean 0.005, sigma_d = sqrt((1e-4 + 4e-4) / 4)
    EXPECT_NEAR(sortino(mixed).value, 0.005 / std::sqrt(5e-4 / 4.0), 1e-12);
    EXPECT_NEAR(sortino(mixed, 0, 0, 252).value, 0.005 * 252 / (std::sqrt(5e-4 / 4.0) * std::sqrt(252.0)), 1e-9);
}

TEST(Sortino, NoDownsideIsPositiveInfinitySentinel) {
    const auto s = sortino(std::vector<double>{0.01, 0.02, 0.0});
    EXPECT_EQ(s.sentinel, Sentinel::pos_inf);
    EXPECT_EQ(to_string(s), "inf");
    EXPECT_EQ(sortino(std::vector<double>{0.0, 0.0}).value, 0.0);
    EXPECT_THROW(sortino(std::vector<double>{}), Error);
}

TEST(Sortino, AlternatingIsZero) {
    EXPECT_EQ(sortino(std::vector<double>{1000, -1000, 1000, -1000}).value, 0.0);
}

TEST(MaxDrawdown, Cases) {
    EXPECT_EQ(max_drawdown(std::vector<double>{1, 2, 3, 4}), 0.0);
    EXPECT_EQ(max_drawdown(std::vector<double>{100, 120, 90, 110}), -0.25);
    EXPECT_TRUE(exceeds_drawdown_limit(-0.25));
    EXPECT_FALSE(exceeds_drawdown_limit(-0.189));
}

TEST(MaxDrawdown, PropertiesOnRandomSeries) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0, 0.02);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v{100.0};
        for (int i = 0; i < 60; ++i) v.push_back(v.back() * std::exp(g(rng)));
        const double mdd = max_drawdown(v);
        EXPECT_DOUBLE_EQ(mdd, mdd_brute(v));
        std::vector<double> scaled;
        for (double x : v) scaled.push_back(3.5 * x);
        EXPECT_NEAR(max_drawdown(scaled), mdd, 1e-15);
        EXPECT_LE(mdd, 0.0);
        const bool declines = std::adjacent_find(v.begin(), v.end(), std::greater<double>()) != v.end();
        EXPECT_EQ(mdd < 0.0, declines);
    }
}

TEST(Cvar, MatchesSortOracleExactly) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0, 1500);
    std::vector<double> xs(100);
    for (double& x : xs) x = g(rng);
    const auto est = cvar(xs);
    EXPECT_EQ(est.tail_count, 5u);
    EXPECT_EQ(est.value, cvar_sorted(xs, 0.05));
    EXPECT_FALSE(est.short_series);
}

TEST(Cvar, ConstantSeriesAndShortSeries) {
    EXPECT_EQ(cvar(std::vector<double>(30, -7.5)).value, -7.5);
    const auto est = cvar(std::vector<double>{3, 1, 2});
    EXPECT_TRUE(est.short_series);
    EXPECT_EQ(est.tail_count, 1u);
    EXPECT_EQ(est.value, 1.0);
}

TEST(Cvar, NeverAboveMean) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> xs(1 + trial % 97);
        for (double& x : xs) x = u(rng);
        const double c = cvar(xs).value;
        EXPECT_LE(c, mean(xs) + 1e-15);
        if (xs.size() > 1 && xs.size() * 0.05 < static_cast<double>(xs.size()) - 1) {
            EXPECT_LT(c, mean(xs));
        }
    }
}

TEST(InformationRatio, Cases) {
    const std::vector<double> a{0.01, -0.02, 0.03};
    EXPECT_EQ(information_ratio(a, a).value, 0.0);
    const std::vector<double> pr{2, 0, 2, 0}, zero{0, 0, 0, 0};
    EXPECT_DOUBLE_EQ(information_ratio(pr, zero).value, 1.0);
    const std::vector<double> up{1, 1}, flat{0, 0};
    EXPECT_EQ(information_ratio(up, flat).sentinel, Sentinel::pos_inf);
    EXPECT_EQ(information_ratio(flat, up).sentinel, Sentinel::neg_inf);
    EXPECT_THROW(information_ratio(up, std::vector<double>{1}), Error);
}

TEST(InformationRatio, InvariantUnderCommonShift) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0, 0.01);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p(30), q(30), ps(30), qs(30);
        for (std::size_t i = 0; i < 30; ++i) {
            p[i] = g(rng);
            q[i] = g(rng);
            ps[i] = p[i] + 0.003;
            qs[i] = q[i] + 0.003;
        }
        EXPECT_NEAR(information_ratio(p, q).value, information_ratio(ps, qs).value, 1e-9);
    }
}

TEST(IrQuotient, Cases) {
    EXPECT_EQ(ir_quotient(MetricValue::of(0.07), MetricValue::of(0.07)).value, 1.0);
    EXPECT_DOUBLE_EQ(ir_quotient(MetricValue::of(0.05), MetricValue::of(0.10)).value, 0.5);
    EXPECT_EQ(ir_quotient(MetricValue::of(0.05), MetricValue::of(0.0)).sentinel, Sentinel::undefined);
    EXPECT_DOUBLE_EQ(ir_quotient(MetricValue::of(-0.05), MetricValue::of(0.10)).value, -0.5);
}

TEST(IrTrend, Cases) {
    EXPECT_EQ(ir_trend(std::vector<double>{0.3, 0.3, 0.3}), 0.0);
    std::vector<double> lin;
    for (int t = 0; t < 24; ++t) lin.push_back(0.01 * t);
    EXPECT_NEAR(ir_trend(lin), 0.01, 1e-12);
    EXPECT_THROW(ir_trend(std::vector<double>{0.1}), Error);
}

TEST(IrTrend, ResidualsOrthogonalToTime) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0, 0.1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> y(2 + trial % 30);
        for (double& x : y) x = g(rng);
        const double b = ir_trend(y);
        const double tbar = static_cast<double>(y.size() - 1) / 2.0;
        const double a = mean(y) - b * tbar;
        double ortho = 0;
        for (std::size_t t = 0; t < y.size(); ++t) ortho += (t - tbar) * (y[t] - a - b * static_cast<double>(t));
        EXPECT_NEAR(ortho, 0.0, 1e-9);
    }
}

TEST(MonthlyBuckets, TwoYearsGiveTwentyFourMonths) {
    const std::vector<double> pr(504, 0.001), idx(504, 0.0);
    EXPECT_EQ(monthly_information_ratios(pr, idx).size(), 24u);
    const std::vector<double> pr2(510, 0.001), idx2(510, 0.0);
    EXPECT_EQ(monthly_information_ratios(pr2, idx2).size(), 24u);
}

TEST(Aggregate, MeanAndPopulationStd) {
    const std::vector<MetricValue> same(5, MetricValue::of(0.3));
    EXPECT_EQ(aggregate(same).std, 0.0);
    const std::vector<MetricValue> two{MetricValue::of(1.2), MetricValue::of(1.3)};
    const auto s = aggregate(two);
    EXPECT_NEAR(s.mean, 1.25, 1e-15);
    EXPECT_NEAR(s.std, 0.05, 1e-15);
    const std::vector<MetricValue> with_sentinel{MetricValue::of(1.0), MetricValue::pos_inf(), MetricValue::of(3.0)};
    const auto w = aggregate(with_sentinel);
    EXPECT_EQ(w.mean, 2.0);
    EXPECT_EQ(w.count, 2u);
    EXPECT_EQ(w.excluded, 1u);
}

TEST(Aggregate, ReportCarriesSeedCount) {
    std::vector<SeedMetrics> seeds(5);
    for (std::size_t i = 0; i < 5; ++i) seeds[i].ror = MetricValue::of(0.2 + 0.01 * static_cast<double>(i));
    const auto rep = aggregate_seeds("ppo_default_sortino", seeds);
    EXPECT_EQ(rep.seed_count(), 5u);
    EXPECT_NEAR(rep.summary("ror").mean, 0.22, 1e-15);
}

TEST(Evaluate, CashAgainstRisingIndex) {
    const std::vector<double> cash(22, 100000.0);
    std::vector<double> index{100000.0};
    for (int i = 0; i < 21; ++i) index.push_back(index.back() * (i % 3 == 0 ? 1.002 : 1.0005));
    const auto m = evaluate(cash, index, MetricValue::of(0.1));
    EXPECT_EQ(m.ror.value, 0.0);
    EXPECT_EQ(m.wealth_multiplier.value, 1.0);
    EXPECT_EQ(m.mdd.value, 0.0);
    EXPECT_EQ(m.cvar.value, 0.0);
    ASSERT_TRUE(m.ir.finite());
    EXPECT_LT(m.ir.value, 0.0);
}

TEST(ValueSeriesFile, RoundTripsExactly) {
    ValueSeries s{{Date{2021, 1, 4}, Date{2021, 1, 5}}, {100000.0, 100000.0 * (1.0 + 1.0 / 3.0)}};
    const auto path = std::filesystem::temp_directory_path() / "olps_value_series.csv";
    write_value_series(path, s);
    const auto r = read_value_series(path);
    EXPECT_EQ(r.dates, s.dates);
    EXPECT_EQ(r.values, s.values);
}

// ---------------------------------------------------------------------------

TEST(Rewards, DailyNet) {
    EXPECT_EQ(rewards::daily_net(100000, 101000), 1000.0);
    EXPECT_EQ(rewards::daily_net(100000, 100000), 0.0);
    EXPECT_NEAR(rewards::daily_net(100000, 101000, 1e-4), 0.1, 1e-15);
}

TEST(Rewards, EpisodicValue) {
    EXPECT_EQ(rewards::episodic_value(100000, 128000, false), 0.0);
    EXPECT_EQ(rewards::episodic_value(100000, 128000, true, 1e-4), 28000 * 1e-4);
    EXPECT_EQ(rewards::episodic_value(100000, 100000, true), 0.0);
}

TEST(Rewards, EpisodicRor) {
    EXPECT_NEAR(rewards::episodic_ror(100000, 128000, true), 0.28, 1e-15);
    EXPECT_EQ(rewards::episodic_ror(100000, 128000, true), rewards::episodic_ror(200000, 256000, true));
    EXPECT_EQ(rewards::episodic_ror(100000, 100000, true), 0.0);
    EXPECT_EQ(rewards::episodic_ror(100000, 150000, false), 0.0);
}

TEST(Rewards, EpisodicSortino) {
    EXPECT_EQ(rewards::episodic_sortino(std::vector<double>{10, 20, 5}, true, 1.0, 10.0), 10.0);
    EXPECT_EQ(rewards::episodic_sortino(std::vector<double>{1000, -1000, 1000, -1000}, true), 0.0);
    const std::vector<double> nets{300, -200, 150, -50, 400};
    EXPECT_EQ(rewards::episodic_sortino(nets, true), sortino(nets).value);
    EXPECT_EQ(rewards::episodic_sortino(nets, false), 0.0);
}

TEST(Rewards, DailyNetSumsToEpisodicValue) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0, 0.01);
    std::vector<double> v{100000};
    for (int i = 0; i < 60; ++i) v.push_back(v.back() * (1 + g(rng)));
    double total = 0;
    for (std::size_t i = 1; i < v.size(); ++i) total += rewards::daily_net(v[i - 1], v[i], 1e-4);
    EXPECT_NEAR(total, rewards::episodic_value(v.front(), v.back(), true, 1e-4), 1e-9);
}

TEST(Rewards, SpecValidation) {
    RewardSpec bad{RewardKind::daily_net, 0.0, 10.0};
    EXPECT_THROW(bad.validate(), Error);
    EXPECT_EQ(RewardSpec::of(RewardKind::episodic_sortino).scale, 0.1);
    EXPECT_EQ(parse_reward("ror"), RewardKind::episodic_ror);
    EXPECT_THROW(parse_reward("sharpe"), Error);
}
