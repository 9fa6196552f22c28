#include "olps/representations.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace olps;

namespace {

// Straight-line reimplementations: full-length series, textbook recurrences,
// evaluated at the final bar. Independent of indicators::compute's streaming code.
namespace oracle {

std::vector<double> closes(const std::vector<Bar>& w) {
    std::vector<double> c;
    for (const auto& b : w) c.push_back(b.close);
    return c;
}

std::vector<double> ema_series(const std::vector<double>& x, std::size_t n) {
    std::vector<double> out(x.size(), std::nan(""));
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    out[n - 1] = s / static_cast<double>(n);
    const double k = 2.0 / (static_cast<double>(n) + 1.0);
    for (std::size_t i = n; i < x.size(); ++i) out[i] = x[i] * k + out[i - 1] * (1.0 - k);
    return out;
}

double sma_last(const std::vector<double>& x, std::size_t n) {
    double s = 0;
    for (std::size_t i = x.size() - n; i < x.size(); ++i) s += x[i];
    return s / static_cast<double>(n);
}

double rsi(const std::vector<double>& c, std::size_t n) {
    std::vector<double> gains, losses;
    for (std::size_t i = 1; i < c.size(); ++i) {
        gains.push_back(c[i] > c[i - 1] ? c[i] - c[i - 1] : 0.0);
        losses.push_back(c[i] < c[i - 1] ? c[i - 1] - c[i] : 0.0);
    }
    double ag = 0, al = 0;
    for (std::size_t i = 0; i < n; ++i) ag += gains[i], al += losses[i];
    ag /= static_cast<double>(n);
    al /= static_cast<double>(n);
    for (std::size_t i = n; i < gains.size(); ++i) {
        ag = (ag * static_cast<double>(n - 1) + gains[i]) / static_cast<double>(n);
        al = (al * static_cast<double>(n - 1) + losses[i]) / static_cast<double>(n);
    }
    if (al == 0) return ag > 0 ? 100.0 : 50.0;
    const double rs = ag / al;
    return 100.0 * rs / (1.0 + rs);
}

double cci(const std::vector<Bar>& w, std::size_t n) {
    std::vector<double> tp;
    for (const auto& b : w) tp.push_back((b.high + b.low + b.close) / 3.0);
    const double m = sma_last(tp, n);
    double mad = 0;
    for (std::size_t i = tp.size() - n; i < tp.size(); ++i) mad += std::fabs(tp[i] - m);
    mad /= static_cast<double>(n);
    return mad == 0 ? 0.0 : (tp.back() - m) / (0.015 * mad);
}

double dx(const std::vector<Bar>& w, std::size_t n) {
    std::vector<double> tr, pdm, mdm;
    for (std::size_t i = 1; i < w.size(); ++i) {
        const double up = w[i].high - w[i - 1].high, dn = w[i - 1].low - w[i].low;
        pdm.push_back(up > dn && up > 0 ? up : 0);
        mdm.push_back(dn > up && dn > 0 ? dn : 0);
        tr.push_back(std::max(w[i].high - w[i].low,
                              std::max(std::fabs(w[i].high - w[i - 1].close), std::fabs(w[i].low - w[i - 1].close))));
    }
    auto wilder = [n](const std::vector<double>& x) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        for (std::size_t i = n; i < x.size(); ++i) s = s - s / static_cast<double>(n) + x[i];
        return s;
    };
    const double t = wilder(tr);
    if (t <= 0) return 0;
    const double p = 100 * wilder(pdm) / t, m = 100 * wilder(mdm) / t;
    return p + m == 0 ? 0.0 : 100 * std::fabs(p - m) / (p + m);
}

std::array<double, 8> features(const std::vector<Bar>& w) {
    const auto c = closes(w);
    const double last = c.back();
    const double macd = ema_series(c, 12).back() - ema_series(c, 26).back();
    const double m20 = sma_last(c, 20);
    double v = 0;
    for (std::size_t i = c.size() - 20; i < c.size(); ++i) v += (c[i] - m20) * (c[i] - m20);
    const double sd = std::sqrt(v / 20.0);
    return {last / c[c.size() - 2] - 1.0, macd / last,      (m20 + 2 * sd) / last - 1.0, (m20 - 2 * sd) / last - 1.0,
            rsi(c, 14) / 100.0,           cci(w, 20) / 100.0, dx(w, 14) / 100.0,          last / sma_last(c, 30) - 1.0};
}

} // namespace oracle

MarketData constant_market(std::size_t n, std::size_t days) {
    return test::market_from_closes(std::vector<std::vector<double>>(n, std::vector<double>(days, 25.0)));
}

} // namespace

TEST(Markovian, ConstantMarketIsZero) {
    const auto data = constant_market(3, 10);
    const auto obs = build_markovian(normalize(data), 5, test::all_assets(data));
    ASSERT_EQ(obs.shape, std::vector<std::size_t>{15});
    for (double x : obs.values) EXPECT_EQ(x, 0.0);
}

TEST(Markovian, TwentyAssetsGiveHundredValues) {
    const auto data = test::random_market(20, 30, 2);
    const auto obs = build_markovian(normalize(data), 10, test::all_assets(data));
    EXPECT_EQ(obs.values.size(), 100u);
}

TEST(Markovian, SlotsMatchFormula) {
    const auto data = test::market_from_closes({{100, 100, 102}, {50, 51, 50}});
    const auto obs = build_markovian(normalize(data), 2, test::all_assets(data));
    EXPECT_NEAR(obs.values[0 * 5 + kClose], 0.02, 1e-15);
    EXPECT_NEAR(obs.values[1 * 5 + kClose], 50.0 / 51.0 - 1.0, 1e-15);
    EXPECT_EQ(obs.values[0 * 5 + kVolume], 0.0);
}

TEST(Markovian, FirstDayHasNoHistory) {
    const auto data = test::random_market(2, 10, 2);
    EXPECT_THROW(build_markovian(normalize(data), 0, test::all_assets(data)), Error);
}

TEST(Sliding, ConstantMarketIsZeroMatrix) {
    const auto data = constant_market(2, 40);
    const auto obs = build_sliding(normalize(data), 30, test::all_assets(data));
    EXPECT_EQ(obs.shape, (std::vector<std::size_t>{21, 10}));
    for (double x : obs.values) EXPECT_EQ(x, 0.0);
}

TEST(Sliding, LastRowIsMarkovian) {
    const auto data = test::random_market(4, 60, 8);
    const auto norm = normalize(data);
    const auto set = test::all_assets(data);
    const auto s = build_sliding(norm, 40, set);
    const auto m = build_markovian(norm, 40, set);
    EXPECT_TRUE(std::equal(m.values.begin(), m.values.end(), s.values.end() - 20));
}

TEST(Sliding, DataBeforeWindowIsIgnored) {
    std::vector<std::vector<double>> closes{std::vector<double>(40)};
    for (std::size_t t = 0; t < 40; ++t) closes[0][t] = 10.0 + 0.1 * static_cast<double>(t);
    const auto base = test::market_from_closes(closes);
    auto bumped = closes;
    bumped[0][30 - 22] *= 1.5; // feeds normalized rows t-22 and t-21 only
    const auto pm = test::market_from_closes(bumped);
    const auto a = build_sliding(normalize(base), 30, test::all_assets(base));
    const auto b = build_sliding(normalize(pm), 30, test::all_assets(pm));
    EXPECT_EQ(a.values, b.values);
    EXPECT_THROW(build_sliding(normalize(base), 20, test::all_assets(base)), Error);
    EXPECT_NO_THROW(build_sliding(normalize(base), 21, test::all_assets(base)));
}

TEST(Lagged, ConstantMarketIsZeroMatrix) {
    const auto data = constant_market(3, 40);
    const auto obs = build_lagged(normalize(data), 25, test::all_assets(data));
    EXPECT_EQ(obs.shape, (std::vector<std::size_t>{8, 15}));
    for (double x : obs.values) EXPECT_EQ(x, 0.0);
}

TEST(Lagged, SevenDaysAgoIsNotObserved) {
    std::vector<std::vector<double>> closes{std::vector<double>(40)};
    for (std::size_t t = 0; t < 40; ++t) closes[0][t] = 20.0 + std::sin(static_cast<double>(t));
    const auto base = test::market_from_closes(closes);
    auto bumped = closes;
    bumped[0][30 - 7] *= 1.3; // touches normalized rows t-7 and t-6 only
    const auto pm = test::market_from_closes(bumped);
    const auto a = build_lagged(normalize(base), 30, test::all_assets(base));
    const auto b = build_lagged(normalize(pm), 30, test::all_assets(pm));
    EXPECT_EQ(a.values, b.values);
}

TEST(Lagged, RecentRowsMatchSlidingTail) {
    const auto data = test::random_market(3, 60, 4);
    const auto norm = normalize(data);
    const auto set = test::all_assets(data);
    const auto l = build_lagged(norm, 45, set);
    const auto s = build_sliding(norm, 45, set);
    const std::size_t row = 15;
    // lag rows 3..7 are t-4 .. t, the last five sliding rows
    EXPECT_TRUE(std::equal(l.values.begin() + 3 * row, l.values.end(), s.values.end() - 5 * row));
    // deepest lag first
    EXPECT_TRUE(std::equal(l.values.begin(), l.values.begin() + row, s.values.begin()));
}

TEST(Indicators, RisingCloseGivesRsi100) {
    std::vector<Bar> w;
    for (int i = 0; i < 35; ++i) {
        const double c = 10.0 + i;
        w.push_back({c, c + 0.5, c - 0.5, c, 100});
    }
    EXPECT_EQ(indicators::compute(w).rsi, 100.0);
}

TEST(Indicators, ConstantPricesDegenerate) {
    const std::vector<Bar> w(35, Bar{30, 30, 30, 30, 100});
    const auto v = indicators::compute(w);
    EXPECT_EQ(v.change, 0.0);
    EXPECT_EQ(v.macd, 0.0);
    EXPECT_EQ(v.bb_upper, 30.0);
    EXPECT_EQ(v.bb_lower, 30.0);
    EXPECT_EQ(v.cci, 0.0);
    EXPECT_EQ(v.dx, 0.0);
    const auto f = indicators::scale(v, 30.0);
    EXPECT_EQ(f[7], 0.0);
}

TEST(Indicators, MatchStraightLineOracle) {
    const auto data = test::random_market(6, 200, 21, 0.03);
    const auto set = test::all_assets(data);
    for (std::size_t t : {34u, 60u, 120u, 199u}) {
        const auto obs = build_indicators(data, t, set);
        ASSERT_EQ(obs.shape, std::vector<std::size_t>{48});
        for (std::size_t a = 0; a < 6; ++a) {
            const std::vector<Bar> w(data.series(a).bars.begin() + static_cast<std::ptrdiff_t>(t - 34),
                                     data.series(a).bars.begin() + static_cast<std::ptrdiff_t>(t + 1));
            const auto expect = oracle::features(w);
            for (std::size_t f = 0; f < 8; ++f) EXPECT_NEAR(obs.values[a * 8 + f], expect[f], 1e-9) << "feature " << f;
        }
    }
}

TEST(Indicators, InsufficientWarmupIsAnError) {
    const auto data = test::random_market(2, 50, 1);
    EXPECT_THROW(build_indicators(data, 33, test::all_assets(data)), Error);
    EXPECT_NO_THROW(build_indicators(data, 34, test::all_assets(data)));
}

class ShapeContract : public ::testing::TestWithParam<std::size_t> {};

TEST_P(ShapeContract, AllKindsFiniteWithDeclaredShape) {
    const std::size_t n = GetParam();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto data = test::random_market(n, 80, seed, 0.04);
        const auto norm = normalize(data);
        const auto set = test::all_assets(data);
        for (auto kind : {RepresentationKind::markovian, RepresentationKind::sliding, RepresentationKind::lagged,
                          RepresentationKind::indicators}) {
            RepresentationConfig cfg;
            cfg.kind = kind;
            const ObservationBuilder builder(data, norm, cfg);
            const std::size_t t = history_days(cfg);
            const auto obs = builder.build(t, set);
            const auto shape = observation_shape(cfg, n);
            EXPECT_EQ(obs.shape, shape);
            std::size_t count = 1;
            for (auto s : shape) count *= s;
            EXPECT_EQ(obs.values.size(), count);
            EXPECT_TRUE(all_finite(obs.values));
            EXPECT_EQ(obs.date, data.calendar()[t]);
            EXPECT_THROW(builder.build(t - 1, set), Error) << to_string(kind);
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Universe, ShapeContract, ::testing::Values(1, 5, 20));
