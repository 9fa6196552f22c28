#include "olps/config.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace olps;

namespace {

std::string error_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

std::string error_text(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Toml, ScalarsTablesAndArrays) {
    const auto t = toml::parse(R"(
# comment
title = "a \"quoted\" \u00e9 value" # trailing
literal = 'C:\path'
count = 1_000
neg = -42
pi = 3.14159
small = 1e-4
big = +inf
flag = true

[server]
host.name = "x"
ports = [
  8000,
  8001, # comment inside
]

[server.limits]
mixed = [[1, 2], ["a"]]
point = { x = 1, y = 2.5, tag = "p" }
"quoted key" = false
)");
    EXPECT_EQ(toml::find(t, "title")->as_string(), "a \"quoted\" \xc3\xa9 value");
    EXPECT_EQ(toml::find(t, "literal")->as_string(), "C:\\path");
    EXPECT_EQ(toml::find(t, "count")->as_int(), 1000);
    EXPECT_EQ(toml::find(t, "neg")->as_int(), -42);
    EXPECT_DOUBLE_EQ(toml::find(t, "pi")->as_number(), 3.14159);
    EXPECT_DOUBLE_EQ(toml::find(t, "small")->as_number(), 1e-4);
    EXPECT_TRUE(std::isinf(toml::find(t, "big")->as_number()));
    EXPECT_TRUE(toml::find(t, "flag")->as_bool());
    EXPECT_EQ(toml::find(t, "server.host.name")->as_string(), "x");
    EXPECT_EQ(toml::find(t, "server.ports")->as_array().size(), 2u);
    EXPECT_EQ(toml::find(t, "server.limits.mixed")->as_array()[1].as_array()[0].as_string(), "a");
    EXPECT_DOUBLE_EQ(toml::find(t, "server.limits.point.y")->as_number(), 2.5);
    EXPECT_FALSE(toml::find(t, "server.limits.quoted key")->as_bool());
    EXPECT_EQ(toml::find(t, "server.missing"), nullptr);
}

TEST(Toml, DumpRoundTrips) {
    const auto t = toml::parse(R"(
a = 1
b = "two\nlines"
c = [1.5, 0.1, 1e300]
[d]
e = { f = [true, false] }
[d.g]
h = -0.0
"odd key" = 'x'
)");
    const auto text = toml::dump(t);
    EXPECT_EQ(toml::parse(text), t) << text;
    EXPECT_EQ(toml::dump(toml::parse(text)), text);
}

TEST(Toml, ErrorsCarryLineNumbers) {
    EXPECT_EQ(error_code([] { toml::parse("a = 1\nb = \n"); }), errc::config);
    EXPECT_NE(error_text([] { toml::parse("a = 1\nb = \n"); }).find("line 2"), std::string::npos);
    EXPECT_NE(error_text([] { toml::parse("a = 1\na = 2\n"); }).find("line 2"), std::string::npos);
    EXPECT_NE(error_text([] { toml::parse("x = \"open\n"); }).find("line 1"), std::string::npos);
    EXPECT_EQ(error_code([] { toml::parse("[t]\n[t]\n"); }), errc::config);
    EXPECT_EQ(error_code([] { toml::parse("v = [1, 2\n"); }), errc::config);
}

TEST(Toml, ParseValue) {
    EXPECT_EQ(toml::parse_value("[1, 2]").as_array().size(), 2u);
    EXPECT_EQ(toml::parse_value("0.5").as_number(), 0.5);
    EXPECT_THROW(toml::parse_value("bare"), Error);
    EXPECT_THROW(toml::parse_value("1 2"), Error);
}

TEST(Config, DefaultsResolve) {
    const auto c = load_config(std::nullopt);
    EXPECT_EQ(c.episode_length, 60u);
    EXPECT_EQ(c.universe_size, 20u);
    EXPECT_EQ(c.lookback, 30u);
    EXPECT_EQ(c.env.initial_capital, 100000.0);
    EXPECT_EQ(c.env.reward.kind, RewardKind::daily_net);
    EXPECT_EQ(c.env.reward.scale, 1e-4);
    EXPECT_EQ(c.agent.pg.hidden, (std::vector<std::size_t>{64, 64}));
    EXPECT_EQ(c.agent.pg.gamma, 0.99);
    EXPECT_EQ(c.index.lookback, 252u);
    EXPECT_EQ(c.index.risk_aversion, 1.0);
    EXPECT_EQ(c.index.rebalance_period, std::optional<std::size_t>(21));
    EXPECT_EQ(c.metric_options.annualization_days, 252u);
    EXPECT_EQ(c.seeds.size(), 5u);
    EXPECT_EQ(c.backtest_assets, default_backtest_assets());
    EXPECT_EQ(c.name, "reference_pg_markovian_daily_net");
}

TEST(Config, FileAndOverrides) {
    const auto dir = olps::test::temp_dir("config");
    olps::test::write_file(dir / "c.toml", R"(
[experiment]
seed = 3
cost_rate = 0.001
[reward]
kind = "episodic_sortino"
[agent]
learning_rate = 1   # integer accepted for a float key
)");
    const auto c = load_config(dir / "c.toml", {"experiment.seed=9", "reward.kind=episodic_ror", "train.seeds=[4, 5]",
                                                "backtest.start=2021-06-01", "index.rebalance_period=0"});
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.env.cost_rate, 0.001);
    EXPECT_EQ(c.env.reward.kind, RewardKind::episodic_ror);
    EXPECT_EQ(c.agent.pg.learning_rate, 1.0);
    EXPECT_EQ(c.seeds, (std::vector<std::int64_t>{4, 5}));
    EXPECT_EQ(c.backtest_start, (Date{2021, 6, 1}));
    EXPECT_FALSE(c.index.rebalance_period);
    std::filesystem::remove_all(dir);
}

TEST(Config, UnknownKeysAreUsageErrors) {
    const auto msg = error_text([] { load_config(std::nullopt, {"agent.bogus=1"}); });
    EXPECT_NE(msg.find("agent.bogus"), std::string::npos);
    EXPECT_EQ(error_code([] { load_config(std::nullopt, {"agent.bogus=1"}); }), errc::usage);
    EXPECT_EQ(error_code([] { resolve_config(toml::parse("[agent]\nbogus = 1\n")); }), errc::usage);
    EXPECT_EQ(error_code([] { load_config(std::nullopt, {"no_equals"}); }), errc::usage);
    EXPECT_EQ(error_code([] { load_config(std::nullopt, {"experiment.seed=abc"}); }), errc::usage);
}

TEST(Config, TypeAndRangeErrors) {
    EXPECT_EQ(error_code([] { resolve_config(toml::parse("[experiment]\nseed = \"x\"\n")); }), errc::config);
    EXPECT_EQ(error_code([] { resolve_config(toml::parse("[train]\nseeds = [1, 2, 1]\n")); }), errc::config);
    EXPECT_EQ(error_code([] { resolve_config(toml::parse("[reward]\nkind = \"bogus\"\n")); }), errc::config);
    EXPECT_EQ(error_code([] { resolve_config(toml::parse("[agent]\nconcentration = 0.0\n")); }), errc::config);
    EXPECT_EQ(error_code([] { resolve_config(toml::parse("[agent]\nkind = \"external\"\n")); }), errc::config);
    EXPECT_EQ(error_code([] { resolve_config(toml::parse("[backtest]\nstart = \"2021-13-01\"\n")); }), errc::config);
    EXPECT_EQ(error_code([] { resolve_config(toml::parse("[metrics]\ncvar_alpha = 1.5\n")); }), errc::config);
}

TEST(Config, SearchSpace) {
    const auto c = resolve_config(toml::parse(R"(
[sweep.space]
"agent.learning_rate" = { min = 0.0001, max = 0.1, log = true }
"agent.gamma" = [0.9, 0.99]
"train.episodes" = { min = 10, max = 20, integer = true }
)"));
    ASSERT_EQ(c.space.size(), 3u);
    const auto& gamma = c.space[0];
    EXPECT_EQ(gamma.key, "agent.gamma");
    EXPECT_EQ(gamma.choices.size(), 2u);
    const auto& lr = c.space[1];
    EXPECT_TRUE(lr.log);
    EXPECT_EQ(lr.min, 0.0001);
    EXPECT_TRUE(c.space[2].integer);
    EXPECT_EQ(error_code([] { resolve_config(toml::parse("[sweep.space]\n\"agent.nope\" = [1]\n")); }), errc::config);
}

TEST(Config, SnapshotReloadsToSameConfiguration) {
    const auto c = load_config(std::nullopt, {"experiment.seed=12", "agent.hidden=[8]", "experiment.jobs=4"});
    const auto text = snapshot(c);
    EXPECT_EQ(text.find("jobs"), std::string::npos);
    const auto again = resolve_config(toml::parse(text));
    EXPECT_EQ(snapshot(again), text);
    EXPECT_EQ(again.seed, 12u);
    EXPECT_EQ(again.agent.pg.hidden, (std::vector<std::size_t>{8}));
}
