#pragma once

#include "olps/agents.hpp"
#include "olps/baselines.hpp"
#include "olps/environment.hpp"
#include "olps/market_data.hpp"
#include "olps/metrics.hpp"
#include "olps/toml.hpp"

#include <optional>
#include <string>
#include <vector>

namespace olps {

/// Tickers of the default backtest universe.
inline const std::vector<std::string>& default_backtest_assets() {
    static const std::vector<std::string> ids{"AAPL", "UNH", "ALLE", "JPM", "XOM",  "MSFT", "JNJ",  "AME", "BAC", "CVX",
                                              "GOOG", "PFE", "BA",   "WFC", "NEE",  "AMZN", "ABBV", "CAT", "MS",  "COP"};
    return ids;
}

// ---------------------------------------------------------------------------
// Schema

enum class FieldType { boolean, integer, number, string, integers, numbers, strings, date, optional_date, optional_number, space };

struct Field {
    std::string key;
    FieldType type;
    toml::Value fallback; // ignored for optional and space fields
    std::string help;
};

inline const std::vector<Field>& schema() {
    using toml::Array;
    using toml::Value;
    auto strings = [](const std::vector<std::string>& xs) {
        Array a;
        for (const auto& x : xs) a.emplace_back(x);
        return Value(a);
    };
    static const std::vector<Field> fields{
        {"experiment.name", FieldType::string, "", "combination name used in reports; empty derives agent_representation_reward"},
        {"experiment.seed", FieldType::integer, 0, "master seed"},
        {"experiment.episode_length", FieldType::integer, 60, "trading days per training/validation episode"},
        {"experiment.universe_size", FieldType::integer, 20, "assets per episode"},
        {"experiment.validation_episodes", FieldType::integer, 5, "validation windows"},
        {"experiment.lookback", FieldType::integer, 30, "guard days kept free of training dates before validation and backtest"},
        {"experiment.initial_capital", FieldType::number, 100000.0, "starting portfolio value"},
        {"experiment.cost_rate", FieldType::number, 0.0, "proportional transaction cost"},
        {"experiment.projection", FieldType::string, "softmax", "softmax | clip | strict"},
        {"experiment.jobs", FieldType::integer, 0, "worker threads; 0 = logical cores"},

        {"data.dir", FieldType::string, "data", "OHLCV directory (one CSV per asset, optional manifest.json)"},
        {"data.columns.date", FieldType::string, "date", ""},
        {"data.columns.open", FieldType::string, "open", ""},
        {"data.columns.high", FieldType::string, "high", ""},
        {"data.columns.low", FieldType::string, "low", ""},
        {"data.columns.close", FieldType::string, "close", ""},
        {"data.columns.volume", FieldType::string, "volume", ""},

        {"synth.assets", FieldType::integer, 20, "number of synthetic assets"},
        {"synth.ids", FieldType::strings, Array{}, "asset ids; empty uses the backtest tickers, then S000.."},
        {"synth.start", FieldType::date, "2016-01-04", "first synthetic date"},
        {"synth.end", FieldType::date, "2022-12-30", "last synthetic date (weekdays only)"},
        {"synth.drift", FieldType::number, 0.0003, "daily log drift"},
        {"synth.volatility", FieldType::number, 0.015, "daily volatility"},
        {"synth.correlation", FieldType::number, 0.3, "pairwise correlation of daily shocks"},
        {"synth.drifting_assets", FieldType::integer, 0, "leading assets that use drifting_drift and zero volatility"},
        {"synth.drifting_drift", FieldType::number, 0.001, "daily log drift of the drifting assets"},

        {"representation.kind", FieldType::string, "markovian", "markovian | sliding | lagged | indicators"},
        {"representation.window", FieldType::integer, 21, "sliding window length"},
        {"representation.lags", FieldType::integers, Array{20, 15, 10, 4, 3, 2, 1, 0}, "lag offsets, emitted in this order"},

        {"reward.kind", FieldType::string, "daily_net", "daily_net | episodic_value | episodic_ror | episodic_sortino"},
        {"reward.scale", FieldType::optional_number, {}, "reward multiplier; default depends on kind"},
        {"reward.sortino_cap", FieldType::number, 10.0, "reward used when an episode has no downside"},

        {"agent.kind", FieldType::string, "reference_pg", "reference_pg | external | cash | uniform | buy_and_hold | random | mvo"},
        {"agent.command", FieldType::strings, Array{}, "external agent argv"},
        {"agent.timeout", FieldType::number, 30.0, "external agent per-message timeout, seconds"},
        {"agent.hidden", FieldType::integers, Array{64, 64}, "hidden layer sizes"},
        {"agent.learning_rate", FieldType::number, 1.0, "gradient ascent step size"},
        {"agent.gamma", FieldType::number, 0.99, "discount"},
        {"agent.concentration", FieldType::number, 50.0, "Dirichlet concentration while training"},
        {"agent.max_grad_norm", FieldType::number, 10.0, "gradient clipping; 0 disables"},
        {"agent.baseline", FieldType::string, "trajectory_mean", "trajectory_mean | running_mean"},
        {"agent.baseline_decay", FieldType::number, 0.9, "running_mean decay"},

        {"train.seeds", FieldType::integers, Array{1, 2, 3, 4, 5}, "agent seeds (distinct)"},
        {"train.episodes", FieldType::integer, 500, "training episodes per seed"},
        {"train.checkpoint_every", FieldType::integer, 50, "episodes between validation checkpoints"},

        {"sweep.trials", FieldType::integer, 100, "random-search trials"},
        {"sweep.episodes", FieldType::integer, 500, "training episodes per trial"},
        {"sweep.space", FieldType::space, {}, "config key -> [choices] or {min, max, log, integer}"},

        {"backtest.start", FieldType::date, "2021-01-04", "first backtest date"},
        {"backtest.end", FieldType::optional_date, {}, "last backtest date; default end of data"},
        {"backtest.assets", FieldType::strings, strings(default_backtest_assets()), "fixed backtest universe"},

        {"index.lookback", FieldType::integer, 252, "MVO estimation window"},
        {"index.risk_aversion", FieldType::number, 1.0, "MVO lambda"},
        {"index.rebalance_period", FieldType::integer, 21, "MVO rebalance interval; 0 never rebalances"},
        {"index.ridge", FieldType::number, 1e-6, "covariance ridge, times trace/N"},

        {"metrics.cvar_alpha", FieldType::number, 0.05, ""},
        {"metrics.annualization_days", FieldType::integer, 252, "Sortino annualization; 1 disables"},
        {"metrics.month_days", FieldType::integer, 21, "IR bucket length"},
        {"metrics.risk_free_rate", FieldType::number, 0.0, "daily"},
        {"metrics.threshold", FieldType::number, 0.0, "Sortino downside threshold"},
    };
    return fields;
}

inline const Field* find_field(std::string_view key) {
    for (const auto& f : schema())
        if (f.key == key) return &f;
    return nullptr;
}

namespace detail {

inline bool is_optional(FieldType t) {
    return t == FieldType::optional_date || t == FieldType::optional_number || t == FieldType::space;
}

/// Checks `v` against the field type, converting integers to floats where a float is expected.
inline toml::Value coerce(const Field& f, toml::Value v) {
    auto bad = [&](const std::string& want) {
        return Error(errc::config, "key '" + f.key + "' expects " + want + ", got " + toml::type_name(v));
    };
    auto array_of = [&](auto check, const std::string& want, bool to_float) {
        if (!v.is_array()) throw bad(want);
        toml::Array out;
        for (const auto& x : v.as_array()) {
            if (!check(x)) throw bad(want);
            out.push_back(to_float ? toml::Value(x.as_number()) : x);
        }
        return toml::Value(std::move(out));
    };
    switch (f.type) {
    case FieldType::boolean:
        if (!v.is_bool()) throw bad("a boolean");
        return v;
    case FieldType::integer:
        if (!v.is_int()) throw bad("an integer");
        return v;
    case FieldType::number:
    case FieldType::optional_number:
        if (!v.is_number()) throw bad("a number");
        return toml::Value(v.as_number());
    case FieldType::string:
        if (!v.is_string()) throw bad("a string");
        return v;
    case FieldType::date:
    case FieldType::optional_date:
        if (!v.is_string()) throw bad("a YYYY-MM-DD string");
        try {
            Date::parse(v.as_string());
        } catch (const Error&) {
            throw Error(errc::config, "key '" + f.key + "': invalid date '" + v.as_string() + "'");
        }
        return v;
    case FieldType::integers: return array_of([](const toml::Value& x) { return x.is_int(); }, "an array of integers", false);
    case FieldType::numbers: return array_of([](const toml::Value& x) { return x.is_number(); }, "an array of numbers", true);
    case FieldType::strings: return array_of([](const toml::Value& x) { return x.is_string(); }, "an array of strings", false);
    case FieldType::space:
        if (!v.is_table()) throw bad("a table");
        return v;
    }
    return v;
}

inline void flatten(const toml::Table& t, const std::string& prefix, std::vector<std::pair<std::string, toml::Value>>& out) {
    for (const auto& [k, v] : t) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_table() && key != "sweep.space")
            flatten(v.as_table(), key, out);
        else
            out.emplace_back(key, v);
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Typed configuration

struct SearchDimension {
    std::string key;
    std::vector<toml::Value> choices; // non-empty for categorical dimensions
    double min = 0.0, max = 0.0;
    bool log = false;
    bool integer = false;
};

struct SynthConfig {
    std::size_t assets = 20;
    std::vector<std::string> ids;
    Date start, end;
    double drift = 0.0, volatility = 0.0, correlation = 0.0;
    std::size_t drifting_assets = 0;
    double drifting_drift = 0.0;
};

struct AgentConfig {
    std::string kind = "reference_pg";
    std::vector<std::string> command;
    double timeout = 30.0;
    PgConfig pg;
};

struct ExperimentConfig {
    toml::Table table; // fully resolved, defaults included
    std::string name;
    std::uint64_t seed = 0;
    std::size_t episode_length = 60;
    std::size_t universe_size = 20;
    std::size_t validation_episodes = 5;
    std::size_t lookback = 30;
    std::size_t jobs = 0;
    EnvironmentConfig env;
    std::filesystem::path data_dir;
    ColumnMap columns;
    SynthConfig synth;
    AgentConfig agent;
    std::vector<std::int64_t> seeds;
    std::size_t train_episodes = 500;
    std::size_t checkpoint_every = 50;
    std::size_t sweep_trials = 100;
    std::size_t sweep_episodes = 500;
    std::vector<SearchDimension> space;
    Date backtest_start;
    std::optional<Date> backtest_end;
    std::vector<std::string> backtest_assets;
    MvoConfig index;
    metrics::MetricOptions metric_options;
};

namespace detail {

inline std::size_t count(const toml::Table& t, const char* key, std::int64_t min = 0) {
    const auto v = toml::find(t, key)->as_int();
    if (v < min) throw Error(errc::config, std::string("key '") + key + "' must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
}
inline double number(const toml::Table& t, const char* key) { return toml::find(t, key)->as_number(); }
inline const std::string& text(const toml::Table& t, const char* key) { return toml::find(t, key)->as_string(); }
inline std::vector<std::string> texts(const toml::Table& t, const char* key) {
    std::vector<std::string> out;
    for (const auto& v : toml::find(t, key)->as_array()) out.push_back(v.as_string());
    return out;
}
inline std::vector<std::int64_t> ints(const toml::Table& t, const char* key) {
    std::vector<std::int64_t> out;
    for (const auto& v : toml::find(t, key)->as_array()) out.push_back(v.as_int());
    return out;
}

inline std::vector<SearchDimension> parse_space(const toml::Table& space) {
    std::vector<SearchDimension> out;
    for (const auto& [key, spec] : space) {
        const Field* f = find_field(key);
        if (!f || f->type == FieldType::space) throw Error(errc::config, "sweep.space: unknown key '" + key + "'");
        if (key.rfind("sweep.", 0) == 0 || key == "experiment.seed")
            throw Error(errc::config, "sweep.space: key '" + key + "' cannot be searched");
        SearchDimension d;
        d.key = key;
        if (spec.is_array()) {
            if (spec.as_array().empty()) throw Error(errc::config, "sweep.space." + key + ": empty choice list");
            for (const auto& c : spec.as_array()) d.choices.push_back(coerce(*f, c));
        } else if (spec.is_table()) {
            const auto& t = spec.as_table();
            for (const auto& [k, v] : t)
                if (k != "min" && k != "max" && k != "log" && k != "integer")
                    throw Error(errc::config, "sweep.space." + key + ": unknown field '" + k + "'");
            if (!t.count("min") || !t.count("max") || !t.at("min").is_number() || !t.at("max").is_number())
                throw Error(errc::config, "sweep.space." + key + ": range needs numeric min and max");
            d.min = t.at("min").as_number();
            d.max = t.at("max").as_number();
            d.log = t.count("log") && t.at("log").is_bool() && t.at("log").as_bool();
            d.integer = f->type == FieldType::integer;
            if (!(d.min <= d.max)) throw Error(errc::config, "sweep.space." + key + ": min > max");
            if (d.log && !(d.min > 0.0)) throw Error(errc::config, "sweep.space." + key + ": log range needs min > 0");
            if (f->type != FieldType::number && f->type != FieldType::integer)
                throw Error(errc::config, "sweep.space." + key + ": ranges apply to numeric keys only");
        } else {
            throw Error(errc::config, "sweep.space." + key + ": expected [choices] or {min, max}");
        }
        out.push_back(std::move(d));
    }
    return out;
}

} // namespace detail

/// Validates `raw` against the schema, fills defaults and builds the typed view.
inline ExperimentConfig resolve_config(const toml::Table& raw) {
    std::vector<std::pair<std::string, toml::Value>> given;
    detail::flatten(raw, "", given);
    toml::Table table;
    for (auto& [key, v] : given) {
        const Field* f = find_field(key);
        if (!f) throw Error(errc::usage, "unknown config key '" + key + "'");
        toml::set(table, key, detail::coerce(*f, std::move(v)));
    }
    for (const auto& f : schema())
        if (!detail::is_optional(f.type) && !toml::find(table, f.key)) toml::set(table, f.key, f.fallback);

    using namespace detail;
    ExperimentConfig c;
    c.table = table;
    const auto& t = c.table;
    c.seed = static_cast<std::uint64_t>(toml::find(t, "experiment.seed")->as_int());
    c.episode_length = count(t, "experiment.episode_length", 1);
    c.universe_size = count(t, "experiment.universe_size", 1);
    c.validation_episodes = count(t, "experiment.validation_episodes", 1);
    c.lookback = count(t, "experiment.lookback");
    c.jobs = count(t, "experiment.jobs");
    c.env.initial_capital = number(t, "experiment.initial_capital");
    c.env.cost_rate = number(t, "experiment.cost_rate");
    c.env.projection = parse_projection(text(t, "experiment.projection"));

    c.data_dir = text(t, "data.dir");
    c.columns = {text(t, "data.columns.date"), text(t, "data.columns.open"),  text(t, "data.columns.high"),
                 text(t, "data.columns.low"),  text(t, "data.columns.close"), text(t, "data.columns.volume")};

    c.synth.assets = count(t, "synth.assets", 1);
    c.synth.ids = texts(t, "synth.ids");
    c.synth.start = Date::parse(text(t, "synth.start"));
    c.synth.end = Date::parse(text(t, "synth.end"));
    c.synth.drift = number(t, "synth.drift");
    c.synth.volatility = number(t, "synth.volatility");
    c.synth.correlation = number(t, "synth.correlation");
    c.synth.drifting_assets = count(t, "synth.drifting_assets");
    c.synth.drifting_drift = number(t, "synth.drifting_drift");
    if (!c.synth.ids.empty() && c.synth.ids.size() != c.synth.assets)
        throw Error(errc::config, "synth.ids has " + std::to_string(c.synth.ids.size()) + " entries, synth.assets is " +
                                      std::to_string(c.synth.assets));

    auto& rep = c.env.representation;
    rep.kind = parse_representation(text(t, "representation.kind"));
    rep.window = count(t, "representation.window", 1);
    rep.lags.clear();
    for (auto l : ints(t, "representation.lags")) {
        if (l < 0) throw Error(errc::config, "representation.lags must be non-negative");
        rep.lags.push_back(static_cast<std::size_t>(l));
    }
    if (rep.lags.empty()) throw Error(errc::config, "representation.lags must not be empty");

    c.env.reward = RewardSpec::of(parse_reward(text(t, "reward.kind")));
    if (const auto* s = toml::find(t, "reward.scale")) c.env.reward.scale = s->as_number();
    c.env.reward.sortino_cap = number(t, "reward.sortino_cap");
    c.env.reward.validate();

    c.agent.kind = text(t, "agent.kind");
    c.agent.command = texts(t, "agent.command");
    c.agent.timeout = number(t, "agent.timeout");
    auto& pg = c.agent.pg;
    pg.hidden.clear();
    for (auto h : ints(t, "agent.hidden")) {
        if (h < 1) throw Error(errc::config, "agent.hidden sizes must be positive");
        pg.hidden.push_back(static_cast<std::size_t>(h));
    }
    pg.learning_rate = number(t, "agent.learning_rate");
    pg.gamma = number(t, "agent.gamma");
    pg.concentration = number(t, "agent.concentration");
    pg.max_grad_norm = number(t, "agent.max_grad_norm");
    pg.baseline = parse_baseline(text(t, "agent.baseline"));
    pg.baseline_decay = number(t, "agent.baseline_decay");
    if (!(pg.concentration > 0.0)) throw Error(errc::config, "agent.concentration must be positive");
    if (!(pg.gamma >= 0.0 && pg.gamma <= 1.0)) throw Error(errc::config, "agent.gamma must lie in [0, 1]");
    if (!(pg.learning_rate >= 0.0)) throw Error(errc::config, "agent.learning_rate must be non-negative");
    if (c.agent.kind == "external" && c.agent.command.empty())
        throw Error(errc::config, "agent.kind = external needs agent.command");
    if (c.agent.kind != "reference_pg" && c.agent.kind != "external") make_builtin_agent(c.agent.kind, 0);

    c.seeds = ints(t, "train.seeds");
    if (c.seeds.empty()) throw Error(errc::config, "train.seeds must not be empty");
    for (std::size_t i = 0; i < c.seeds.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (c.seeds[i] == c.seeds[j])
                throw Error(errc::config, "train.seeds must be distinct (" + std::to_string(c.seeds[i]) + " repeats)");
    c.train_episodes = count(t, "train.episodes");
    c.checkpoint_every = count(t, "train.checkpoint_every", 1);
    c.sweep_trials = count(t, "sweep.trials", 1);
    c.sweep_episodes = count(t, "sweep.episodes");
    if (const auto* s = toml::find(t, "sweep.space")) c.space = parse_space(s->as_table());

    c.backtest_start = Date::parse(text(t, "backtest.start"));
    if (const auto* e = toml::find(t, "backtest.end")) c.backtest_end = Date::parse(e->as_string());
    if (c.backtest_end && *c.backtest_end <= c.backtest_start)
        throw Error(errc::config, "backtest.end must follow backtest.start");
    c.backtest_assets = texts(t, "backtest.assets");

    c.index.lookback = count(t, "index.lookback", 2);
    c.index.risk_aversion = number(t, "index.risk_aversion");
    const auto period = count(t, "index.rebalance_period");
    c.index.rebalance_period = period == 0 ? std::nullopt : std::optional<std::size_t>(period);
    c.index.ridge = number(t, "index.ridge");
    c.index.validate();

    c.metric_options.cvar_alpha = number(t, "metrics.cvar_alpha");
    c.metric_options.annualization_days = count(t, "metrics.annualization_days", 1);
    c.metric_options.month_days = count(t, "metrics.month_days", 1);
    c.metric_options.rfr = number(t, "metrics.risk_free_rate");
    c.metric_options.threshold = number(t, "metrics.threshold");
    if (!(c.metric_options.cvar_alpha > 0.0 && c.metric_options.cvar_alpha <= 1.0))
        throw Error(errc::config, "metrics.cvar_alpha must lie in (0, 1]");

    c.name = text(t, "experiment.name");
    if (c.name.empty())
        c.name = c.agent.kind + "_" + to_string(rep.kind) + "_" + to_string(c.env.reward.kind);
    return c;
}

/// Applies `key=value`; the value is a TOML expression, or a bare word for string keys.
inline void apply_override(toml::Table& raw, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw Error(errc::usage, "override '" + std::string(assignment) + "' is not key=value");
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    const Field* f = find_field(key);
    if (!f) throw Error(errc::usage, "unknown config key '" + key + "'");
    toml::Value v;
    try {
        v = toml::parse_value(text);
    } catch (const Error&) {
        if (f->type != FieldType::string && f->type != FieldType::date && f->type != FieldType::optional_date)
            throw Error(errc::usage, "override '" + key + "': cannot parse value '" + text + "'");
        v = toml::Value(text);
    }
    if ((f->type == FieldType::string || f->type == FieldType::date || f->type == FieldType::optional_date) && !v.is_string())
        v = toml::Value(text);
    try {
        v = detail::coerce(*f, std::move(v));
    } catch (const Error& e) {
        throw Error(errc::usage, e.what());
    }
    toml::set(raw, key, std::move(v));
}

inline ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                                    const std::vector<std::string>& overrides = {}) {
    toml::Table raw = path ? toml::parse_file(*path) : toml::Table{};
    for (const auto& o : overrides) apply_override(raw, o);
    return resolve_config(raw);
}

/// Resolved configuration as TOML. Thread count is left out since it never changes results.
inline std::string snapshot(const ExperimentConfig& c) {
    auto t = c.table;
    std::get<toml::Table>(t.at("experiment").v).erase("jobs");
    return toml::dump(t);
}

} // namespace olps
