#pragma once

#include "olps/agents.hpp"
#include "olps/baselines.hpp"
#include "olps/bridge.hpp"
#include "olps/config.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace olps {

// ---------------------------------------------------------------------------
// Worker pool

/// Runs fn(0..n-1) on up to `jobs` threads. Results must be written by index, so
/// the outcome does not depend on scheduling. The exception of the lowest failing index is rethrown.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, n);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::size_t first_index = n;
    std::mutex m;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (i < first_index) {
                        first_index = i;
                        first = std::current_exception();
                    }
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

// ---------------------------------------------------------------------------
// Market preparation

inline MarketData synthesize(const ExperimentConfig& cfg) {
    const auto& s = cfg.synth;
    if (s.end < s.start) throw Error(errc::config, "synth.end precedes synth.start");
    const auto& tickers = default_backtest_assets();
    SyntheticSpec spec;
    spec.start = s.start;
    for (std::size_t i = 0; i < s.assets; ++i) {
        SyntheticAsset a;
        if (!s.ids.empty()) {
            a.id = s.ids[i];
        } else if (s.assets <= tickers.size()) {
            a.id = tickers[i];
        } else {
            char id[32];
            std::snprintf(id, sizeof id, "S%03zu", i);
            a.id = id;
        }
        const bool drifting = i < s.drifting_assets;
        a.drift = drifting ? s.drifting_drift : s.drift;
        a.volatility = drifting ? 0.0 : s.volatility;
        a.initial_price = 20.0 + 10.0 * static_cast<double>(i % 9);
        spec.assets.push_back(a);
    }
    if (s.correlation != 0.0 && s.assets > 1) {
        spec.correlation.assign(s.assets * s.assets, s.correlation);
        for (std::size_t i = 0; i < s.assets; ++i) spec.correlation[i * s.assets + i] = 1.0;
    }
    std::size_t days = 0;
    for (Date d = s.start; !(s.end < d); d = d.plus_days(1))
        if (d.weekday() != 0 && d.weekday() != 6) ++days;
    std::mt19937_64 rng(derive_seed(cfg.seed, "synth"));
    return generate_synthetic(spec, days, rng);
}

/// Immutable inputs shared by every job of one experiment.
struct Prepared {
    MarketData data;
    NormalizedSeries norm;
    SplitPlan plan;
    std::size_t history = 0;        // representation history, days
    std::size_t backtest_start = 0; // calendar index
    std::size_t backtest_last = 0;  // calendar index, inclusive
    AssetSet backtest_assets;
    std::vector<AssetSet> validation_universes;
    std::vector<metrics::ValueSeries> validation_index;

    EpisodeWindow backtest_window() const { return {backtest_start, backtest_last - backtest_start}; }
};

/// Split plan, validation universes and their MVO index series, and the backtest universe.
/// Validation windows and universes depend on the master seed only, so every trial shares them.
inline Prepared prepare(const ExperimentConfig& cfg, MarketData data) {
    Prepared p{std::move(data), {}, {}, 0, 0, 0, {}, {}, {}};
    p.norm = normalize(p.data);
    p.history = history_days(cfg.env.representation);
    const auto& cal = p.data.calendar();

    p.backtest_start = p.data.index_at_or_after(cfg.backtest_start);
    if (p.backtest_start >= p.data.days())
        throw Error(errc::config, "backtest.start " + cfg.backtest_start.str() + " is after the last market date");
    p.backtest_last = p.data.days() - 1;
    if (cfg.backtest_end) {
        const auto after = p.data.index_at_or_after(cfg.backtest_end->plus_days(1));
        if (after == 0) throw Error(errc::config, "backtest.end precedes the market data");
        p.backtest_last = after - 1;
    }
    if (p.backtest_last <= p.backtest_start)
        throw Error(errc::config, "backtest period " + cal[p.backtest_start].str() + " has no trading days to step");
    if (p.backtest_start < std::max(p.history, cfg.index.lookback))
        throw Error(errc::history, "backtest at " + cal[p.backtest_start].str() +
                                       " lacks representation or index history before it");

    const std::size_t first = std::max(p.history, cfg.index.lookback);
    if (p.backtest_start < cfg.lookback + first)
        throw Error(errc::infeasible, "no training calendar before the backtest");
    SplitRequest req;
    req.episode_length = cfg.episode_length;
    req.validation_count = cfg.validation_episodes;
    req.lookback = cfg.lookback;
    req.first_index = first;
    req.end_index = p.backtest_start - cfg.lookback;
    std::mt19937_64 split_rng(derive_seed(cfg.seed, "split"));
    p.plan = split_periods(p.data.days(), req, split_rng);

    const std::size_t need = std::max(p.history, cfg.index.lookback);
    for (std::size_t k = 0; k < p.plan.validation.size(); ++k) {
        const auto& w = p.plan.validation[k];
        std::mt19937_64 rng(derive_seed(cfg.seed, "validation-universe", k));
        p.validation_universes.push_back(sample_universe(p.data, cfg.universe_size, w.start, need, rng));
        p.validation_index.push_back(mvo_index(p.data, p.validation_universes.back(), w, cfg.index, cfg.env.initial_capital));
    }

    if (cfg.backtest_assets.empty()) {
        std::mt19937_64 rng(derive_seed(cfg.seed, "backtest-universe"));
        p.backtest_assets = sample_universe(p.data, cfg.universe_size, p.backtest_start, need, rng);
    } else {
        if (cfg.backtest_assets.size() != cfg.universe_size)
            throw Error(errc::config, "backtest.assets lists " + std::to_string(cfg.backtest_assets.size()) +
                                          " assets but experiment.universe_size is " + std::to_string(cfg.universe_size));
        std::vector<std::size_t> members;
        std::string missing;
        for (const auto& id : cfg.backtest_assets) {
            const auto a = p.data.find_asset(id);
            if (!a || p.data.listing_start(*a) + need > p.backtest_start)
                missing += (missing.empty() ? "" : ", ") + id;
            else
                members.push_back(*a);
        }
        if (!missing.empty())
            throw Error(errc::data, "backtest assets without enough history before " + cal[p.backtest_start].str() + ": " + missing);
        std::sort(members.begin(), members.end());
        p.backtest_assets = make_asset_set(p.data, members, p.backtest_start);
    }
    return p;
}

// ---------------------------------------------------------------------------
// Agents

inline std::uint64_t agent_seed(const ExperimentConfig& cfg, std::int64_t seed) {
    return derive_seed(cfg.seed, "agent", static_cast<std::uint64_t>(seed));
}

inline std::size_t observation_size(const ExperimentConfig& cfg) {
    std::size_t n = 1;
    for (auto d : observation_shape(cfg.env.representation, cfg.universe_size)) n *= d;
    return n;
}

inline std::unique_ptr<Agent> make_agent(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.agent.kind == "reference_pg")
        return std::make_unique<ReferencePgAgent>(observation_size(cfg), cfg.universe_size, cfg.agent.pg, seed);
    if (cfg.agent.kind == "external") {
        auto a = std::make_unique<BridgeAgent>(cfg.agent.command, seed, cfg.agent.timeout);
        a->send_spec(cfg.env.representation, cfg.universe_size, cfg.env.reward, cfg.episode_length);
        return a;
    }
    return make_builtin_agent(cfg.agent.kind, seed, cfg.index);
}

// ---------------------------------------------------------------------------
// Validation and training

struct ValidationScore {
    double mean_ror = 0.0;
    metrics::MetricValue ir;
};

/// Mean episodic RoR over the validation windows, and the IR of the concatenated
/// daily rate returns against the MVO index on the same windows and universes.
inline ValidationScore validate(Agent& agent, const ExperimentConfig& cfg, const Prepared& p) {
    Environment env(p.data, p.norm, cfg.env);
    std::vector<double> rors, active, index;
    for (std::size_t k = 0; k < p.plan.validation.size(); ++k) {
        const auto traj = run_episode(agent, env, p.plan.validation[k], p.validation_universes[k], false);
        rors.push_back(traj.values.back() / traj.values.front() - 1.0);
        const auto a = metrics::rate_of_return(traj.values);
        const auto b = metrics::rate_of_return(p.validation_index[k].values);
        active.insert(active.end(), a.begin(), a.end());
        index.insert(index.end(), b.begin(), b.end());
    }
    return {mean(rors), metrics::information_ratio(active, index)};
}

struct CheckpointScore {
    std::size_t episode = 0;
    double score = 0.0;
    metrics::MetricValue validation_ir;
};

struct TrainOutcome {
    std::int64_t seed = 0;
    std::uint64_t agent_seed = 0;
    std::vector<std::uint8_t> checkpoint; // reference_pg only
    std::optional<std::string> external_checkpoint;
    std::size_t best_episode = 0;
    double score = 0.0;
    metrics::MetricValue validation_ir;
    bool diverged = false;
    std::size_t skipped_updates = 0;
    std::vector<CheckpointScore> history;
    std::string error;
};

/// Trains one agent for `episodes` episodes on random training windows and universes,
/// scoring a checkpoint every cfg.checkpoint_every episodes (and before training) on the
/// validation windows. Keeps the best-scoring checkpoint; ties keep the earlier one.
/// `external_dir` receives external-agent checkpoints.
inline TrainOutcome train_agent(const ExperimentConfig& cfg, const Prepared& p, std::int64_t seed, std::size_t episodes,
                                const std::optional<std::filesystem::path>& external_dir = std::nullopt) {
    TrainOutcome out;
    out.seed = seed;
    out.agent_seed = agent_seed(cfg, seed);
    auto agent = make_agent(cfg, out.agent_seed);
    auto* pg = dynamic_cast<ReferencePgAgent*>(agent.get());
    auto* ext = dynamic_cast<BridgeAgent*>(agent.get());
    const bool learns = pg || ext;
    Environment env(p.data, p.norm, cfg.env);
    std::mt19937_64 rng(derive_seed(out.agent_seed, "episodes"));
    bool have_best = false;

    auto score_now = [&](std::size_t episode) {
        const auto v = validate(*agent, cfg, p);
        out.history.push_back({episode, v.mean_ror, v.ir});
        if (!std::isfinite(v.mean_ror)) {
            out.diverged = true;
            return;
        }
        if (have_best && !(v.mean_ror > out.score)) return;
        have_best = true;
        out.best_episode = episode;
        out.score = v.mean_ror;
        out.validation_ir = v.ir;
        if (pg) out.checkpoint = checkpoint(*pg);
        if (ext && external_dir) {
            const auto path = (*external_dir / ("seed_" + std::to_string(seed) + ".external")).string();
            ext->request_checkpoint(path);
            out.external_checkpoint = path;
        }
    };

    score_now(0);
    if (!learns) return out;
    const std::size_t need = p.history;
    for (std::size_t e = 1; e <= episodes && !out.diverged; ++e) {
        std::uniform_int_distribution<std::size_t> pick(0, p.plan.training.size() - 1);
        const auto window = p.plan.training[pick(rng)];
        const auto universe = sample_universe(p.data, cfg.universe_size, window.start, need, rng);
        const auto traj = run_episode(*agent, env, window, universe, true, pg != nullptr);
        if (pg) {
            pg->update(traj);
            if (!all_finite(pg->net().parameters())) out.diverged = true;
        }
        if (!out.diverged && (e % cfg.checkpoint_every == 0 || e == episodes)) score_now(e);
    }
    if (pg) out.skipped_updates = pg->skipped_updates();
    return out;
}

/// Trains every configured seed on the worker pool.
inline std::vector<TrainOutcome> train_multi_seed(const ExperimentConfig& cfg, const Prepared& p,
                                                  const std::optional<std::filesystem::path>& external_dir = std::nullopt) {
    std::vector<TrainOutcome> out(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
        try {
            out[i] = train_agent(cfg, p, cfg.seeds[i], cfg.train_episodes, external_dir);
        } catch (const Error& e) {
            out[i].seed = cfg.seeds[i];
            out[i].diverged = true;
            out[i].error = std::string(e.code()) + ": " + e.what();
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Sweep

struct Trial {
    std::size_t index = 0;
    toml::Table params; // dotted key -> sampled value
    bool ok = false;
    double score = 0.0;
    metrics::MetricValue validation_ir;
    std::string error;
};

struct SweepResult {
    std::vector<Trial> trials;
    std::optional<std::size_t> best;
};

inline toml::Table sample_point(const std::vector<SearchDimension>& space, std::mt19937_64& rng) {
    toml::Table point;
    for (const auto& d : space) {
        if (!d.choices.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, d.choices.size() - 1);
            point[d.key] = d.choices[pick(rng)];
            continue;
        }
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double x = d.log ? std::exp(std::log(d.min) + u(rng) * (std::log(d.max) - std::log(d.min)))
                               : d.min + u(rng) * (d.max - d.min);
        if (d.integer)
            point[d.key] = toml::Value(static_cast<std::int64_t>(std::llround(std::clamp(x, d.min, d.max))));
        else
            point[d.key] = toml::Value(x);
    }
    return point;
}

/// The base configuration with a sampled point applied.
inline ExperimentConfig with_params(const ExperimentConfig& base, const toml::Table& params) {
    toml::Table t = base.table;
    for (const auto& [k, v] : params) toml::set(t, k, v);
    return resolve_config(t);
}

/// Seeded random search. Each trial trains one agent for cfg.sweep_episodes episodes and
/// scores its best checkpoint by mean validation RoR; failed trials are recorded and skipped.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const Prepared& p,
                             const std::function<void(const Trial&)>& on_trial = {}) {
    if (cfg.space.empty()) throw Error(errc::config, "sweep.space is empty; nothing to search");
    SweepResult r;
    r.trials.resize(cfg.sweep_trials);
    std::mutex m;
    parallel_for(cfg.sweep_trials, cfg.jobs, [&](std::size_t i) {
        Trial t;
        t.index = i;
        std::mt19937_64 rng(derive_seed(cfg.seed, "sweep", i));
        t.params = sample_point(cfg.space, rng);
        try {
            const auto trial_cfg = with_params(cfg, t.params);
            const auto o = train_agent(trial_cfg, p, static_cast<std::int64_t>(i), cfg.sweep_episodes);
            t.ok = !o.diverged;
            t.score = o.score;
            t.validation_ir = o.validation_ir;
            if (o.diverged) t.error = "diverged";
        } catch (const Error& e) {
            t.error = std::string(e.code()) + ": " + e.what();
        }
        r.trials[i] = t;
        if (on_trial) {
            std::lock_guard lock(m);
            on_trial(r.trials[i]);
        }
    });
    for (const auto& t : r.trials)
        if (t.ok && (!r.best || t.score > r.trials[*r.best].score)) r.best = t.index;
    return r;
}

inline nlohmann::ordered_json to_json(const Trial& t) {
    nlohmann::ordered_json j;
    j["trial"] = t.index;
    j["status"] = t.ok ? "ok" : "failed";
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : t.params) params[k] = toml::dump_value(v);
    j["params"] = params;
    j["score"] = t.ok ? nlohmann::ordered_json(t.score) : nlohmann::ordered_json(nullptr);
    j["validation_ir"] = metrics::to_string(t.validation_ir);
    if (!t.error.empty()) j["error"] = t.error;
    return j;
}

// ---------------------------------------------------------------------------
// Backtest

struct SeedRun {
    std::int64_t seed = 0;
    bool diverged = false;
    metrics::SeedMetrics metrics;
    Trajectory trajectory;
};

struct BacktestResult {
    std::string name;
    metrics::ValueSeries index;
    std::vector<SeedRun> runs;
};

/// Runs each trained seed once over the whole backtest period as a single episode and
/// scores it against the MVO index on the same assets.
inline BacktestResult run_backtest(const ExperimentConfig& cfg, const Prepared& p, const std::vector<TrainOutcome>& trained) {
    BacktestResult r;
    r.name = cfg.name;
    const auto window = p.backtest_window();
    r.index = mvo_index(p.data, p.backtest_assets, window, cfg.index, cfg.env.initial_capital);
    r.runs.resize(trained.size());
    parallel_for(trained.size(), cfg.jobs, [&](std::size_t i) {
        const auto& t = trained[i];
        SeedRun run;
        run.seed = t.seed;
        run.diverged = t.diverged;
        run.metrics.seed = static_cast<std::uint64_t>(t.seed);
        if (t.diverged) {
            r.runs[i] = std::move(run);
            return;
        }
        std::unique_ptr<Agent> agent;
        if (cfg.agent.kind == "reference_pg") {
            agent = std::make_unique<ReferencePgAgent>(restore(t.checkpoint, cfg.agent.pg, t.agent_seed));
            if (dynamic_cast<ReferencePgAgent&>(*agent).net().input_size() != observation_size(cfg))
                throw Error(errc::checkpoint, "checkpoint input size does not match the configured representation");
        } else {
            agent = make_agent(cfg, t.agent_seed);
            if (auto* ext = dynamic_cast<BridgeAgent*>(agent.get())) ext->set_restore_path(t.external_checkpoint);
        }
        Environment env(p.data, p.norm, cfg.env);
        run.trajectory = run_episode(*agent, env, window, p.backtest_assets, false);
        run.metrics = metrics::evaluate(run.trajectory.values, r.index.values, t.validation_ir, cfg.metric_options);
        run.metrics.seed = static_cast<std::uint64_t>(t.seed);
        r.runs[i] = std::move(run);
    });
    return r;
}

// ---------------------------------------------------------------------------
// Reports

inline const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols{"rank", "name", "ror", "sortino", "mdd", "cvar", "ir", "ir_trend", "ir_quotient"};
    return cols;
}

/// Orders combinations by mean RoR, highest first; ties by name.
inline std::vector<metrics::MetricReport> rank_reports(std::vector<metrics::MetricReport> reports) {
    auto key = [](const metrics::MetricReport& r) {
        const auto s = r.summary("ror");
        return s.count ? s.mean : -std::numeric_limits<double>::infinity();
    };
    std::stable_sort(reports.begin(), reports.end(), [&](const auto& a, const auto& b) {
        const double ka = key(a), kb = key(b);
        if (ka != kb) return ka > kb;
        return a.name < b.name;
    });
    return reports;
}

inline std::string summary_cell(const metrics::MetricReport& r, std::string_view metric) {
    const auto s = r.summary(metric);
    if (s.count == 0) {
        // Every seed produced the same kind of sentinel, or there are no seeds.
        if (r.seeds.empty()) return "undefined";
        const auto first = metrics::metric_by_name(r.seeds.front(), metric);
        for (const auto& x : r.seeds)
            if (!(metrics::metric_by_name(x, metric) == first)) return "undefined";
        return metrics::to_string(first);
    }
    return metrics::to_string(metrics::MetricValue::of(s.mean));
}

inline void write_report_csv(std::ostream& out, const std::vector<metrics::MetricReport>& ranked) {
    const auto& cols = report_columns();
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
    out << '\n';
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        out << i + 1 << ',' << ranked[i].name;
        for (std::size_t c = 2; c < cols.size(); ++c) out << ',' << summary_cell(ranked[i], cols[c]);
        out << '\n';
    }
}

inline nlohmann::ordered_json report_json(const std::vector<metrics::MetricReport>& ranked) {
    nlohmann::ordered_json root;
    root["combinations"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& r = ranked[i];
        nlohmann::ordered_json c;
        c["rank"] = i + 1;
        c["name"] = r.name;
        c["seed_count"] = r.seed_count();
        nlohmann::ordered_json summary;
        for (const auto& m : metrics::kMetricNames) {
            const auto s = r.summary(m);
            summary[std::string(m)] = {{"mean", summary_cell(r, m)},
                                       {"std", metrics::to_string(metrics::MetricValue::of(s.std))},
                                       {"count", s.count},
                                       {"excluded", s.excluded}};
        }
        c["summary"] = summary;
        c["seeds"] = nlohmann::ordered_json::array();
        for (const auto& s : r.seeds) {
            nlohmann::ordered_json js;
            js["seed"] = s.seed;
            for (const auto& m : metrics::kMetricNames) js[std::string(m)] = metrics::to_string(metrics::metric_by_name(s, m));
            c["seeds"].push_back(js);
        }
        root["combinations"].push_back(c);
    }
    return root;
}

/// Per-day cumulative RoR of every seed and of the index, long format.
struct PlotSeries {
    std::string name;
    std::string seed; // "index" for the benchmark
    metrics::ValueSeries values;
};

inline void write_plotdata(std::ostream& out, const std::vector<PlotSeries>& series) {
    out << "name,seed,date,ror\n";
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.values.values.size(); ++k)
            out << s.name << ',' << s.seed << ',' << s.values.dates[k].str() << ','
                << metrics::to_string(metrics::MetricValue::of(s.values.values[k] / s.values.values.front() - 1.0)) << '\n';
}

/// Per-seed metrics of one backtest as stored in backtest.json.
inline nlohmann::ordered_json to_json(const BacktestResult& r, const std::string& index_file,
                                      const std::function<std::string(std::int64_t)>& trajectory_file) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["index"] = index_file;
    j["seeds"] = nlohmann::ordered_json::array();
    for (const auto& run : r.runs) {
        nlohmann::ordered_json s;
        s["seed"] = run.seed;
        s["diverged"] = run.diverged;
        if (!run.diverged) {
            s["trajectory"] = trajectory_file(run.seed);
            for (const auto& m : metrics::kMetricNames)
                s[std::string(m)] = metrics::to_string(metrics::metric_by_name(run.metrics, m));
        }
        j["seeds"].push_back(s);
    }
    return j;
}

/// Rebuilds the report input from backtest.json; diverged seeds are left out with a count.
inline metrics::MetricReport report_from_json(const nlohmann::json& j, std::size_t* excluded = nullptr) {
    metrics::MetricReport r;
    r.name = j.at("name").get<std::string>();
    std::size_t dropped = 0;
    for (const auto& s : j.at("seeds")) {
        if (s.at("diverged").get<bool>()) {
            ++dropped;
            continue;
        }
        metrics::SeedMetrics m;
        m.seed = s.at("seed").get<std::uint64_t>();
        auto get = [&](const char* k) { return metrics::parse_metric(s.at(k).get<std::string>()); };
        m.ror = get("ror");
        m.wealth_multiplier = get("wealth_multiplier");
        m.sortino = get("sortino");
        m.mdd = get("mdd");
        m.cvar = get("cvar");
        m.ir = get("ir");
        m.ir_trend = get("ir_trend");
        m.ir_quotient = get("ir_quotient");
        m.validation_ir = get("validation_ir");
        r.seeds.push_back(m);
    }
    if (excluded) *excluded = dropped;
    return r;
}

} // namespace olps
