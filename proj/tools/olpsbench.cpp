// olpsbench: command-line driver for the OLPS benchmark pipeline.

#include "olps/experiments.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace olps;

namespace {

struct Options {
    std::optional<std::string> config;
    std::optional<std::int64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<double> costs;
    std::string out;
    std::vector<std::string> overrides;
    std::vector<std::string> runs; // extra run directories for `report`
    bool force = false;
};

ExperimentConfig load(const Options& o) {
    auto overrides = o.overrides;
    if (o.seed) overrides.push_back("experiment.seed=" + std::to_string(*o.seed));
    if (o.jobs) overrides.push_back("experiment.jobs=" + std::to_string(*o.jobs));
    if (o.costs) overrides.push_back("experiment.cost_rate=" + toml::dump_value(toml::Value(*o.costs)));
    return load_config(o.config ? std::optional<fs::path>(*o.config) : std::nullopt, overrides);
}

fs::path run_dir(const Options& o, const ExperimentConfig& cfg) {
    fs::path dir = o.out.empty() ? fs::path("runs") / cfg.name : fs::path(o.out);
    fs::create_directories(dir);
    return dir;
}

void refuse_overwrite(const Options& o, const std::vector<fs::path>& outputs) {
    if (o.force) return;
    for (const auto& p : outputs)
        if (fs::exists(p)) throw Error(errc::usage, p.string() + " exists; pass --force to overwrite");
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot write " + p.string());
    out << text;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Stores the resolved configuration; a different existing snapshot needs --force.
void write_snapshot(const Options& o, const fs::path& dir, const ExperimentConfig& cfg) {
    const auto path = dir / "config.toml";
    const auto text = snapshot(cfg);
    if (fs::exists(path) && read_text(path) != text && !o.force)
        throw Error(errc::usage, path.string() + " holds a different configuration; pass --force to replace it");
    write_text(path, text);
}

MarketData load_market(const ExperimentConfig& cfg) {
    auto result = load_ohlcv(cfg.data_dir, cfg.columns);
    for (const auto& issue : result.issues)
        std::cerr << "warning[" << errc::data << "]: " << issue.asset << (issue.date.empty() ? "" : " " + issue.date)
                  << (issue.line ? " line " + std::to_string(issue.line) : "") << ": " << issue.message
                  << (issue.asset_rejected ? " (asset rejected)" : "") << '\n';
    return std::move(result.data);
}

nlohmann::ordered_json params_json(const toml::Table& params) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : params) j[k] = toml::dump_value(v);
    return j;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Options& o) {
    const auto cfg = load(o);
    const fs::path dir = o.out.empty() ? cfg.data_dir : fs::path(o.out);
    refuse_overwrite(o, {dir / "manifest.json"});
    const auto data = synthesize(cfg);
    write_ohlcv(data, dir);
    std::cout << "wrote " << data.asset_count() << " assets x " << data.days() << " days to " << dir.string() << '\n';
    return 0;
}

int cmd_ingest(const Options& o) {
    const auto cfg = load(o);
    if (o.out.empty()) throw Error(errc::usage, "ingest needs --out for the cleaned data");
    const fs::path dir(o.out);
    refuse_overwrite(o, {dir / "manifest.json", dir / "ingest_report.json"});
    auto result = load_ohlcv(cfg.data_dir, cfg.columns);
    write_ohlcv(result.data, dir);
    nlohmann::ordered_json rep;
    rep["assets"] = result.data.asset_count();
    rep["days"] = result.data.days();
    rep["first_date"] = result.data.calendar().front().str();
    rep["last_date"] = result.data.calendar().back().str();
    rep["issues"] = nlohmann::ordered_json::array();
    for (const auto& i : result.issues)
        rep["issues"].push_back({{"asset", i.asset}, {"date", i.date}, {"line", i.line}, {"message", i.message},
                                 {"asset_rejected", i.asset_rejected}});
    write_text(dir / "ingest_report.json", rep.dump(2) + "\n");
    std::cout << "ingested " << result.data.asset_count() << " assets, " << result.issues.size() << " issues\n";
    return 0;
}

int cmd_index(const Options& o) {
    const auto cfg = load(o);
    const auto dir = run_dir(o, cfg);
    refuse_overwrite(o, {dir / "index.csv"});
    const auto p = prepare(cfg, load_market(cfg));
    const auto idx = mvo_index(p.data, p.backtest_assets, p.backtest_window(), cfg.index, cfg.env.initial_capital);
    metrics::write_value_series(dir / "index.csv", idx);
    std::cout << "index RoR " << metrics::to_string(metrics::MetricValue::of(idx.values.back() / idx.values.front() - 1.0))
              << " over " << idx.values.size() - 1 << " days\n";
    return 0;
}

int cmd_sweep(const Options& o) {
    const auto cfg = load(o);
    const auto dir = run_dir(o, cfg);
    refuse_overwrite(o, {dir / "sweep.jsonl", dir / "sweep_best.toml"});
    write_snapshot(o, dir, cfg);
    const auto p = prepare(cfg, load_market(cfg));
    const auto result = run_sweep(cfg, p, [](const Trial& t) {
        std::cerr << "trial " << t.index << (t.ok ? " score " + metrics::to_string(metrics::MetricValue::of(t.score)) : " failed: " + t.error)
                  << '\n';
    });
    std::ostringstream log;
    for (const auto& t : result.trials) log << to_json(t).dump() << '\n';
    write_text(dir / "sweep.jsonl", log.str());
    if (!result.best) throw Error(errc::numeric, "every sweep trial failed");
    const auto& best = result.trials[*result.best];
    toml::Table best_table;
    for (const auto& [k, v] : best.params) toml::set(best_table, k, v);
    write_text(dir / "sweep_best.toml", "# trial " + std::to_string(best.index) + "\n" + toml::dump(best_table));
    std::cout << "best trial " << best.index << " score " << metrics::to_string(metrics::MetricValue::of(best.score)) << '\n';
    return 0;
}

/// Applies sweep_best.toml from the run directory when present.
std::pair<ExperimentConfig, toml::Table> with_sweep_best(const ExperimentConfig& cfg, const fs::path& dir) {
    const auto path = dir / "sweep_best.toml";
    if (!fs::exists(path)) return {cfg, {}};
    std::vector<std::pair<std::string, toml::Value>> flat;
    detail::flatten(toml::parse_file(path), "", flat);
    toml::Table params;
    for (auto& [k, v] : flat) params[k] = v;
    return {with_params(cfg, params), params};
}

int cmd_train(const Options& o) {
    const auto base = load(o);
    const auto dir = run_dir(o, base);
    refuse_overwrite(o, {dir / "train.json"});
    write_snapshot(o, dir, base);
    const auto [cfg, params] = with_sweep_best(base, dir);
    const auto p = prepare(cfg, load_market(cfg));
    fs::create_directories(dir / "checkpoints");
    const auto outcomes = train_multi_seed(cfg, p, fs::absolute(dir / "checkpoints"));

    nlohmann::ordered_json j;
    j["name"] = cfg.name;
    j["agent"] = cfg.agent.kind;
    j["params"] = params_json(params);
    j["seeds"] = nlohmann::ordered_json::array();
    for (const auto& t : outcomes) {
        nlohmann::ordered_json s;
        s["seed"] = t.seed;
        s["agent_seed"] = t.agent_seed;
        s["diverged"] = t.diverged;
        s["best_episode"] = t.best_episode;
        s["score"] = metrics::to_string(metrics::MetricValue::of(t.score));
        s["validation_ir"] = metrics::to_string(t.validation_ir);
        s["skipped_updates"] = t.skipped_updates;
        s["checkpoint"] = nullptr;
        if (!t.checkpoint.empty()) {
            const auto rel = "checkpoints/seed_" + std::to_string(t.seed) + ".ckpt";
            std::ofstream out(dir / rel, std::ios::binary);
            out.write(reinterpret_cast<const char*>(t.checkpoint.data()), static_cast<std::streamsize>(t.checkpoint.size()));
            s["checkpoint"] = rel;
        }
        s["external_checkpoint"] = t.external_checkpoint ? nlohmann::ordered_json(*t.external_checkpoint) : nlohmann::ordered_json(nullptr);
        if (!t.error.empty()) s["error"] = t.error;
        s["history"] = nlohmann::ordered_json::array();
        for (const auto& h : t.history)
            s["history"].push_back({{"episode", h.episode},
                                    {"score", metrics::to_string(metrics::MetricValue::of(h.score))},
                                    {"validation_ir", metrics::to_string(h.validation_ir)}});
        j["seeds"].push_back(s);
        if (t.diverged)
            std::cerr << "notice: seed " << t.seed << " diverged" << (t.error.empty() ? "" : " (" + t.error + ")")
                      << "; it is excluded from aggregates\n";
        else
            std::cerr << "seed " << t.seed << " best episode " << t.best_episode << " validation RoR "
                      << metrics::to_string(metrics::MetricValue::of(t.score)) << '\n';
    }
    write_text(dir / "train.json", j.dump(2) + "\n");
    return 0;
}

std::vector<TrainOutcome> read_training(const fs::path& dir) {
    const auto j = nlohmann::json::parse(read_text(dir / "train.json"));
    std::vector<TrainOutcome> out;
    for (const auto& s : j.at("seeds")) {
        TrainOutcome t;
        t.seed = s.at("seed").get<std::int64_t>();
        t.agent_seed = s.at("agent_seed").get<std::uint64_t>();
        t.diverged = s.at("diverged").get<bool>();
        t.best_episode = s.at("best_episode").get<std::size_t>();
        t.score = metrics::parse_metric(s.at("score").get<std::string>()).value;
        t.validation_ir = metrics::parse_metric(s.at("validation_ir").get<std::string>());
        if (s.at("checkpoint").is_string()) {
            const auto blob = read_text(dir / s.at("checkpoint").get<std::string>());
            t.checkpoint.assign(blob.begin(), blob.end());
        }
        if (s.at("external_checkpoint").is_string()) t.external_checkpoint = s.at("external_checkpoint").get<std::string>();
        out.push_back(std::move(t));
    }
    return out;
}

int cmd_backtest(const Options& o) {
    const auto base = load(o);
    const auto dir = run_dir(o, base);
    refuse_overwrite(o, {dir / "backtest.json", dir / "index.csv"});
    write_snapshot(o, dir, base);
    const auto [cfg, params] = with_sweep_best(base, dir);
    const auto p = prepare(cfg, load_market(cfg));
    std::vector<TrainOutcome> trained;
    if (fs::exists(dir / "train.json")) {
        trained = read_training(dir);
    } else if (cfg.agent.kind != "reference_pg" && cfg.agent.kind != "external") {
        trained = train_multi_seed(cfg, p); // built-in agents: validation pass only
    } else {
        throw Error(errc::usage, (dir / "train.json").string() + " not found; run `train` first");
    }
    const auto result = run_backtest(cfg, p, trained);
    fs::create_directories(dir / "trajectories");
    metrics::write_value_series(dir / "index.csv", result.index);
    auto traj_file = [](std::int64_t seed) { return "trajectories/seed_" + std::to_string(seed) + ".jsonl"; };
    for (const auto& run : result.runs)
        if (!run.diverged) write_trajectory(dir / traj_file(run.seed), run.trajectory);
    write_text(dir / "backtest.json", to_json(result, "index.csv", traj_file).dump(2) + "\n");
    for (const auto& run : result.runs)
        if (!run.diverged)
            std::cout << result.name << " seed " << run.seed << " ror " << metrics::to_string(run.metrics.ror) << " cvar "
                      << metrics::to_string(run.metrics.cvar) << " ir " << metrics::to_string(run.metrics.ir) << '\n';
    return 0;
}

int cmd_report(const Options& o) {
    std::vector<fs::path> dirs;
    for (const auto& r : o.runs) dirs.emplace_back(r);
    if (o.out.empty()) throw Error(errc::usage, "report needs --out");
    const fs::path out(o.out);
    if (dirs.empty() && fs::exists(out / "backtest.json")) dirs.push_back(out);
    fs::create_directories(out);
    refuse_overwrite(o, {out / "report.csv", out / "report.json", out / "plotdata.csv"});

    std::vector<metrics::MetricReport> reports;
    std::vector<PlotSeries> plots;
    for (const auto& d : dirs) {
        const auto j = nlohmann::json::parse(read_text(d / "backtest.json"));
        std::size_t dropped = 0;
        reports.push_back(report_from_json(j, &dropped));
        if (dropped)
            std::cerr << "notice: " << reports.back().name << ": " << dropped << " diverged seed(s) excluded\n";
        const auto name = j.at("name").get<std::string>();
        plots.push_back({name, "index", metrics::read_value_series(d / j.at("index").get<std::string>())});
        for (const auto& s : j.at("seeds"))
            if (!s.at("diverged").get<bool>())
                plots.push_back({name, std::to_string(s.at("seed").get<std::int64_t>()),
                                 read_trajectory(d / s.at("trajectory").get<std::string>()).value_series()});
    }
    const auto ranked = rank_reports(reports);
    std::ostringstream csv, plot;
    write_report_csv(csv, ranked);
    write_plotdata(plot, plots);
    write_text(out / "report.csv", csv.str());
    write_text(out / "report.json", report_json(ranked).dump(2) + "\n");
    write_text(out / "plotdata.csv", plot.str());
    std::cout << csv.str();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"OLPS benchmark: data, environment, baselines, training and reports"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config (TOML)");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--jobs", o.jobs, "worker threads (0 = logical cores)");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--override", o.overrides, "config override key=value (repeatable)");
        sub->add_option("--costs", o.costs, "transaction cost rate");
        sub->add_flag("--force", o.force, "overwrite existing outputs");
    };
    std::map<std::string, std::function<int(const Options&)>> handlers{
        {"synth", cmd_synth}, {"ingest", cmd_ingest}, {"index", cmd_index},   {"sweep", cmd_sweep},
        {"train", cmd_train}, {"backtest", cmd_backtest}, {"report", cmd_report}};
    const std::map<std::string, std::string> help{
        {"synth", "generate a synthetic market into data.dir (or --out)"},
        {"ingest", "validate OHLCV CSVs and write a cleaned copy to --out"},
        {"index", "compute the MVO index over the backtest period"},
        {"sweep", "random hyperparameter search scored on validation"},
        {"train", "train every seed, keeping the best validation checkpoint"},
        {"backtest", "run trained seeds over the backtest period"},
        {"report", "rank backtested combinations into report.csv/json and plotdata.csv"}};
    for (const auto& [name, text] : help) {
        auto* sub = app.add_subcommand(name, text);
        common(sub);
        if (name == "report") sub->add_option("runs", o.runs, "run directories holding backtest.json");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        for (const auto* sub : app.get_subcommands()) return handlers.at(sub->get_name())(o);
    } catch (const Error& e) {
        std::cerr << "error[" << e.code() << "]: " << e.what() << '\n';
        return e.code() == errc::usage ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error[E_INTERNAL]: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
