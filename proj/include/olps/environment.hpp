#pragma once

#include "olps/market_data.hpp"
#include "olps/metrics.hpp"
#include "olps/representations.hpp"
#include "olps/rewards.hpp"
#include "olps/simplex.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace olps {

inline constexpr double kDefaultCapital = 100000.0;
inline constexpr double kSimplexTolerance = 1e-6;

/// Simplex weights over cash (index 0) and N assets.
struct Allocation {
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    double cash() const { return weights.at(0); }
    friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// How a raw action vector that is not already on the simplex is mapped onto it.
enum class Projection { softmax, clip, strict };

inline Projection parse_projection(std::string_view s) {
    if (s == "softmax") return Projection::softmax;
    if (s == "clip") return Projection::clip;
    if (s == "strict") return Projection::strict;
    throw Error(errc::config, "unknown projection '" + std::string(s) + "'");
}

inline std::string to_string(Projection p) {
    switch (p) {
    case Projection::softmax: return "softmax";
    case Projection::clip: return "clip";
    case Projection::strict: return "strict";
    }
    return "?";
}

/// Raw vectors within tolerance of the simplex are clipped and renormalized exactly;
/// others go through `mode`.
inline Allocation validate_action(std::span<const double> raw, Projection mode = Projection::softmax,
                                  std::size_t expected_size = 0) {
    if (raw.empty()) throw Error(errc::action, "empty action");
    if (expected_size != 0 && raw.size() != expected_size)
        throw Error(errc::action, "action length " + std::to_string(raw.size()) + ", expected " +
                                      std::to_string(expected_size));
    if (!all_finite(raw)) throw Error(errc::action, "action contains NaN or infinity");

    std::vector<double> w;
    if (on_simplex(raw, kSimplexTolerance)) {
        w.assign(raw.begin(), raw.end());
        for (double& x : w) x = std::clamp(x, 0.0, 1.0);
    } else {
        switch (mode) {
        case Projection::strict:
            throw Error(errc::action, "action is off the simplex beyond tolerance " + std::to_string(kSimplexTolerance));
        case Projection::softmax: w = softmax(raw); break;
        case Projection::clip:
            w.assign(raw.begin(), raw.end());
            for (double& x : w) x = std::max(x, 0.0);
            if (std::accumulate(w.begin(), w.end(), 0.0) == 0.0) std::fill(w.begin(), w.end(), 1.0);
            break;
        }
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= total;
    return {std::move(w)};
}

/// Outcome of rebalancing to `target` at the close and holding one day.
struct StepAccounting {
    double value_after = 0.0;
    std::vector<double> drifted;
    double turnover = 0.0;
    double cost = 0.0;
    double growth = 0.0; // allocation-weighted gross return
};

/// turnover = sum_{i>=1} |target_i - drifted_i|, cost = rate * turnover * V,
/// V' = (V - cost) * (target_0 + sum_{i>=1} target_i * gross_i).
/// `gross` holds close_{t+1}/close_t per asset (no cash entry).
inline StepAccounting apply_step(double value, std::span<const double> drifted, std::span<const double> target,
                                 std::span<const double> gross, double cost_rate) {
    StepAccounting out;
    for (std::size_t i = 1; i < target.size(); ++i) out.turnover += std::abs(target[i] - drifted[i]);
    out.cost = cost_rate * out.turnover * value;
    out.drifted.resize(target.size());
    out.drifted[0] = target[0];
    out.growth = target[0];
    for (std::size_t i = 1; i < target.size(); ++i) {
        out.drifted[i] = target[i] * gross[i - 1];
        out.growth += out.drifted[i];
    }
    for (double& x : out.drifted) x /= out.growth;
    out.value_after = (value - out.cost) * out.growth;
    return out;
}

struct PortfolioState {
    double value = kDefaultCapital;
    double initial_value = kDefaultCapital;
    std::vector<double> weights; // drifted, index 0 = cash
    std::size_t t = 0;           // calendar index of the current day
    Date date;
    std::size_t step_index = 0;
    std::size_t horizon = 0;
    bool bankrupt = false;
    std::vector<double> daily_nets;

    bool done() const { return bankrupt || step_index >= horizon; }
};

struct TransitionInfo {
    double portfolio_value = 0.0;
    Date date;
    double daily_net = 0.0;    // V_{t+1} - V_t, currency
    double daily_return = 0.0; // V_{t+1} / V_t - 1
    double turnover = 0.0;
    double cost = 0.0;
};

struct Transition {
    Observation observation; // empty when done
    double reward = 0.0;
    bool done = false;
    TransitionInfo info;
};

struct EnvironmentConfig {
    double initial_capital = kDefaultCapital;
    double cost_rate = 0.0;
    Projection projection = Projection::softmax;
    RewardSpec reward = RewardSpec::of(RewardKind::daily_net);
    RepresentationConfig representation;
};

/// Per-episode log. values/dates have length T + 1; actions, rewards and nets length T.
struct Trajectory {
    std::vector<std::string> assets;
    EpisodeWindow window;
    std::vector<Date> dates;
    std::vector<double> values;
    std::vector<std::vector<double>> raw_actions;
    std::vector<Allocation> allocations;
    std::vector<double> rewards;
    std::vector<double> daily_nets;
    std::vector<Observation> observations; // kept only when requested
    bool bankrupt = false;

    std::size_t steps() const { return allocations.size(); }
    metrics::ValueSeries value_series() const { return {dates, values}; }
};

struct EpisodeContext {
    const MarketData* data = nullptr;
    const AssetSet* assets = nullptr;
    EpisodeWindow window;
    bool training = false;
};

/// Uniform interface for built-in, learned and external agents.
class Agent {
public:
    virtual ~Agent() = default;
    virtual std::string name() const = 0;
    virtual void begin_episode(const EpisodeContext&) {}
    /// Raw action of length N + 1 (cash first), before projection.
    virtual std::vector<double> act(const Observation& observation, const PortfolioState& state) = 0;
    virtual void observe(const Transition&) {}
    virtual void end_episode(const Trajectory&) {}
};

/// Episodic OLPS environment over shared immutable market data. Single-threaded.
class Environment {
public:
    Environment(const MarketData& data, const NormalizedSeries& norm, EnvironmentConfig cfg)
        : data_(&data), builder_(data, norm, cfg.representation), cfg_(std::move(cfg)) {
        cfg_.reward.validate();
        if (!(cfg_.initial_capital > 0.0)) throw Error(errc::config, "initial capital must be positive");
        if (!(cfg_.cost_rate >= 0.0)) throw Error(errc::config, "cost rate must be non-negative");
    }

    const EnvironmentConfig& config() const { return cfg_; }
    const MarketData& data() const { return *data_; }
    const AssetSet& assets() const { return assets_; }

    std::pair<Observation, PortfolioState> reset(const EpisodeWindow& window, const AssetSet& assets) {
        if (window.length == 0) throw Error(errc::config, "episode length must be positive");
        if (window.last() >= data_->days())
            throw Error(errc::history, "episode runs past the end of market data");
        for (std::size_t k = 0; k < assets.size(); ++k)
            if (!data_->has_bar(assets.members[k], window.start))
                throw Error(errc::history, "no data for " + assets.ids[k] + " at " + data_->calendar()[window.start].str());
        assets_ = assets;
        Observation obs = builder_.build(window.start, assets_);

        PortfolioState s;
        s.value = cfg_.initial_capital;
        s.initial_value = cfg_.initial_capital;
        s.weights.assign(assets.size() + 1, 0.0);
        s.weights[0] = 1.0;
        s.t = window.start;
        s.date = data_->calendar()[window.start];
        s.step_index = 0;
        s.horizon = window.length;
        return {std::move(obs), std::move(s)};
    }

    std::pair<Transition, PortfolioState> step(const PortfolioState& state, const Allocation& action) const {
        if (state.done()) throw Error(errc::action, "step after episode end");
        if (action.size() != assets_.size() + 1)
            throw Error(errc::action, "allocation length " + std::to_string(action.size()) + ", expected " +
                                          std::to_string(assets_.size() + 1));
        const std::size_t next = state.t + 1;
        if (next >= data_->days()) throw Error(errc::history, "no market data after " + state.date.str());
        std::vector<double> gross(assets_.size());
        for (std::size_t k = 0; k < assets_.size(); ++k) {
            const auto a = assets_.members[k];
            if (!data_->has_bar(a, next))
                throw Error(errc::history, "missing bar for " + assets_.ids[k] + " at " + data_->calendar()[next].str());
            gross[k] = data_->close(a, next) / data_->close(a, state.t);
        }
        const auto acc = apply_step(state.value, state.weights, action.weights, gross, cfg_.cost_rate);

        PortfolioState s = state;
        s.t = next;
        s.date = data_->calendar()[next];
        s.step_index = state.step_index + 1;
        s.value = acc.value_after;
        s.weights = acc.drifted;
        s.bankrupt = !(acc.value_after > 0.0);
        s.daily_nets.push_back(acc.value_after - state.value);

        Transition tr;
        tr.done = s.done();
        tr.info = {acc.value_after, s.date, acc.value_after - state.value, acc.value_after / state.value - 1.0,
                   acc.turnover, acc.cost};
        tr.reward = compute_reward(cfg_.reward, {s.initial_value, state.value, acc.value_after, tr.done, s.daily_nets});
        if (!tr.done) tr.observation = builder_.build(next, assets_);
        return {std::move(tr), std::move(s)};
    }

private:
    const MarketData* data_;
    ObservationBuilder builder_;
    EnvironmentConfig cfg_;
    AssetSet assets_;
};

/// Runs one full episode. Agent exceptions and malformed actions abort with a protocol error.
inline Trajectory run_episode(Agent& agent, Environment& env, const EpisodeWindow& window, const AssetSet& assets,
                              bool training = false, bool keep_observations = false) {
    auto [obs, state] = env.reset(window, assets);
    Trajectory traj;
    traj.assets = assets.ids;
    traj.window = window;
    traj.dates.push_back(state.date);
    traj.values.push_back(state.value);

    const EpisodeContext ctx{&env.data(), &env.assets(), window, training};
    agent.begin_episode(ctx);
    while (!state.done()) {
        std::vector<double> raw;
        Allocation alloc;
        try {
            raw = agent.act(obs, state);
            alloc = validate_action(raw, env.config().projection, assets.size() + 1);
        } catch (const Error& e) {
            throw Error(errc::protocol, "agent " + agent.name() + " at step " + std::to_string(state.step_index) +
                                            " (" + state.date.str() + "): " + e.what());
        }
        auto [tr, next] = env.step(state, alloc);
        if (keep_observations) traj.observations.push_back(obs);
        traj.raw_actions.push_back(std::move(raw));
        traj.allocations.push_back(std::move(alloc));
        traj.rewards.push_back(tr.reward);
        traj.daily_nets.push_back(tr.info.daily_net);
        traj.dates.push_back(next.date);
        traj.values.push_back(next.value);
        agent.observe(tr);
        obs = std::move(tr.observation);
        state = std::move(next);
    }
    traj.bankrupt = state.bankrupt;
    agent.end_episode(traj);
    return traj;
}

// ---------------------------------------------------------------------------
// Trajectory JSON Lines
//
// Record k = 0..T: {"step", "date", "value", "raw_action", "allocation", "reward", "daily_net"}.
// Record 0 is the initial state (action fields null) and also carries "assets".
// Record k >= 1 holds the action decided on date k-1 and its outcome on date k.

inline void write_trajectory(std::ostream& out, const Trajectory& traj) {
    for (std::size_t k = 0; k < traj.values.size(); ++k) {
        nlohmann::json rec;
        rec["step"] = k;
        rec["date"] = traj.dates[k].str();
        rec["value"] = traj.values[k];
        if (k == 0) {
            rec["assets"] = traj.assets;
            rec["raw_action"] = nullptr;
            rec["allocation"] = nullptr;
            rec["reward"] = nullptr;
            rec["daily_net"] = nullptr;
        } else {
            rec["raw_action"] = traj.raw_actions[k - 1];
            rec["allocation"] = traj.allocations[k - 1].weights;
            rec["reward"] = traj.rewards[k - 1];
            rec["daily_net"] = traj.daily_nets[k - 1];
        }
        out << rec.dump() << '\n';
    }
}

inline void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw Error(errc::io, "cannot write " + path.string());
    write_trajectory(out, traj);
}

inline Trajectory read_trajectory(std::istream& in) {
    Trajectory traj;
    std::string line;
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
            if (rec.at("step").get<std::size_t>() != expected) throw Error(errc::data, "trajectory steps out of order");
            traj.dates.push_back(Date::parse(rec.at("date").get<std::string>()));
            traj.values.push_back(rec.at("value").get<double>());
            if (expected == 0) {
                if (rec.contains("assets")) traj.assets = rec["assets"].get<std::vector<std::string>>();
            } else {
                traj.raw_actions.push_back(rec.at("raw_action").get<std::vector<double>>());
                traj.allocations.push_back({rec.at("allocation").get<std::vector<double>>()});
                traj.rewards.push_back(rec.at("reward").get<double>());
                traj.daily_nets.push_back(rec.at("daily_net").get<double>());
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(errc::data, "bad trajectory record " + std::to_string(expected) + ": " + e.what());
        }
        ++expected;
    }
    if (traj.values.empty()) throw Error(errc::data, "empty trajectory");
    return traj;
}

inline Trajectory read_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io, "cannot open trajectory " + path.string());
    return read_trajectory(in);
}

} // namespace olps
