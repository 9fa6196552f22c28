#pragma once

#include "olps/metrics.hpp"

#include <span>
#include <string>
#include <string_view>

namespace olps {

enum class RewardKind { daily_net, episodic_value, episodic_ror, episodic_sortino };

inline std::string to_string(RewardKind k) {
    switch (k) {
    case RewardKind::daily_net: return "daily_net";
    case RewardKind::episodic_value: return "episodic_value";
    case RewardKind::episodic_ror: return "episodic_ror";
    case RewardKind::episodic_sortino: return "episodic_sortino";
    }
    return "?";
}

inline RewardKind parse_reward(std::string_view s) {
    if (s == "daily_net" || s == "net") return RewardKind::daily_net;
    if (s == "episodic_value" || s == "value") return RewardKind::episodic_value;
    if (s == "episodic_ror" || s == "ror") return RewardKind::episodic_ror;
    if (s == "episodic_sortino" || s == "sortino") return RewardKind::episodic_sortino;
    throw Error(errc::config, "unknown reward '" + std::string(s) + "'");
}

/// Scales that bring each reward near unit magnitude on a 100000 portfolio.
inline double default_reward_scale(RewardKind k) {
    switch (k) {
    case RewardKind::daily_net: return 1e-4;
    case RewardKind::episodic_value: return 1e-4;
    case RewardKind::episodic_ror: return 1.0;
    case RewardKind::episodic_sortino: return 0.1;
    }
    return 1.0;
}

struct RewardSpec {
    RewardKind kind = RewardKind::daily_net;
    double scale = 1e-4;
    double sortino_cap = 10.0; // stands in for a +inf Sortino (no downside)

    static RewardSpec of(RewardKind k) { return {k, default_reward_scale(k), 10.0}; }

    void validate() const {
        if (!(scale > 0.0)) throw Error(errc::config, "reward scale must be positive");
    }
};

namespace rewards {

inline double daily_net(double value_before, double value_after, double scale = 1.0) {
    return scale * (value_after - value_before);
}

inline double episodic_value(double initial, double value, bool terminal, double scale = 1.0) {
    return terminal ? scale * (value - initial) : 0.0;
}

inline double episodic_ror(double initial, double value, bool terminal, double scale = 1.0) {
    return terminal ? scale * (value - initial) / initial : 0.0;
}

/// Unannualized Sortino of the episode's daily net returns (RFR = threshold = 0).
inline double episodic_sortino(std::span<const double> daily_nets, bool terminal, double scale = 1.0,
                               double cap = 10.0) {
    if (!terminal || daily_nets.empty()) return 0.0;
    const auto s = metrics::sortino(daily_nets, 0.0, 0.0, 0);
    if (s.sentinel == metrics::Sentinel::pos_inf) return scale * cap;
    return scale * s.value;
}

} // namespace rewards

/// What a reward function sees after one environment step.
struct RewardContext {
    double initial_value = 0.0;
    double value_before = 0.0;
    double value_after = 0.0;
    bool terminal = false;
    std::span<const double> daily_nets; // episode so far, including this step
};

inline double compute_reward(const RewardSpec& spec, const RewardContext& ctx) {
    switch (spec.kind) {
    case RewardKind::daily_net: return rewards::daily_net(ctx.value_before, ctx.value_after, spec.scale);
    case RewardKind::episodic_value:
        return rewards::episodic_value(ctx.initial_value, ctx.value_after, ctx.terminal, spec.scale);
    case RewardKind::episodic_ror:
        return rewards::episodic_ror(ctx.initial_value, ctx.value_after, ctx.terminal, spec.scale);
    case RewardKind::episodic_sortino:
        return rewards::episodic_sortino(ctx.daily_nets, ctx.terminal, spec.scale, spec.sortino_cap);
    }
    return 0.0;
}

} // namespace olps
