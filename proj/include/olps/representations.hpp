#pragma once

#include "olps/indicators.hpp"
#include "olps/market_data.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace olps {

enum class RepresentationKind { markovian, sliding, lagged, indicators };

inline std::string to_string(RepresentationKind k) {
    switch (k) {
    case RepresentationKind::markovian: return "markovian";
    case RepresentationKind::sliding: return "sliding";
    case RepresentationKind::lagged: return "lagged";
    case RepresentationKind::indicators: return "indicators";
    }
    return "?";
}

inline RepresentationKind parse_representation(std::string_view s) {
    if (s == "markovian" || s == "default") return RepresentationKind::markovian;
    if (s == "sliding" || s == "windowed") return RepresentationKind::sliding;
    if (s == "lagged") return RepresentationKind::lagged;
    if (s == "indicators") return RepresentationKind::indicators;
    throw Error(errc::config, "unknown representation '" + std::string(s) + "'");
}

struct RepresentationConfig {
    RepresentationKind kind = RepresentationKind::markovian;
    std::size_t window = 21;
    std::vector<std::size_t> lags{20, 15, 10, 4, 3, 2, 1, 0}; // row order as emitted
    indicators::Params indicator;
};

/// Bars before the decision day that a representation reads (the universe lookback).
inline std::size_t history_days(const RepresentationConfig& cfg) {
    switch (cfg.kind) {
    case RepresentationKind::markovian: return 1;
    case RepresentationKind::sliding: return cfg.window;
    case RepresentationKind::lagged: {
        std::size_t deepest = 0;
        for (auto l : cfg.lags) deepest = std::max(deepest, l);
        return deepest + 1;
    }
    case RepresentationKind::indicators: return cfg.indicator.warmup - 1;
    }
    return 0;
}

/// Representation-specific state tensor, row-major. Columns are asset-major:
/// column (asset i, channel c) sits at i * channels + c.
struct Observation {
    RepresentationKind kind = RepresentationKind::markovian;
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::size_t t = 0;
    Date date;

    std::size_t size() const { return values.size(); }
};

inline std::vector<std::size_t> observation_shape(const RepresentationConfig& cfg, std::size_t n_assets) {
    switch (cfg.kind) {
    case RepresentationKind::markovian: return {n_assets * kChannels};
    case RepresentationKind::sliding: return {cfg.window, n_assets * kChannels};
    case RepresentationKind::lagged: return {cfg.lags.size(), n_assets * kChannels};
    case RepresentationKind::indicators: return {n_assets * indicators::kFeatures};
    }
    return {};
}

namespace detail {

inline void require_rows(const NormalizedSeries& norm, std::size_t t, std::size_t depth, const AssetSet& assets) {
    for (std::size_t k = 0; k < assets.size(); ++k) {
        const auto a = assets.members[k];
        if (t < depth || !norm.has(a, t - depth) || !norm.has(a, t))
            throw Error(errc::history, "insufficient history for " + assets.ids[k] + " at calendar index " +
                                           std::to_string(t) + " (needs " + std::to_string(depth + 1) +
                                           " normalized rows)");
    }
}

inline void append_row(const NormalizedSeries& norm, std::size_t t, const AssetSet& assets, std::vector<double>& out) {
    for (auto a : assets.members) {
        const auto& x = norm.at(a, t);
        out.insert(out.end(), x.begin(), x.end());
    }
}

} // namespace detail

inline Observation build_markovian(const NormalizedSeries& norm, std::size_t t, const AssetSet& assets) {
    detail::require_rows(norm, t, 0, assets);
    Observation obs{RepresentationKind::markovian, {assets.size() * kChannels}, {}, t, {}};
    obs.values.reserve(assets.size() * kChannels);
    detail::append_row(norm, t, assets, obs.values);
    return obs;
}

/// Rows t-window+1 .. t, oldest first.
inline Observation build_sliding(const NormalizedSeries& norm, std::size_t t, const AssetSet& assets,
                                 std::size_t window = 21) {
    detail::require_rows(norm, t, window - 1, assets);
    Observation obs{RepresentationKind::sliding, {window, assets.size() * kChannels}, {}, t, {}};
    obs.values.reserve(window * assets.size() * kChannels);
    for (std::size_t r = 0; r < window; ++r) detail::append_row(norm, t - (window - 1) + r, assets, obs.values);
    return obs;
}

/// One row per lag (rows at t - lag) in the order given.
inline Observation build_lagged(const NormalizedSeries& norm, std::size_t t, const AssetSet& assets,
                                const std::vector<std::size_t>& lags = {20, 15, 10, 4, 3, 2, 1, 0}) {
    std::size_t deepest = 0;
    for (auto l : lags) deepest = std::max(deepest, l);
    detail::require_rows(norm, t, deepest, assets);
    Observation obs{RepresentationKind::lagged, {lags.size(), assets.size() * kChannels}, {}, t, {}};
    obs.values.reserve(lags.size() * assets.size() * kChannels);
    for (auto l : lags) detail::append_row(norm, t - l, assets, obs.values);
    return obs;
}

inline Observation build_indicators(const MarketData& data, std::size_t t, const AssetSet& assets,
                                    const indicators::Params& params = {}) {
    Observation obs{RepresentationKind::indicators, {assets.size() * indicators::kFeatures}, {}, t, {}};
    obs.values.reserve(assets.size() * indicators::kFeatures);
    for (std::size_t k = 0; k < assets.size(); ++k) {
        const auto a = assets.members[k];
        if (t + 1 < params.warmup || !data.has_bar(a, t + 1 - params.warmup) || !data.has_bar(a, t))
            throw Error(errc::history, "insufficient warm-up for " + assets.ids[k] + " at calendar index " +
                                           std::to_string(t) + " (needs " + std::to_string(params.warmup) + " bars)");
        const auto& bars = data.series(a).bars;
        const std::size_t end = t - data.listing_start(a) + 1;
        const std::span<const Bar> window(bars.data() + end - params.warmup, params.warmup);
        const auto f = indicators::scale(indicators::compute(window, params), window.back().close);
        obs.values.insert(obs.values.end(), f.begin(), f.end());
    }
    return obs;
}

/// Builds observations of one configured kind over shared immutable market data.
class ObservationBuilder {
public:
    ObservationBuilder(const MarketData& data, const NormalizedSeries& norm, RepresentationConfig cfg)
        : data_(&data), norm_(&norm), cfg_(std::move(cfg)) {}

    const RepresentationConfig& config() const { return cfg_; }
    const MarketData& data() const { return *data_; }

    Observation build(std::size_t t, const AssetSet& assets) const {
        Observation obs;
        switch (cfg_.kind) {
        case RepresentationKind::markovian: obs = build_markovian(*norm_, t, assets); break;
        case RepresentationKind::sliding: obs = build_sliding(*norm_, t, assets, cfg_.window); break;
        case RepresentationKind::lagged: obs = build_lagged(*norm_, t, assets, cfg_.lags); break;
        case RepresentationKind::indicators: obs = build_indicators(*data_, t, assets, cfg_.indicator); break;
        }
        obs.date = data_->calendar().at(t);
        return obs;
    }

private:
    const MarketData* data_;
    const NormalizedSeries* norm_;
    RepresentationConfig cfg_;
};

} // namespace olps
