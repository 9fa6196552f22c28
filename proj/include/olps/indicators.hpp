#pragma once

#include "olps/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace olps::indicators {

struct Params {
    std::size_t ema_fast = 12;
    std::size_t ema_slow = 26;
    std::size_t bollinger = 20;
    double bollinger_width = 2.0;
    std::size_t rsi = 14;
    std::size_t cci = 20;
    double cci_constant = 0.015;
    std::size_t dx = 14;
    std::size_t sma = 30;
    std::size_t warmup = 35;
};

/// Unscaled indicator values at the last bar of a window.
struct Values {
    double change = 0.0;
    double macd = 0.0;
    double bb_upper = 0.0;
    double bb_lower = 0.0;
    double rsi = 0.0;
    double cci = 0.0;
    double dx = 0.0;
    double sma = 0.0;
};

inline constexpr std::size_t kFeatures = 8;

/// EMA seeded with the SMA of the first `period` closes, then alpha = 2/(period+1).
inline double ema_last(std::span<const Bar> w, std::size_t period) {
    double seed = 0.0;
    for (std::size_t k = 0; k < period; ++k) seed += w[k].close;
    double ema = seed / static_cast<double>(period);
    const double alpha = 2.0 / (static_cast<double>(period) + 1.0);
    for (std::size_t k = period; k < w.size(); ++k) ema = alpha * w[k].close + (1.0 - alpha) * ema;
    return ema;
}

/// Wilder RSI; a window with gains and no losses gives 100, a flat one 50.
inline double rsi_last(std::span<const Bar> w, std::size_t period) {
    double gain = 0.0, loss = 0.0;
    for (std::size_t k = 1; k <= period; ++k) {
        const double d = w[k].close - w[k - 1].close;
        gain += std::max(d, 0.0);
        loss += std::max(-d, 0.0);
    }
    gain /= static_cast<double>(period);
    loss /= static_cast<double>(period);
    const double p = static_cast<double>(period);
    for (std::size_t k = period + 1; k < w.size(); ++k) {
        const double d = w[k].close - w[k - 1].close;
        gain = (gain * (p - 1.0) + std::max(d, 0.0)) / p;
        loss = (loss * (p - 1.0) + std::max(-d, 0.0)) / p;
    }
    if (loss == 0.0) return gain > 0.0 ? 100.0 : 50.0;
    return 100.0 - 100.0 / (1.0 + gain / loss);
}

inline double cci_last(std::span<const Bar> w, std::size_t period, double constant) {
    const std::size_t from = w.size() - period;
    double sma = 0.0;
    for (std::size_t k = from; k < w.size(); ++k) sma += (w[k].high + w[k].low + w[k].close) / 3.0;
    sma /= static_cast<double>(period);
    double mad = 0.0;
    for (std::size_t k = from; k < w.size(); ++k) mad += std::abs((w[k].high + w[k].low + w[k].close) / 3.0 - sma);
    mad /= static_cast<double>(period);
    if (mad == 0.0) return 0.0;
    const Bar& last = w.back();
    return ((last.high + last.low + last.close) / 3.0 - sma) / (constant * mad);
}

/// Wilder directional index; 0 when both directional indicators vanish.
inline double dx_last(std::span<const Bar> w, std::size_t period) {
    double tr_s = 0.0, pdm_s = 0.0, mdm_s = 0.0;
    const double p = static_cast<double>(period);
    for (std::size_t k = 1; k < w.size(); ++k) {
        const double up = w[k].high - w[k - 1].high;
        const double down = w[k - 1].low - w[k].low;
        const double pdm = (up > down && up > 0.0) ? up : 0.0;
        const double mdm = (down > up && down > 0.0) ? down : 0.0;
        const double prev = w[k - 1].close;
        const double tr = std::max({w[k].high - w[k].low, std::abs(w[k].high - prev), std::abs(w[k].low - prev)});
        if (k <= period) {
            tr_s += tr;
            pdm_s += pdm;
            mdm_s += mdm;
        } else {
            tr_s = tr_s - tr_s / p + tr;
            pdm_s = pdm_s - pdm_s / p + pdm;
            mdm_s = mdm_s - mdm_s / p + mdm;
        }
    }
    if (tr_s <= 0.0) return 0.0;
    const double pdi = 100.0 * pdm_s / tr_s;
    const double mdi = 100.0 * mdm_s / tr_s;
    if (pdi + mdi == 0.0) return 0.0;
    return 100.0 * std::abs(pdi - mdi) / (pdi + mdi);
}

/// All indicators at the last bar of `window`, which must hold exactly `params.warmup` bars.
inline Values compute(std::span<const Bar> window, const Params& params = {}) {
    const std::size_t longest = std::max({params.ema_slow, params.ema_fast, params.bollinger, params.rsi + 1,
                                          params.cci, params.dx + 1, params.sma, std::size_t{2}});
    if (window.size() != params.warmup || window.size() < longest)
        throw Error(errc::history, "indicator window needs " + std::to_string(std::max(params.warmup, longest)) +
                                       " bars, got " + std::to_string(window.size()));
    Values v;
    const double close = window.back().close;
    v.change = close / window[window.size() - 2].close - 1.0;
    v.macd = ema_last(window, params.ema_fast) - ema_last(window, params.ema_slow);

    const std::size_t from = window.size() - params.bollinger;
    double m = 0.0;
    for (std::size_t k = from; k < window.size(); ++k) m += window[k].close;
    m /= static_cast<double>(params.bollinger);
    double var = 0.0;
    for (std::size_t k = from; k < window.size(); ++k) var += (window[k].close - m) * (window[k].close - m);
    const double sd = std::sqrt(var / static_cast<double>(params.bollinger));
    v.bb_upper = m + params.bollinger_width * sd;
    v.bb_lower = m - params.bollinger_width * sd;

    v.rsi = rsi_last(window, params.rsi);
    v.cci = cci_last(window, params.cci, params.cci_constant);
    v.dx = dx_last(window, params.dx);

    double s = 0.0;
    for (std::size_t k = window.size() - params.sma; k < window.size(); ++k) s += window[k].close;
    v.sma = s / static_cast<double>(params.sma);
    return v;
}

/// Price-level-free feature vector in the fixed order
/// [change, MACD, BB-upper, BB-lower, RSI, CCI, DX, SMA-ratio].
inline std::array<double, kFeatures> scale(const Values& v, double close) {
    return {v.change,
            v.macd / close,
            v.bb_upper / close - 1.0,
            v.bb_lower / close - 1.0,
            v.rsi / 100.0,
            v.cci / 100.0,
            v.dx / 100.0,
            close / v.sma - 1.0};
}

} // namespace olps::indicators
