#pragma once

#include "olps/core.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace olps::metrics {

/// Why a ratio has no finite value. Division by zero never yields a silent NaN.
enum class Sentinel { none, pos_inf, neg_inf, undefined };

struct MetricValue {
    double value = 0.0;
    Sentinel sentinel = Sentinel::none;

    static MetricValue of(double v) { return {v, Sentinel::none}; }
    static MetricValue pos_inf() { return {std::numeric_limits<double>::infinity(), Sentinel::pos_inf}; }
    static MetricValue neg_inf() { return {-std::numeric_limits<double>::infinity(), Sentinel::neg_inf}; }
    static MetricValue undefined() { return {std::numeric_limits<double>::quiet_NaN(), Sentinel::undefined}; }

    bool finite() const { return sentinel == Sentinel::none; }

    friend bool operator==(const MetricValue& a, const MetricValue& b) {
        if (a.sentinel != b.sentinel) return false;
        return a.sentinel != Sentinel::none || a.value == b.value;
    }
};

inline std::string to_string(const MetricValue& m) {
    switch (m.sentinel) {
    case Sentinel::pos_inf: return "inf";
    case Sentinel::neg_inf: return "-inf";
    case Sentinel::undefined: return "undefined";
    case Sentinel::none: break;
    }
    std::ostringstream os;
    os.precision(17);
    os << m.value;
    return os.str();
}

inline MetricValue parse_metric(const std::string& s) {
    if (s == "inf") return MetricValue::pos_inf();
    if (s == "-inf") return MetricValue::neg_inf();
    if (s == "undefined") return MetricValue::undefined();
    return MetricValue::of(std::stod(s));
}

/// Ratio with the sentinel rules: x/0 -> +-inf by sign of x, 0/0 -> 0.
inline MetricValue safe_ratio(double num, double den) {
    if (den != 0.0) return MetricValue::of(num / den);
    if (num > 0.0) return MetricValue::pos_inf();
    if (num < 0.0) return MetricValue::neg_inf();
    return MetricValue::of(0.0);
}

// ---------------------------------------------------------------------------

/// Portfolio value V_t by date.
struct ValueSeries {
    std::vector<Date> dates;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }

    void validate() const {
        if (dates.size() != values.size()) throw Error(errc::data, "value series dates/values length mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] > 0.0) || !std::isfinite(values[i]))
                throw Error(errc::data, "value series has non-positive value at " + dates[i].str());
            if (i > 0 && !(dates[i - 1] < dates[i]))
                throw Error(errc::data, "value series dates not increasing at " + dates[i].str());
        }
    }
};

/// CSV with header `date,value`; values written with 17 significant digits.
inline void write_value_series(const std::filesystem::path& path, const ValueSeries& s) {
    std::ofstream out(path);
    if (!out) throw Error(errc::io, "cannot write " + path.string());
    out.precision(17);
    out << "date,value\n";
    for (std::size_t i = 0; i < s.size(); ++i) out << s.dates[i].str() << ',' << s.values[i] << '\n';
}

inline ValueSeries read_value_series(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io, "cannot open value series " + path.string());
    std::string line;
    std::getline(in, line);
    ValueSeries s;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(errc::data, "bad value series row: " + line);
        s.dates.push_back(Date::parse(line.substr(0, comma)));
        s.values.push_back(std::stod(line.substr(comma + 1)));
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------

/// PR_t = V_t - V_{t-n} for t = n .. size-1.
inline std::vector<double> portfolio_returns(std::span<const double> values, std::size_t n = 1) {
    std::vector<double> out;
    for (std::size_t t = n; t < values.size(); ++t) out.push_back(values[t] - values[t - n]);
    return out;
}

/// RoR_t = (V_t - V_{t-n}) / V_{t-n}.
inline std::vector<double> rate_of_return(std::span<const double> values, std::size_t n = 1) {
    std::vector<double> out;
    for (std::size_t t = n; t < values.size(); ++t) out.push_back((values[t] - values[t - n]) / values[t - n]);
    return out;
}

inline double total_rate_of_return(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    return (values.back() - values.front()) / values.front();
}

/// Sortino ratio: mean excess return over downside deviation, where the downside
/// sum covers only observations below `threshold` but is divided by the full count.
/// annualization_days > 1 scales the ratio by sqrt(annualization_days).
inline MetricValue sortino(std::span<const double> returns, double rfr = 0.0, double threshold = 0.0,
                           std::size_t annualization_days = 0) {
    if (returns.empty()) throw Error(errc::data, "sortino of an empty series");
    double m = 0.0;
    double downside = 0.0;
    for (double r : returns) {
        const double excess = r - rfr;
        m += excess;
        if (excess < threshold) downside += (excess - threshold) * (excess - threshold);
    }
    const double n = static_cast<double>(returns.size());
    m /= n;
    const double sigma_d = std::sqrt(downside / n);
    auto ratio = safe_ratio(m, sigma_d);
    if (ratio.finite() && annualization_days > 1)
        ratio.value = (m * static_cast<double>(annualization_days)) /
                      (sigma_d * std::sqrt(static_cast<double>(annualization_days)));
    return ratio;
}

/// Most negative (V_t - running peak) / running peak; 0 for a never-declining series.
inline double max_drawdown(std::span<const double> values) {
    double peak = -std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (double v : values) {
        peak = std::max(peak, v);
        worst = std::min(worst, (v - peak) / peak);
    }
    return worst;
}

/// The drawdown limit beyond which an allocator is usually discarded.
inline constexpr double kDrawdownLimit = -0.20;
inline bool exceeds_drawdown_limit(double mdd) { return mdd < kDrawdownLimit; }

struct TailEstimate {
    double value = 0.0;
    std::size_t tail_count = 0;
    bool short_series = false; // fewer than 1/alpha observations
};

inline std::size_t tail_count(std::size_t n, double alpha) {
    const auto k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(k, 1, n);
}

/// Empirical CVaR: mean of the worst ceil(alpha * n) observations.
inline TailEstimate cvar(std::span<const double> returns, double alpha = 0.05) {
    if (returns.empty()) throw Error(errc::data, "cvar of an empty series");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(errc::data, "cvar alpha must lie in (0, 1]");
    std::vector<double> xs(returns.begin(), returns.end());
    const std::size_t k = tail_count(xs.size(), alpha);
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k - 1), xs.end());
    std::sort(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k));
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += xs[i];
    return {total / static_cast<double>(k), k, static_cast<double>(xs.size()) * alpha < 1.0};
}

/// Mean over population std of active returns (pr - index_pr).
inline MetricValue information_ratio(std::span<const double> pr, std::span<const double> index_pr) {
    if (pr.size() != index_pr.size()) throw Error(errc::data, "information ratio needs aligned series");
    if (pr.empty()) return MetricValue::undefined();
    std::vector<double> active(pr.size());
    for (std::size_t i = 0; i < pr.size(); ++i) active[i] = pr[i] - index_pr[i];
    return safe_ratio(mean(active), population_std(active));
}

inline MetricValue ir_quotient(const MetricValue& ir_backtest, const MetricValue& ir_validation) {
    if (!ir_backtest.finite() || !ir_validation.finite() || ir_validation.value == 0.0) return MetricValue::undefined();
    return MetricValue::of(ir_backtest.value / ir_validation.value);
}

/// OLS slope of IR_t on t = 0 .. T_m - 1.
inline double ir_trend(std::span<const double> monthly_irs) {
    if (monthly_irs.size() < 2) throw Error(errc::data, "IR trend needs at least two months");
    const double centre = static_cast<double>(monthly_irs.size() - 1) / 2.0;
    const double ir_bar = mean(monthly_irs);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < monthly_irs.size(); ++t) {
        const double dt = static_cast<double>(t) - centre;
        num += dt * (monthly_irs[t] - ir_bar);
        den += dt * dt;
    }
    return num / den;
}

/// Information ratio per consecutive block of `bucket` days; a trailing partial block is dropped.
inline std::vector<MetricValue> monthly_information_ratios(std::span<const double> pr, std::span<const double> index_pr,
                                                           std::size_t bucket = 21) {
    if (pr.size() != index_pr.size()) throw Error(errc::data, "information ratio needs aligned series");
    std::vector<MetricValue> out;
    for (std::size_t s = 0; s + bucket <= pr.size(); s += bucket)
        out.push_back(information_ratio(pr.subspan(s, bucket), index_pr.subspan(s, bucket)));
    return out;
}

/// IR trend over monthly buckets; undefined when fewer than two buckets or any bucket is a sentinel.
inline MetricValue ir_trend_of(std::span<const double> pr, std::span<const double> index_pr, std::size_t bucket = 21) {
    const auto months = monthly_information_ratios(pr, index_pr, bucket);
    if (months.size() < 2) return MetricValue::undefined();
    std::vector<double> xs;
    for (const auto& m : months) {
        if (!m.finite()) return MetricValue::undefined();
        xs.push_back(m.value);
    }
    return MetricValue::of(ir_trend(xs));
}

// ---------------------------------------------------------------------------
// Per-seed metrics and their aggregation

struct MetricOptions {
    double cvar_alpha = 0.05;
    std::size_t annualization_days = 252;
    std::size_t month_days = 21;
    double rfr = 0.0;
    double threshold = 0.0;
};

struct SeedMetrics {
    std::uint64_t seed = 0;
    MetricValue ror;
    MetricValue wealth_multiplier;
    MetricValue sortino;
    MetricValue mdd;
    MetricValue cvar;
    MetricValue ir;
    MetricValue ir_trend;
    MetricValue ir_quotient;
    MetricValue validation_ir;
};

/// Every report metric for one agent value series against an aligned index series.
/// RoR/MDD from values; Sortino and CVaR on daily PR in currency; IR family on daily rate returns.
inline SeedMetrics evaluate(std::span<const double> values, std::span<const double> index_values,
                            const MetricValue& validation_ir, const MetricOptions& opt = {}) {
    if (values.size() != index_values.size()) throw Error(errc::data, "agent and index series differ in length");
    if (values.size() < 2) throw Error(errc::data, "metrics need at least two values");
    SeedMetrics m;
    const double ror = total_rate_of_return(values);
    m.ror = MetricValue::of(ror);
    m.wealth_multiplier = MetricValue::of(1.0 + ror);
    const auto pr = portfolio_returns(values, 1);
    m.sortino = sortino(pr, opt.rfr, opt.threshold, opt.annualization_days);
    m.mdd = MetricValue::of(max_drawdown(values));
    m.cvar = MetricValue::of(cvar(pr, opt.cvar_alpha).value);
    const auto rr = rate_of_return(values, 1);
    const auto ir_index = rate_of_return(index_values, 1);
    m.ir = information_ratio(rr, ir_index);
    m.ir_trend = ir_trend_of(rr, ir_index, opt.month_days);
    m.validation_ir = validation_ir;
    m.ir_quotient = ir_quotient(m.ir, validation_ir);
    return m;
}

struct Summary {
    double mean = 0.0;
    double std = 0.0; // population
    std::size_t count = 0;
    std::size_t excluded = 0; // sentinel values left out
};

inline Summary aggregate(std::span<const MetricValue> xs) {
    std::vector<double> finite;
    Summary s;
    for (const auto& x : xs) {
        if (x.finite())
            finite.push_back(x.value);
        else
            ++s.excluded;
    }
    s.count = finite.size();
    if (!finite.empty()) {
        s.mean = mean(finite);
        s.std = population_std(finite);
    }
    return s;
}

inline constexpr const char* kMetricNames[] = {"ror",  "wealth_multiplier", "sortino",     "mdd",          "cvar",
                                               "ir",   "ir_trend",          "ir_quotient", "validation_ir"};

inline const MetricValue& metric_by_name(const SeedMetrics& m, std::string_view name) {
    if (name == "ror") return m.ror;
    if (name == "wealth_multiplier") return m.wealth_multiplier;
    if (name == "sortino") return m.sortino;
    if (name == "mdd") return m.mdd;
    if (name == "cvar") return m.cvar;
    if (name == "ir") return m.ir;
    if (name == "ir_trend") return m.ir_trend;
    if (name == "ir_quotient") return m.ir_quotient;
    if (name == "validation_ir") return m.validation_ir;
    throw Error(errc::data, "unknown metric " + std::string(name));
}

/// Interseed summary of one algorithm combination.
struct MetricReport {
    std::string name;
    std::vector<SeedMetrics> seeds;

    std::size_t seed_count() const { return seeds.size(); }

    Summary summary(std::string_view metric) const {
        std::vector<MetricValue> xs;
        for (const auto& s : seeds) xs.push_back(metric_by_name(s, metric));
        return aggregate(xs);
    }
};

inline MetricReport aggregate_seeds(std::string name, std::vector<SeedMetrics> per_seed) {
    return {std::move(name), std::move(per_seed)};
}

} // namespace olps::metrics
