#pragma once

#include "olps/core.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace olps {

/// One daily bar: prices in currency units, volume in shares.
struct Bar {
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0; // adjusted close
    double volume = 0.0;

    friend bool operator==(const Bar&, const Bar&) = default;
};

/// Empty string when the bar is valid, otherwise the violated rule.
inline std::string bar_violation(const Bar& b) {
    for (double v : {b.open, b.high, b.low, b.close, b.volume})
        if (!std::isfinite(v)) return "non-finite value";
    if (b.open <= 0 || b.high <= 0 || b.low <= 0 || b.close <= 0) return "non-positive price";
    if (b.volume < 0) return "negative volume";
    if (b.low > std::min(b.open, b.close)) return "low above min(open, close)";
    if (b.high < std::max(b.open, b.close)) return "high below max(open, close)";
    return {};
}

/// One asset's history: bars cover calendar indices [first_index, calendar end).
struct AssetSeries {
    std::string id;
    std::size_t first_index = 0;
    std::vector<Bar> bars;
    std::string sector;
};

/// Daily OHLCV for many assets on one shared trading calendar. Immutable after construction.
class MarketData {
public:
    MarketData() = default;

    MarketData(std::vector<Date> calendar, std::vector<AssetSeries> assets)
        : calendar_(std::move(calendar)), assets_(std::move(assets)) {
        for (std::size_t t = 1; t < calendar_.size(); ++t)
            if (!(calendar_[t - 1] < calendar_[t]))
                throw Error(errc::data, "calendar not strictly increasing at " + calendar_[t].str());
        std::set<std::string> seen;
        for (const auto& a : assets_) {
            if (!seen.insert(a.id).second) throw Error(errc::data, "duplicate asset id " + a.id);
            if (a.first_index + a.bars.size() != calendar_.size())
                throw Error(errc::data, "asset " + a.id + " does not cover a calendar suffix");
            for (std::size_t k = 0; k < a.bars.size(); ++k) {
                const auto why = bar_violation(a.bars[k]);
                if (!why.empty())
                    throw Error(errc::data, "asset " + a.id + " on " +
                                                calendar_[a.first_index + k].str() + ": " + why);
            }
        }
    }

    const std::vector<Date>& calendar() const { return calendar_; }
    std::size_t days() const { return calendar_.size(); }
    std::size_t asset_count() const { return assets_.size(); }
    const AssetSeries& series(std::size_t asset) const { return assets_.at(asset); }
    const std::string& id(std::size_t asset) const { return assets_.at(asset).id; }
    std::size_t listing_start(std::size_t asset) const { return assets_.at(asset).first_index; }

    bool has_bar(std::size_t asset, std::size_t t) const {
        return t < calendar_.size() && t >= assets_.at(asset).first_index;
    }

    const Bar& bar(std::size_t asset, std::size_t t) const {
        if (!has_bar(asset, t))
            throw Error(errc::history, "no bar for " + id(asset) + " at calendar index " + std::to_string(t));
        const auto& a = assets_[asset];
        return a.bars[t - a.first_index];
    }

    double close(std::size_t asset, std::size_t t) const { return bar(asset, t).close; }

    std::optional<std::size_t> find_asset(std::string_view asset_id) const {
        for (std::size_t i = 0; i < assets_.size(); ++i)
            if (assets_[i].id == asset_id) return i;
        return std::nullopt;
    }

    /// Index of the first calendar date >= d (days() when past the end).
    std::size_t index_at_or_after(Date d) const {
        return static_cast<std::size_t>(std::lower_bound(calendar_.begin(), calendar_.end(), d) - calendar_.begin());
    }

private:
    std::vector<Date> calendar_;
    std::vector<AssetSeries> assets_;
};

// ---------------------------------------------------------------------------
// Loading

struct ColumnMap {
    std::string date = "date";
    std::string open = "open";
    std::string high = "high";
    std::string low = "low";
    std::string close = "close";
    std::string volume = "volume";
};

struct ManifestEntry {
    std::string id;
    std::string file;
    std::string sector;
};

/// Manifest JSON: {"assets": [{"id": "AAPL", "file": "AAPL.csv", "sector": "Technology"}, ...]}
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io, "cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(errc::data, "manifest " + path.string() + ": " + e.what());
    }
    std::vector<ManifestEntry> out;
    for (const auto& a : j.at("assets")) {
        ManifestEntry e;
        e.id = a.at("id").get<std::string>();
        e.file = a.value("file", e.id + ".csv");
        e.sector = a.value("sector", "");
        out.push_back(std::move(e));
    }
    return out;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    nlohmann::json j;
    j["assets"] = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json a{{"id", e.id}, {"file", e.file}};
        if (!e.sector.empty()) a["sector"] = e.sector;
        j["assets"].push_back(a);
    }
    std::ofstream out(path);
    if (!out) throw Error(errc::io, "cannot write manifest " + path.string());
    out << j.dump(2) << '\n';
}

/// A rejected row or asset found while loading.
struct LoadIssue {
    std::string asset;
    std::string date; // empty when the issue is not tied to a row
    std::size_t line = 0;
    std::string message;
    bool asset_rejected = false;
};

struct LoadResult {
    MarketData data;
    std::vector<LoadIssue> issues;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

struct RawAsset {
    std::string id;
    std::string sector;
    std::vector<std::pair<Date, Bar>> rows;
};

} // namespace detail

/// Loads one CSV per asset from `dir`. Uses `dir/manifest.json` when present,
/// otherwise every *.csv file (file stem = asset id). Bad rows and bad assets
/// are reported in `issues`; the calendar is the union of surviving assets' dates.
inline LoadResult load_ohlcv(const std::filesystem::path& dir, const ColumnMap& columns = {},
                             std::optional<std::filesystem::path> manifest = std::nullopt) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(errc::io, "data directory not found: " + dir.string());

    std::vector<ManifestEntry> entries;
    if (!manifest && fs::exists(dir / "manifest.json")) manifest = dir / "manifest.json";
    if (manifest) {
        entries = read_manifest(*manifest);
    } else {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) entries.push_back({f.stem().string(), f.filename().string(), ""});
    }

    LoadResult result;
    std::vector<detail::RawAsset> raw;
    for (const auto& entry : entries) {
        const fs::path file = dir / entry.file;
        std::ifstream in(file);
        if (!in) throw Error(errc::io, "missing asset file " + file.string());

        detail::RawAsset asset{entry.id, entry.sector, {}};
        std::string line;
        if (!std::getline(in, line)) {
            result.issues.push_back({entry.id, "", 1, "empty file", true});
            continue;
        }
        const auto header = detail::split_csv(line);
        auto col = [&](const std::string& name) -> std::optional<std::size_t> {
            for (std::size_t i = 0; i < header.size(); ++i)
                if (header[i] == name) return i;
            return std::nullopt;
        };
        const std::array<std::optional<std::size_t>, 6> idx{col(columns.date), col(columns.open), col(columns.high),
                                                             col(columns.low), col(columns.close), col(columns.volume)};
        if (std::any_of(idx.begin(), idx.end(), [](const auto& o) { return !o; })) {
            result.issues.push_back({entry.id, "", 1, "header lacks a required column", true});
            continue;
        }

        bool rejected = false;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (detail::trim(line).empty()) continue;
            const auto cells = detail::split_csv(line);
            std::size_t need = 0;
            for (const auto& o : idx) need = std::max(need, *o + 1);
            if (cells.size() < need) {
                result.issues.push_back({entry.id, "", line_no, "too few columns; row rejected", false});
                continue;
            }
            Date date;
            try {
                date = Date::parse(cells[*idx[0]]);
            } catch (const Error&) {
                result.issues.push_back(
                    {entry.id, std::string(cells[*idx[0]]), line_no, "date parse failure; row rejected", false});
                continue;
            }
            std::array<double, 5> v{};
            bool ok = true;
            for (std::size_t c = 0; c < 5; ++c) {
                const auto d = detail::parse_double(cells[*idx[c + 1]]);
                if (!d) {
                    ok = false;
                    break;
                }
                v[c] = *d;
            }
            if (!ok) {
                result.issues.push_back({entry.id, date.str(), line_no, "unparsable number; asset rejected", true});
                rejected = true;
                break;
            }
            const Bar bar{v[0], v[1], v[2], v[3], v[4]};
            if (const auto why = bar_violation(bar); !why.empty()) {
                result.issues.push_back({entry.id, date.str(), line_no, why + "; asset rejected", true});
                rejected = true;
                break;
            }
            asset.rows.emplace_back(date, bar);
        }
        if (rejected) continue;
        std::sort(asset.rows.begin(), asset.rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        bool dup = false;
        for (std::size_t k = 1; k < asset.rows.size(); ++k)
            if (asset.rows[k].first == asset.rows[k - 1].first) {
                result.issues.push_back({entry.id, asset.rows[k].first.str(), 0, "duplicate date; asset rejected", true});
                dup = true;
                break;
            }
        if (dup) continue;
        if (asset.rows.empty()) {
            result.issues.push_back({entry.id, "", 0, "no valid rows; asset rejected", true});
            continue;
        }
        raw.push_back(std::move(asset));
    }

    // Union calendar; assets with holes after their first date are rejected and the
    // union recomputed until stable.
    std::vector<Date> calendar;
    while (true) {
        std::set<Date> all;
        for (const auto& a : raw)
            for (const auto& r : a.rows) all.insert(r.first);
        calendar.assign(all.begin(), all.end());
        std::vector<detail::RawAsset> kept;
        bool changed = false;
        for (auto& a : raw) {
            const auto first = static_cast<std::size_t>(
                std::lower_bound(calendar.begin(), calendar.end(), a.rows.front().first) - calendar.begin());
            if (first + a.rows.size() != calendar.size()) {
                std::string missing;
                for (std::size_t t = first, k = 0; t < calendar.size(); ++t) {
                    if (k < a.rows.size() && a.rows[k].first == calendar[t]) {
                        ++k;
                    } else {
                        missing = calendar[t].str();
                        break;
                    }
                }
                result.issues.push_back({a.id, missing, 0, "missing calendar date; asset rejected", true});
                changed = true;
                continue;
            }
            kept.push_back(std::move(a));
        }
        raw = std::move(kept);
        if (!changed) break;
    }

    std::vector<AssetSeries> series;
    for (auto& a : raw) {
        AssetSeries s;
        s.id = a.id;
        s.sector = a.sector;
        s.first_index = calendar.size() - a.rows.size();
        for (auto& r : a.rows) s.bars.push_back(r.second);
        series.push_back(std::move(s));
    }
    result.data = MarketData(std::move(calendar), std::move(series));
    return result;
}

/// Writes one CSV per asset plus manifest.json; round-trips through load_ohlcv.
inline void write_ohlcv(const MarketData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<ManifestEntry> entries;
    for (std::size_t i = 0; i < data.asset_count(); ++i) {
        const auto& s = data.series(i);
        const std::string file = s.id + ".csv";
        std::ofstream out(dir / file);
        if (!out) throw Error(errc::io, "cannot write " + (dir / file).string());
        out << "date,open,high,low,close,volume\n";
        out.precision(17);
        for (std::size_t k = 0; k < s.bars.size(); ++k) {
            const Bar& b = s.bars[k];
            out << data.calendar()[s.first_index + k].str() << ',' << b.open << ',' << b.high << ',' << b.low << ','
                << b.close << ',' << b.volume << '\n';
        }
        entries.push_back({s.id, file, s.sector});
    }
    write_manifest(dir / "manifest.json", entries);
}

// ---------------------------------------------------------------------------
// Normalization

enum Channel : std::size_t { kOpen = 0, kHigh = 1, kLow = 2, kClose = 3, kVolume = 4 };
inline constexpr std::size_t kChannels = 5;

/// Channel-wise ratio returns x_t = v_t / v_{t-1} - 1, defined from listing_start + 1 on.
class NormalizedSeries {
public:
    NormalizedSeries() = default;

    explicit NormalizedSeries(const MarketData& data) : days_(data.days()) {
        rows_.resize(data.asset_count());
        first_.resize(data.asset_count());
        for (std::size_t a = 0; a < data.asset_count(); ++a) {
            const auto& s = data.series(a);
            first_[a] = s.first_index + 1;
            auto& out = rows_[a];
            for (std::size_t k = 1; k < s.bars.size(); ++k) {
                const Bar& p = s.bars[k - 1];
                const Bar& c = s.bars[k];
                out.push_back({c.open / p.open - 1.0, c.high / p.high - 1.0, c.low / p.low - 1.0,
                               c.close / p.close - 1.0, p.volume == 0.0 ? 0.0 : c.volume / p.volume - 1.0});
            }
        }
    }

    std::size_t days() const { return days_; }
    std::size_t asset_count() const { return rows_.size(); }
    /// First calendar index with a normalized row.
    std::size_t first_index(std::size_t asset) const { return first_.at(asset); }
    bool has(std::size_t asset, std::size_t t) const { return t < days_ && t >= first_.at(asset); }

    const std::array<double, kChannels>& at(std::size_t asset, std::size_t t) const {
        if (!has(asset, t))
            throw Error(errc::history, "no normalized row for asset #" + std::to_string(asset) + " at index " +
                                           std::to_string(t));
        return rows_[asset][t - first_[asset]];
    }

private:
    std::size_t days_ = 0;
    std::vector<std::size_t> first_;
    std::vector<std::vector<std::array<double, kChannels>>> rows_;
};

inline NormalizedSeries normalize(const MarketData& data) { return NormalizedSeries(data); }

// ---------------------------------------------------------------------------
// Universe sampling

struct AssetSet {
    std::vector<std::size_t> members; // indices into MarketData, ascending
    std::vector<std::string> ids;
    Date as_of;

    std::size_t size() const { return members.size(); }
};

inline AssetSet make_asset_set(const MarketData& data, std::vector<std::size_t> members, std::size_t as_of) {
    AssetSet set;
    set.members = std::move(members);
    for (auto m : set.members) set.ids.push_back(data.id(m));
    set.as_of = data.calendar().at(as_of);
    return set;
}

/// Assets with at least `lookback` bars before calendar index `as_of`.
inline std::vector<std::size_t> eligible_assets(const MarketData& data, std::size_t as_of, std::size_t lookback) {
    std::vector<std::size_t> out;
    if (as_of < lookback || as_of >= data.days()) return out;
    for (std::size_t a = 0; a < data.asset_count(); ++a)
        if (data.listing_start(a) <= as_of - lookback) out.push_back(a);
    return out;
}

/// Uniform sample of n assets without replacement among those eligible at `as_of`.
inline AssetSet sample_universe(const MarketData& data, std::size_t n, std::size_t as_of, std::size_t lookback,
                                std::mt19937_64& rng) {
    auto pool = eligible_assets(data, as_of, lookback);
    if (pool.size() < n)
        throw Error(errc::infeasible, "only " + std::to_string(pool.size()) + " eligible assets at " +
                                          (as_of < data.days() ? data.calendar()[as_of].str() : std::string("?")) +
                                          ", need " + std::to_string(n) + " (short by " +
                                          std::to_string(n - pool.size()) + ")");
    for (std::size_t k = 0; k < n; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
        std::swap(pool[k], pool[pick(rng)]);
    }
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    return make_asset_set(data, std::move(pool), as_of);
}

// ---------------------------------------------------------------------------
// Train / validation split

/// Episode of `length` decision steps starting at calendar index `start`;
/// it touches prices on indices [start, start + length].
struct EpisodeWindow {
    std::size_t start = 0;
    std::size_t length = 0;

    std::size_t last() const { return start + length; }
    friend bool operator==(const EpisodeWindow&, const EpisodeWindow&) = default;
};

struct SplitPlan {
    std::vector<EpisodeWindow> training;
    std::vector<EpisodeWindow> validation;
    std::size_t guard_gap = 0;
};

struct SplitRequest {
    std::size_t episode_length = 60;
    std::size_t validation_count = 5;
    std::size_t lookback = 30;
    std::size_t first_index = 0;        // earliest allowed episode-history index
    std::optional<std::size_t> end_index; // exclusive bound on touched indices; default calendar size
};

/// Tiles [first_index, end_index) into slots of lookback + length + 1 days, each
/// holding one episode at its tail, and draws validation slots uniformly. A
/// validation window widened by the lookback stays inside its own slot.
inline SplitPlan split_periods(std::size_t calendar_size, const SplitRequest& req, std::mt19937_64& rng) {
    const std::size_t end = std::min(req.end_index.value_or(calendar_size), calendar_size);
    const std::size_t usable = end > req.first_index ? end - req.first_index : 0;
    if (req.episode_length == 0) throw Error(errc::infeasible, "episode_length must be positive");
    if (req.episode_length + 1 > usable)
        throw Error(errc::infeasible, "episode length " + std::to_string(req.episode_length) +
                                          " exceeds usable calendar of " + std::to_string(usable) +
                                          " days; maximum feasible validation_count = 0");
    const std::size_t slot = req.lookback + req.episode_length + 1;
    const std::size_t slots = usable / slot;
    const std::size_t max_validation = slots == 0 ? 0 : slots - 1;
    if (slots == 0 || req.validation_count > max_validation)
        throw Error(errc::infeasible, "cannot place " + std::to_string(req.validation_count) +
                                          " validation windows; maximum feasible validation_count = " +
                                          std::to_string(max_validation));

    std::uniform_int_distribution<std::size_t> shift(0, usable - slots * slot);
    const std::size_t offset = req.first_index + shift(rng);

    std::vector<std::size_t> order(slots);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = 0; k < req.validation_count; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, slots - 1);
        std::swap(order[k], order[pick(rng)]);
    }
    std::vector<bool> is_validation(slots, false);
    for (std::size_t k = 0; k < req.validation_count; ++k) is_validation[order[k]] = true;

    SplitPlan plan;
    plan.guard_gap = req.lookback;
    for (std::size_t j = 0; j < slots; ++j) {
        const EpisodeWindow w{offset + j * slot + req.lookback, req.episode_length};
        (is_validation[j] ? plan.validation : plan.training).push_back(w);
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Synthetic markets

struct SyntheticAsset {
    std::string id;
    double drift = 0.0;      // daily log drift
    double volatility = 0.0; // daily
    double initial_price = 100.0;
    std::size_t listing_delay = 0; // trading days before the asset's first bar
    std::string sector;
};

struct SyntheticSpec {
    std::vector<SyntheticAsset> assets;
    std::vector<double> correlation; // row-major n x n; empty = identity
    Date start{2010, 1, 4};
    double base_volume = 1.0e6;
    double volume_volatility = 0.2;
};

/// Weekday calendar of `days` dates starting at the first weekday >= start.
inline std::vector<Date> business_days(Date start, std::size_t days) {
    std::vector<Date> out;
    Date d = start;
    while (out.size() < days) {
        if (d.weekday() != 0 && d.weekday() != 6) out.push_back(d);
        d = d.plus_days(1);
    }
    return out;
}

/// Correlated geometric-Brownian market. With zero volatility the close follows
/// close_0 * exp(drift * t) exactly and open = high = low = close.
inline MarketData generate_synthetic(const SyntheticSpec& spec, std::size_t days, std::mt19937_64& rng) {
    const std::size_t n = spec.assets.size();
    if (n == 0) throw Error(errc::config, "synthetic spec has no assets");
    for (const auto& a : spec.assets) {
        if (!(a.volatility >= 0.0) || !std::isfinite(a.drift)) throw Error(errc::config, "bad drift/volatility for " + a.id);
        if (!(a.initial_price > 0.0)) throw Error(errc::config, "initial price must be positive for " + a.id);
        if (a.listing_delay >= days) throw Error(errc::config, "listing delay beyond horizon for " + a.id);
    }

    Eigen::MatrixXd loading = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    if (!spec.correlation.empty()) {
        if (spec.correlation.size() != n * n) throw Error(errc::config, "correlation matrix must be n x n");
        Eigen::MatrixXd c(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) c(i, j) = spec.correlation[i * n + j];
        if (!c.isApprox(c.transpose(), 1e-12)) throw Error(errc::config, "correlation matrix not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
        if (eig.eigenvalues().minCoeff() < -1e-10) throw Error(errc::config, "correlation matrix not positive semi-definite");
        loading = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<Bar>> bars(n);
    std::vector<double> close(n);
    for (std::size_t i = 0; i < n; ++i) close[i] = spec.assets[i].initial_price;

    Eigen::VectorXd eps(n);
    for (std::size_t t = 0; t < days; ++t) {
        for (std::size_t i = 0; i < n; ++i) eps(i) = gauss(rng);
        const Eigen::VectorXd z = loading * eps;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = spec.assets[i];
            const double prev = close[i];
            const double open_noise = gauss(rng);
            const double hi_noise = std::abs(gauss(rng));
            const double lo_noise = std::abs(gauss(rng));
            const double vol_noise = gauss(rng);
            if (t < a.listing_delay) continue;
            Bar b;
            if (t == a.listing_delay) {
                b.close = prev;
                b.open = prev;
            } else {
                b.close = prev * std::exp(a.drift - 0.5 * a.volatility * a.volatility + a.volatility * z(i));
                b.open = prev * std::exp(0.25 * a.volatility * open_noise);
            }
            b.high = std::max(b.open, b.close) * std::exp(0.5 * a.volatility * hi_noise);
            b.low = std::min(b.open, b.close) * std::exp(-0.5 * a.volatility * lo_noise);
            b.volume = spec.base_volume * std::exp(spec.volume_volatility * vol_noise);
            close[i] = b.close;
            bars[i].push_back(b);
        }
    }

    std::vector<AssetSeries> series;
    for (std::size_t i = 0; i < n; ++i)
        series.push_back({spec.assets[i].id, spec.assets[i].listing_delay, std::move(bars[i]), spec.assets[i].sector});
    return MarketData(business_days(spec.start, days), std::move(series));
}

} // namespace olps
