#pragma once

#include "olps/market_data.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace olps::test {

/// Market whose bars have open = high = low = close; closes[i] starts at calendar index first[i].
inline MarketData market_from_closes(const std::vector<std::vector<double>>& closes,
                                     std::vector<std::size_t> first = {}) {
    std::size_t days = 0;
    if (first.empty()) first.assign(closes.size(), 0);
    for (std::size_t i = 0; i < closes.size(); ++i) days = std::max(days, first[i] + closes[i].size());
    std::vector<AssetSeries> series;
    for (std::size_t i = 0; i < closes.size(); ++i) {
        AssetSeries s;
        s.id = "A" + std::to_string(i);
        s.first_index = first[i];
        for (double c : closes[i]) s.bars.push_back({c, c, c, c, 1000.0});
        series.push_back(std::move(s));
    }
    return MarketData(business_days(Date{2020, 1, 1}, days), std::move(series));
}

/// Random-walk market with realistic OHLC spread.
inline MarketData random_market(std::size_t n_assets, std::size_t days, std::uint64_t seed, double vol = 0.015,
                                double drift = 0.0003) {
    SyntheticSpec spec;
    for (std::size_t i = 0; i < n_assets; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "S%03zu", i);
        spec.assets.push_back({id, drift, vol, 50.0 + 10.0 * static_cast<double>(i), 0, ""});
    }
    std::mt19937_64 rng(seed);
    return generate_synthetic(spec, days, rng);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("olps_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

inline AssetSet all_assets(const MarketData& data, std::size_t as_of = 0) {
    std::vector<std::size_t> m(data.asset_count());
    std::iota(m.begin(), m.end(), 0);
    return make_asset_set(data, m, as_of);
}

} // namespace olps::test
