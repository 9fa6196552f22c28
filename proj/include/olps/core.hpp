#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace olps {

/// Domain error carrying a machine-readable code next to the human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

namespace errc {
inline constexpr const char* data = "E_DATA";
inline constexpr const char* io = "E_IO";
inline constexpr const char* history = "E_HISTORY";
inline constexpr const char* infeasible = "E_INFEASIBLE";
inline constexpr const char* action = "E_ACTION";
inline constexpr const char* config = "E_CONFIG";
inline constexpr const char* checkpoint = "E_CHECKPOINT";
inline constexpr const char* protocol = "E_PROTOCOL";
inline constexpr const char* numeric = "E_NUMERIC";
inline constexpr const char* usage = "E_USAGE";
} // namespace errc

/// Calendar date (day resolution) with ISO-8601 text form.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}) {}

    /// Parses YYYY-MM-DD; throws Error on malformed or impossible dates.
    static Date parse(std::string_view text) {
        auto fail = [&] {
            return Error(errc::data, "invalid date '" + std::string(text) + "'");
        };
        if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw fail();
        auto digits = [&](std::size_t pos, std::size_t len) {
            int v = 0;
            for (std::size_t i = pos; i < pos + len; ++i) {
                if (text[i] < '0' || text[i] > '9') throw fail();
                v = v * 10 + (text[i] - '0');
            }
            return v;
        };
        const std::chrono::year_month_day ymd{std::chrono::year{digits(0, 4)},
                                              std::chrono::month{static_cast<unsigned>(digits(5, 2))},
                                              std::chrono::day{static_cast<unsigned>(digits(8, 2))}};
        if (!ymd.ok()) throw fail();
        return Date(std::chrono::sys_days{ymd});
    }

    std::string str() const {
        const std::chrono::year_month_day ymd{days_};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        return buf;
    }

    constexpr std::chrono::sys_days days() const { return days_; }
    constexpr Date plus_days(int n) const { return Date(days_ + std::chrono::days{n}); }
    /// 0 = Sunday .. 6 = Saturday
    constexpr unsigned weekday() const { return std::chrono::weekday{days_}.c_encoding(); }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    std::chrono::sys_days days_{};
};

/// splitmix64 finalizer; used to derive independent stream seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for the stream named `tag` number `index` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return mix64(mix64(master ^ h) + index);
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Population standard deviation (divides by n).
inline double population_std(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

inline bool all_finite(std::span<const double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace olps
