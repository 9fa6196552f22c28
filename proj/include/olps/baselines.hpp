#pragma once

#include "olps/environment.hpp"
#include "olps/simplex.hpp"

#include <Eigen/Dense>

#include <limits>
#include <memory>
#include <random>

namespace olps {

struct MvoConfig {
    std::size_t lookback = 252;
    double risk_aversion = 1.0;
    /// Trading days between rebalances; nullopt holds the initial weights forever.
    std::optional<std::size_t> rebalance_period = 21;
    double ridge = 1e-6; // multiplied by trace(cov) / N
    double tolerance = 1e-8;
    std::size_t max_iterations = 200000;

    void validate() const {
        if (lookback < 2) throw Error(errc::config, "MVO lookback must be at least 2");
        if (!(risk_aversion > 0.0)) throw Error(errc::config, "MVO risk aversion must be positive");
        if (rebalance_period && *rebalance_period < 1) throw Error(errc::config, "MVO rebalance period must be >= 1");
        if (!(ridge >= 0.0)) throw Error(errc::config, "MVO ridge must be non-negative");
    }
};

struct MvoSolution {
    std::vector<double> weights;
    std::size_t iterations = 0;
    bool converged = false;
};

/// argmax over the simplex of mu'w - lambda w'(cov + ridge)w by projected gradient
/// ascent from the uniform portfolio with step 1/L, L = 2 lambda lambda_max.
inline MvoSolution mvo_solve(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov, const MvoConfig& cfg) {
    const auto n = mu.size();
    if (n == 0 || cov.rows() != n || cov.cols() != n) throw Error(errc::numeric, "MVO inputs have mismatched sizes");
    if (!mu.allFinite() || !cov.allFinite()) throw Error(errc::numeric, "MVO inputs are not finite");
    if (!((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())))
        throw Error(errc::numeric, "MVO covariance is not symmetric");

    Eigen::MatrixXd sigma = cov;
    sigma.diagonal().array() += cfg.ridge * cov.trace() / static_cast<double>(n);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, top))
        throw Error(errc::numeric, "MVO covariance is not positive semi-definite");

    const double lipschitz = 2.0 * cfg.risk_aversion * top;
    double step = 1.0;
    if (lipschitz > 0.0)
        step = 1.0 / lipschitz;
    else if (mu.cwiseAbs().maxCoeff() > 0.0)
        step = 1.0 / mu.cwiseAbs().maxCoeff();

    MvoSolution sol;
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    std::vector<double> buf(static_cast<std::size_t>(n));
    for (sol.iterations = 1; sol.iterations <= cfg.max_iterations; ++sol.iterations) {
        const Eigen::VectorXd ascent = w + step * (mu - 2.0 * cfg.risk_aversion * sigma * w);
        for (Eigen::Index i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = ascent(i);
        const auto projected = project_to_simplex(buf);
        const Eigen::VectorXd next = Eigen::Map<const Eigen::VectorXd>(projected.data(), n);
        const double change = (next - w).cwiseAbs().maxCoeff();
        w = next;
        if (change < cfg.tolerance) {
            sol.converged = true;
            break;
        }
    }
    sol.weights.assign(w.data(), w.data() + n);
    return sol;
}

inline std::vector<double> mvo_weights(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov, double risk_aversion,
                                       double ridge = 1e-6) {
    MvoConfig cfg;
    cfg.risk_aversion = risk_aversion;
    cfg.ridge = ridge;
    return mvo_solve(mu, cov, cfg).weights;
}

/// Sample mean and population covariance of the `lookback` daily rate returns ending at calendar index t.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> trailing_moments(const MarketData& data, const AssetSet& assets,
                                                                    std::size_t t, std::size_t lookback) {
    const auto n = static_cast<Eigen::Index>(assets.size());
    if (t < lookback) throw Error(errc::history, "MVO lookback reaches before the calendar start");
    Eigen::MatrixXd r(static_cast<Eigen::Index>(lookback), n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto a = assets.members[static_cast<std::size_t>(j)];
        if (!data.has_bar(a, t - lookback))
            throw Error(errc::history, "insufficient MVO history for " + assets.ids[static_cast<std::size_t>(j)] +
                                           " at " + data.calendar()[t].str());
        for (std::size_t k = 0; k < lookback; ++k) {
            const std::size_t day = t - lookback + 1 + k;
            r(static_cast<Eigen::Index>(k), j) = data.close(a, day) / data.close(a, day - 1) - 1.0;
        }
    }
    const Eigen::VectorXd mu = r.colwise().mean();
    const Eigen::MatrixXd centred = r.rowwise() - mu.transpose();
    Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(lookback);
    cov = 0.5 * (cov + cov.transpose());
    return {mu, cov};
}

inline std::vector<double> mvo_weights_at(const MarketData& data, const AssetSet& assets, std::size_t t,
                                          const MvoConfig& cfg) {
    const auto [mu, cov] = trailing_moments(data, assets, t, cfg.lookback);
    return mvo_solve(mu, cov, cfg).weights;
}

/// Days (offsets from the period start) on which the index rebalances.
inline std::vector<std::size_t> rebalance_offsets(std::size_t length, const MvoConfig& cfg) {
    std::vector<std::size_t> out{0};
    if (!cfg.rebalance_period) return out;
    for (std::size_t k = *cfg.rebalance_period; k < length; k += *cfg.rebalance_period) out.push_back(k);
    return out;
}

/// Long-only, fully invested MVO index over `period`, rebalanced on rebalance_offsets
/// and drifting in between under the environment's accounting at zero cost.
inline metrics::ValueSeries mvo_index(const MarketData& data, const AssetSet& assets, const EpisodeWindow& period,
                                      const MvoConfig& cfg, double initial_value = kDefaultCapital) {
    cfg.validate();
    if (period.last() >= data.days()) throw Error(errc::history, "index period runs past the end of market data");
    metrics::ValueSeries out;
    double value = initial_value;
    std::vector<double> weights(assets.size() + 1, 0.0);
    weights[0] = 1.0;
    std::vector<double> gross(assets.size());
    const auto offsets = rebalance_offsets(period.length, cfg);
    std::size_t next_rebalance = 0;
    for (std::size_t k = 0; k <= period.length; ++k) {
        const std::size_t t = period.start + k;
        out.dates.push_back(data.calendar()[t]);
        out.values.push_back(value);
        if (k == period.length) break;
        std::vector<double> target = weights;
        if (next_rebalance < offsets.size() && offsets[next_rebalance] == k) {
            const auto w = mvo_weights_at(data, assets, t, cfg);
            target.assign(assets.size() + 1, 0.0);
            std::copy(w.begin(), w.end(), target.begin() + 1);
            ++next_rebalance;
        }
        for (std::size_t j = 0; j < assets.size(); ++j)
            gross[j] = data.close(assets.members[j], t + 1) / data.close(assets.members[j], t);
        const auto acc = apply_step(value, weights, target, gross, 0.0);
        value = acc.value_after;
        weights = acc.drifted;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Heuristic agents

class CashAgent final : public Agent {
public:
    std::string name() const override { return "cash"; }
    std::vector<double> act(const Observation&, const PortfolioState& s) override {
        std::vector<double> raw(s.weights.size(), 0.0);
        raw[0] = 1.0;
        return raw;
    }
};

/// Equal weight over cash and assets, rebalanced daily.
class UniformRebalanceAgent final : public Agent {
public:
    std::string name() const override { return "uniform"; }
    std::vector<double> act(const Observation&, const PortfolioState& s) override {
        return std::vector<double>(s.weights.size(), 1.0 / static_cast<double>(s.weights.size()));
    }
};

/// Equal weight over the assets on day one, then holds the drifted weights.
class UniformHoldAgent final : public Agent {
public:
    std::string name() const override { return "buy_and_hold"; }
    std::vector<double> act(const Observation&, const PortfolioState& s) override {
        if (s.step_index > 0) return s.weights;
        std::vector<double> raw(s.weights.size(), 1.0 / static_cast<double>(s.weights.size() - 1));
        raw[0] = 0.0;
        return raw;
    }
};

/// Uniformly random point of the simplex each day (flat Dirichlet), seeded.
class RandomAgent final : public Agent {
public:
    explicit RandomAgent(std::uint64_t seed) : rng_(seed) {}
    std::string name() const override { return "random"; }
    std::vector<double> act(const Observation&, const PortfolioState& s) override {
        std::exponential_distribution<double> e(1.0);
        std::vector<double> raw(s.weights.size());
        double total = 0.0;
        for (double& x : raw) total += (x = e(rng_));
        for (double& x : raw) x /= total;
        return raw;
    }

private:
    std::mt19937_64 rng_;
};

/// Follows the MVO index rule with no cash: re-optimizes every rebalance period, holds otherwise.
class MvoAgent final : public Agent {
public:
    explicit MvoAgent(MvoConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }
    std::string name() const override { return "mvo"; }
    void begin_episode(const EpisodeContext& ctx) override { ctx_ = ctx; }
    std::vector<double> act(const Observation&, const PortfolioState& s) override {
        const bool rebalance = s.step_index == 0 || (cfg_.rebalance_period && s.step_index % *cfg_.rebalance_period == 0);
        if (!rebalance) return s.weights;
        const auto w = mvo_weights_at(*ctx_.data, *ctx_.assets, s.t, cfg_);
        std::vector<double> raw(w.size() + 1, 0.0);
        std::copy(w.begin(), w.end(), raw.begin() + 1);
        return raw;
    }

private:
    MvoConfig cfg_;
    EpisodeContext ctx_;
};

inline const std::vector<std::string>& builtin_agent_names() {
    static const std::vector<std::string> names{"cash", "uniform", "buy_and_hold", "random", "mvo"};
    return names;
}

inline std::unique_ptr<Agent> make_builtin_agent(std::string_view name, std::uint64_t seed, const MvoConfig& mvo = {}) {
    if (name == "cash") return std::make_unique<CashAgent>();
    if (name == "uniform") return std::make_unique<UniformRebalanceAgent>();
    if (name == "buy_and_hold") return std::make_unique<UniformHoldAgent>();
    if (name == "random") return std::make_unique<RandomAgent>(seed);
    if (name == "mvo") return std::make_unique<MvoAgent>(mvo);
    throw Error(errc::config, "unknown built-in agent '" + std::string(name) + "'");
}

} // namespace olps
