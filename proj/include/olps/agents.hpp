#pragma once

#include "olps/environment.hpp"
#include "olps/simplex.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <array>
#include <cstring>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace olps {

/// Fully connected policy network: tanh hidden layers, identity output.
/// Parameters are one flat vector; per layer the weight matrix (out x in,
/// row-major) is followed by the bias.
class PolicyNet {
public:
    PolicyNet() = default;

    explicit PolicyNet(std::vector<std::size_t> layers) : layers_(std::move(layers)) {
        if (layers_.size() < 2) throw Error(errc::config, "policy net needs input and output layers");
        for (auto s : layers_)
            if (s == 0) throw Error(errc::config, "policy net layer of size 0");
        params_.assign(parameter_count(layers_), 0.0);
    }

    static std::size_t parameter_count(const std::vector<std::size_t>& layers) {
        std::size_t n = 0;
        for (std::size_t l = 1; l < layers.size(); ++l) n += layers[l] * layers[l - 1] + layers[l];
        return n;
    }

    /// Glorot-uniform weights, zero biases; the output layer optionally all zero.
    void initialize(std::mt19937_64& rng, bool zero_output) {
        std::size_t off = 0;
        for (std::size_t l = 1; l < layers_.size(); ++l) {
            const std::size_t in = layers_[l - 1], out = layers_[l];
            const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
            std::uniform_real_distribution<double> u(-limit, limit);
            const bool zero = zero_output && l + 1 == layers_.size();
            for (std::size_t k = 0; k < in * out; ++k) params_[off + k] = zero ? 0.0 : u(rng);
            off += in * out;
            for (std::size_t k = 0; k < out; ++k) params_[off + k] = 0.0;
            off += out;
        }
    }

    const std::vector<std::size_t>& layers() const { return layers_; }
    std::size_t input_size() const { return layers_.front(); }
    std::size_t output_size() const { return layers_.back(); }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    /// Activations of every layer; the last entry is the output.
    std::vector<std::vector<double>> forward_all(std::span<const double> x) const {
        if (x.size() != input_size())
            throw Error(errc::action, "observation length " + std::to_string(x.size()) + ", policy expects " +
                                          std::to_string(input_size()));
        std::vector<std::vector<double>> acts;
        acts.emplace_back(x.begin(), x.end());
        std::size_t off = 0;
        for (std::size_t l = 1; l < layers_.size(); ++l) {
            const std::size_t in = layers_[l - 1], out = layers_[l];
            const auto& prev = acts.back();
            std::vector<double> next(out);
            const double* w = params_.data() + off;
            const double* b = w + in * out;
            for (std::size_t o = 0; o < out; ++o) {
                double s = b[o];
                const double* row = w + o * in;
                for (std::size_t i = 0; i < in; ++i) s += row[i] * prev[i];
                next[o] = (l + 1 == layers_.size()) ? s : std::tanh(s);
            }
            off += in * out + out;
            acts.push_back(std::move(next));
        }
        return acts;
    }

    std::vector<double> forward(std::span<const double> x) const { return forward_all(x).back(); }

    /// Adds d(output . upstream)/d(params) * weight to `grad`.
    void backward(const std::vector<std::vector<double>>& acts, std::span<const double> upstream, double weight,
                  std::vector<double>& grad) const {
        std::vector<double> delta(upstream.begin(), upstream.end());
        std::size_t off = params_.size();
        for (std::size_t l = layers_.size() - 1; l >= 1; --l) {
            const std::size_t in = layers_[l - 1], out = layers_[l];
            off -= in * out + out;
            const auto& prev = acts[l - 1];
            double* gw = grad.data() + off;
            double* gb = gw + in * out;
            const double* w = params_.data() + off;
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta[o] * weight;
                gb[o] += d;
                double* row = gw + o * in;
                for (std::size_t i = 0; i < in; ++i) row[i] += d * prev[i];
            }
            if (l == 1) break;
            std::vector<double> back(in, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                const double* row = w + o * in;
                for (std::size_t i = 0; i < in; ++i) back[i] += row[i] * delta[o];
            }
            for (std::size_t i = 0; i < in; ++i) back[i] *= 1.0 - prev[i] * prev[i]; // tanh'
            delta = std::move(back);
        }
    }

private:
    std::vector<std::size_t> layers_;
    std::vector<double> params_;
};

enum class BaselineMode { trajectory_mean, running_mean };

inline BaselineMode parse_baseline(std::string_view s) {
    if (s == "trajectory_mean") return BaselineMode::trajectory_mean;
    if (s == "running_mean") return BaselineMode::running_mean;
    throw Error(errc::config, "unknown baseline '" + std::string(s) + "'");
}

struct PgConfig {
    std::vector<std::size_t> hidden{64, 64};
    double learning_rate = 1.0;
    double gamma = 0.99;
    double concentration = 50.0; // Dirichlet total concentration during training
    double max_grad_norm = 10.0; // 0 disables clipping
    bool zero_init_output = true;
    BaselineMode baseline = BaselineMode::trajectory_mean;
    double baseline_decay = 0.9; // running_mean only
};

/// Returns-to-go G_t = sum_{k>=t} gamma^{k-t} r_k.
inline std::vector<double> returns_to_go(std::span<const double> rewards, double gamma) {
    std::vector<double> g(rewards.size());
    double acc = 0.0;
    for (std::size_t k = rewards.size(); k-- > 0;) {
        acc = rewards[k] + gamma * acc;
        g[k] = acc;
    }
    return g;
}

/// Reference score-function policy-gradient learner. Logits pass through softmax to the
/// mean of a Dirichlet with fixed total concentration; training acts sample from it,
/// evaluation acts use the mean.
class ReferencePgAgent final : public Agent {
public:
    ReferencePgAgent(std::size_t observation_size, std::size_t n_assets, PgConfig cfg, std::uint64_t seed)
        : cfg_(std::move(cfg)), rng_(seed) {
        std::vector<std::size_t> layers{observation_size};
        layers.insert(layers.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        layers.push_back(n_assets + 1);
        net_ = PolicyNet(layers);
        std::mt19937_64 init(derive_seed(seed, "policy-init"));
        net_.initialize(init, cfg_.zero_init_output);
    }

    ReferencePgAgent(PolicyNet net, PgConfig cfg, std::uint64_t seed)
        : cfg_(std::move(cfg)), net_(std::move(net)), rng_(seed) {}

    std::string name() const override { return "reference_pg"; }

    void begin_episode(const EpisodeContext& ctx) override { training_ = ctx.training; }

    std::vector<double> act(const Observation& obs, const PortfolioState&) override {
        const auto mean = softmax(net_.forward(obs.values));
        if (!training_) return mean;
        std::vector<double> a(mean.size());
        double total = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            std::gamma_distribution<double> g(std::max(cfg_.concentration * mean[i], kMinAlpha), 1.0);
            total += (a[i] = g(rng_));
        }
        if (!(total > 0.0)) {
            std::fill(a.begin(), a.end(), 1.0);
            total = static_cast<double>(a.size());
        }
        for (double& x : a) x /= total;
        return a;
    }

    /// Dirichlet log-density of `action` given the observation.
    double log_density(std::span<const double> observation, std::span<const double> action) const {
        const auto p = softmax(net_.forward(observation));
        const double k = cfg_.concentration;
        double lp = boost::math::lgamma(k, kQuiet);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double a = std::max(action[i], kMinWeight);
            lp += -boost::math::lgamma(k * p[i], kQuiet) + (k * p[i] - 1.0) * std::log(a);
        }
        return lp;
    }

    /// (1/T) sum_t advantage_t * log pi(a_t | s_t).
    double surrogate(const Trajectory& traj, std::span<const double> advantages) const {
        double s = 0.0;
        for (std::size_t t = 0; t < traj.steps(); ++t)
            s += advantages[t] * log_density(traj.observations.at(t).values, traj.allocations[t].weights);
        return s / static_cast<double>(traj.steps());
    }

    /// Gradient of surrogate() with respect to the flat parameter vector.
    std::vector<double> surrogate_gradient(const Trajectory& traj, std::span<const double> advantages) const {
        std::vector<double> grad(net_.parameters().size(), 0.0);
        const double k = cfg_.concentration;
        const double inv_t = 1.0 / static_cast<double>(traj.steps());
        for (std::size_t t = 0; t < traj.steps(); ++t) {
            const auto acts = net_.forward_all(traj.observations.at(t).values);
            const auto p = softmax(acts.back());
            const auto& a = traj.allocations[t].weights;
            std::vector<double> dp(p.size());
            double pdot = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                // A mean weight that underflowed gives a non-finite value here, and update() skips.
                dp[i] = k * (std::log(std::max(a[i], kMinWeight)) - boost::math::digamma(k * p[i], kQuiet));
                pdot += p[i] * dp[i];
            }
            std::vector<double> dz(p.size());
            for (std::size_t j = 0; j < p.size(); ++j) dz[j] = p[j] * (dp[j] - pdot);
            net_.backward(acts, dz, advantages[t] * inv_t, grad);
        }
        return grad;
    }

    /// Advantages: returns-to-go minus the configured baseline.
    std::vector<double> advantages(const Trajectory& traj) {
        auto g = returns_to_go(traj.rewards, cfg_.gamma);
        const double traj_mean = mean(g);
        double b = traj_mean;
        if (cfg_.baseline == BaselineMode::running_mean) {
            b = has_running_ ? running_baseline_ : traj_mean;
            running_baseline_ = has_running_ ? cfg_.baseline_decay * running_baseline_ +
                                                   (1.0 - cfg_.baseline_decay) * traj_mean
                                             : traj_mean;
            has_running_ = true;
        }
        for (double& x : g) x -= b;
        return g;
    }

    /// One Monte-Carlo policy-gradient ascent step from a trajectory recorded with observations.
    /// Returns false (and counts it) when the gradient is not finite; parameters stay unchanged then.
    bool update(const Trajectory& traj, std::optional<double> learning_rate = std::nullopt) {
        if (traj.steps() == 0) return true;
        if (traj.observations.size() != traj.steps())
            throw Error(errc::action, "policy update needs a trajectory recorded with observations");
        const double lr = learning_rate.value_or(cfg_.learning_rate);
        const auto adv = advantages(traj);
        auto grad = surrogate_gradient(traj, adv);
        if (!all_finite(grad)) {
            ++skipped_updates_;
            return false;
        }
        if (cfg_.max_grad_norm > 0.0) {
            double norm = 0.0;
            for (double g : grad) norm += g * g;
            norm = std::sqrt(norm);
            if (norm > cfg_.max_grad_norm)
                for (double& g : grad) g *= cfg_.max_grad_norm / norm;
        }
        auto& params = net_.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) params[i] += lr * grad[i];
        return true;
    }

    std::size_t skipped_updates() const { return skipped_updates_; }
    const PgConfig& config() const { return cfg_; }
    PolicyNet& net() { return net_; }
    const PolicyNet& net() const { return net_; }
    void set_training(bool on) { training_ = on; }

private:
    static constexpr double kMinWeight = 1e-12;
    static constexpr double kMinAlpha = 1e-300;
    static constexpr boost::math::policies::policy<
        boost::math::policies::pole_error<boost::math::policies::errno_on_error>,
        boost::math::policies::overflow_error<boost::math::policies::errno_on_error>,
        boost::math::policies::domain_error<boost::math::policies::errno_on_error>,
        boost::math::policies::evaluation_error<boost::math::policies::errno_on_error>>
        kQuiet{};

    PgConfig cfg_;
    PolicyNet net_;
    std::mt19937_64 rng_;
    bool training_ = false;
    std::size_t skipped_updates_ = 0;
    double running_baseline_ = 0.0;
    bool has_running_ = false;
};

inline bool pg_update(ReferencePgAgent& agent, const Trajectory& traj, double learning_rate) {
    return agent.update(traj, learning_rate);
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (all integers and floats little-endian):
//   8 bytes  magic "OLPSCKPT"
//   u32      format version (1)
//   u32      layer count L
//   L x u64  layer sizes, input first
//   u64      parameter count P
//   P x f64  parameters (IEEE-754 binary64)
//   u64      FNV-1a 64 checksum of every preceding byte

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::array<char, 8> kCheckpointMagic{'O', 'L', 'P', 'S', 'C', 'K', 'P', 'T'};

namespace detail {

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
    std::uint64_t u64() { return take(8); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
    std::size_t offset() const { return pos_; }

private:
    std::uint64_t take(int n) {
        if (pos_ + static_cast<std::size_t>(n) > bytes_.size()) throw Error(errc::checkpoint, "checkpoint truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::vector<std::uint8_t> checkpoint(const PolicyNet& net) {
    std::vector<std::uint8_t> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(net.layers().size()));
    for (auto s : net.layers()) detail::put_u64(out, s);
    detail::put_u64(out, net.parameters().size());
    for (double p : net.parameters()) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &p, sizeof bits);
        detail::put_u64(out, bits);
    }
    detail::put_u64(out, detail::fnv1a(out));
    return out;
}

inline std::vector<std::uint8_t> checkpoint(const ReferencePgAgent& agent) { return checkpoint(agent.net()); }

inline PolicyNet restore_policy(std::span<const std::uint8_t> blob) {
    if (blob.size() < 8 || !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), blob.begin()))
        throw Error(errc::checkpoint, "not a checkpoint (bad magic)");
    detail::Reader r(blob.subspan(8));
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw Error(errc::checkpoint, "checkpoint version " + std::to_string(version) + " unsupported (expected " +
                                          std::to_string(kCheckpointVersion) + ")");
    const auto n_layers = r.u32();
    if (n_layers < 2 || n_layers > 64) throw Error(errc::checkpoint, "checkpoint has implausible layer count");
    std::vector<std::size_t> layers(n_layers);
    for (auto& s : layers) {
        s = r.u64();
        if (s == 0 || s > (std::size_t{1} << 24)) throw Error(errc::checkpoint, "checkpoint has implausible layer size");
    }
    const auto count = r.u64();
    if (count != PolicyNet::parameter_count(layers)) throw Error(errc::checkpoint, "checkpoint parameter count mismatch");
    if (blob.size() != 8 + r.offset() + count * 8 + 8) throw Error(errc::checkpoint, "checkpoint size mismatch");
    PolicyNet net(layers);
    for (auto& p : net.parameters()) {
        const std::uint64_t bits = r.u64();
        std::memcpy(&p, &bits, sizeof p);
    }
    const std::size_t body = 8 + r.offset();
    if (r.u64() != detail::fnv1a(blob.first(body))) throw Error(errc::checkpoint, "checkpoint checksum mismatch");
    return net;
}

inline ReferencePgAgent restore(std::span<const std::uint8_t> blob, const PgConfig& cfg, std::uint64_t seed) {
    return ReferencePgAgent(restore_policy(blob), cfg, seed);
}

} // namespace olps
