#pragma once

// Engine side of the external-agent protocol: newline-delimited JSON over the
// standard streams of a child process. See docs/bridge_protocol.md.

#include "olps/environment.hpp"

#include <nlohmann/json.hpp>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace olps {

inline constexpr int kBridgeProtocolVersion = 1;

/// Child process with line-oriented pipes to its stdin and stdout.
class Subprocess {
public:
    explicit Subprocess(const std::vector<std::string>& argv) {
        if (argv.empty()) throw Error(errc::config, "external agent command is empty");
        int in[2], out[2];
        if (::pipe(in) != 0 || ::pipe(out) != 0) throw Error(errc::io, "pipe: " + std::string(std::strerror(errno)));
        pid_ = ::fork();
        if (pid_ < 0) throw Error(errc::io, "fork: " + std::string(std::strerror(errno)));
        if (pid_ == 0) {
            ::dup2(in[0], STDIN_FILENO);
            ::dup2(out[1], STDOUT_FILENO);
            ::close(in[0]);
            ::close(in[1]);
            ::close(out[0]);
            ::close(out[1]);
            std::vector<char*> args;
            for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
            args.push_back(nullptr);
            ::execvp(args[0], args.data());
            std::fprintf(stderr, "cannot execute %s: %s\n", args[0], std::strerror(errno));
            ::_exit(127);
        }
        ::close(in[0]);
        ::close(out[1]);
        to_child_ = in[1];
        from_child_ = out[0];
        ::signal(SIGPIPE, SIG_IGN);
    }

    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;

    ~Subprocess() {
        if (to_child_ >= 0) ::close(to_child_);
        if (from_child_ >= 0) ::close(from_child_);
        if (pid_ > 0) {
            // Give the client a moment to exit on EOF, then make sure it does.
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
                ::usleep(10000);
            }
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, nullptr, 0);
        }
    }

    void write_line(const std::string& line) {
        std::string buf = line + "\n";
        std::size_t done = 0;
        while (done < buf.size()) {
            const auto n = ::write(to_child_, buf.data() + done, buf.size() - done);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(errc::protocol, "external agent closed its input: " + std::string(std::strerror(errno)));
            }
            done += static_cast<std::size_t>(n);
        }
    }

    /// Next line from the child, or an error after `timeout` seconds without one.
    std::string read_line(double timeout) {
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout);
        while (true) {
            const auto nl = pending_.find('\n');
            if (nl != std::string::npos) {
                std::string line = pending_.substr(0, nl);
                pending_.erase(0, nl + 1);
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0)
                throw Error(errc::protocol, "external agent timed out after " + std::to_string(timeout) + " s");
            pollfd p{from_child_, POLLIN, 0};
            const int r = ::poll(&p, 1, static_cast<int>(left.count()));
            if (r < 0 && errno == EINTR) continue;
            if (r < 0) throw Error(errc::protocol, "poll: " + std::string(std::strerror(errno)));
            if (r == 0) continue;
            char buf[65536];
            const auto n = ::read(from_child_, buf, sizeof buf);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) throw Error(errc::protocol, "external agent exited or closed its output");
            pending_.append(buf, static_cast<std::size_t>(n));
        }
    }

private:
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string pending_;
};

/// Agent whose decisions come from an external process speaking the bridge protocol.
class BridgeAgent final : public Agent {
public:
    BridgeAgent(std::vector<std::string> command, std::uint64_t seed, double timeout = 30.0)
        : proc_(std::move(command)), timeout_(timeout) {
        send({{"type", "hello"}, {"protocol_version", kBridgeProtocolVersion}, {"seed", seed}});
        const auto reply = receive("hello");
        const int version = reply.value("protocol_version", -1);
        if (version != kBridgeProtocolVersion)
            fail_and_throw("protocol version " + std::to_string(version) + " unsupported (engine speaks " +
                           std::to_string(kBridgeProtocolVersion) + ")");
        name_ = reply.value("name", std::string("external"));
    }

    std::string name() const override { return name_; }

    /// Announces observation layout and action size; must precede the first episode.
    void send_spec(const RepresentationConfig& rep, std::size_t n_assets, const RewardSpec& reward,
                   std::size_t episode_length) {
        const auto shape = observation_shape(rep, n_assets);
        send({{"type", "spec"},
              {"representation", to_string(rep.kind)},
              {"observation_shape", shape},
              {"n_assets", n_assets},
              {"action_size", n_assets + 1},
              {"reward", to_string(reward.kind)},
              {"episode_length", episode_length}});
        const auto reply = receive("spec");
        if (!reply.value("accepted", false)) fail_and_throw("external agent rejected the observation spec");
        n_assets_ = n_assets;
    }

    /// Path the client restores its state from at the next reset (null clears it).
    void set_restore_path(std::optional<std::string> path) { restore_ = std::move(path); }

    /// Asks the client to persist its state at `path`.
    void request_checkpoint(const std::string& path) {
        send({{"type", "checkpoint"}, {"path", path}});
        const auto reply = receive("checkpoint");
        if (!reply.value("ok", false)) fail_and_throw("external agent failed to write checkpoint " + path);
    }

    void begin_episode(const EpisodeContext& ctx) override {
        nlohmann::json msg{{"type", "reset"},
                           {"episode", episode_},
                           {"training", ctx.training},
                           {"assets", ctx.assets ? ctx.assets->ids : std::vector<std::string>{}},
                           {"start_date", ctx.data ? ctx.data->calendar()[ctx.window.start].str() : std::string()},
                           {"length", ctx.window.length}};
        msg["checkpoint"] = restore_ ? nlohmann::json(*restore_) : nlohmann::json(nullptr);
        send(msg);
    }

    std::vector<double> act(const Observation& obs, const PortfolioState& s) override {
        send({{"type", "observation"},
              {"step", s.step_index},
              {"date", s.date.str()},
              {"shape", obs.shape},
              {"values", obs.values},
              {"portfolio_value", s.value},
              {"weights", s.weights}});
        const auto reply = receive("action");
        if (reply.value("step", std::size_t{0} - 1) != s.step_index)
            fail_and_throw("action answers the wrong step");
        if (!reply.contains("values") || !reply["values"].is_array()) fail_and_throw("action without values");
        std::vector<double> raw;
        for (const auto& x : reply["values"]) {
            if (!x.is_number()) fail_and_throw("action values must be numbers");
            raw.push_back(x.get<double>());
        }
        if (raw.size() != s.weights.size())
            fail_and_throw("action length " + std::to_string(raw.size()) + ", expected " + std::to_string(s.weights.size()));
        return raw;
    }

    void observe(const Transition& tr) override {
        send({{"type", "reward"},
              {"reward", tr.reward},
              {"portfolio_value", tr.info.portfolio_value},
              {"daily_net", tr.info.daily_net},
              {"done", tr.done}});
    }

    void end_episode(const Trajectory& traj) override {
        send({{"type", "done"}, {"episode", episode_}, {"final_value", traj.values.back()}, {"steps", traj.steps()}});
        ++episode_;
    }

private:
    Subprocess proc_;
    double timeout_;
    std::string name_;
    std::size_t n_assets_ = 0;
    std::size_t episode_ = 0;
    std::optional<std::string> restore_;

    void send(const nlohmann::json& msg) { proc_.write_line(msg.dump()); }

    nlohmann::json receive(const std::string& expected) {
        const auto line = proc_.read_line(timeout_);
        nlohmann::json msg;
        try {
            msg = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            fail_and_throw("malformed message: " + line.substr(0, 200));
        }
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
            fail_and_throw("message without a type");
        const auto type = msg["type"].get<std::string>();
        if (type == "error")
            throw Error(errc::protocol, "external agent error [" + msg.value("code", std::string("?")) +
                                            "]: " + msg.value("message", std::string()));
        if (type != expected) fail_and_throw("expected '" + expected + "' message, got '" + type + "'");
        return msg;
    }

    [[noreturn]] void fail_and_throw(const std::string& why) {
        try {
            send({{"type", "error"}, {"code", errc::protocol}, {"message", why}});
        } catch (const Error&) {
        }
        throw Error(errc::protocol, why);
    }
};

} // namespace olps
