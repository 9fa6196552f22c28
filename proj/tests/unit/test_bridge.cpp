#include "olps/baselines.hpp"
#include "olps/bridge.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace olps;
using olps::test::all_assets;
using olps::test::random_market;
using olps::test::temp_dir;

namespace {

std::vector<std::string> client(std::vector<std::string> args) {
    args.insert(args.begin(), std::string(OLPS_TEST_DIR) + "/fixtures/bridge_client.py");
    args.insert(args.begin(), "python3");
    return args;
}

struct Fixture {
    MarketData data = random_market(4, 80, 11);
    NormalizedSeries norm = normalize(data);
    AssetSet assets = all_assets(data);
    EnvironmentConfig cfg;
    EpisodeWindow window{20, 25};

    Environment env() const { return Environment(data, norm, cfg); }

    std::unique_ptr<BridgeAgent> bridge(std::vector<std::string> args, double timeout = 30.0) const {
        auto a = std::make_unique<BridgeAgent>(client(std::move(args)), 5, timeout);
        a->send_spec(cfg.representation, assets.size(), cfg.reward, window.length);
        return a;
    }
};

std::string jsonl(const Trajectory& t) {
    std::ostringstream out;
    write_trajectory(out, t);
    return out.str();
}

} // namespace

TEST(Bridge, UniformClientMatchesInProcessAgent) {
    Fixture f;
    auto env = f.env();
    auto external = f.bridge({"uniform"});
    EXPECT_EQ(external->name(), "test-client");
    UniformRebalanceAgent local;
    const auto a = run_episode(*external, env, f.window, f.assets, false);
    const auto b = run_episode(local, env, f.window, f.assets, false);
    EXPECT_EQ(a.steps(), f.window.length);
    EXPECT_EQ(jsonl(a), jsonl(b));
}

TEST(Bridge, ScriptedReplayReproducesTrajectory) {
    Fixture f;
    auto env = f.env();
    auto random = f.bridge({"random"});
    const auto first = run_episode(*random, env, f.window, f.assets, false);

    const auto dir = temp_dir("bridge_replay");
    {
        std::ofstream script(dir / "actions.jsonl");
        for (const auto& raw : first.raw_actions) script << nlohmann::json(raw).dump() << '\n';
    }
    auto scripted = f.bridge({"scripted", (dir / "actions.jsonl").string()});
    const auto second = run_episode(*scripted, env, f.window, f.assets, false);
    EXPECT_EQ(jsonl(first), jsonl(second));
    std::filesystem::remove_all(dir);
}

TEST(Bridge, SeveralEpisodesOnOneConnection) {
    Fixture f;
    auto env = f.env();
    auto external = f.bridge({"random"});
    for (int e = 0; e < 3; ++e) EXPECT_EQ(run_episode(*external, env, f.window, f.assets, true).steps(), f.window.length);
}

TEST(Bridge, WrongActionLengthIsProtocolError) {
    Fixture f;
    auto env = f.env();
    auto external = f.bridge({"wrong_length"});
    try {
        run_episode(*external, env, f.window, f.assets, false);
        FAIL() << "expected a protocol error";
    } catch (const Error& e) {
        EXPECT_EQ(std::string(e.code()), errc::protocol);
        EXPECT_NE(std::string(e.what()).find("action length 4, expected 5"), std::string::npos) << e.what();
    }
}

TEST(Bridge, VersionMismatchRejectedAtHello) {
    try {
        BridgeAgent a(client({"bad_version"}), 1);
        FAIL() << "expected a protocol error";
    } catch (const Error& e) {
        EXPECT_EQ(std::string(e.code()), errc::protocol);
        EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
    }
}

TEST(Bridge, RejectedSpec) {
    Fixture f;
    EXPECT_THROW(f.bridge({"reject_spec"}), Error);
}

TEST(Bridge, ClientErrorSurfaces) {
    Fixture f;
    auto env = f.env();
    auto external = f.bridge({"error_on_act"});
    try {
        run_episode(*external, env, f.window, f.assets, false);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("E_CLIENT"), std::string::npos);
    }
}

TEST(Bridge, SilentClientTimesOut) {
    Fixture f;
    auto env = f.env();
    auto external = f.bridge({"silent"}, 0.3);
    try {
        run_episode(*external, env, f.window, f.assets, false);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(std::string(e.code()), errc::protocol);
        EXPECT_NE(std::string(e.what()).find("timed out"), std::string::npos);
    }
}

TEST(Bridge, MissingExecutableFails) {
    EXPECT_THROW(BridgeAgent({"/nonexistent/agent"}, 1, 2.0), Error);
}

TEST(Bridge, CheckpointAndRestore) {
    Fixture f;
    auto env = f.env();
    const auto dir = temp_dir("bridge_ckpt");
    const auto path = (dir / "agent.json").string();
    {
        auto external = f.bridge({"uniform"});
        run_episode(*external, env, f.window, f.assets, true);
        run_episode(*external, env, f.window, f.assets, true);
        external->request_checkpoint(path);
    }
    std::ifstream in(path);
    const auto saved = nlohmann::json::parse(in);
    EXPECT_EQ(saved.at("episodes").get<int>(), 2);

    auto restored = f.bridge({"uniform"});
    restored->set_restore_path(path);
    EXPECT_EQ(run_episode(*restored, env, f.window, f.assets, false).steps(), f.window.length);
    std::filesystem::remove_all(dir);
}
