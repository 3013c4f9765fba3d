#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "qwitness/cli/config.hpp"
#include "qwitness/cli/experiment.hpp"
#include "qwitness/cli/hash.hpp"
#include "qwitness/cli/svg.hpp"

using namespace qwitness;
using namespace qwitness::cli;
namespace fs = std::filesystem;

namespace {

ExperimentConfig from_text(const std::string& text) { return config_from_json(parse_config_text(text)); }

std::string config_error(const std::string& text) {
    try {
        from_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// CSV content without '#' metadata lines.
std::string body(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line, out;
    while (std::getline(in, line))
        if (line.rfind('#', 0) != 0) out += line + '\n';
    return out;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("qwitness_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig small_run() {
    return from_text(R"({
        "bath": {"kind": "squeezed_vacuum", "r0": 1.0},
        "protocol": {"initial_state": {"fock": 2}, "tau": {"stop": 0.1, "points": 6}},
        "numerics": {"rate_grid_points": 256},
        "outputs": {"emit_svg": true}
    })");
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(QWITNESS_BINARY) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
    for (const char* text : {"", "  \n", "{}"}) {
        const ExperimentConfig c = from_text(text);
        EXPECT_EQ(c.dim, 20);
        EXPECT_EQ(c.n, 1);
        EXPECT_EQ(c.bath.kind, BathKind::thermal);
        EXPECT_TRUE(std::isinf(c.bath.beta));
        EXPECT_TRUE(c.fock_basis);
        EXPECT_EQ(c.tau_points, 200);
        EXPECT_DOUBLE_EQ(c.tau_stop_periods(), 0.5);
        EXPECT_DOUBLE_EQ(c.t_max_periods(), 1.0);
        EXPECT_EQ(c.ode_rel_tol, 1e-8);
        EXPECT_EQ(c.ode_abs_tol, 1e-10);
    }
    const ExperimentConfig coh = from_text(R"({"protocol": {"basis": "coherent_grid"}})");
    EXPECT_DOUBLE_EQ(coh.tau_stop_periods(), 1.0);
    EXPECT_DOUBLE_EQ(coh.t_max_periods(), 2.0);
}

TEST(Config, DimensionTooSmallForInitialState) {
    EXPECT_NE(config_error(R"({"system": {"dim": 5}, "protocol": {"initial_state": {"fock": 5}}})").find("system.dim"),
              std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"dim": 20}, "batch": {"initial_fock": [1, 12]}})").find("system.dim"),
              std::string::npos);
    EXPECT_EQ(config_error(R"({"system": {"dim": 22}, "batch": {"initial_fock": [1, 12]}})"), "");
}

TEST(Config, UnknownKeysAreErrors) {
    EXPECT_NE(config_error(R"({"sytem": {}})").find("unknown key 'sytem'"), std::string::npos);
    EXPECT_NE(config_error(R"({"bath": {"alpha": 0.5}})").find("unknown key 'bath.alpha'"), std::string::npos);
    EXPECT_NE(config_error(R"({"protocol": {"tau": {"step": 1}}})").find("protocol.tau.step"), std::string::npos);
}

TEST(Config, InvalidValues) {
    EXPECT_NE(config_error(R"({"system": {"n": 3}})").find("system.n"), std::string::npos);
    EXPECT_NE(config_error(R"({"system": {"omega": 2.0}})").find("system.omega"), std::string::npos);
    EXPECT_NE(config_error(R"({"bath": {"kind": "coherent"}})").find("bath.kind"), std::string::npos);
    EXPECT_NE(config_error(R"({"bath": {"m": "two"}})").find("bath.m"), std::string::npos);
    EXPECT_NE(config_error(R"({"numerics": {"ode_rel_tol": 1e-6}})").find("numerics.ode_rel_tol"), std::string::npos);
    EXPECT_NE(config_error(R"({"numerics": {"t_max": 0.5}})").find("numerics.t_max"), std::string::npos);
    EXPECT_NE(config_error(R"({"batch": {"alpha_exp": [0.0]}})").find("batch.alpha_exp"), std::string::npos);
    EXPECT_NE(config_error(R"({"system": []})").find("system"), std::string::npos);
    EXPECT_NE(config_error(R"({"numerics": {"kappa_kernel": "symmetric"}})").find("numerics.kappa_kernel"),
              std::string::npos);
    EXPECT_EQ(config_error(R"({"numerics": {"kappa_kernel": "as_printed"}})"), "");
}

TEST(Config, BetaAcceptsInfinityString) {
    EXPECT_EQ(from_text(R"({"bath": {"beta": 2.5}})").bath.beta, 2.5);
    EXPECT_TRUE(std::isinf(from_text(R"({"bath": {"beta": "inf"}})").bath.beta));
    EXPECT_NE(config_error(R"({"bath": {"beta": "hot"}})").find("bath.beta"), std::string::npos);
}

TEST(Config, ParseErrorReportsLineAndColumn) {
    try {
        parse_config_text("{\n  \"bath\": {\n    \"m\": 1,\n  }\n}", "cfg.json");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("cfg.json: parse error at line 4"), std::string::npos) << msg;
        EXPECT_EQ(msg.find("json.exception"), std::string::npos) << msg;
    }
}

TEST(Config, Overrides) {
    json root = parse_config_text(R"({"bath": {"kind": "squeezed_vacuum"}})");
    apply_override(root, "bath.alpha_exp=-0.5");
    apply_override(root, "protocol.tau.points=12");
    apply_override(root, "outputs.directory=some/dir");
    apply_override(root, "batch.initial_fock=[1,2,3]");
    const ExperimentConfig c = config_from_json(root);
    EXPECT_EQ(c.bath.alpha_exp, -0.5);
    EXPECT_EQ(c.tau_points, 12);
    EXPECT_EQ(c.directory, "some/dir");
    EXPECT_EQ(c.batch_initial_fock, (std::vector<int>{1, 2, 3}));
    EXPECT_THROW(apply_override(root, "no_equals"), ConfigError);
    EXPECT_THROW(apply_override(root, "bath..m=1"), ConfigError);
    EXPECT_THROW(apply_override(root, "bath.kind.x=1"), ConfigError);
}

TEST(Config, ResolvedJsonRoundTrips) {
    const ExperimentConfig c = small_run();
    const json once = to_json(c);
    const json twice = to_json(config_from_json(once));
    EXPECT_EQ(once, twice);
    EXPECT_EQ(once["numerics"]["t_max"], 0.2);
    EXPECT_EQ(once["bath"]["beta"], "inf");
}

TEST(Config, ShippedConfigsValidate) {
    int count = 0;
    for (const auto& entry : fs::directory_iterator(QWITNESS_CONFIG_DIR)) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
        ++count;
    }
    EXPECT_GE(count, 5);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Hash, KnownDigests) {
    EXPECT_EQ(sha1_hex("abc"), "a9993e364706816aba3e25717850c26c9cd0d89d");
    EXPECT_EQ(sha1_hex(""), "da39a3ee5e6b4b0d3255bfef95601890afd80709");
    EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
    EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Hash, MatchesGitHashObject) {
    if (std::system("git --version > /dev/null 2>&1") != 0) GTEST_SKIP() << "git not available";
    const fs::path dir = scratch("hash");
    fs::create_directories(dir);
    const std::string content = "tau,value\n0.25,0.10000000000000001\n";
    std::ofstream(dir / "f.csv", std::ios::binary) << content;
    const std::string cmd = "git hash-object " + (dir / "f.csv").string() + " > " + (dir / "h.txt").string();
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    std::string expected = slurp(dir / "h.txt");
    expected.erase(expected.find_last_not_of('\n') + 1);
    EXPECT_EQ(git_blob_hash(content), expected);
}

TEST(Svg, RendersAndEscapes) {
    LinePlot plot{"a & b", "t", "W", {{"x<y", {0.0, 1.0, 2.0}, {1.0, 0.5, 0.25}}}};
    const std::string svg = render_svg(plot);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("a &amp; b"), std::string::npos);
    EXPECT_NE(svg.find("x&lt;y"), std::string::npos);
    EXPECT_NE(svg.find("<polyline"), std::string::npos);
    plot.series.clear();
    EXPECT_THROW(render_svg(plot), DomainError);
}

TEST(Experiment, ProfileSuffix) {
    EXPECT_EQ(cli::detail::profile_suffix(0.0), "_alpha_0");
    EXPECT_EQ(cli::detail::profile_suffix(-0.5), "_alpha_m0p5");
    EXPECT_EQ(cli::detail::profile_suffix(-1.0 / 3.0), "_alpha_m0p333333");
}

TEST(Experiment, ManifestIsComplete) {
    const fs::path dir = scratch("manifest");
    const RunResult r = run_experiment(small_run(), dir);
    ASSERT_TRUE(fs::exists(dir / "manifest.json"));
    const json m = json::parse(slurp(dir / "manifest.json"));
    for (const char* key : {"tool", "version", "mode", "started_utc", "threads", "config", "config_sha1",
                            "fixed_numerics", "units", "profiles", "outputs", "status", "wall_clock_seconds"})
        EXPECT_TRUE(m.contains(key)) << key;
    EXPECT_EQ(m["status"], "ok");
    EXPECT_EQ(m["config"], to_json(small_run()));
    EXPECT_EQ(m["config_sha1"], git_blob_hash(to_json(small_run()).dump()));
    EXPECT_EQ(m["profiles"].size(), 1u);
    EXPECT_FALSE(m["profiles"][0]["kappa_zero_crossings_periods"].empty());
    std::set<std::string> names;
    for (const auto& f : m["outputs"]) {
        const std::string name = f["file"];
        names.insert(name);
        EXPECT_EQ(f["git_blob_sha1"], git_blob_hash(slurp(dir / name))) << name;
    }
    EXPECT_EQ(names, (std::set<std::string>{"rates.csv", "rates.svg", "witness.csv", "witness.svg"}));
    ASSERT_EQ(r.profiles.size(), 1u);
    EXPECT_EQ(r.profiles[0].curves.front().values.size(), 6u);
}

TEST(Experiment, RatesOnlyMode) {
    const fs::path dir = scratch("rates");
    run_experiment(small_run(), dir, RunMode::rates_only);
    EXPECT_TRUE(fs::exists(dir / "rates.csv"));
    EXPECT_FALSE(fs::exists(dir / "witness.csv"));
    EXPECT_EQ(json::parse(slurp(dir / "manifest.json"))["mode"], "rates");
}

TEST(Experiment, HeatmapAndTrajectoryOutputs) {
    json root = to_json(small_run());
    apply_override(root, "batch.initial_fock=[1,3]");
    apply_override(root, "batch.alpha_exp=[0.0,-0.5]");
    apply_override(root, "outputs.emit_trajectory=true");
    apply_override(root, "outputs.emit_svg=false");
    apply_override(root, "system.dim=20");
    const fs::path dir = scratch("heatmap");
    run_experiment(config_from_json(root), dir);
    for (const char* f : {"witness_heatmap_alpha_0.csv", "witness_heatmap_alpha_m0p5.csv", "rates_alpha_0.csv",
                          "trajectory_alpha_0.csv", "trajectory_alpha_m0p5.csv"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    const std::string heat = body(dir / "witness_heatmap_alpha_0.csv");
    EXPECT_EQ(heat.rfind("tau,n0,value\n", 0), 0u);
    EXPECT_EQ(std::count(heat.begin(), heat.end(), '\n'), 1 + 2 * 6);
    const std::string traj = slurp(dir / "trajectory_alpha_0.csv");
    EXPECT_EQ(traj.rfind("t,re_0_0,im_0_0,re_0_1", 0), 0u);
}

TEST(Experiment, Deterministic) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    run_experiment(small_run(), a);
    run_experiment(small_run(), b);
    for (const char* f : {"rates.csv", "witness.csv"}) {
        const std::string ba = body(a / f);
        EXPECT_FALSE(ba.empty());
        EXPECT_EQ(ba, body(b / f)) << f;
    }
}

TEST(Experiment, FailureWritesErrorManifest) {
    ExperimentConfig c = small_run();
    c.rate_grid_points = 3;
    c.tau_stop = 0.5;
    c.t_max = 1.0;
    const fs::path dir = scratch("fail");
    EXPECT_THROW(run_experiment(c, dir), TabulationError);
    const json m = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m["status"], "error");
    EXPECT_EQ(m["error"]["type"], "TabulationError");
}

TEST(Binary, ExitCodes) {
    const std::string cfg = std::string(QWITNESS_CONFIG_DIR) + "/squeezed_fock.json";
    const fs::path dir = scratch("binary");
    EXPECT_EQ(run_binary("validate " + cfg), 0);
    EXPECT_EQ(run_binary("validate " + cfg + " --set system.dim=5"), 2);
    EXPECT_EQ(run_binary("validate " + cfg + " --set bath.colour=1"), 2);
    EXPECT_EQ(run_binary("validate /nonexistent.json"), 2);
    EXPECT_EQ(run_binary("frobnicate"), 2);
    EXPECT_EQ(run_binary("rates " + cfg + " --out " + dir.string() + " --set numerics.rate_grid_points=3"), 3);
    EXPECT_EQ(run_binary("run " + cfg + " --out " + dir.string() +
                         " --threads 1 --set protocol.tau.points=4 --set protocol.tau.stop=0.05"),
              0);
    EXPECT_TRUE(fs::exists(dir / "witness.csv"));
}
