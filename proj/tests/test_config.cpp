#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "thinlayer/config.hpp"

using namespace thinlayer;

namespace {

ConfigError error_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "no error for:\n" << text;
    return ConfigError("", 0, "");
}

}  // namespace

TEST(Config, EmptyObjectGivesDefaults)
{
    const auto c = parse_config("{}");
    EXPECT_EQ(c.spec.name, "custom");
    EXPECT_EQ(c.spec.backend, Backend::fv);
    EXPECT_EQ(c.spec.steps, 10);
    EXPECT_EQ(c.spec.dt, std::vector<double>{0.01});
    EXPECT_EQ(c.output_dir, "out");
    EXPECT_EQ(c.spec.solver.tol, 1e-10);
    EXPECT_EQ(c.spec.solver.max_iter, 200);
}

TEST(Config, FullDocument)
{
    const auto c = parse_config(R"({
  "name": "demo",
  "mesh": {"type": "interval", "a": 0, "b": 2, "n": 16},
  "backend": "fve",
  "flux": {"family": "doubly-nonlinear", "k": 0.5, "p": 3, "r": 1.5},
  "source": {"type": "linear", "a": 0.6, "b": 1.2},
  "initial": {"type": "cap", "height": 0.3, "radius": 0.8, "center": [1]},
  "scheme": "theta", "theta": 0.75,
  "dt": [0.1, 0.05],
  "steps": 4,
  "solver": {"tol": 1e-11, "max_iter": 50},
  "seed": 9,
  "snapshot_every": 2,
  "expect": ["balance-closes", "S>=0"],
  "output": "here"
})");
    const auto& s = c.spec;
    EXPECT_EQ(s.name, "demo");
    EXPECT_EQ(s.mesh.n, 16);
    EXPECT_EQ(s.mesh.b, 2.0);
    EXPECT_EQ(s.backend, Backend::fve);
    EXPECT_EQ(s.flux.family, "doubly-nonlinear");
    EXPECT_EQ(s.flux.r, 1.5);
    EXPECT_EQ(s.source.type, "linear");
    EXPECT_EQ(s.initial.center[0], 1.0);
    EXPECT_EQ(s.scheme.kind, SchemeKind::theta);
    EXPECT_EQ(s.scheme.theta, 0.75);
    EXPECT_EQ(s.dt, (std::vector<double>{0.1, 0.05}));
    EXPECT_EQ(s.steps, 4);
    EXPECT_EQ(s.solver.tol, 1e-11);
    EXPECT_EQ(s.solver.max_iter, 50);
    EXPECT_EQ(s.seed, 9u);
    EXPECT_EQ(s.snapshot_every, 2);
    EXPECT_EQ(s.expect.size(), 2u);
    EXPECT_EQ(c.output_dir, "here");
    const auto r = run_scenario(s);
    EXPECT_TRUE(r.ok()) << r.failure;
}

TEST(Config, ScenarioBaseWithOverrides)
{
    const auto c = parse_config(R"({"scenario": "ablation-margin", "steps": 3, "backend": "fve"})");
    const auto base = find_scenario("ablation-margin");
    EXPECT_EQ(c.spec.name, "ablation-margin");
    EXPECT_EQ(c.spec.steps, 3);
    EXPECT_EQ(c.spec.backend, Backend::fve);
    EXPECT_EQ(c.spec.flux.family, base.flux.family);
    EXPECT_EQ(c.spec.source.b, base.source.b);
    const auto e = error_of(R"({"scenario": "nope"})");
    EXPECT_EQ(e.key(), "scenario");
}

TEST(Config, UnknownKeysCarryPathAndLine)
{
    auto e = error_of("{\n  \"steps\": 3,\n  \"stpes\": 4\n}");
    EXPECT_EQ(e.key(), "stpes");
    EXPECT_EQ(e.line(), 3);
    e = error_of("{\n  \"mesh\": {\n    \"n\": 10,\n    \"nn\": 4\n  }\n}");
    EXPECT_EQ(e.key(), "mesh.nn");
    EXPECT_EQ(e.line(), 4);
    EXPECT_NE(std::string(e.what()).find("config:4: key 'mesh.nn'"), std::string::npos);
    e = error_of("{\n\"flux\": {\"family\": \"advective\",\n \"velocity\": {\"type\": \"uniform\",\n  \"speed\": 1}}}");
    EXPECT_EQ(e.key(), "flux.velocity.speed");
    EXPECT_EQ(e.line(), 4);
}

TEST(Config, InvalidBackendNamesTheKey)
{
    const auto e = error_of("{\n  \"steps\": 1,\n  \"backend\": \"fvx\"\n}");
    EXPECT_EQ(e.key(), "backend");
    EXPECT_EQ(e.line(), 3);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("backend"), std::string::npos);
    EXPECT_NE(msg.find("fvx"), std::string::npos);
}

TEST(Config, EnumeratedValues)
{
    EXPECT_EQ(error_of(R"({"flux": {"family": "magic"}})").key(), "flux.family");
    EXPECT_EQ(error_of(R"({"source": {"type": "sine"}})").key(), "source.type");
    EXPECT_EQ(error_of(R"({"initial": {"type": "sawtooth"}})").key(), "initial.type");
    EXPECT_EQ(error_of(R"({"mesh": {"type": "tri"}})").key(), "mesh.type");
    EXPECT_EQ(error_of(R"({"scheme": "rk4"})").key(), "scheme");
    EXPECT_EQ(error_of(R"({"expect": ["R=1"]})").key(), "expect");
    EXPECT_EQ(error_of(R"({"flux": {"kernel": {"type": "wavelet"}}})").key(), "flux.kernel.type");
}

TEST(Config, TypeAndRangeErrors)
{
    EXPECT_EQ(error_of(R"({"steps": "ten"})").key(), "steps");
    EXPECT_EQ(error_of(R"({"steps": 1.5})").key(), "steps");
    EXPECT_EQ(error_of(R"({"steps": -1})").key(), "steps");
    EXPECT_EQ(error_of(R"({"seed": -1})").key(), "seed");
    EXPECT_EQ(error_of(R"({"dt": 0})").key(), "dt");
    EXPECT_EQ(error_of(R"({"dt": []})").key(), "dt");
    EXPECT_EQ(error_of(R"({"dt": [0.1, "x"]})").key(), "dt");
    EXPECT_EQ(error_of(R"({"dt": {"a": 1}})").key(), "dt");
    EXPECT_EQ(error_of(R"({"mesh": 3})").key(), "mesh");
    EXPECT_EQ(error_of(R"({"mesh": {"a": 1, "b": 0}})").key(), "mesh.b");
    EXPECT_EQ(error_of(R"({"mesh": {"type": "rect", "x": [1, 0]}})").key(), "mesh.x");
    EXPECT_EQ(error_of(R"({"flux": {"p": 1}})").key(), "flux.p");
    EXPECT_EQ(error_of(R"({"solver": {"tol": 0}})").key(), "solver.tol");
    EXPECT_EQ(error_of(R"({"solver": {"max_iter": 0}})").key(), "solver.max_iter");
    EXPECT_EQ(error_of(R"({"initial": {"center": [1, 2, 3]}})").key(), "initial.center");
    EXPECT_EQ(error_of(R"({"theta": 0.5})").key(), "theta");
    EXPECT_EQ(error_of(R"({"scheme": "theta", "theta": 2})").key(), "scheme");
    EXPECT_EQ(error_of("[1, 2]").line(), 1);
}

TEST(Config, ParseErrorsReportTheLine)
{
    const auto e = error_of("{\n  \"steps\": 3,\n  \"dt\": 0.1,,\n}");
    EXPECT_EQ(e.line(), 3);
    const std::string msg = e.what();
    EXPECT_EQ(msg.rfind("config:3: parse error at column", 0), 0u) << msg;
}

TEST(Config, MatrixKernelPathsAreRelativeToTheFile)
{
    const auto dir = std::filesystem::temp_directory_path() / "thinlayer_config_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "g.txt") << "0 0 0\n0 0 0\n0 0 0\n";
        std::ofstream(dir / "k.txt") << "1 0 0\n0 1 0\n0 0 1\n";
        std::ofstream(dir / "run.json") << R"({
  "mesh": {"n": 3},
  "flux": {"family": "nonlocal", "kernel": {"type": "matrix", "g_file": "g.txt", "k_file": "k.txt"}},
  "initial": {"type": "cosine", "value": 1, "height": 0.5},
  "steps": 2
})";
    }
    const auto c = load_config(dir / "run.json");
    EXPECT_EQ(std::filesystem::path(c.spec.flux.kernel.g_file), dir / "g.txt");
    EXPECT_EQ(std::filesystem::path(c.spec.flux.kernel.k_file), dir / "k.txt");
    EXPECT_EQ(c.source_path, (dir / "run.json").string());
    const auto r = run_scenario(c.spec);
    EXPECT_TRUE(r.ok()) << r.failure;
    EXPECT_EQ(error_of(R"({"flux": {"kernel": {"type": "matrix", "g_file": "g.txt"}}})").key(), "flux.kernel.k_file");
    std::filesystem::remove_all(dir);
    EXPECT_THROW(load_config(dir / "run.json"), ConfigError);
}
