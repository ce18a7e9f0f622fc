#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "divspline/cli/run.hpp"

using namespace divspline;
using namespace divspline::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("divspline_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" + DIVSPLINE_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

CaseConfig parse(std::vector<std::string> args) {
    args.insert(args.begin(), "divspline");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return parse_args(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST(Config, DerivedGammaPerDegree) {
    auto c = config_from_json(nlohmann::json{{"command", "convergence"}, {"kPrime", 1}});
    apply_defaults(c);
    validate(c);
    EXPECT_DOUBLE_EQ(c.resolved_gamma(), 1e-2);
    EXPECT_DOUBLE_EQ(c.resolved_cnit(), 10.0);
    c = config_from_json(nlohmann::json{{"command", "convergence"}, {"kPrime", 3}, {"delta", 1}});
    EXPECT_NEAR(c.resolved_gamma(), 1e-4, 1e-20);
    EXPECT_NEAR(c.stab().resolve(3, 0.1).gamma, 1e-4, 1e-20);
    EXPECT_DOUBLE_EQ(c.stab().resolve(3, 0.1).cNit, 20.0);
    c = config_from_json(nlohmann::json{{"command", "convergence"}, {"kPrime", 2}, {"delta", 3.0}});
    EXPECT_NEAR(c.resolved_gamma(), 3e-3, 1e-18);
}

TEST(Config, ZeroGammaIsAccepted) {
    auto c = config_from_json(nlohmann::json{{"command", "cavity"}, {"gamma", 0}});
    apply_defaults(c);
    EXPECT_NO_THROW(validate(c));
    EXPECT_EQ(c.resolved_gamma(), 0.0);
    EXPECT_EQ(c.stab().resolve(1, 0.01).gamma, 0.0);
}

TEST(Config, ErrorsNameTheKey) {
    auto message = [](const nlohmann::json& j) {
        try {
            auto c = config_from_json(j);
            apply_defaults(c);
            validate(c);
        } catch (const ParameterError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message({{"command", "cavity"}, {"bogus", 1}}).find("bogus"), std::string::npos);
    EXPECT_NE(message({{"command", "cavity"}, {"kPrime", "two"}}).find("kPrime"), std::string::npos);
    EXPECT_NE(message({{"command", "cavity"}, {"delta", 1}, {"gamma", 0.1}}).find("gamma"), std::string::npos);
    EXPECT_NE(message({{"command", "cavity"}, {"re", -5}}).find("re"), std::string::npos);
    EXPECT_NE(message({{"command", "cavity"}, {"dt", 0}}).find("dt"), std::string::npos);
    EXPECT_NE(message({{"command", "swim"}}).find("command"), std::string::npos);
    EXPECT_NE(message({{"kPrime", 1}}).find("command"), std::string::npos);
    EXPECT_NE(message({{"command", "cavity"}, {"mesh", {8, 16}}}).find("mesh"), std::string::npos);
}

TEST(Config, FlagsOverrideFile) {
    const auto dir = scratch_dir("flags");
    std::ofstream(dir / "c.json") << R"({"command": "robustness", "kPrime": 2, "gamma": 0.5, "re": [1, 10]})";
    auto c = parse({"--config", (dir / "c.json").string(), "--kprime", "1", "--re", "5,50"});
    EXPECT_EQ(c.command, "robustness");
    EXPECT_EQ(c.kPrime, 1);
    EXPECT_EQ(c.reynolds, (std::vector<double>{5.0, 50.0}));
    EXPECT_DOUBLE_EQ(c.resolved_gamma(), 0.5);
    c = parse({"--config", (dir / "c.json").string(), "--delta", "2"});
    EXPECT_FALSE(c.gamma.has_value());
    EXPECT_DOUBLE_EQ(c.resolved_gamma(), 2e-3);
    EXPECT_THROW(parse({"--command", "cavity", "--delta", "1", "--gamma", "0"}), ParameterError);
    EXPECT_THROW(parse({"--command", "cavity", "--mesh", "8x"}), ParameterError);
    EXPECT_THROW(parse({"--command", "cavity", "--unknown-flag", "1"}), ParameterError);
}

TEST(Config, ManifestRoundTrips) {
    auto c = parse({"--command", "taylor-green-2d", "--kprime", "2", "--mesh", "12", "--re", "250", "--gamma",
                    "0.003", "--cnit", "17", "--dt", "0.02", "--tend", "0.4", "--rho-inf", "0.3", "--seed", "9"});
    const auto m = make_manifest(c, 1.5, {"diagnostics.csv"});
    const auto back = config_from_json(nlohmann::json::parse(m.dump())["config"]);
    EXPECT_EQ(back, c);
    EXPECT_DOUBLE_EQ(m["derived"]["gamma"].get<double>(), 0.003);
    EXPECT_EQ(m["derived"]["alphaPrime"].get<int>(), 1);
    EXPECT_FALSE(m["version"].get<std::string>().empty());
    auto d = parse({"--command", "cavity", "--delta", "0.25"});
    EXPECT_EQ(config_from_json(make_manifest(d, 0.0, {})["config"]), d);
}

TEST(Csv, SeventeenDigitRoundTrip) {
    const auto dir = scratch_dir("csv");
    const double third = 1.0 / 3.0, tiny = 1.2345678901234567e-300;
    {
        CsvWriter w(dir / "t.csv", {"a", "b", "c"});
        w.row({third, std::nullopt, tiny});
        EXPECT_THROW(w.row({1.0}), UsageError);
    }
    const auto t = read_csv(dir / "t.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "c"}));
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(*t.rows[0][0], third);
    EXPECT_FALSE(t.rows[0][1].has_value());
    EXPECT_EQ(*t.rows[0][2], tiny);
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(Vtk, StructuredPointsLayout) {
    const auto dir = scratch_dir("vtk");
    const Discretization disc(2, 1);
    auto s = disc.pair.zero_state();
    s.u.setConstant(0.5);
    write_state_vtk(dir / "f.vtk", disc.pair, s, true);
    const auto text = slurp(dir / "f.vtk");
    EXPECT_NE(text.find("DIMENSIONS 9 9 1"), std::string::npos);
    EXPECT_NE(text.find("POINT_DATA 81"), std::string::npos);
    EXPECT_NE(text.find("VECTORS u double"), std::string::npos);
    EXPECT_NE(text.find("SCALARS psi double 1"), std::string::npos);
    EXPECT_NE(text.find("SCALARS div double 1"), std::string::npos);
}

TEST(Cli, ConvergenceTableSchema) {
    const auto dir = scratch_dir("conv");
    ASSERT_EQ(run_cli("--command convergence --kprime 1 --mesh 4,8,16,32 --out " + dir.string()), 0);
    const auto t = read_csv(dir / "convergence.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"h", "L2", "L2order", "H1", "H1order"}));
    ASSERT_EQ(t.rows.size(), 4u);
    EXPECT_FALSE(t.rows[0][2].has_value());
    EXPECT_FALSE(t.rows[0][4].has_value());
    for (std::size_t i = 1; i < 4; ++i) {
        ASSERT_TRUE(t.rows[i][2].has_value());
        EXPECT_NEAR(*t.rows[i][2], std::log2(*t.rows[i - 1][1] / *t.rows[i][1]), 1e-12);
        EXPECT_GT(*t.rows[i][2], 1.5);
    }
    EXPECT_NEAR(*t.rows[3][0], 1.0 / 32, 1e-15);
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m["config"]["command"], "convergence");
    EXPECT_GE(m["wallTimeSeconds"].get<double>(), 0.0);
    EXPECT_EQ(m["artifacts"][0], "convergence.csv");
}

TEST(Cli, PressureRobustnessTable) {
    const auto dir = scratch_dir("prob");
    ASSERT_EQ(run_cli("--command pressure-robustness --out " + dir.string()), 0);
    const auto t = read_csv(dir / "pressure_robustness.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"L2_base", "L2_perturbed", "absDiff"}));
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_LT(*t.rows[0][2], 1e-9);
    EXPECT_GT(*t.rows[0][0], 0.0);
}

TEST(Cli, TaylorGreenSeriesLength) {
    const auto dir = scratch_dir("tg");
    ASSERT_EQ(run_cli("--command taylor-green-2d --mesh 4 --tend 1 --dt 1e-2 --out " + dir.string()), 0);
    const auto t = read_csv(dir / "diagnostics.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"t", "Ek", "eps", "eps_r", "eps_m", "divMax"}));
    ASSERT_EQ(t.rows.size(), 101u);
    EXPECT_NEAR(*t.rows.back()[0], 1.0, 1e-12);
}

TEST(Cli, DeterministicRerunsAndEnvOverride) {
    const auto a = scratch_dir("det_a"), b = scratch_dir("det_b"), ignored = scratch_dir("det_ignored");
    const std::string args = "--command cavity --mesh 4 --re 50 --seed 3 --threads 1";
    ASSERT_EQ(run_cli(args + " --out " + a.string()), 0);
    ASSERT_EQ(run_cli(args + " --out " + ignored.string(), "DIVSPLINE_OUT=" + b.string()), 0);
    EXPECT_FALSE(fs::exists(ignored / "centerline.csv"));
    ASSERT_TRUE(fs::exists(b / "centerline.csv"));
    EXPECT_EQ(slurp(a / "centerline.csv"), slurp(b / "centerline.csv"));
    EXPECT_EQ(slurp(a / "fields.vtk"), slurp(b / "fields.vtk"));
    const auto t = read_csv(a / "centerline.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"y", "u1", "x", "u2"}));
    EXPECT_EQ(t.rows.size(), 257u);
}

TEST(Cli, FailuresGiveNonzeroStatus) {
    const auto dir = scratch_dir("fail");
    EXPECT_EQ(run_cli("--command nope --out " + dir.string()), 1);
    EXPECT_EQ(run_cli("--command cavity --kprime 0 --out " + dir.string()), 1);
    CaseConfig c;
    c.command = "convergence";
    c.meshes = {0};
    std::ostringstream log, err;
    c.outputDir = dir.string();
    EXPECT_EQ(run(c, log, err), 2);
    EXPECT_NE(err.str().find("convergence"), std::string::npos);
}
