#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "difflab/cli.hpp"

using json = nlohmann::json;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = difflab::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

json report(const std::vector<std::string>& args, int expected = 0) {
    const CliRun r = run(args);
    EXPECT_EQ(r.code, expected) << r.err;
    return json::parse(r.out);
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override { ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1); }
    void TearDown() override { ::unsetenv("SOURCE_DATE_EPOCH"); }
};

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST_F(Cli, ClassifyBes3) {
    const json j = report({"classify", "bes3"});
    EXPECT_EQ(j["result"]["properties"]["fd"], "no");
    EXPECT_EQ(j["result"]["boundaries"]["left"]["kind"], "entrance");
    EXPECT_EQ(j["result"]["boundaries"]["right"]["kind"], "natural");
}

TEST_F(Cli, ClassifyBrownian) {
    const json j = report({"classify", "--model", "bm"});
    EXPECT_EQ(j["result"]["properties"]["fd"], "yes");
    EXPECT_EQ(j["result"]["properties"]["martingale"], "yes");
}

TEST_F(Cli, ClassifyModelFile) {
    const auto p = temp_file("difflab_cli_absorbed.toml",
                             "name = \"absorbed\"\ndomain = [0, \"inf\"]\ndrift = \"0\"\nsigma = \"1\"\n"
                             "atoms.left = \"inf\"\n");
    const json j = report({"classify", "-m", p.string()});
    EXPECT_EQ(j["result"]["boundaries"]["left"]["kind"], "regular");
    EXPECT_EQ(j["result"]["boundaries"]["left"]["subtype"], "absorbing");
    EXPECT_EQ(j["result"]["boundaries"]["left"]["atom"], "inf");
    std::filesystem::remove(p);
}

TEST_F(Cli, ValidationFailuresExitWithTwo) {
    EXPECT_EQ(run({"classify", "no_such_model"}).code, difflab::cli::InvalidInput);
    EXPECT_EQ(run({"classify"}).code, difflab::cli::InvalidInput);
    EXPECT_EQ(run({"hitprob", "bm", "--x", "2", "--a", "0", "--b", "1"}).code, difflab::cli::InvalidInput);
    EXPECT_EQ(run({"hitprob", "bm", "--x", "0.5", "--a", "0"}).code, difflab::cli::InvalidInput);
    EXPECT_EQ(run({"bogus"}).code, difflab::cli::InvalidInput);
    EXPECT_EQ(run({"classify", "bm", "--format", "xml"}).code, difflab::cli::InvalidInput);
    const auto bad = temp_file("difflab_cli_bad.toml", "name = \"bad\"\ndomain = [0, 1]\ndrift = \"0\"\nsigma = \"0\"\n");
    const CliRun r = run({"classify", bad.string()});
    EXPECT_EQ(r.code, difflab::cli::InvalidInput);
    EXPECT_NE(r.err.find("error"), std::string::npos);
    std::filesystem::remove(bad);
    const auto syntax = temp_file("difflab_cli_syntax.toml", "name = \"s\"\ndomain = [0, 1]\ndrift = \"0\"\nsigma = \"1 +\"\n");
    EXPECT_EQ(run({"classify", syntax.string()}).code, difflab::cli::InvalidInput);
    std::filesystem::remove(syntax);
}

TEST_F(Cli, InconclusiveExitsWithThree) {
    // v diverges like log log z at +inf, too slowly to be decided.
    const auto p = temp_file("difflab_cli_slow.toml",
                             "name = \"slow\"\ndomain = [3, \"inf\"]\ndrift = \"0\"\nsigma = \"x*sqrt(log(x))\"\n");
    const CliRun r = run({"classify", p.string()});
    std::filesystem::remove(p);
    ASSERT_EQ(r.code, difflab::cli::Inconclusive) << r.err;
    const json j = json::parse(r.out);
    EXPECT_EQ(j["result"]["boundaries"]["right"]["kind"], "inconclusive");
    EXPECT_EQ(j["result"]["properties"]["fd"], "inconclusive");
}

TEST_F(Cli, HitprobAndExittime) {
    EXPECT_NEAR(report({"hitprob", "bm", "--x", "0.25", "--a", "0", "--b", "1"})["result"]["analytic"].get<double>(),
                0.25, 1e-12);
    EXPECT_NEAR(report({"exittime", "bm", "--x", "0.5", "--a", "0", "--b", "1"})["result"]["analytic"].get<double>(),
                0.25, 1e-10);
}

TEST_F(Cli, Laplace) {
    EXPECT_NEAR(report({"laplace", "bm", "--alpha", "0.5", "--y", "0", "--x", "1"})["result"]["analytic"].get<double>(),
                std::exp(-1.0), 1e-4);
    EXPECT_EQ(report({"laplace", "bm", "--alpha", "0.5", "--y", "0", "--x", "0"})["result"]["analytic"].get<double>(),
              1.0);
    EXPECT_EQ(run({"laplace", "bm", "--alpha", "0.5", "--y", "0"}).code, difflab::cli::InvalidInput);
    EXPECT_EQ(run({"laplace", "bm", "--alpha", "0.5", "--y", "0", "--profile", "nope"}).code,
              difflab::cli::InvalidInput);
}

TEST_F(Cli, LaplaceProfileAtEntranceBoundary) {
    const CliRun r = run({"laplace", "cev", "--alpha", "1", "--y", "1", "--profile", "fd"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    const auto& sides = j["result"]["profile"]["sides"];
    ASSERT_EQ(sides.size(), 2u);
    EXPECT_EQ(sides[1]["side"], "right");
    EXPECT_EQ(sides[1]["verdict"], "positive limit");
    EXPECT_EQ(sides[0]["verdict"], "vanishes");
    EXPECT_NE(r.err.find("positive limit"), std::string::npos);

    const CliRun csv = run({"laplace", "cev", "--alpha", "1", "--y", "1", "--profile", "mart", "--format", "csv"});
    ASSERT_EQ(csv.code, 0) << csv.err;
    EXPECT_EQ(csv.out.rfind("side,point,value,ratio\n", 0), 0u);
}

TEST_F(Cli, SimulateDump) {
    const CliRun r = run({"simulate", "bm", "--paths", "10", "--horizon", "0.01", "--dt", "0.001", "--dump"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "path_id,t,x");
    std::set<int> ids;
    int rows = 0;
    while (std::getline(in, line)) {
        ids.insert(std::stoi(line.substr(0, line.find(','))));
        ++rows;
    }
    EXPECT_EQ(ids.size(), 10u);
    EXPECT_EQ(rows, 10 * 11);
}

TEST_F(Cli, SimulateSummary) {
    const json j = report({"simulate", "bm", "--x", "0", "--paths", "2000", "--horizon", "1", "--dt", "0.01",
                           "--seed", "3"});
    const double m = j["result"]["terminal_mean"]["mean"];
    const double se = j["result"]["terminal_mean"]["std_error"];
    EXPECT_LT(std::abs(m), 3 * se);
    EXPECT_EQ(j["manifest"]["seed"], 3);
    EXPECT_EQ(run({"simulate", "bm_reflected", "--paths", "200", "--horizon", "1", "--dt", "0.01"}).code,
              difflab::cli::InvalidInput);
}

TEST_F(Cli, VerifyReportsStrictLocalMartingale) {
    const CliRun r = run({"verify", "cev", "--paths", "2000", "--dt", "1e-3", "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    bool found = false;
    for (const auto& c : j["result"]["checks"]) {
        if (c["name"] == "martingale_gap") {
            found = true;
            EXPECT_EQ(c["note"], "strictly negative gap: consistent with strict local martingale");
        }
        EXPECT_TRUE(c["pass"].get<bool>()) << c.dump();
    }
    EXPECT_TRUE(found);
}

TEST_F(Cli, VerifyFailureExitsWithOne) {
    // A window this thin with a coarse step biases the exit time far beyond 3 sigma.
    const CliRun r = run({"verify", "bm", "--a", "0", "--b", "0.05", "--x", "0.025", "--paths", "4000", "--dt", "0.01",
                       "--seed", "1"});
    EXPECT_EQ(r.code, difflab::cli::CheckFailed) << r.err;
    EXPECT_NE(r.err.find("FAIL"), std::string::npos);
}

TEST_F(Cli, ManifestAndReproducibility) {
    const std::vector<std::string> args{"verify", "gbm", "--paths", "1000", "--dt", "1e-3", "--seed", "9",
                                        "--workers", "2"};
    const CliRun a = run(args);
    const CliRun b = run(args);
    EXPECT_EQ(a.out, b.out);
    const json j = json::parse(a.out);
    const auto& m = j["manifest"];
    EXPECT_EQ(m["command"], "verify");
    EXPECT_EQ(m["model"], "gbm");
    EXPECT_EQ(m["seed"], 9);
    EXPECT_EQ(m["parameters"]["workers"], 2);
    EXPECT_EQ(m["timestamp"], "2023-11-14T22:13:20Z");
    EXPECT_EQ(m["tool_version"], difflab::cli::version());
    EXPECT_EQ(m["argv"].size(), args.size());

    const std::vector<std::string> analytic{"classify", "ou"};
    EXPECT_EQ(run(analytic).out, run(analytic).out);
}

TEST_F(Cli, OutFileAndCsv) {
    const auto p = std::filesystem::temp_directory_path() / "difflab_cli_out.json";
    const CliRun r = run({"hitprob", "bes3", "--x", "1.5", "--a", "1", "--b", "2", "--out", p.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    std::ifstream f(p);
    const json j = json::parse(f);
    EXPECT_NEAR(j["result"]["analytic"].get<double>(), 2.0 / 3.0, 1e-9);
    std::filesystem::remove(p);

    const CliRun csv = run({"catalog", "--format", "csv"});
    ASSERT_EQ(csv.code, 0) << csv.err;
    EXPECT_NE(csv.out.find("bes3,entrance,natural,no,no"), std::string::npos);
    EXPECT_NE(csv.out.find("bm_absorbed,regular (absorbing),natural,yes,yes"), std::string::npos);
}

TEST_F(Cli, HelpAndVersion) {
    EXPECT_EQ(run({"--help"}).code, 0);
    const CliRun v = run({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find(difflab::cli::version()), std::string::npos);
}
