#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(SCALEVO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("scalevo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string at(const std::string& name) const { return (dir / name).string(); }
    fs::path dir;
};

}  // namespace

TEST_F(Cli, UnknownFlagAndMissingFilesFail) {
    EXPECT_NE(run("simulate --no-such-flag"), 0);
    EXPECT_NE(run("correct --poses " + at("missing.txt") + " --scales " + at("missing.csv")), 0);
    EXPECT_NE(run(""), 0);
}

TEST_F(Cli, BadConfigExitsWithError) {
    std::ofstream(at("bad.cfg")) << "bogus=1\n";
    EXPECT_EQ(run("simulate --mode sweep --trials 1 --config " + at("bad.cfg")), 2);
}

TEST_F(Cli, SweepWritesCsv) {
    ASSERT_EQ(run("simulate --mode sweep --sigma 0 --trials 2 --seed 5 --out " + at("s.csv")), 0);
    const auto text = slurp(at("s.csv"));
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "sigma,speed,method,mean_rel_err,std_rel_err,trials,failures");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
}

TEST_F(Cli, DriftPipelineEndToEnd) {
    ASSERT_EQ(run("simulate --mode drift --frames 150 --drift 1.002 --sigma 0.5 --seed 3 --out-dir " +
                  dir.string()),
              0);
    ASSERT_TRUE(fs::exists(at("gt_poses.txt")));
    ASSERT_EQ(run("estimate --corrs " + at("corrs.csv") + " --out " + at("scales.csv")), 0);
    ASSERT_EQ(run("correct --poses " + at("vo_poses.txt") + " --scales " + at("scales.csv") +
                  " --out " + at("corrected.txt") + " --log " + at("log.csv")),
              0);
    const auto log = slurp(at("log.csv"));
    EXPECT_EQ(log.substr(0, log.find('\n')), "frame_id,lambda,action");
    EXPECT_NE(log.find("applied"), std::string::npos);

    ASSERT_EQ(run("evaluate --est " + at("vo_poses.txt") + " --gt " + at("gt_poses.txt") +
                  " --lengths 20,40 --out " + at("raw.json")),
              0);
    ASSERT_EQ(run("evaluate --est " + at("corrected.txt") + " --gt " + at("gt_poses.txt") +
                  " --scales " + at("scales.csv") + " --lengths 20,40 --out " + at("fixed.json")),
              0);
    const auto raw = nlohmann::json::parse(slurp(at("raw.json")));
    const auto fixed = nlohmann::json::parse(slurp(at("fixed.json")));
    EXPECT_EQ(raw["frames"], 151);
    EXPECT_LT(fixed["segments"]["t_err_pct"].get<double>(), raw["segments"]["t_err_pct"].get<double>());
    EXPECT_GT(fixed["scale"]["used"].get<int>(), 100);
}

TEST_F(Cli, EstimateIsReproducible) {
    ASSERT_EQ(run("simulate --mode drift --frames 20 --seed 8 --out-dir " + dir.string()), 0);
    ASSERT_EQ(run("estimate --corrs " + at("corrs.csv") + " --out " + at("a.csv")), 0);
    ASSERT_EQ(run("estimate --corrs " + at("corrs.csv") + " --out " + at("b.csv")), 0);
    EXPECT_EQ(slurp(at("a.csv")), slurp(at("b.csv")));
}
