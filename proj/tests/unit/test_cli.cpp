#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(RECLINK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    const auto text = slurp(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

class Cli : public ::testing::Test {
 protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("reclink_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const std::string& name, const nlohmann::json& j) {
        const auto p = dir_ / name;
        std::ofstream(p) << j.dump(2);
        return p;
    }

    static nlohmann::json small(double region = 0, double income = 0, double dob = 0) {
        return {{"simulation", {{"S", 4}, {"T", 5}, {"n1s", 6}, {"n2t", 8}, {"nm", 4},
                                {"errors", {region, income, dob}}}},
                {"chain", {{"iterations", 200}, {"sweeps", 3}}}};
    }

    std::string sim_files(const fs::path& d) const {
        return "--file1 " + (d / "f1.csv").string() + " --file2 " + (d / "f2.csv").string() + " --schema " +
               (d / "schema.json").string();
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateWritesFullScaleFilesDeterministically) {
    ASSERT_EQ(run("simulate --seed 4 --out " + (dir_ / "a").string()), 0);
    ASSERT_EQ(run("simulate --seed 4 --threads 3 --out " + (dir_ / "b").string()), 0);
    EXPECT_EQ(line_count(dir_ / "a" / "f1.csv"), 601u);
    EXPECT_EQ(line_count(dir_ / "a" / "f2.csv"), 1201u);
    EXPECT_EQ(line_count(dir_ / "a" / "truth_links.csv"), 451u);
    for (const char* f : {"f1.csv", "f2.csv", "schema.json", "truth_blocks.csv", "truth_links.csv"})
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    ASSERT_EQ(run("simulate --seed 5 --out " + (dir_ / "c").string()), 0);
    EXPECT_NE(slurp(dir_ / "a" / "f1.csv"), slurp(dir_ / "c" / "f1.csv"));
    const auto manifest = nlohmann::json::parse(slurp(dir_ / "a" / "manifest.json"));
    EXPECT_EQ(manifest.at("seed"), 4);
    EXPECT_TRUE(manifest.contains("config_hash"));
}

TEST_F(Cli, SimulateRejectsBadErrorRate) {
    const auto cfg = write_config("bad.json", small(1.5, 0, 0));
    EXPECT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir_ / "o").string()), 2);
    EXPECT_FALSE(fs::exists(dir_ / "o" / "f1.csv"));
}

TEST_F(Cli, UnknownConfigKeyIsValidationError) {
    auto j = small();
    j["chain"]["iteratons"] = 10;
    const auto cfg = write_config("typo.json", j);
    EXPECT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir_ / "o").string()), 2);
}

TEST_F(Cli, LinkAndEvaluateRecoverZeroErrorBlocks) {
    const auto cfg = write_config("run.json", small());
    const auto d = dir_ / "sim";
    ASSERT_EQ(run("simulate --config " + cfg.string() + " --seed 2 --out " + d.string()), 0);
    const auto inputs_before = slurp(d / "f1.csv") + slurp(d / "f2.csv") + slurp(d / "schema.json");
    const auto l = dir_ / "link";
    ASSERT_EQ(run("link --config " + cfg.string() + " " + sim_files(d) + " --seed 3 --out " + l.string()), 0);
    for (const char* f : {"samples.jsonl", "diagnostics.json", "manifest.json", "block_logprob.csv", "record_logprob.csv"})
        EXPECT_TRUE(fs::exists(l / f)) << f;
    EXPECT_EQ(line_count(l / "samples.jsonl"), 100u);
    const auto e = dir_ / "eval";
    ASSERT_EQ(run("evaluate --samples " + (l / "samples.jsonl").string() + " --truth-blocks " +
                  (d / "truth_blocks.csv").string() + " --truth-links " + (d / "truth_links.csv").string() +
                  " --out " + e.string()),
              0);
    // 100 sample rows, header, mean and sd.
    EXPECT_EQ(line_count(e / "metrics.csv"), 103u);
    std::ifstream in(e / "metrics.csv");
    std::string line, mean;
    while (std::getline(in, line))
        if (line.rfind("mean,", 0) == 0) mean = line;
    ASSERT_FALSE(mean.empty());
    // mean,,tpr,ppv,f1,acc,...
    std::stringstream ss(mean);
    std::vector<std::string> cells;
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_GE(cells.size(), 6u);
    EXPECT_GE(std::stod(cells[5]), 0.99);
    EXPECT_EQ(inputs_before, slurp(d / "f1.csv") + slurp(d / "f2.csv") + slurp(d / "schema.json"));
}

TEST_F(Cli, ManifestRerunReproducesSamples) {
    const auto cfg = write_config("run.json", small(0.2, 0.2, 0.2));
    const auto d = dir_ / "sim";
    ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + d.string()), 0);
    ASSERT_EQ(run("link --config " + cfg.string() + " " + sim_files(d) + " --seed 8 --threads 2 --out " +
                  (dir_ / "a").string()),
              0);
    ASSERT_EQ(run("link --config " + (dir_ / "a" / "manifest.json").string() + " --out " + (dir_ / "b").string()), 0);
    EXPECT_EQ(slurp(dir_ / "a" / "samples.jsonl"), slurp(dir_ / "b" / "samples.jsonl"));
}

TEST_F(Cli, MissingSchemaWritesNothing) {
    const auto d = dir_ / "sim";
    ASSERT_EQ(run("simulate --config " + write_config("run.json", small()).string() + " --out " + d.string()), 0);
    const auto l = dir_ / "link";
    EXPECT_EQ(run("link --file1 " + (d / "f1.csv").string() + " --file2 " + (d / "f2.csv").string() + " --schema " +
                  (dir_ / "nope.json").string() + " --out " + l.string()),
              2);
    EXPECT_FALSE(fs::exists(l / "samples.jsonl"));
    EXPECT_FALSE(fs::exists(l / "manifest.json"));
}

TEST_F(Cli, BrlHonoursForcedMaskAndCap) {
    const auto d = dir_ / "sim";
    ASSERT_EQ(run("simulate --config " + write_config("run.json", small()).string() + " --out " + d.string()), 0);
    // Force Region: only record pairs whose block Regions agree are candidates.
    auto schema = nlohmann::json::parse(slurp(d / "schema.json"));
    for (auto& v : schema.at("block"))
        if (v.at("name") == "region") v["forced"] = true;
    std::ofstream(d / "forced.json") << schema.dump(2);
    const auto l = dir_ / "brl";
    ASSERT_EQ(run("link --method brl --config " + (dir_ / "run.json").string() + " --file1 " + (d / "f1.csv").string() +
                  " --file2 " + (d / "f2.csv").string() + " --schema " + (d / "forced.json").string() + " --out " +
                  l.string()),
              0);
    const auto manifest = nlohmann::json::parse(slurp(l / "manifest.json"));
    const auto pairs = manifest.at("candidate_pairs").get<std::size_t>();
    EXPECT_GT(pairs, 0u);
    EXPECT_LT(pairs, 24u * 40u);
    EXPECT_FALSE(fs::exists(l / "block_logprob.csv"));

    auto j = small();
    j["chain"]["brl_pair_cap"] = 100;
    const auto capped = write_config("cap.json", j);
    EXPECT_EQ(run("link --method brl --config " + capped.string() + " " + sim_files(d) + " --out " +
                  (dir_ / "cap").string()),
              3);
    EXPECT_FALSE(fs::exists(dir_ / "cap" / "samples.jsonl"));
}

TEST_F(Cli, TruthAgainstItselfScoresOne) {
    const auto d = dir_ / "sim";
    ASSERT_EQ(run("simulate --config " + write_config("run.json", small()).string() + " --out " + d.string()), 0);
    // A samples file holding the truth, built from a zero-iteration-free route: evaluate truth files directly.
    const auto tb = d / "truth_blocks.csv", tl = d / "truth_links.csv";
    std::ofstream out(dir_ / "truth.jsonl");
    nlohmann::json s;
    s["method"] = "truth";
    s["iteration"] = 0;
    s["blocked"] = true;
    s["blocks"] = nlohmann::json::array();
    s["links"] = nlohmann::json::array();
    std::ifstream bin(tb), lin(tl);
    std::string line;
    std::getline(bin, line);
    while (std::getline(bin, line)) {
        const auto c = line.find(',');
        s["blocks"].push_back({line.substr(0, c), line.substr(c + 1)});
    }
    std::getline(lin, line);
    while (std::getline(lin, line)) {
        const auto c = line.find(',');
        s["links"].push_back({line.substr(0, c), line.substr(c + 1)});
    }
    out << s.dump() << '\n';
    out.close();
    ASSERT_EQ(run("evaluate --samples " + (dir_ / "truth.jsonl").string() + " --truth-blocks " + tb.string() +
                  " --truth-links " + tl.string() + " --out " + (dir_ / "e").string()),
              0);
    std::ifstream m(dir_ / "e" / "metrics.csv");
    std::getline(m, line);
    std::getline(m, line);
    EXPECT_EQ(line.substr(line.find(',', line.find(',') + 1) + 1, 15), "1,1,1,1,0");
}

TEST_F(Cli, AnalyzeReportsCombinedEstimate) {
    const auto cfg = write_config("run.json", small());
    const auto d = dir_ / "sim";
    ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + d.string()), 0);
    ASSERT_EQ(run("link --config " + cfg.string() + " " + sim_files(d) + " --out " + (dir_ / "l").string()), 0);
    ASSERT_EQ(run("analyze --config " + cfg.string() + " " + sim_files(d) + " --samples " +
                  (dir_ / "l" / "samples.jsonl").string() + " --out " + (dir_ / "a").string()),
              0);
    std::ifstream in(dir_ / "a" / "mi.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(header.substr(0, 22), "term,estimate,odds_rat");
    EXPECT_EQ(row.substr(0, 9), "exposure,");
    std::stringstream ss(row);
    std::vector<std::string> cells;
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 15u);
    const double est = std::stod(cells[1]), lo = std::stod(cells[4]), hi = std::stod(cells[5]);
    EXPECT_LE(lo, est);
    EXPECT_GE(hi, est);
    EXPECT_GT(std::stod(cells[8]), 0.0);
    EXPECT_EQ(cells[9], "100");
}
