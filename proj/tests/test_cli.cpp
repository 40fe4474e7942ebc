#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <expsumlab/cli.hpp>

namespace cli = esl::cli;
namespace fs = std::filesystem;

namespace {

cli::json config(std::initializer_list<std::string> sets) {
    auto cfg = cli::merge_config(cli::json::object());
    for (const auto& s : sets) cli::apply_override(cfg, s);
    return cfg;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

int shell(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Config, OverridesAndValidation) {
    auto cfg = config({"N=[4,6]", "assert.slope_min=8.3", "curves=[{\"family\":\"power\",\"a\":1.5,\"b\":0.5}]", "out=dir"});
    EXPECT_EQ(cfg["N"], cli::json::parse("[4,6]"));
    EXPECT_DOUBLE_EQ(cfg["assert"]["slope_min"].get<double>(), 8.3);
    EXPECT_EQ(cfg["out"], "dir");
    EXPECT_THROW(cli::merge_config(cli::json{{"bogus", 1}}), cli::ConfigError);
    EXPECT_THROW(cli::apply_override(cfg, "novalue"), cli::ConfigError);
    EXPECT_EQ(cli::run("nonsense", cfg).exit_code, 2);
    EXPECT_EQ(cli::run("moment", config({"workers=0"})).exit_code, 2);
    EXPECT_EQ(cli::run("moment", config({"preset=\"conjecture\"", "alpha=2", "beta=0.5"})).exit_code, 2);
    EXPECT_EQ(cli::run("moment", config({"delta=5", "N=[4]"})).exit_code, 2);
    EXPECT_EQ(cli::run("conditions", config({"curves=[{\"family\":\"spiral\"}]"})).exit_code, 2);
}

TEST(Commands, ConditionsRow) {
    const auto r = cli::run("conditions", config({}));
    ASSERT_EQ(r.exit_code, 0);
    ASSERT_EQ(r.rows.size(), 1u);
    const auto cells = split(cli::to_csv(r.rows).substr(cli::to_csv(r.rows).find('\n') + 1));
    EXPECT_EQ(cells[0], "conditions");
    EXPECT_EQ(std::stod(cells[10]), 6);    // A4
    EXPECT_EQ(std::stod(cells[11]), 144);  // A2
    EXPECT_EQ(std::stod(cells[12]), 1);    // A3 / A2
    EXPECT_DOUBLE_EQ(r.summary["details"]["moment"]["A3"].get<double>(), 144);
}

TEST(Commands, OracleCount) {
    const auto r = cli::run("oracle-count", config({"N=4", "I=[2,4]", "k=1", "assert.count=3"}));
    EXPECT_EQ(r.exit_code, 0);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].cells[10], "3");
    EXPECT_EQ(cli::run("oracle-count", config({"N=4", "I=[2,4]", "k=1", "assert.count=4"})).exit_code, 1);
}

TEST(Commands, RefusalsProduceNoRows) {
    const auto bad = cli::run("moment", config({"plan.n_x1=3"}));
    EXPECT_EQ(bad.exit_code, 2);
    EXPECT_TRUE(bad.rows.empty());
    EXPECT_TRUE(bad.summary.is_null());
    const auto big = cli::run("moment", config({"plan.max_pairs=10"}));
    EXPECT_EQ(big.exit_code, 3);
    EXPECT_TRUE(big.rows.empty());
}

TEST(Commands, SliceMatchesOracleAndFitsSlope) {
    const auto r = cli::run("moment", config({"N=[4,6,8]", "slice=true", "assert.oracle=1e-9"}));
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.rows.size(), 3u);
    const auto f = cli::run("moment", config({"N=[4,6]", "p=6", "alpha=1", "beta=1", "assert.slope_min=0"}));
    EXPECT_EQ(f.exit_code, 0);
    EXPECT_EQ(f.rows.back().cells[0], "moment.fit");
}

TEST(Csv, SchemaAndFormatting) {
    const auto r = cli::run("lemma76", config({"M=8", "window=1"}));
    ASSERT_EQ(r.exit_code, 0);
    std::istringstream is(r.csv());
    std::string line;
    std::getline(is, line);
    ASSERT_EQ(split(line).size(), 20u);
    EXPECT_EQ(line.rfind("experiment,curve_family,a,b,N,", 0), 0u);
    int n = 0;
    while (std::getline(is, line)) {
        EXPECT_EQ(split(line).size(), 20u) << line;
        ++n;
    }
    EXPECT_EQ(n, static_cast<int>(r.rows.size()));
    EXPECT_EQ(cli::fmt(0.1), "0.10000000000000001");
}

TEST(Replay, ByteIdenticalAcrossWorkers) {
    for (const auto& [cmd, sets] : std::vector<std::pair<std::string, std::vector<std::string>>>{
             {"weyl-verify", {"M=32", "trials=12"}},
             {"levelset-verify", {"trials=6", "jmax=6"}},
             {"moment", {"N=[6]", "method=\"quasi-random\"", "samples=65536"}},
             {"decouple", {"op=\"bilinear\"", "N=[16,64]", "samples=65536"}}}) {
        auto a = cli::merge_config(cli::json::object());
        for (const auto& s : sets) cli::apply_override(a, s);
        auto b = a;
        b["workers"] = 3;
        const auto ra = cli::run(cmd, a), rb = cli::run(cmd, b), rc = cli::run(cmd, a);
        ASSERT_NE(ra.exit_code, 2) << ra.diagnostics;
        EXPECT_EQ(ra.csv(), rb.csv()) << cmd;
        EXPECT_EQ(ra.csv(), rc.csv()) << cmd;
    }
}

TEST(Binary, ExitCodesAndOutputs) {
    const std::string exe = EXPSUMLAB_CLI;
    const fs::path dir = fs::temp_directory_path() / "expsumlab_cli_test";
    fs::remove_all(dir);
    EXPECT_EQ(shell(exe + " conditions --out " + (dir / "c").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "c" / "rows.csv"));
    const auto summary = cli::json::parse(slurp(dir / "c" / "summary.json"));
    EXPECT_EQ(summary["command"], "conditions");
    EXPECT_EQ(summary["config"]["out"], (dir / "c").string());

    EXPECT_EQ(shell(exe + " oracle-count --set N=4 --set I=[2,4] --set k=1 --out " + (dir / "o").string()), 0);
    EXPECT_EQ(shell(exe + " moment --set plan.n_x1=3 --out " + (dir / "m").string()), 2);
    EXPECT_FALSE(fs::exists(dir / "m"));
    EXPECT_EQ(shell(exe + " moment --set plan.max_pairs=10 --out " + (dir / "r").string()), 3);
    EXPECT_EQ(shell(exe + " moment --set bogus=1"), 2);
    EXPECT_EQ(shell(exe + " nonsense"), 2);

    const fs::path cfg = dir / "cfg.json";
    std::ofstream(cfg) << R"({"N": [32], "trials": 10, "M": 32})";
    EXPECT_EQ(shell(exe + " weyl-verify --config " + cfg.string() + " --workers 1 --out " + (dir / "w1").string()), 0);
    EXPECT_EQ(shell(exe + " weyl-verify --config " + cfg.string() + " --workers 2 --out " + (dir / "w2").string()), 0);
    EXPECT_EQ(slurp(dir / "w1" / "rows.csv"), slurp(dir / "w2" / "rows.csv"));
    fs::remove_all(dir);
}
