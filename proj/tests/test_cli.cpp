// Runs the command-line tool as a subprocess and checks exit codes and files.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "opbench/io.hpp"

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("opbench_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(OPBENCH_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path write_config(const fs::path& dir, const std::string& extra = "") {
    const auto path = dir / "run.cfg";
    std::ofstream(path) << "[run]\nseed = 3\n[data]\nproblem = advection\nsamples = 24\npath = "
                        << (dir / "data.opbl").string() << "\n[model]\narch = pcanet\nwidth = 8\nd_u = 4\nd_v = 4\n"
                        << "[train]\nepochs = 2\nbatch_size = 8\n[output]\ndir = " << (dir / "out").string() << "\n"
                        << extra;
    return path;
}

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
    const auto dir = scratch("usage");
    EXPECT_EQ(run("", dir / "log"), 1);
    EXPECT_EQ(run("frobnicate", dir / "log"), 1);
    std::ofstream(dir / "bad.cfg") << "[run]\nsede = 1\n";
    EXPECT_EQ(run("gen-data --config " + (dir / "bad.cfg").string(), dir / "log"), 1);
    EXPECT_NE(slurp(dir / "log").find("bad.cfg:2:"), std::string::npos) << slurp(dir / "log");
    std::ofstream(dir / "structural.cfg") << "[data]\nproblem = structural_import\n";
    EXPECT_EQ(run("gen-data --config " + (dir / "structural.cfg").string(), dir / "log"), 1);
}

TEST(Cli, DataErrorsExitWithTwo) {
    const auto dir = scratch("data");
    EXPECT_EQ(run("train --config " + write_config(dir).string(), dir / "log"), 2);
    EXPECT_EQ(run("gen-data --config " + (dir / "missing.cfg").string(), dir / "log"), 2);
}

TEST(Cli, PipelineAndSeedOverride) {
    const auto dir = scratch("pipeline");
    const auto cfg = write_config(dir).string();
    ASSERT_EQ(run("gen-data --config " + cfg, dir / "log"), 0) << slurp(dir / "log");
    const std::string first = slurp(dir / "data.opbl");
    ASSERT_EQ(run("gen-data --config " + cfg, dir / "log"), 0);
    EXPECT_EQ(slurp(dir / "data.opbl"), first);
    EXPECT_EQ(opbench::read_dataset(dir / "data.opbl").meta.at("seed"), "3");

    ASSERT_EQ(run("train --config " + cfg, dir / "log"), 0) << slurp(dir / "log");
    ASSERT_EQ(run("evaluate --config " + cfg, dir / "log"), 0) << slurp(dir / "log");
    EXPECT_TRUE(fs::exists(dir / "out" / "model.opba"));
    EXPECT_TRUE(fs::exists(dir / "out" / "evaluation_summary.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "cases" / "test_worst_prediction.opbl"));

    ASSERT_EQ(run("sweep --config " + cfg + " --jobs 2", dir / "log"), 0) << slurp(dir / "log");
    ASSERT_EQ(run("report --config " + cfg, dir / "log"), 0) << slurp(dir / "log");
    EXPECT_NE(slurp(dir / "log").find("pcanet"), std::string::npos);

    ASSERT_EQ(run("gen-data --config " + cfg + " --seed 4", dir / "log"), 0);
    EXPECT_EQ(opbench::read_dataset(dir / "data.opbl").meta.at("seed"), "4");
    ASSERT_EQ(run("gen-data --config " + cfg + " --seed 4", dir / "log"), 0);
    ::setenv("OPBENCH_SEED", "8", 1);
    const int code = run("gen-data --config " + cfg, dir / "log");
    ::unsetenv("OPBENCH_SEED");
    ASSERT_EQ(code, 0);
    EXPECT_EQ(opbench::read_dataset(dir / "data.opbl").meta.at("seed"), "8");
}

TEST(Cli, VerifySelectedCriteria) {
    const auto dir = scratch("verify");
    ASSERT_EQ(run("verify --criteria 1,2 --work-dir " + (dir / "w").string(), dir / "log"), 0) << slurp(dir / "log");
    const std::string out = slurp(dir / "log");
    EXPECT_NE(out.find("PASS 01 fno-parameter-counts"), std::string::npos) << out;
    EXPECT_NE(out.find("1747,6973,27865,111409,445537"), std::string::npos) << out;
    EXPECT_NE(out.find("163,637,2521,10033,40033"), std::string::npos) << out;
    EXPECT_NE(out.find("PASS 02 formula-vs-enumeration"), std::string::npos) << out;
    EXPECT_EQ(run("verify --criteria 11", dir / "log"), 1);
}

TEST(Cli, VerifyReportsCorruptedCheckpoint) {
    const auto dir = scratch("corrupt");
    const auto cfg = write_config(dir).string();
    ASSERT_EQ(run("gen-data --config " + cfg, dir / "log"), 0);
    ASSERT_EQ(run("train --config " + cfg, dir / "log"), 0);
    const auto ckpt = dir / "out" / "model.opba";
    const std::string args = "verify --criteria 1 --work-dir " + (dir / "w").string() + " --checkpoint ";
    ASSERT_EQ(run(args + ckpt.string(), dir / "log"), 0) << slurp(dir / "log");
    EXPECT_NE(slurp(dir / "log").find("PASS 00 checkpoint"), std::string::npos);

    std::string bytes = slurp(ckpt);
    bytes.resize(bytes.size() / 2);
    std::ofstream(ckpt, std::ios::binary) << bytes;
    EXPECT_NE(run(args + ckpt.string(), dir / "log"), 0);
    const std::string out = slurp(dir / "log");
    EXPECT_NE(out.find("PASS 01"), std::string::npos) << out;
    EXPECT_NE(out.find("FAIL 00 checkpoint"), std::string::npos) << out;
}
