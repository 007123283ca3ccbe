#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "run_config.hpp"

using namespace endo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

int run(const std::string& args) {
    const std::string cmd = std::string(ENDO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small enough that synth + two short trainings take a few seconds.
std::string tiny_config() {
    auto model = ModelConfig::tiny(0);
    model.decoder.max_seq_len = 64;
    nlohmann::json j;
    j["corpus"] = {{"n_patients", 10}, {"max_scenes", 2}, {"image_size", 32}, {"master_seed", 3}};
    j["tokenizer"] = {{"vocab_size", 300}};
    j["model"] = nlohmann::json::parse(model_config_to_json(model));
    for (const char* s : {"stage1", "stage2"})
        j[s] = {{"epochs", 2}, {"micro_batch", 4}, {"accum_steps", 1}, {"max_seq_len", 64}};
    j["generate"] = {{"max_len", 20}};
    return j.dump();
}

class CliTest : public ::testing::Test {
protected:
    fs::path root;
    void SetUp() override {
        root = fs::temp_directory_path() /
               ("endo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root);
        fs::create_directories(root);
        write(root / "cfg.json", tiny_config());
    }
    void TearDown() override { fs::remove_all(root); }
    std::string cfg() const { return "--config " + (root / "cfg.json").string(); }
    std::string p(const std::string& rel) const { return (root / rel).string(); }
};

}  // namespace

TEST(RunConfig, DefaultsAndOverrides) {
    const auto d = cli::parse_run_config("{}");
    EXPECT_EQ(d.stage1.stage, 1);
    EXPECT_EQ(d.stage2.stage, 2);
    const auto c = cli::parse_run_config(R"({"stage2": {"peak_lr": 0.001}, "tokenizer": {"lexicon": false}})");
    EXPECT_DOUBLE_EQ(c.stage2.peak_lr, 0.001);
    EXPECT_EQ(c.stage2.epochs, d.stage2.epochs);
    EXPECT_FALSE(c.tokenizer.lexicon);
}

TEST(RunConfig, UnknownKeysRejectedAtEveryLevel) {
    for (const char* bad : {R"({"bogus": 1})", R"({"corpus": {"patients": 3}})", R"({"model": {"encoder": {"x": 1}}})",
                            R"({"stage1": {"lr": 1}})", R"({"tokenizer": {"size": 300}})", R"({"generate": {"n": 1}})",
                            "not json", R"({"stage1": {"stage": 2}})"}) {
        EXPECT_THROW(cli::parse_run_config(bad), cli::ConfigError) << bad;
    }
}

TEST(RunConfig, EchoedConfigParsesBack) {
    const auto c = cli::parse_run_config(tiny_config());
    const auto text = cli::run_config_json(c, R"({"command": "train"})");
    const auto back = cli::parse_run_config(text);
    EXPECT_EQ(back.model, c.model);
    EXPECT_EQ(back.corpus, c.corpus);
    EXPECT_EQ(back.stage1, c.stage1);
    EXPECT_EQ(cli::run_config_json(back, R"({"command": "train"})"), text);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("synth"), 2);  // --out is required
    EXPECT_EQ(run("synth --out " + p("o") + " --dtype f16"), 2);
    EXPECT_EQ(run("train --out " + p("o")), 2);
    write(root / "bad.json", R"({"corpus": {"n_patient": 3}})");
    EXPECT_EQ(run("synth --config " + p("bad.json") + " --out " + p("o")), 2);
    EXPECT_EQ(run("verify --suite nonsense"), 2);
}

TEST_F(CliTest, DataErrorsExitOne) {
    EXPECT_EQ(run("evaluate --pairs " + p("missing.jsonl") + " --out " + p("e")), 1);
    write(root / "empty.jsonl", "");
    EXPECT_EQ(run("evaluate --pairs " + p("empty.jsonl") + " --out " + p("e")), 1);
    write(root / "file", "x");
    EXPECT_EQ(run("synth " + cfg() + " --out " + p("file/sub")), 1);
    write(root / "m.jsonl", "{broken\n");
    EXPECT_EQ(run("train --stage 1 --manifest " + p("m.jsonl") + " --out " + p("t")), 1);
}

TEST_F(CliTest, SynthIsReproducible) {
    ASSERT_EQ(run("synth " + cfg() + " --out " + p("a")), 0);
    ASSERT_EQ(run("synth " + cfg() + " --out " + p("b")), 0);
    EXPECT_EQ(slurp(root / "a/stage1.jsonl"), slurp(root / "b/stage1.jsonl"));
    EXPECT_EQ(slurp(root / "a/stage2.jsonl"), slurp(root / "b/stage2.jsonl"));
    const auto echoed = nlohmann::json::parse(slurp(root / "a/effective_config.json"));
    EXPECT_EQ(echoed["run"]["command"], "synth");
    EXPECT_EQ(echoed["corpus"]["n_patients"], 10);
    ASSERT_EQ(run("synth " + cfg() + " --seed 4 --out " + p("c")), 0);
    EXPECT_NE(slurp(root / "a/stage2.jsonl"), slurp(root / "c/stage2.jsonl"));
}

TEST_F(CliTest, EvaluateAndAblation) {
    write(root / "a.jsonl", R"({"id":"1","generated":"the colon was normal.","reference":"the colon was normal."})"
                            "\n");
    write(root / "b.jsonl", R"({"id":"1","generated":"the colon","reference":"the colon was normal."})"
                            "\n");
    ASSERT_EQ(run("evaluate --pairs " + p("a.jsonl") + " --baseline " + p("b.jsonl") + " --out " + p("e")), 0);
    EXPECT_NE(slurp(root / "e/metrics.csv").find("rouge_l,1.0000000000"), std::string::npos);
    EXPECT_NE(slurp(root / "e/ablation.csv").find("rouge_l,1.0000000000,0.6666666667,0.5000000000"),
              std::string::npos);
    EXPECT_TRUE(fs::exists(root / "e/effective_config.json"));
}

TEST_F(CliTest, VerifySuites) {
    EXPECT_EQ(run("verify --suite oracles --out " + p("v")), 0);
    EXPECT_NE(slurp(root / "v/verify_report.txt").find("PASS"), std::string::npos);
    EXPECT_EQ(run("verify --suite oracles --inject-fault"), 1);
}

TEST_F(CliTest, TwoStagePipeline) {
    ASSERT_EQ(run("synth " + cfg() + " --out " + p("data")), 0);
    ASSERT_EQ(run("train --stage 1 " + cfg() + " --data " + p("data") + " --out " + p("s1")), 0);
    for (const char* f : {"final.ckpt", "tokenizer.txt", "curve.csv", "epochs.csv", "effective_config.json",
                          "checkpoints/epoch_000.ckpt", "checkpoints/epoch_001.ckpt"})
        EXPECT_TRUE(fs::exists(root / "s1" / f)) << f;
    EXPECT_EQ(slurp(root / "s1/curve.csv").substr(0, 26), "update_index,epoch,lr,loss");

    ASSERT_EQ(run("train --stage 2 " + cfg() + " --data " + p("data") + " --init " + p("s1/final.ckpt") + " --out " +
                  p("s2")),
              0);
    EXPECT_EQ(slurp(root / "s1/tokenizer.txt"), slurp(root / "s2/tokenizer.txt"));

    // Resuming from the first epoch reproduces the uninterrupted run.
    ASSERT_EQ(run("train --stage 2 " + cfg() + " --data " + p("data") + " --resume " +
                  p("s2/checkpoints/epoch_000.ckpt") + " --out " + p("s2r")),
              0);
    EXPECT_EQ(slurp(root / "s2/final.ckpt"), slurp(root / "s2r/final.ckpt"));

    ASSERT_EQ(run("generate " + cfg() + " --ckpt " + p("s2/final.ckpt") + " --manifest " + p("data/stage2.jsonl") +
                  " --split test --attn --out " + p("g")),
              0);
    const auto reports = slurp(root / "g/reports.jsonl");
    ASSERT_FALSE(reports.empty());
    std::istringstream lines(reports);
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("generated"));
        EXPECT_TRUE(j.contains("reference"));
        ++n;
    }
    EXPECT_GT(n, 0);
    EXPECT_TRUE(fs::exists(root / "g/attention"));
    EXPECT_EQ(run("evaluate --pairs " + p("g/reports.jsonl") + " --out " + p("ev")), 0);

    // Same seed, same bytes.
    ASSERT_EQ(run("train --stage 1 " + cfg() + " --data " + p("data") + " --out " + p("s1b")), 0);
    EXPECT_EQ(slurp(root / "s1/final.ckpt"), slurp(root / "s1b/final.ckpt"));
}
