#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"

#include "paratope/data/dataset.hpp"
#include "paratope/data/synthetic.hpp"
#include "paratope/eval/crossval.hpp"
#include "paratope/train/trainer.hpp"

using namespace paratope;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string output;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::path(PARATOPE_CLI_WORK) / info->name();
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    Outcome run(const std::string& args) const {
        const fs::path log = dir_ / "last.log";
        const std::string cmd = std::string(PARATOPE_CLI) + " " + args + " > " + log.string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        Outcome r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.output = read(log);
        return r;
    }

    // Writes a synthetic dataset through the CLI and returns its path.
    std::string synth(const std::string& name, std::size_t complexes, const std::string& labels = "motif",
                      int seed = 1) const {
        const fs::path out = path(name);
        const Outcome r = run("synth --output " + out.string() + " --complexes " + std::to_string(complexes) +
                          " --antigen-length 40 --labels " + labels + " --seed " + std::to_string(seed));
        EXPECT_EQ(r.code, 0) << r.output;
        return out.string();
    }

    static std::string read(const fs::path& p) {
        std::ifstream in(p);
        std::stringstream s;
        s << in.rdbuf();
        return s.str();
    }

    static std::vector<std::vector<std::string>> csv(const fs::path& p) {
        std::vector<std::vector<std::string>> rows;
        std::istringstream in(read(p));
        std::string line;
        while (std::getline(in, line)) {
            std::vector<std::string> cells;
            std::istringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            rows.push_back(cells);
        }
        return rows;
    }

    fs::path dir_;
};

std::vector<float> flatten(const ModelParams<float>& params) {
    std::vector<float> out;
    params.for_each_tensor([&](const std::string&, const Tensor<float>& t) {
        out.insert(out.end(), t.data().begin(), t.data().end());
    });
    return out;
}

std::size_t residue_count(const std::vector<Complex>& cs) {
    std::size_t n = 0;
    for (const auto& c : cs) {
        for (const auto& cdr : c.cdrs) n += cdr.size();
    }
    return n;
}

}  // namespace

TEST_F(Cli, TrainSavesReloadableWeights) {
    const std::string data = synth("d.jsonl", 10);
    const Outcome r = run("train --quiet --dataset " + data + " --epochs 2 --seed 3 --out " + path("o").string());
    ASSERT_EQ(r.code, 0) << r.output;
    for (const char* f : {"weights/model.ptw", "weights/config.json", "logs/train_log.csv"}) {
        EXPECT_TRUE(fs::exists(path("o") / f)) << f;
    }
    const auto loaded = ModelParams<float>::load(path("o") / "weights" / "model.ptw");

    const auto complexes = parse_dataset(fs::path(data));
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 3;
    const auto trained = train(ModelConfig{}, complexes, all_samples(complexes), {}, cfg);
    EXPECT_EQ(flatten(loaded), flatten(trained.params));

    const auto snapshot = nlohmann::json::parse(read(path("o") / "weights" / "config.json"));
    EXPECT_EQ(snapshot["train"]["epochs"], 2);
    EXPECT_EQ(snapshot["model"]["kind"], "fast");
    std::ifstream log(path("o") / "logs" / "train_log.csv");
    EXPECT_EQ(read_training_log(log).size(), 2u);
}

TEST_F(Cli, SameSeedSameLog) {
    const std::string data = synth("d.jsonl", 10);
    for (const char* out : {"a", "b"}) {
        ASSERT_EQ(run("train --quiet --dataset " + data + " --epochs 3 --seed 9 --out " + path(out).string()).code, 0);
    }
    auto a = csv(path("a") / "logs" / "train_log.csv");
    auto b = csv(path("b") / "logs" / "train_log.csv");
    ASSERT_EQ(a.size(), 4u);
    // Wall-clock time is the one column that legitimately differs.
    for (auto* rows : {&a, &b}) {
        for (auto& row : *rows) row.pop_back();
    }
    EXPECT_EQ(a, b);
    EXPECT_EQ(read(path("a") / "weights" / "model.ptw"), read(path("b") / "weights" / "model.ptw"));
}

TEST_F(Cli, MissingDatasetNamesPath) {
    const std::string missing = path("nowhere.jsonl").string();
    const Outcome r = run("train --dataset " + missing + " --out " + path("o").string());
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.output.find(missing), std::string::npos) << r.output;
}

TEST_F(Cli, CrossvalWritesReports) {
    const std::string data = synth("d.jsonl", 9);
    const std::string args = "crossval --quiet --dataset " + data + " --runs 2 --folds 3 --epochs 1 --seed 5 --out ";
    ASSERT_EQ(run(args + path("a").string()).code, 0);
    const fs::path reports = path("a") / "reports";
    const auto folds = csv(reports / "folds.csv");
    ASSERT_EQ(folds.size(), 7u);
    const EvalReport report = EvalReport::from_json(read(reports / "crossval.json"));
    ASSERT_EQ(report.folds.size(), 6u);
    for (const auto& f : report.folds) {
        if (std::isnan(f.roc_auc)) continue;
        EXPECT_GE(f.roc_auc, 0.0);
        EXPECT_LE(f.roc_auc, 1.0);
    }
    EXPECT_TRUE(fs::exists(reports / "pr_curves.csv"));

    ASSERT_EQ(run(args + path("b").string() + " --jobs 2").code, 0);
    EXPECT_EQ(read(reports / "crossval.json"), read(path("b") / "reports" / "crossval.json"));
    EXPECT_EQ(read(reports / "folds.csv"), read(path("b") / "reports" / "folds.csv"));
}

TEST_F(Cli, PredictEmitsOneRowPerResidue) {
    const std::string data = synth("d.jsonl", 6);
    const std::string out = path("o").string();
    ASSERT_EQ(run("train --quiet --dataset " + data + " --epochs 1 --out " + out).code, 0);
    const Outcome r = run("predict --dataset " + data + " --out " + out);
    ASSERT_EQ(r.code, 0) << r.output;
    const auto rows = csv(path("o") / "reports" / "predictions.csv");
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows[0], (std::vector<std::string>{"complex", "chain", "residue", "aa", "probability", "label"}));
    EXPECT_EQ(rows.size() - 1, residue_count(parse_dataset(fs::path(data))));
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double p = std::stod(rows[k][4]);
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
    }
}

TEST_F(Cli, IncompatibleWeightsRejected) {
    const std::string data = synth("d.jsonl", 6, "antigen");
    const std::string out = path("o").string();
    ASSERT_EQ(run("train --quiet --dataset " + data + " --epochs 1 --out " + out).code, 0);

    const Outcome wrong_kind = run("predict --model ag-fast --dataset " + data + " --out " + out);
    EXPECT_EQ(wrong_kind.code, 2);
    EXPECT_NE(wrong_kind.output.find("fast"), std::string::npos) << wrong_kind.output;

    std::string bytes = read(path("o") / "weights" / "model.ptw");
    bytes[4] = char(99);
    std::ofstream(path("bad.ptw"), std::ios::binary) << bytes;
    const Outcome bad = run("predict --dataset " + data + " --weights " + path("bad.ptw").string() + " --out " + out);
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.output.find("version"), std::string::npos) << bad.output;
}

TEST_F(Cli, ExportAttention) {
    const std::string data = synth("d.jsonl", 5, "antigen");
    const std::string out = path("o").string();
    ASSERT_EQ(run("train --quiet --model ag-fast --dataset " + data + " --epochs 1 --out " + out).code, 0);
    const Outcome r = run("export-attention --dataset " + data + " --out " + out);
    ASSERT_EQ(r.code, 0) << r.output;
    std::ifstream in(path("o") / "attention" / "attention.jsonl");
    const auto records = read_attention(in);
    EXPECT_EQ(records.size(), residue_count(parse_dataset(fs::path(data))));
    for (const auto& rec : records) {
        double s = 0;
        for (const auto& [j, a] : rec.weights) s += a;
        EXPECT_NEAR(s, 1.0, 1e-6);
    }

    ASSERT_EQ(run("train --quiet --dataset " + data + " --epochs 1 --out " + path("f").string()).code, 0);
    const Outcome fast = run("export-attention --dataset " + data + " --out " + path("f").string());
    EXPECT_EQ(fast.code, 2);
    EXPECT_NE(fast.output.find("ag-fast"), std::string::npos) << fast.output;
}

TEST_F(Cli, ExitCodes) {
    const std::string data = synth("d.jsonl", 4);
    EXPECT_EQ(run("train --no-such-flag").code, 1);
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("train --dataset " + data + " --epochs 0").code, 1);
    EXPECT_EQ(run("train --dataset " + data + " --model slow").code, 1);
    EXPECT_EQ(run("--help").code, 0);

    SyntheticSpec spec;
    spec.complexes = 3;
    auto bare = make_synthetic(spec);
    for (auto& c : bare) {
        c.antigen = {};
        c.neighborhoods.clear();
    }
    write_dataset(path("bare.jsonl"), bare);
    const Outcome no_antigen = run("train --model ag-fast --dataset " + path("bare.jsonl").string() + " --out " +
                               path("o").string());
    EXPECT_EQ(no_antigen.code, 2);
    EXPECT_NE(no_antigen.output.find("antigen"), std::string::npos) << no_antigen.output;

    const Outcome blowup = run("train --quiet --dataset " + data + " --epochs 3 --lr 1e30 --out " + path("n").string());
    EXPECT_EQ(blowup.code, 3) << blowup.output;
}

TEST_F(Cli, FlagsOverrideConfigFile) {
    const std::string data = synth("d.jsonl", 4);
    std::ofstream(path("run.toml")) << "epochs = 3\nseed = 2\n";
    const std::string base = "train --quiet --config " + path("run.toml").string() + " --dataset " + data + " --out ";
    ASSERT_EQ(run(base + path("a").string()).code, 0);
    EXPECT_EQ(csv(path("a") / "logs" / "train_log.csv").size(), 4u);
    ASSERT_EQ(run(base + path("b").string() + " --epochs 2").code, 0);
    EXPECT_EQ(csv(path("b") / "logs" / "train_log.csv").size(), 3u);
    const auto snapshot = nlohmann::json::parse(read(path("b") / "weights" / "config.json"));
    EXPECT_EQ(snapshot["train"]["seed"], 2);
}
