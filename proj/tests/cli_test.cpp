// Runs the mavseg executable and checks exit codes and outputs.

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "support.hpp"

namespace mavseg {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
protected:
  int run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.path().string() + "' && '" MAVSEG_CLI "' " + args + " >out.txt 2>err.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string read(const std::string& name) const {
    std::ifstream f(dir_ / name, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
  }
  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }

  void make_world() {
    ASSERT_EQ(run("phantom-gen --out train --cases 4 --size 16 --radius 1 2 --seed 3"), 0);
    ASSERT_EQ(run("phantom-gen --out held --cases 2 --size 16 --radius 1 2 --preset heldout --train-fraction 0 --seed 4"), 0);
    write("cfg.json", R"({"datasets": ["train", {"path": "held", "role": "heldout"}], "epochs": 1, "crop_size": 8,
                          "unet": {"levels": 2, "base_features": 2}})");
  }

  mavseg::testing::TempDir dir_;
};

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("phantom-gen"), 2);
  EXPECT_EQ(run("phantom-gen --out x --cases many"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, PhantomGenIsSeedDeterministic) {
  ASSERT_EQ(run("phantom-gen --out a --cases 3 --size 16 --radius 1 2 --seed 9"), 0);
  ASSERT_EQ(run("phantom-gen --out b --cases 3 --size 16 --radius 1 2 --seed 9"), 0);
  EXPECT_EQ(read("a/manifest.json"), read("b/manifest.json"));
  EXPECT_EQ(read("a/case001/P1.mvol"), read("b/case001/P1.mvol"));
  EXPECT_FALSE(read("a/case001/P1.mvol").empty());
  const auto ds = load_dataset(dir_ / "a");
  EXPECT_EQ(ds.cases.size(), 3u);
  EXPECT_EQ(run("phantom-gen --out c --cases 0"), 2);
  EXPECT_EQ(run("phantom-gen --out c --cases 2 --profiles missing.json"), 2);
}

TEST_F(Cli, TrainEvalFinetuneAblateAugment) {
  make_world();
  ASSERT_EQ(run("train --config cfg.json --out ck --quiet"), 0) << read("err.txt");
  EXPECT_NO_THROW(nn::load_checkpoint(dir_ / "ck"));
  EXPECT_TRUE(fs::exists(dir_ / "ck" / "train_log.json"));
  EXPECT_TRUE(fs::exists(dir_ / "ck" / "eval_report.json"));

  ASSERT_EQ(run("eval --model ck --dataset held --json --report rep.json"), 0) << read("err.txt");
  const auto report = nlohmann::json::parse(read("rep.json"));
  EXPECT_EQ(report["datasets"][0]["unseen"], "P3");
  EXPECT_FALSE(report["datasets"][0]["mean_used"].is_null());
  EXPECT_EQ(nlohmann::json::parse(read("out.txt")), report);
  ASSERT_EQ(run("eval --model ck --dataset held --no-agnostic --json"), 0);
  EXPECT_TRUE(nlohmann::json::parse(read("out.txt"))["datasets"][0]["mean_used"].is_null());
  EXPECT_EQ(run("eval --model ck --dataset held --assign P3=9"), 2);
  EXPECT_EQ(run("eval --model ck --dataset held --assign P3"), 2);
  EXPECT_EQ(run("eval --model missing --dataset held"), 2);

  ASSERT_EQ(run("finetune --model ck --dataset held --assign P3=agnostic --init pretrained_path --folds 2 --epochs 1 "
                "--out ft --quiet"),
            0)
      << read("err.txt");
  EXPECT_TRUE(fs::exists(dir_ / "ft" / "finetune_report.json"));
  EXPECT_EQ(run("finetune --model ck --dataset held --assign P3=agnostic --init random_path --epochs 1"), 2);
  EXPECT_EQ(run("finetune --model ck --dataset held --assign P3=agnostic --init sideways"), 2);

  ASSERT_EQ(run("augment --dataset train --out aug --count 2 --seed 1"), 0) << read("err.txt");
  const auto index = nlohmann::json::parse(read("aug/augment.json"));
  ASSERT_EQ(index["volumes"].size(), 2u);
  const auto g = mvol::read_volume(dir_ / "aug" / index["volumes"][0]["file"].get<std::string>());
  EXPECT_EQ(g.dims(), (Dims{16, 16, 16}));

  ASSERT_EQ(run("ablate --config cfg.json --out abl --quiet"), 0) << read("err.txt");
  const auto abl = nlohmann::json::parse(read("abl/ablation.json"));
  EXPECT_EQ(abl["cells"].size(), 12u);
  EXPECT_EQ(abl["trained_models"], 10);
}

TEST_F(Cli, TrainRejectsInvalidConfigs) {
  make_world();
  write("bad.json", R"({"datasets": ["train"], "crop_size": 7, "unet": {"levels": 2}})");
  EXPECT_EQ(run("train --config bad.json --out x"), 2);
  write("bad.json", R"({"datasets": ["train"], "epochs": 1, "colour": "blue"})");
  EXPECT_EQ(run("train --config bad.json --out x"), 2);
  EXPECT_EQ(run("train --config missing.json --out x"), 2);
  EXPECT_FALSE(fs::exists(dir_ / "x" / "weights.bin"));
}

}  // namespace
}  // namespace mavseg
