// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "asd/data.hpp"
#include "asd/error.hpp"
#include "asd/png_io.hpp"
#include "asd/scoring.hpp"
#include "cli.hpp"
#include "support.hpp"

namespace asd {
namespace {

namespace fs = std::filesystem;
using config::KeyValues;
using testing::TempDir;

KeyValues kv(std::initializer_list<std::pair<std::string, std::string>> items) {
  KeyValues out;
  for (const auto& [k, v] : items) out.set(k, v);
  return out;
}

KeyValues tiny_synth(const fs::path& out) {
  return kv({{"output_dir", out.string()},
             {"height", "8"},
             {"width", "8"},
             {"train_count", "3"},
             {"test_count", "2"},
             {"anomaly_radius_min", "1"},
             {"anomaly_radius_max", "2"}});
}

KeyValues tiny_train(const fs::path& data, const fs::path& out) {
  return kv({{"dataset_dir", data.string()},
             {"output_dir", out.string()},
             {"epochs", "2"},
             {"warmup_epochs", "1"},
             {"patch_size", "5"},
             {"scales", "0.5,1.0"},
             {"descriptor_length", "3"}});
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "asd");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return code;
}

TEST(Synth, WritesCountsAndIsDeterministic) {
  TempDir dir;
  std::ostringstream out;
  cli::cmd_synth(tiny_synth(dir / "a"), out);
  cli::cmd_synth(tiny_synth(dir / "b"), out);
  EXPECT_EQ(data::list_dataset(dir / "a/train").size(), 3u);
  EXPECT_EQ(data::list_dataset(dir / "a/test").size(), 2u);
  for (const char* rel : {"train/images/img_0000.png", "test/labels/img_0001.png", "manifest.txt"}) {
    EXPECT_EQ(testing::file_bytes(dir / "a" / rel), testing::file_bytes(dir / "b" / rel)) << rel;
  }
  const KeyValues manifest = KeyValues::parse(read_text(dir / "a/manifest.txt"));
  EXPECT_EQ(manifest.get("train_anomaly_pixels"), "0");
  EXPECT_EQ(manifest.get("test_images"), "2");
}

TEST(Synth, NoAnomaliesReportsZeroPixels) {
  TempDir dir;
  KeyValues c = tiny_synth(dir / "a");
  c.set("anomaly_count_min", "0");
  c.set("anomaly_count_max", "0");
  std::ostringstream out;
  cli::cmd_synth(c, out);
  const KeyValues manifest = KeyValues::parse(read_text(dir / "a/manifest.txt"));
  EXPECT_EQ(manifest.get("train_anomaly_pixels"), "0");
  EXPECT_EQ(manifest.get("test_anomaly_pixels"), "0");
}

TEST(Config, OmittedKeysGiveReferenceDefaults) {
  const training::TrainConfig c = cli::train_config(KeyValues{});
  EXPECT_EQ(c.epochs, 100u);
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.lambda, 10.0);
  EXPECT_EQ(c.descriptor_length, 5u);
  EXPECT_EQ(c.scales.patch_size, 15u);
  EXPECT_EQ(c.scales.scales, (std::vector<double>{0.5, 1.0, 2.0}));
  EXPECT_EQ(c.warmup_epochs, 10u);
  EXPECT_EQ(c.radius_init, 3.0);
}

TEST(Config, FileThenOverridesAndUnknownKeys) {
  TempDir dir;
  io::write_file_atomic(dir / "run.cfg", std::string_view("epochs = 5\nlambda = 2\n"));
  const KeyValues merged = cli::load_run_config(dir / "run.cfg", {{"epochs", "7"}});
  EXPECT_EQ(merged.get("epochs"), "7");
  EXPECT_EQ(merged.get("lambda"), "2");
  EXPECT_THROW(cli::load_run_config(dir / "run.cfg", {{"epochz", "7"}}), ContractError);
  EXPECT_THROW(cli::load_run_config(dir / "missing.cfg", {}), IoError);
}

TEST(Train, AblationLogShowsDashForInactiveTerms) {
  TempDir dir;
  std::ostringstream out;
  cli::cmd_synth(tiny_synth(dir / "data"), out);
  KeyValues c = tiny_train(dir / "data/train", dir / "run");
  c.set("losses", "l1");
  cli::cmd_train(c, out);
  const std::string log = read_text(dir / "run" / cli::kTrainLogName);
  std::istringstream lines(log);
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_EQ(header, "# epoch l1 l2 l3 total R seconds");
  EXPECT_EQ(first.rfind("1 - - - - ", 0), 0u) << first;
  std::istringstream fields(second);
  std::string epoch, l1, l2, l3;
  fields >> epoch >> l1 >> l2 >> l3;
  EXPECT_EQ(epoch, "2");
  EXPECT_NE(l1, "-");
  EXPECT_EQ(l2, "-");
  EXPECT_EQ(l3, "-");
  EXPECT_TRUE(fs::exists(dir / "run" / cli::kCheckpointName));
}

TEST(Train, InterruptLeavesNoCheckpoint) {
  TempDir dir;
  std::ostringstream out;
  cli::cmd_synth(tiny_synth(dir / "data"), out);
  training::TrainCallbacks hooks;
  hooks.on_image = [](const training::ProgressEvent& e) {
    if (e.epoch == 1 && e.image == 1) throw cli::Interrupted();
  };
  EXPECT_THROW(cli::cmd_train(tiny_train(dir / "data/train", dir / "run"), out, hooks), cli::Interrupted);
  EXPECT_FALSE(fs::exists(dir / "run" / cli::kCheckpointName));
  EXPECT_FALSE(fs::exists(dir / "run" / cli::kTrainLogName));
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("asd-pipeline");
    std::ostringstream out;
    cli::cmd_synth(tiny_synth(path("data")), out);
    cli::cmd_train(tiny_train(path("data/train"), path("run")), out);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path path(const std::string& rel) { return *dir_ / rel; }
  static KeyValues score_config(const std::string& out) {
    return kv({{"checkpoint", (path("run") / cli::kCheckpointName).string()},
               {"dataset_dir", path("data/test").string()},
               {"output_dir", path(out).string()}});
  }
  static inline TempDir* dir_ = nullptr;
};

TEST_F(Pipeline, ScoreWritesOnePairPerImageDeterministically) {
  std::ostringstream out;
  cli::cmd_score(score_config("maps_a"), out);
  cli::cmd_score(score_config("maps_b"), out);
  for (const char* name : {"img_0000", "img_0001"}) {
    const fs::path a = path("maps_a") / (std::string(name) + ".asdm");
    EXPECT_TRUE(fs::exists(path("maps_a") / (std::string(name) + ".png")));
    EXPECT_EQ(testing::file_bytes(a), testing::file_bytes(path("maps_b") / (std::string(name) + ".asdm")));
  }
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(path("maps_a"))) ++files;
  EXPECT_EQ(files, 4u);
}

TEST_F(Pipeline, EvalOnGroundTruthMapsIsPerfect) {
  const fs::path maps = path("truth_maps");
  fs::create_directories(maps);
  for (const auto& e : data::list_dataset(path("data/test"))) {
    const LabelMap labels = data::load_label_map(e.label_path);
    ScorePlane degrees(labels.height(), labels.width());
    for (std::size_t p = 0; p < labels.size(); ++p) degrees[p] = labels[p] != 0 ? 1.0 : 0.0;
    scoring::write_sidecar(maps / (e.name + ".asdm"), degrees);
  }
  std::ostringstream out;
  cli::cmd_eval(kv({{"maps_dir", maps.string()},
                    {"dataset_dir", path("data/test").string()},
                    {"output_dir", path("eval_truth").string()}}),
                out);
  const KeyValues report = KeyValues::parse(read_text(path("eval_truth") / cli::kReportName));
  EXPECT_EQ(report.get("auc"), "1");
  EXPECT_EQ(report.get("miou"), "1");
}

TEST_F(Pipeline, EvalOnConstantMapsIsChance) {
  const fs::path maps = path("flat_maps");
  fs::create_directories(maps);
  for (const auto& e : data::list_dataset(path("data/test"))) {
    scoring::write_sidecar(maps / (e.name + ".asdm"), ScorePlane(8, 8, 2.0));
  }
  std::ostringstream out;
  cli::cmd_eval(kv({{"maps_dir", maps.string()},
                    {"dataset_dir", path("data/test").string()},
                    {"output_dir", path("eval_flat").string()}}),
                out);
  const KeyValues report = KeyValues::parse(read_text(path("eval_flat") / cli::kReportName));
  EXPECT_EQ(report.get("auc"), "0.5");
  for (const char* key : {"miou", "threshold", "pixels"}) EXPECT_TRUE(report.contains(key)) << key;
}

TEST_F(Pipeline, ExitCodes) {
  std::string err;
  EXPECT_EQ(run_cli({"score", "--checkpoint", (path("run") / cli::kCheckpointName).string(), "--dataset_dir",
                     path("data/test").string(), "--output_dir", path("maps_cli").string()}),
            0);
  EXPECT_EQ(run_cli({"train", "--bogus_key", "1"}, &err), 1);
  EXPECT_NE(err.find("bogus_key"), std::string::npos) << err;
  EXPECT_EQ(run_cli({"score", "--checkpoint", path("nope.asdc").string(), "--dataset_dir",
                     path("data/test").string(), "--output_dir", path("maps_x").string()}),
            2);
  EXPECT_EQ(run_cli({"train", "--dataset_dir", path("data/train").string(), "--output_dir", path("r2").string(),
                     "--epochs", "0"}),
            1);
  EXPECT_NE(run_cli({"frobnicate"}), 0);
}

}  // namespace
}  // namespace asd
