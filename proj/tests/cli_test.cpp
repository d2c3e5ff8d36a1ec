#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "dgbf/harness.hpp"
#include "dgbf/modelio.hpp"
#include "dgbf/tabular.hpp"

namespace fs = std::filesystem;

namespace dgbf {
namespace {

struct Result {
  int exit_code;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dgbf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  Result run(const std::string& args) {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = std::string("\"") + DGBF_CLI_PATH + "\" " + args + " >\"" +
                            out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(out), read_file(err)};
  }

  fs::path write(const std::string& name, const std::string& text) {
    const auto path = dir_ / name;
    std::ofstream(path, std::ios::binary) << text;
    return path;
  }

  fs::path small_csv() {
    std::string text = "a,b,color,y\n";
    const auto d = harness::synthetic_dataset(120, 2, 3);
    for (Index i = 0; i < d.n_rows(); ++i) {
      text += std::to_string(d.features(i, 0)) + "," + std::to_string(d.features(i, 1)) + "," +
              (i % 3 == 0 ? "red" : "blue") + "," + std::to_string(d.target[i]) + "\n";
    }
    return write("small.csv", text);
  }

  fs::path dir_;
};

const std::string concrete = std::string(DGBF_DATASET_DIR) + "/concrete.csv";

TEST_F(Cli, TrainWritesModel) {
  const auto model = dir_ / "m.model";
  const auto r = run("train --data " + concrete +
                     " --target compressive_strength --layers 5 --trees 20 --seed 7 --out " +
                     model.string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("train_rmse"), std::string::npos);
  const auto loaded = modelio::load(model);
  EXPECT_EQ(loaded.config.layers, 5u);
  EXPECT_EQ(loaded.config.trees, 20u);
  EXPECT_EQ(loaded.config.seed, 7u);
  EXPECT_EQ(loaded.schema.target, "compressive_strength");
}

TEST_F(Cli, MissingTargetFailsWithUsage) {
  const auto r = run("train --data " + concrete + " --out " + (dir_ / "m").string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.err.find("--target"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "m"));
}

TEST_F(Cli, BadInputGivesOneLineDiagnostic) {
  const auto r = run("train --data " + (dir_ / "missing.csv").string() + " --target y --out " +
                     (dir_ / "m").string());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(Cli, GbdtPresetMapsTreesToStages) {
  const auto model = dir_ / "g.model";
  const auto r = run("train --data " + small_csv().string() +
                     " --target y --preset gbdt --trees 100 --out " + model.string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto loaded = modelio::load(model);
  EXPECT_EQ(loaded.config, preset_gbdt(100));
}

TEST_F(Cli, PredictMatchesLibrary) {
  const auto csv = small_csv();
  const auto model = dir_ / "m.model";
  ASSERT_EQ(run("train --data " + csv.string() + " --target y --trees 4 --seed 2 --out " +
                model.string())
                .exit_code,
            0);
  const auto out = dir_ / "pred.csv";
  const auto r = run("predict --model " + model.string() + " --data " + csv.string() + " --out " +
                     out.string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto table = tabular::read_csv(out);
  ASSERT_EQ(table.columns.size(), 1u);
  EXPECT_EQ(table.columns[0].name, "prediction");
  const auto loaded = modelio::load(model);
  const auto expected = predict(loaded, tabular::apply_schema(loaded.schema, tabular::read_csv(csv)).features);
  ASSERT_EQ(table.n_rows, expected.size());
  for (Index i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(std::stod(table.columns[0].cells[i]), expected[i]);
  }
}

TEST_F(Cli, PredictErrorsAndEdgeCases) {
  const auto csv = small_csv();
  const auto model = dir_ / "m.model";
  ASSERT_EQ(run("train --data " + csv.string() + " --target y --trees 4 --out " + model.string())
                .exit_code,
            0);
  const auto out = dir_ / "p.csv";
  const auto missing = write("missing.csv", "a,color\n1,red\n");
  auto r = run("predict --model " + model.string() + " --data " + missing.string() + " --out " +
               out.string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.err.find("'b'"), std::string::npos) << r.err;

  const auto empty = write("empty.csv", "");
  r = run("predict --model " + model.string() + " --data " + empty.string() + " --out " +
          out.string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(read_file(out), "prediction\n");

  const auto header_only = write("header.csv", "a,b,color\n");
  r = run("predict --model " + model.string() + " --data " + header_only.string() + " --out " +
          out.string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(read_file(out), "prediction\n");

  const auto unseen = write("unseen.csv", "a,b,color\n0.5,0.5,green\n");
  r = run("predict --model " + model.string() + " --data " + unseen.string() + " --out " +
          out.string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST_F(Cli, BenchWritesReportAndSvg) {
  const auto csv = small_csv();
  const auto r = run("bench --data " + csv.string() +
                     " --target y --sims 2 --seed 1 --layers 2 --trees 4 --out " +
                     (dir_ / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "out" / "small.report.json"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "small.svg"));
  const auto doc = nlohmann::json::parse(read_file(dir_ / "out" / "small.report.json"));
  EXPECT_EQ(doc["spec"]["n_simulations"], 2);
  EXPECT_EQ(doc["spec"]["master_seed"], 1);
}

TEST_F(Cli, AblateReportsReducedFeatureCount) {
  const auto csv = small_csv();
  const auto r = run("ablate --data " + csv.string() + " --sims 2 --k 1 --layers 2 --trees 4 --out " +
                     (dir_ / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto doc = nlohmann::json::parse(read_file(dir_ / "out" / "small.ablation.report.json"));
  EXPECT_EQ(doc["spec"]["ablation_k"], 1);
}

TEST_F(Cli, TimingWritesReport) {
  const auto r = run("timing --sizes 200,400 --repeats 1 --out " + (dir_ / "t").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto doc = nlohmann::json::parse(read_file(dir_ / "t" / "timing.report.json"));
  EXPECT_EQ(doc["spec"]["sizes"].size(), 2u);
  EXPECT_EQ(doc["timings"]["series"].size(), 3u);
  EXPECT_NE(run("timing --sizes 200,,400").exit_code, 0);
}

TEST_F(Cli, ReproducePrintsOneRowPerDataset) {
  fs::create_directories(dir_ / "data");
  fs::copy_file(small_csv(), dir_ / "data" / "one.csv");
  fs::copy_file(dir_ / "small.csv", dir_ / "data" / "two.csv");
  const auto r = run("reproduce --data-dir " + (dir_ / "data").string() +
                     " --sims 2 --layers 2 --trees 4 --out " + (dir_ / "out").string());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], harness::summary_table_header());
  EXPECT_EQ(rows[1].rfind("one\t", 0), 0u);
  EXPECT_EQ(rows[2].rfind("two\t", 0), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "two.svg"));
}

}  // namespace
}  // namespace dgbf
