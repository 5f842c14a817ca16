#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / "adebias_cli_out.txt";
  const std::string cmd =
      std::string(ADEBIAS_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("adebias_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// tiny config shared by the subcommand tests
std::string write_tiny_config(const TempDir& dir, std::size_t dims = 8,
                              std::size_t adversaries = 1) {
  json cfg;
  cfg["data"]["synthetic"] = {{"content_vocab", 40}, {"leak_rate", 0.9}, {"seed", 5}};
  cfg["data"]["sizes"] = {{"train", 300}, {"dev", 100}, {"test", 100}};
  cfg["grid"] = {{"dims", {dims}}, {"adversaries", {adversaries}}, {"seeds", {1}}};
  cfg["train"] = {{"repr_dim", dims},
                  {"embed_dim", 8},
                  {"task_head", {{"kind", "mlp2"}, {"hidden", 8}}},
                  {"max_epochs", 2},
                  {"patience", 2},
                  {"spectator_probes", 2},
                  {"adversaries", adversaries}};
  cfg["probe"] = {{"count", 2}, {"max_epochs", 5}};
  cfg["out"] = (dir.path / "out").string();
  const fs::path path = dir.path / "config.json";
  std::ofstream(path) << cfg.dump(2);
  return path.string();
}

}  // namespace

TEST_CASE("gen-data writes the three JSONL splits") {
  TempDir dir("gen");
  const auto config = write_tiny_config(dir);
  const auto r = run_cli("gen-data --config " + config);
  CHECK(r.exit_code == 0);
  for (const char* split : {"train.jsonl", "dev.jsonl", "test.jsonl"}) {
    CHECK(fs::exists(dir.path / "out" / split));
  }
  std::ifstream in(dir.path / "out" / "train.jsonl");
  std::string line;
  REQUIRE(std::getline(in, line));
  const json obj = json::parse(line);
  CHECK(obj.contains("premise"));
  CHECK(obj.contains("hypothesis"));
  CHECK(obj.contains("label"));
}

TEST_CASE("train then probe a checkpoint") {
  TempDir dir("train");
  const auto config = write_tiny_config(dir);
  const auto r = run_cli("train --config " + config);
  CHECK(r.exit_code == 0);
  const fs::path ckpt = dir.path / "out" / "checkpoint.bin";
  REQUIRE(fs::exists(ckpt));
  REQUIRE(fs::exists(dir.path / "out" / "train_log.json"));
  const json log = json::parse(read_file(dir.path / "out" / "train_log.json"));
  CHECK(log.at("epochs").size() >= 1);
  CHECK(log.at("epochs")[0].at("spectator_dev_accuracy").size() == 2);

  const auto p = run_cli("probe --config " + config + " --checkpoint " + ckpt.string() +
                         " --probes 3");
  CHECK(p.exit_code == 0);
  const json report = json::parse(read_file(dir.path / "out" / "probe_report.json"));
  CHECK(report.at("accuracies").size() == 3);
  CHECK(report.at("max_accuracy").get<double>() >= 0.0);
  CHECK(report.at("checkpoint_id").get<std::string>().size() == 16);
}

TEST_CASE("stats subcommand emits the significance column set") {
  TempDir dir("stats");
  const fs::path out = dir.path / "result.json";
  const auto r = run_cli("stats --a 0.62,0.61,0.63,0.62,0.60 --b 0.55,0.57,0.56,0.58,0.54 "
                         "--bonferroni 4 --out " + out.string());
  CHECK(r.exit_code == 0);
  const json j = json::parse(read_file(out));
  CHECK(j.at("mann_whitney").contains("p"));
  CHECK(j.at("mann_whitney").contains("p_corrected"));
  CHECK(j.at("bootstrap").contains("p"));
  CHECK(j.at("bootstrap").at("correction_factor") == 4);
  CHECK(j.at("group_a").contains("mean"));
  CHECK(j.at("group_a").contains("median"));
  CHECK(j.at("group_b").contains("mean"));
  CHECK(j.at("group_b").contains("median"));
}

TEST_CASE("grid runs one cell, is resumable, and reports") {
  TempDir dir("grid");
  const auto config = write_tiny_config(dir);
  const auto first = run_cli("grid --config " + config);
  CHECK(first.exit_code == 0);

  const fs::path out = dir.path / "out";
  std::size_t cell_files = 0, ckpt_files = 0, probe_files = 0;
  for (const auto& e : fs::directory_iterator(out / "cells")) cell_files += e.is_regular_file();
  for (const auto& e : fs::directory_iterator(out / "checkpoints")) {
    ckpt_files += e.is_regular_file();
  }
  for (const auto& e : fs::directory_iterator(out / "probes")) {
    probe_files += e.is_regular_file();
  }
  CHECK(cell_files == 1);
  CHECK(ckpt_files == 1);
  CHECK(probe_files == 1);
  CHECK(fs::exists(out / "summary.json"));

  SUBCASE("a second run restores the completed cell without retraining") {
    const auto second = run_cli("grid --config " + config);
    CHECK(second.exit_code == 0);
    CHECK(second.output.find("1 restored") != std::string::npos);
  }
  SUBCASE("report emits the CSV tables with provenance") {
    const auto rep = run_cli("report --dir " + out.string());
    CHECK(rep.exit_code == 0);
    const std::string bias = read_file(out / "reports" / "bias_relearn.csv");
    CHECK(bias.find("dim,n1") == 0);  // header row, single-n grid
    CHECK(bias.find("\n8,") != std::string::npos);
    const std::string delta = read_file(out / "reports" / "accuracy_delta.csv");
    CHECK(delta.find("corpus,baseline") == 0);
    CHECK(delta.find("Average") != std::string::npos);
    CHECK(fs::exists(out / "reports" / "significance.csv"));
    const json summary = json::parse(read_file(out / "reports" / "summary.json"));
    CHECK(summary.at("cells").size() == 1);
    CHECK(summary.contains("provenance"));
  }
}

TEST_CASE("config errors exit with code 2") {
  TempDir dir("badcfg");
  const fs::path bad = dir.path / "bad.json";
  std::ofstream(bad) << "{ not json";
  CHECK(run_cli("grid --config " + bad.string()).exit_code == 2);
  CHECK(run_cli("train --preset nosuch").exit_code == 2);
  CHECK(run_cli("nosuch-subcommand").exit_code == 2);
}

TEST_CASE("a failing cell exits with code 1 and records the error") {
  TempDir dir("failcell");
  json cfg = json::parse(read_file(write_tiny_config(dir)));
  cfg["train"]["learning_rate"] = 1e160;  // diverges on the first step
  const fs::path path = dir.path / "config.json";
  std::ofstream(path) << cfg.dump(2);
  const auto r = run_cli("grid --config " + path.string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("failed") != std::string::npos);
}
