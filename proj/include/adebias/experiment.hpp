#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adebias/data.hpp"
#include "adebias/probe.hpp"
#include "adebias/train.hpp"

namespace adebias::experiment {

// Config-driven grid over representation dimension x adversary count x seed.
struct ExperimentConfig {
  data::SyntheticSpec synthetic;
  data::SplitSizes sizes;
  bool use_jsonl = false;
  std::string jsonl_train, jsonl_dev, jsonl_test;

  std::vector<std::size_t> dims{32, 64, 128};
  std::vector<std::size_t> adversary_counts{0, 1, 5, 10};
  std::vector<std::uint64_t> seeds{1, 2, 3};

  train::TrainConfig train_template;
  probe::ProbeOptions probe_options;

  std::size_t workers = 0;  // 0 = logical cores
  std::string out_dir = "out";

  void validate() const;
};

ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig desk_preset();
ExperimentConfig full_preset();  // the {256,512,1024,2048} x {1,5,10,20} grid
std::string config_to_json_text(const ExperimentConfig& config);

struct CellResult {
  std::string id;  // content hash of the cell's configuration
  std::size_t dim = 0;
  std::size_t adversaries = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;

  std::string checkpoint_path;
  std::string checkpoint_id;
  double best_dev_accuracy = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double final_adversary_dev_max = 0.0;    // in-training adversaries, last epoch
  double final_spectator_dev_max = 0.0;    // spectator probes, last epoch
  probe::ProbeReport probes;
  double test_accuracy = 0.0;
  double hard_accuracy = 0.0;              // on the hard subset (0 when empty)
  std::size_t hard_size = 0;
};

struct GridResult {
  std::vector<CellResult> cells;  // one per (dim, n, seed); order follows config
  double hyp_only_test_accuracy = 0.0;
  std::size_t hard_size = 0;
  std::size_t skipped = 0;  // cells restored from a previous run
  bool all_ok() const;
};

// Runs every cell (train -> checkpoint -> relearn -> evaluate full/hard).
// Completed cells found on disk with a matching id are skipped. Cells run in
// a bounded worker pool; one failure does not stop the others.
GridResult run_grid(const ExperimentConfig& config);

// Emits CSV tables and a JSON summary under <dir>/reports:
//   bias_relearn.csv   rows = dim, columns = adversary count (mean of max)
//   significance.csv   per-dim n=1 vs n=5 comparison (MW/bootstrap, means)
//   accuracy_delta.csv per-corpus task accuracy vs the n=0 baseline
// Every aggregate in summary.json lists the contributing cell ids.
void write_reports(const std::string& out_dir);

std::string cell_to_json_text(const CellResult& cell);
CellResult cell_from_json_text(const std::string& text);

}  // namespace adebias::experiment
