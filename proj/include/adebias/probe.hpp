#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adebias/data.hpp"
#include "adebias/nn.hpp"
#include "adebias/train.hpp"

namespace adebias::probe {

// Result of the freeze-and-relearn protocol: m reinitialized probes trained
// on the frozen encoder's hypothesis representations; the max dev accuracy is
// the residual bias.
struct ProbeReport {
  std::string checkpoint_id;
  nn::HeadSpec spec;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;  // dev accuracy per probe
  double max_accuracy = 0.0;
};

struct ProbeOptions {
  nn::HeadSpec head{};       // linear by default
  std::size_t count = 20;    // m
  std::uint64_t seed = 1;    // per-probe seeds derived from this
  double learning_rate = 0.1;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::size_t workers = 0;   // 0 = hardware concurrency
  std::string checkpoint_id; // recorded in the report
};

// Trains `count` independent probes on (e_h, y) pairs from the corpus train
// split, scoring each on dev. The encoder is never updated (asserted).
// Probes run concurrently; the result does not depend on scheduling.
ProbeReport relearn_bias(const train::Checkpoint& checkpoint, const data::Corpus& corpus,
                         const ProbeOptions& options);

// Adversary kind used during training x probe kind used afterwards.
struct ScenarioSpec {
  nn::HeadSpec train_adversary;
  nn::HeadSpec probe_head;
};

// Trains under the scenario's adversary kind, then probes the frozen encoder
// with BOTH a linear and an MLP3 probe, enabling every pairwise comparison.
struct ScenarioResult {
  train::TrainLog log;
  ProbeReport linear_probes;
  ProbeReport mlp_probes;
};

ScenarioResult run_scenario(const ScenarioSpec& scenario, const data::Corpus& corpus,
                            const train::TrainConfig& config, const ProbeOptions& options);

// Examples of a split that a hypothesis-only predictor misclassifies
// (the "hard subset" construction). An empty result is allowed.
std::vector<data::Example> hard_subset(
    const std::vector<data::Example>& split,
    const std::function<int(const data::Example&)>& hypothesis_only);

// A hypothesis-only classifier with its own encoder, for building hard subsets.
struct HypOnlyModel {
  nn::ModelSpec spec;
  nn::ParameterSet params;

  int predict(const data::Example& ex) const;
  std::function<int(const data::Example&)> predictor() const;
};

HypOnlyModel train_hypothesis_only(const data::Corpus& corpus, const train::TrainConfig& config);

// Full premise+hypothesis task accuracy of a checkpoint on a corpus split.
double evaluate(const train::Checkpoint& checkpoint, const data::Corpus& corpus,
                std::string_view split);
double evaluate_examples(const train::Checkpoint& checkpoint,
                         const std::vector<data::Example>& examples);

std::string report_to_json(const ProbeReport& report);
ProbeReport report_from_json(const std::string& text);

}  // namespace adebias::probe
