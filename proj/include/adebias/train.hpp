#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adebias/data.hpp"
#include "adebias/graph.hpp"
#include "adebias/nn.hpp"

namespace adebias::train {

struct TrainConfig {
  double lambda = 0.5;              // adversarial trade-off in [0,1]
  std::size_t adversaries = 0;      // n; 0 drops the adversarial term
  nn::HeadSpec adversary_head{};    // linear by default
  std::size_t repr_dim = 64;        // k
  std::size_t embed_dim = 50;       // d
  nn::EncoderKind encoder = nn::EncoderKind::kMeanPool;
  nn::HeadSpec task_head{nn::HeadSpec::Kind::kMlp2, 512};
  double learning_rate = 0.1;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  std::size_t spectator_probes = 20;  // monitoring only, never touch the encoder

  // Embedding table handling. The default trains it from scratch; frozen
  // keeps it fixed during training, matching the pretrained-vector setup.
  // embedding_file optionally substitutes pretrained vectors (text format).
  bool freeze_embeddings = false;
  std::string embedding_file;

  void validate() const;
  nn::ModelSpec model_spec(std::size_t vocab) const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_task_accuracy = 0.0;
  std::vector<double> adversary_dev_accuracy;
  std::vector<double> spectator_dev_accuracy;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
};

struct TrainResult {
  nn::ParameterSet params;  // best-dev snapshot
  TrainLog log;
};

struct Batch {
  std::vector<nn::TokenSeq> premises;
  std::vector<nn::TokenSeq> hypotheses;
  std::vector<int> labels;
};

// Nodes of one joint loss graph.
struct LossNodes {
  NodeId total;                         // (1-lambda) task + (lambda/n) sum adversaries
  NodeId task_loss;                     // mean task cross-entropy
  std::vector<NodeId> adversary_losses; // mean cross-entropy per adversary
  NodeId e_h;                           // hypothesis representations [B x k]
};

// Builds the per-batch minimax objective. Every adversary branch reads the
// hypothesis representation through grad_reverse with scale 1, so one descent
// step trains the adversaries on their own loss while the encoder receives
// the negated (lambda/n)-scaled adversary gradient. With lambda == 0 the
// adversary branches are omitted entirely. n == 0 with lambda > 0 is
// ill-posed and throws.
LossNodes minimax_loss(Graph& g, const nn::ModelSpec& spec, const nn::NodeMap& leaves,
                       const Batch& batch, double lambda, std::size_t n);

// Joint gradient-descent-ascent training with early stopping on dev task
// accuracy. Deterministic given config.seed. Spectator probes train on
// detached representations and cannot influence the trajectory.
TrainResult train(const data::Corpus& corpus, const TrainConfig& config);

// --- checkpoint file: magic "AEDB", u16 version, u32 JSON metadata length,
// JSON metadata (config, vocab, tensor directory), little-endian f32 data ---

struct Checkpoint {
  TrainConfig config;
  data::Vocabulary vocab;
  nn::ParameterSet params;

  nn::ModelSpec model_spec() const { return config.model_spec(vocab.size()); }
};

void save_checkpoint(const nn::ParameterSet& params, const TrainConfig& config,
                     const data::Vocabulary& vocab, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a hash of a file's bytes, hex-encoded; used as checkpoint/cell ids.
std::string file_hash(const std::string& path);

// Task accuracy of a parameter set over examples (forward only).
double task_accuracy(const nn::ModelSpec& spec, const nn::ParameterSet& params,
                     const std::vector<data::Example>& examples,
                     std::size_t batch_size = 256);

}  // namespace adebias::train
