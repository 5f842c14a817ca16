#include "adebias/train.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "adebias/rng.hpp"
#include "adebias/serialize.hpp"

namespace adebias::train {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("lambda must lie in [0,1]");
  }
  if (repr_dim == 0 || embed_dim == 0) {
    throw std::invalid_argument("repr_dim and embed_dim must be positive");
  }
  if (batch_size == 0 || max_epochs == 0 || patience == 0) {
    throw std::invalid_argument("batch_size, max_epochs and patience must be positive");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

nn::ModelSpec TrainConfig::model_spec(std::size_t vocab) const {
  nn::ModelSpec spec;
  spec.vocab = vocab;
  spec.embed_dim = embed_dim;
  spec.repr_dim = repr_dim;
  spec.encoder = encoder;
  spec.task_head = task_head;
  spec.adversary_head = adversary_head;
  spec.adversaries = adversaries;
  return spec;
}

LossNodes minimax_loss(Graph& g, const nn::ModelSpec& spec, const nn::NodeMap& leaves,
                       const Batch& batch, double lambda, std::size_t n) {
  if (n == 0 && lambda > 0.0) {
    throw std::invalid_argument("minimax objective is ill-posed: lambda > 0 with no adversaries");
  }
  if (batch.premises.size() != batch.hypotheses.size() ||
      batch.premises.size() != batch.labels.size() || batch.labels.empty()) {
    throw std::invalid_argument("batch premise/hypothesis/label counts must match and be non-empty");
  }

  LossNodes nodes;
  nodes.e_h = encode_batch(g, spec, leaves, batch.hypotheses);
  const NodeId e_p = encode_batch(g, spec, leaves, batch.premises);
  const NodeId features = nn::combine(g, nodes.e_h, e_p);
  const NodeId task_logits = nn::head_logits(g, spec.task_head, leaves, "task", features);
  nodes.task_loss = g.mean(g.softmax_cross_entropy_rows(task_logits, batch.labels));
  nodes.total = g.scale(nodes.task_loss, 1.0 - lambda);

  if (n > 0 && lambda > 0.0) {
    const NodeId reversed = g.grad_reverse(nodes.e_h, ReversalCoefficient(1.0));
    for (std::size_t i = 0; i < n; ++i) {
      const NodeId logits = nn::head_logits(g, spec.adversary_head, leaves,
                                            "adv" + std::to_string(i), reversed);
      const NodeId loss_i = g.mean(g.softmax_cross_entropy_rows(logits, batch.labels));
      nodes.adversary_losses.push_back(loss_i);
      nodes.total = g.add(nodes.total, g.scale(loss_i, lambda / static_cast<double>(n)));
    }
  }
  return nodes;
}

namespace {

void sgd_step(nn::ParameterSet& params, const Graph& g, const nn::NodeMap& leaves,
              double lr) {
  for (auto& [name, tensor] : params.entries()) {
    const NodeId leaf = leaves.at(name);
    if (!g.requires_grad(leaf)) continue;  // frozen
    const Tensor& grad = g.grad(leaf);
    for (std::size_t i = 0; i < tensor.size(); ++i) tensor[i] -= lr * grad[i];
  }
}

nn::NodeMap training_leaves(Graph& g, const nn::ParameterSet& params, bool freeze_embedding) {
  nn::NodeMap leaves;
  for (const auto& [name, tensor] : params.entries()) {
    const bool wants_grad = !(freeze_embedding && name == "encoder.embedding");
    leaves.emplace(name, g.leaf(tensor, wants_grad));
  }
  return leaves;
}

Batch slice_batch(const std::vector<data::Example>& examples,
                  const std::vector<std::size_t>& order, std::size_t start, std::size_t end) {
  Batch b;
  b.premises.reserve(end - start);
  for (std::size_t i = start; i < end; ++i) {
    const data::Example& ex = examples[order[i]];
    b.premises.push_back(ex.premise);
    b.hypotheses.push_back(ex.hypothesis);
    b.labels.push_back(ex.label);
  }
  return b;
}

std::vector<int> labels_of(const std::vector<data::Example>& examples) {
  std::vector<int> ys;
  ys.reserve(examples.size());
  for (const auto& ex : examples) ys.push_back(ex.label);
  return ys;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// One SGD pass of a standalone head on fixed representations.
void train_head_on(const Tensor& x, const std::vector<int>& labels,
                   const std::vector<std::size_t>& order, nn::ParameterSet& head_params,
                   const nn::HeadSpec& head, std::string_view prefix, double lr,
                   std::size_t batch_size) {
  const std::size_t k = x.cols();
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Tensor xb({end - start, k});
    std::vector<int> yb(end - start);
    for (std::size_t i = start; i < end; ++i) {
      for (std::size_t c = 0; c < k; ++c) xb.at(i - start, c) = x.at(order[i], c);
      yb[i - start] = labels[order[i]];
    }
    Graph g;
    const nn::NodeMap leaves = nn::make_leaves(g, head_params, /*requires_grad=*/true);
    const NodeId logits = nn::head_logits(g, head, leaves, prefix, g.leaf(std::move(xb)));
    g.backward(g.mean(g.softmax_cross_entropy_rows(logits, yb)));
    sgd_step(head_params, g, leaves, lr);
  }
}

}  // namespace

double task_accuracy(const nn::ModelSpec& spec, const nn::ParameterSet& params,
                     const std::vector<data::Example>& examples, std::size_t batch_size) {
  if (examples.empty()) throw std::invalid_argument("task accuracy of an empty split");
  std::size_t hits = 0;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<nn::TokenSeq> hyps, prems;
    for (std::size_t i = start; i < end; ++i) {
      prems.push_back(examples[i].premise);
      hyps.push_back(examples[i].hypothesis);
    }
    Graph g;
    const nn::NodeMap leaves = nn::make_leaves(g, params, /*requires_grad=*/false);
    const NodeId e_h = encode_batch(g, spec, leaves, hyps);
    const NodeId e_p = encode_batch(g, spec, leaves, prems);
    const NodeId logits =
        nn::head_logits(g, spec.task_head, leaves, "task", nn::combine(g, e_h, e_p));
    const Tensor& lv = g.value(logits);
    for (std::size_t r = 0; r < end - start; ++r) {
      int best = 0;
      for (std::size_t c = 1; c < 3; ++c) {
        if (lv[r * 3 + c] > lv[r * 3 + best]) best = static_cast<int>(c);
      }
      hits += best == examples[start + r].label;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

TrainResult train(const data::Corpus& corpus, const TrainConfig& config) {
  config.validate();
  if (corpus.train.empty() || corpus.dev.empty()) {
    throw std::invalid_argument("training requires non-empty train and dev splits");
  }
  const nn::ModelSpec spec = config.model_spec(corpus.vocab.size());
  // n == 0 drops the adversarial term regardless of the configured lambda.
  const double lambda = config.adversaries == 0 ? 0.0 : config.lambda;

  nn::ParameterSet params = nn::init_params(spec, config.seed);
  if (!config.embedding_file.empty()) {
    Tensor table = data::load_embeddings(config.embedding_file, corpus.vocab, config.seed);
    if (table.cols() != config.embed_dim) {
      throw std::invalid_argument("embedding file dimension " + std::to_string(table.cols()) +
                                  " does not match configured embed_dim " +
                                  std::to_string(config.embed_dim));
    }
    params.get("encoder.embedding") = std::move(table);
  }

  // Spectator probes: linear heads on detached representations, independent
  // seeds, monitoring only.
  std::vector<nn::ParameterSet> spectators(config.spectator_probes);
  const nn::HeadSpec spectator_head{nn::HeadSpec::Kind::kLinear, 0};
  for (std::size_t i = 0; i < spectators.size(); ++i) {
    nn::init_head(spectators[i], spectator_head, spec.repr_dim, "spect",
                  Rng::derive(config.seed, "spectator", i));
  }

  Rng shuffle_rng(Rng::derive(config.seed, "shuffle"));
  std::vector<std::size_t> order(corpus.train.size());
  std::iota(order.begin(), order.end(), 0);

  const std::vector<int> dev_labels = labels_of(corpus.dev);
  std::vector<nn::TokenSeq> dev_hyps;
  for (const auto& ex : corpus.dev) dev_hyps.push_back(ex.hypothesis);

  TrainResult result;
  TrainLog& log = result.log;
  double best_acc = -1.0;
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const Batch batch = slice_batch(corpus.train, order, start, end);
      Graph g;
      const nn::NodeMap leaves = training_leaves(g, params, config.freeze_embeddings);
      LossNodes nodes;
      try {
        nodes = minimax_loss(g, spec, leaves, batch, lambda, config.adversaries);
        g.backward(nodes.total);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                 ": " + e.what());
      }
      loss_sum += g.value(nodes.total)[0];
      ++batches;
      sgd_step(params, g, leaves, config.learning_rate);

      if (!spectators.empty()) {
        // Detached copy: spectators can never reach the encoder.
        const Tensor e_h = g.value(nodes.e_h);
        std::vector<std::size_t> all(e_h.rows());
        std::iota(all.begin(), all.end(), 0);
        for (auto& sp : spectators) {
          train_head_on(e_h, batch.labels, all, sp, spectator_head, "spect",
                        config.learning_rate, e_h.rows());
        }
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(batches);
    stats.dev_task_accuracy = task_accuracy(spec, params, corpus.dev, 256);
    const Tensor dev_e_h = nn::encode_all(spec, params, dev_hyps, 256);
    for (std::size_t i = 0; i < config.adversaries; ++i) {
      stats.adversary_dev_accuracy.push_back(accuracy(
          nn::predict_head(config.adversary_head, params, "adv" + std::to_string(i), dev_e_h),
          dev_labels));
    }
    for (const auto& sp : spectators) {
      stats.spectator_dev_accuracy.push_back(
          accuracy(nn::predict_head(spectator_head, sp, "spect", dev_e_h), dev_labels));
    }
    log.epochs.push_back(stats);

    if (stats.dev_task_accuracy > best_acc) {
      best_acc = stats.dev_task_accuracy;
      log.best_epoch = epoch;
      log.best_dev_accuracy = best_acc;
      result.params = params;  // snapshot
      bad_epochs = 0;
    } else if (++bad_epochs >= config.patience) {
      break;
    }
  }
  return result;
}

// --- checkpoint serialization ---

namespace {

constexpr char kMagic[4] = {'A', 'E', 'D', 'B'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

void save_checkpoint(const nn::ParameterSet& params, const TrainConfig& config,
                     const data::Vocabulary& vocab, const std::string& path) {
  json meta;
  meta["config"] = config;
  meta["vocab"] = vocab.tokens();
  json dir = json::array();
  std::size_t offset = 0;  // in f32 units from the start of the data section
  for (const auto& [name, tensor] : params.entries()) {
    dir.push_back({{"name", name}, {"shape", tensor.shape()}, {"offset", offset}});
    offset += tensor.size();
  }
  meta["tensors"] = dir;
  const std::string meta_str = meta.dump();

  std::string header;
  header.append(kMagic, 4);
  put_u16(header, kVersion);
  put_u32(header, static_cast<std::uint32_t>(meta_str.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  std::vector<float> buf;
  for (const auto& [name, tensor] : params.entries()) {
    buf.resize(tensor.size());
    for (std::size_t i = 0; i < tensor.size(); ++i) buf[i] = static_cast<float>(tensor[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error(path + " is not a checkpoint file (bad magic)");
  }
  unsigned char hdr[6];
  if (!in.read(reinterpret_cast<char*>(hdr), 6)) {
    throw std::runtime_error(path + ": truncated checkpoint header");
  }
  const std::uint16_t version = static_cast<std::uint16_t>(hdr[0] | (hdr[1] << 8));
  if (version != kVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  std::uint32_t meta_len = 0;
  for (int i = 0; i < 4; ++i) meta_len |= static_cast<std::uint32_t>(hdr[2 + i]) << (8 * i);
  std::string meta_str(meta_len, '\0');
  if (!in.read(meta_str.data(), meta_len)) {
    throw std::runtime_error(path + ": truncated checkpoint metadata");
  }
  json meta;
  try {
    meta = json::parse(meta_str);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": corrupt checkpoint metadata: " + e.what());
  }

  Checkpoint ckpt;
  meta.at("config").get_to(ckpt.config);
  for (const auto& tok : meta.at("vocab")) ckpt.vocab.add(tok.get<std::string>());

  for (const auto& entry : meta.at("tensors")) {
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::size_t count = 1;
    for (std::size_t d : shape) count *= d;
    std::vector<float> buf(count);
    if (!in.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(count * sizeof(float)))) {
      throw std::runtime_error(path + ": truncated checkpoint data");
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = static_cast<double>(buf[i]);
    ckpt.params.add(entry.at("name").get<std::string>(), Tensor(shape, std::move(values)));
  }
  return ckpt;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

}  // namespace adebias::train
