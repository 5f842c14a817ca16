#include "adebias/probe.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "adebias/rng.hpp"

namespace adebias::probe {

using nlohmann::json;

namespace {

std::vector<int> labels_of(const std::vector<data::Example>& examples) {
  std::vector<int> ys;
  ys.reserve(examples.size());
  for (const auto& ex : examples) ys.push_back(ex.label);
  return ys;
}

std::vector<nn::TokenSeq> hypotheses_of(const std::vector<data::Example>& examples) {
  std::vector<nn::TokenSeq> hs;
  hs.reserve(examples.size());
  for (const auto& ex : examples) hs.push_back(ex.hypothesis);
  return hs;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::uint64_t params_checksum(const nn::ParameterSet& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t bits) {
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& [name, tensor] : params.entries()) {
    for (char c : name) mix(static_cast<std::uint64_t>(c));
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double v = tensor[i];
      std::uint64_t bits;
      static_assert(sizeof(double) == sizeof(bits));
      std::memcpy(&bits, &v, sizeof(bits));
      mix(bits);
    }
  }
  return h;
}

// One probe: fresh head, SGD with early stopping on its dev accuracy.
double train_single_probe(const Tensor& x_train, const std::vector<int>& y_train,
                          const Tensor& x_dev, const std::vector<int>& y_dev,
                          const nn::HeadSpec& head, std::uint64_t seed,
                          const ProbeOptions& opt) {
  const std::size_t k = x_train.cols();
  nn::ParameterSet params;
  nn::init_head(params, head, k, "probe", seed);
  Rng shuffle_rng(Rng::derive(seed, "probe-shuffle"));
  std::vector<std::size_t> order(x_train.rows());
  std::iota(order.begin(), order.end(), 0);

  double best = -1.0;
  std::size_t bad = 0;
  for (std::size_t epoch = 0; epoch < opt.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      Tensor xb({end - start, k});
      std::vector<int> yb(end - start);
      for (std::size_t i = start; i < end; ++i) {
        for (std::size_t c = 0; c < k; ++c) xb.at(i - start, c) = x_train.at(order[i], c);
        yb[i - start] = y_train[order[i]];
      }
      Graph g;
      const nn::NodeMap leaves = nn::make_leaves(g, params, /*requires_grad=*/true);
      const NodeId logits = nn::head_logits(g, head, leaves, "probe", g.leaf(std::move(xb)));
      g.backward(g.mean(g.softmax_cross_entropy_rows(logits, yb)));
      for (auto& [name, tensor] : params.entries()) {
        const Tensor& grad = g.grad(leaves.at(name));
        for (std::size_t i = 0; i < tensor.size(); ++i) {
          tensor[i] -= opt.learning_rate * grad[i];
        }
      }
    }
    const double acc = accuracy(nn::predict_head(head, params, "probe", x_dev), y_dev);
    if (acc > best) {
      best = acc;
      bad = 0;
    } else if (++bad >= opt.patience) {
      break;
    }
  }
  return best;
}

}  // namespace

ProbeReport relearn_bias(const train::Checkpoint& checkpoint, const data::Corpus& corpus,
                         const ProbeOptions& options) {
  if (options.count == 0) throw std::invalid_argument("need at least one probe");
  const data::Corpus mapped = data::remap(corpus, checkpoint.vocab);
  if (mapped.train.empty() || mapped.dev.empty()) {
    throw std::invalid_argument("probing requires non-empty train and dev splits");
  }

  const nn::ModelSpec spec = checkpoint.model_spec();
  const std::uint64_t frozen = params_checksum(checkpoint.params);

  const Tensor x_train = nn::encode_all(spec, checkpoint.params, hypotheses_of(mapped.train));
  const Tensor x_dev = nn::encode_all(spec, checkpoint.params, hypotheses_of(mapped.dev));
  const std::vector<int> y_train = labels_of(mapped.train);
  const std::vector<int> y_dev = labels_of(mapped.dev);

  ProbeReport report;
  report.checkpoint_id = options.checkpoint_id;
  report.spec = options.head;
  report.seeds.resize(options.count);
  report.accuracies.assign(options.count, 0.0);
  for (std::size_t i = 0; i < options.count; ++i) {
    report.seeds[i] = Rng::derive(options.seed, "probe", i);
  }

  // Probes are independent; the frozen representations are shared read-only.
  std::size_t workers = options.workers ? options.workers
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, options.count);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next.fetch_add(1); i < options.count; i = next.fetch_add(1)) {
      report.accuracies[i] = train_single_probe(x_train, y_train, x_dev, y_dev,
                                                options.head, report.seeds[i], options);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  report.max_accuracy = *std::max_element(report.accuracies.begin(), report.accuracies.end());
  if (params_checksum(checkpoint.params) != frozen) {
    throw std::logic_error("frozen encoder parameters changed during probing");
  }
  return report;
}

ScenarioResult run_scenario(const ScenarioSpec& scenario, const data::Corpus& corpus,
                            const train::TrainConfig& config, const ProbeOptions& options) {
  train::TrainConfig cfg = config;
  cfg.adversary_head = scenario.train_adversary;
  const train::TrainResult trained = train::train(corpus, cfg);

  train::Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.vocab = corpus.vocab;
  ckpt.params = trained.params;

  ScenarioResult result;
  result.log = trained.log;
  ProbeOptions linear_opt = options;
  linear_opt.head = nn::HeadSpec{nn::HeadSpec::Kind::kLinear, 0};
  result.linear_probes = relearn_bias(ckpt, corpus, linear_opt);
  ProbeOptions mlp_opt = options;
  mlp_opt.head = nn::HeadSpec{nn::HeadSpec::Kind::kMlp3, scenario.probe_head.hidden};
  result.mlp_probes = relearn_bias(ckpt, corpus, mlp_opt);
  return result;
}

std::vector<data::Example> hard_subset(
    const std::vector<data::Example>& split,
    const std::function<int(const data::Example&)>& hypothesis_only) {
  std::vector<data::Example> hard;
  for (const data::Example& ex : split) {
    if (hypothesis_only(ex) != ex.label) hard.push_back(ex);
  }
  return hard;
}

int HypOnlyModel::predict(const data::Example& ex) const {
  Graph g;
  const nn::NodeMap leaves = nn::make_leaves(g, params, /*requires_grad=*/false);
  const NodeId e_h = nn::encode_batch(g, spec, leaves, {ex.hypothesis});
  const Tensor& logits = g.value(nn::head_logits(g, spec.task_head, leaves, "task", e_h));
  int best = 0;
  for (std::size_t c = 1; c < 3; ++c) {
    if (logits[c] > logits[best]) best = static_cast<int>(c);
  }
  return best;
}

std::function<int(const data::Example&)> HypOnlyModel::predictor() const {
  return [this](const data::Example& ex) { return predict(ex); };
}

HypOnlyModel train_hypothesis_only(const data::Corpus& corpus, const train::TrainConfig& config) {
  config.validate();
  HypOnlyModel model;
  model.spec = config.model_spec(corpus.vocab.size());
  model.spec.adversaries = 0;

  // Own encoder + head over e_h only; the head spec reads k inputs here.
  nn::ParameterSet params;
  const std::uint64_t seed = Rng::derive(config.seed, "hyp-only");
  auto add = [&](const std::string& name, std::size_t fi, std::size_t fo) {
    params.add(name, nn::xavier_tensor(fi, fo, Rng::derive(seed, name)));
  };
  add("encoder.embedding", model.spec.vocab, model.spec.embed_dim);
  if (!config.embedding_file.empty()) {
    params.get("encoder.embedding") =
        data::load_embeddings(config.embedding_file, corpus.vocab, config.seed);
  }
  if (model.spec.encoder == nn::EncoderKind::kMeanPool) {
    add("encoder.proj", model.spec.embed_dim, model.spec.repr_dim);
  } else {
    add("encoder.wx", model.spec.embed_dim, model.spec.repr_dim);
    add("encoder.wh", model.spec.repr_dim, model.spec.repr_dim);
    params.add("encoder.b", Tensor({model.spec.repr_dim}));
  }
  nn::init_head(params, model.spec.task_head, model.spec.repr_dim, "task", seed);

  Rng shuffle_rng(Rng::derive(seed, "shuffle"));
  std::vector<std::size_t> order(corpus.train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::vector<int> y_dev = labels_of(corpus.dev);
  const auto dev_hyps = hypotheses_of(corpus.dev);

  nn::ParameterSet best_params = params;
  double best = -1.0;
  std::size_t bad = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<nn::TokenSeq> hyps;
      std::vector<int> yb;
      for (std::size_t i = start; i < end; ++i) {
        hyps.push_back(corpus.train[order[i]].hypothesis);
        yb.push_back(corpus.train[order[i]].label);
      }
      Graph g;
      nn::NodeMap leaves;
      for (const auto& [name, tensor] : params.entries()) {
        const bool wants_grad = !(config.freeze_embeddings && name == "encoder.embedding");
        leaves.emplace(name, g.leaf(tensor, wants_grad));
      }
      const NodeId e_h = nn::encode_batch(g, model.spec, leaves, hyps);
      const NodeId logits = nn::head_logits(g, model.spec.task_head, leaves, "task", e_h);
      g.backward(g.mean(g.softmax_cross_entropy_rows(logits, yb)));
      for (auto& [name, tensor] : params.entries()) {
        if (!g.requires_grad(leaves.at(name))) continue;
        const Tensor& grad = g.grad(leaves.at(name));
        for (std::size_t i = 0; i < tensor.size(); ++i) {
          tensor[i] -= config.learning_rate * grad[i];
        }
      }
    }
    const Tensor x_dev = nn::encode_all(model.spec, params, dev_hyps);
    const double acc =
        accuracy(nn::predict_head(model.spec.task_head, params, "task", x_dev), y_dev);
    if (acc > best) {
      best = acc;
      best_params = params;
      bad = 0;
    } else if (++bad >= config.patience) {
      break;
    }
  }
  model.params = std::move(best_params);
  return model;
}

double evaluate(const train::Checkpoint& checkpoint, const data::Corpus& corpus,
                std::string_view split) {
  const data::Corpus mapped = data::remap(corpus, checkpoint.vocab);
  return evaluate_examples(checkpoint, mapped.split(split));
}

double evaluate_examples(const train::Checkpoint& checkpoint,
                         const std::vector<data::Example>& examples) {
  return train::task_accuracy(checkpoint.model_spec(), checkpoint.params, examples);
}

std::string report_to_json(const ProbeReport& report) {
  json j;
  j["checkpoint_id"] = report.checkpoint_id;
  j["spec"] = {{"kind", nn::head_kind_name(report.spec.kind)},
               {"hidden", report.spec.hidden}};
  j["seeds"] = report.seeds;
  j["accuracies"] = report.accuracies;
  j["max_accuracy"] = report.max_accuracy;
  return j.dump(2);
}

ProbeReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  ProbeReport r;
  r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
  r.spec.kind = nn::head_kind_from(j.at("spec").at("kind").get<std::string>());
  r.spec.hidden = j.at("spec").at("hidden").get<std::size_t>();
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.accuracies = j.at("accuracies").get<std::vector<double>>();
  r.max_accuracy = j.at("max_accuracy").get<double>();
  return r;
}

}  // namespace adebias::probe
