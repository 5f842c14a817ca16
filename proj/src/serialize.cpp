#include "adebias/serialize.hpp"

namespace adebias::nn {

void to_json(nlohmann::json& j, const HeadSpec& h) {
  j = nlohmann::json{{"kind", head_kind_name(h.kind)}, {"hidden", h.hidden}};
}

void from_json(const nlohmann::json& j, HeadSpec& h) {
  h.kind = head_kind_from(j.at("kind").get<std::string>());
  h.hidden = j.value("hidden", std::size_t{0});
}

}  // namespace adebias::nn

namespace adebias::train {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"lambda", c.lambda},
      {"adversaries", c.adversaries},
      {"adversary_head", c.adversary_head},
      {"repr_dim", c.repr_dim},
      {"embed_dim", c.embed_dim},
      {"encoder", nn::encoder_kind_name(c.encoder)},
      {"task_head", c.task_head},
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"max_epochs", c.max_epochs},
      {"patience", c.patience},
      {"seed", c.seed},
      {"spectator_probes", c.spectator_probes},
      {"freeze_embeddings", c.freeze_embeddings},
      {"embedding_file", c.embedding_file},
  };
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig defaults;
  c.lambda = j.value("lambda", defaults.lambda);
  c.adversaries = j.value("adversaries", defaults.adversaries);
  if (j.contains("adversary_head")) j.at("adversary_head").get_to(c.adversary_head);
  c.repr_dim = j.value("repr_dim", defaults.repr_dim);
  c.embed_dim = j.value("embed_dim", defaults.embed_dim);
  if (j.contains("encoder")) {
    c.encoder = nn::encoder_kind_from(j.at("encoder").get<std::string>());
  }
  if (j.contains("task_head")) j.at("task_head").get_to(c.task_head);
  c.learning_rate = j.value("learning_rate", defaults.learning_rate);
  c.batch_size = j.value("batch_size", defaults.batch_size);
  c.max_epochs = j.value("max_epochs", defaults.max_epochs);
  c.patience = j.value("patience", defaults.patience);
  c.seed = j.value("seed", defaults.seed);
  c.spectator_probes = j.value("spectator_probes", defaults.spectator_probes);
  c.freeze_embeddings = j.value("freeze_embeddings", defaults.freeze_embeddings);
  c.embedding_file = j.value("embedding_file", defaults.embedding_file);
}

}  // namespace adebias::train

namespace adebias::probe {

void to_json(nlohmann::json& j, const ProbeOptions& o) {
  j = nlohmann::json{
      {"head", o.head},           {"count", o.count},
      {"seed", o.seed},           {"learning_rate", o.learning_rate},
      {"batch_size", o.batch_size}, {"max_epochs", o.max_epochs},
      {"patience", o.patience},
  };
}

void from_json(const nlohmann::json& j, ProbeOptions& o) {
  const ProbeOptions defaults;
  if (j.contains("head")) j.at("head").get_to(o.head);
  o.count = j.value("count", defaults.count);
  o.seed = j.value("seed", defaults.seed);
  o.learning_rate = j.value("learning_rate", defaults.learning_rate);
  o.batch_size = j.value("batch_size", defaults.batch_size);
  o.max_epochs = j.value("max_epochs", defaults.max_epochs);
  o.patience = j.value("patience", defaults.patience);
}

}  // namespace adebias::probe
