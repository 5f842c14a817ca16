#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adebias/graph.hpp"
#include "adebias/tensor.hpp"

namespace adebias::nn {

using TokenSeq = std::vector<int>;

enum class EncoderKind { kMeanPool, kSimpleRecurrent };

// Classifier head shape. kLinear is a single affine map; kMlp2 is one hidden
// tanh layer; kMlp3 has exactly three linear layers and two tanh layers.
// hidden == 0 means "use the input width".
struct HeadSpec {
  enum class Kind { kLinear, kMlp2, kMlp3 };
  Kind kind = Kind::kLinear;
  std::size_t hidden = 0;
};

const char* head_kind_name(HeadSpec::Kind kind);
HeadSpec::Kind head_kind_from(std::string_view name);
const char* encoder_kind_name(EncoderKind kind);
EncoderKind encoder_kind_from(std::string_view name);

struct ModelSpec {
  std::size_t vocab = 0;       // V, including any special tokens
  std::size_t embed_dim = 50;  // d
  std::size_t repr_dim = 64;   // k
  EncoderKind encoder = EncoderKind::kMeanPool;
  HeadSpec task_head{HeadSpec::Kind::kMlp2, 512};
  HeadSpec adversary_head{};
  std::size_t adversaries = 0;  // n

  void validate() const;
};

// Named parameter tensors in a fixed order (iteration order is update order).
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor t);
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;
  bool has(std::string_view name) const;
  auto& entries() { return entries_; }
  const auto& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
// Every tensor draws from its own stream derived from (seed, name), so adding
// or removing components never shifts the others' initialization.
ParameterSet init_params(const ModelSpec& spec, std::uint64_t seed);

// Appends head parameters named "<prefix>.w0", "<prefix>.b0", ... for a head
// mapping input_dim -> 3 logits.
void init_head(ParameterSet& params, const HeadSpec& head, std::size_t input_dim,
               std::string_view prefix, std::uint64_t seed);

Tensor xavier_tensor(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed);

// Graph-side view of a ParameterSet: one leaf per tensor.
using NodeMap = std::unordered_map<std::string, NodeId>;
NodeMap make_leaves(Graph& g, const ParameterSet& params, bool requires_grad);

// Shared sentence encoder; both premise and hypothesis go through the same
// parameters. Returns [B x k] for a batch of sequences.
NodeId encode_batch(Graph& g, const ModelSpec& spec, const NodeMap& leaves,
                    const std::vector<TokenSeq>& seqs);

// [e_h ; e_p ; e_h - e_p ; e_h (*) e_p], width 4k. Accepts [B x k] or [k].
NodeId combine(Graph& g, NodeId e_h, NodeId e_p);

// Applies the head named by `prefix` to input rows, producing logits.
NodeId head_logits(Graph& g, const HeadSpec& head, const NodeMap& leaves,
                   std::string_view prefix, NodeId input);

// --- forward-only evaluation (no gradients) ---

// Encodes every sequence with frozen parameters -> [N x k].
Tensor encode_all(const ModelSpec& spec, const ParameterSet& params,
                  const std::vector<TokenSeq>& seqs, std::size_t batch_size = 256);

// Single-sequence convenience wrapper around the shared encoder.
std::vector<double> encode(const ModelSpec& spec, const ParameterSet& params,
                           const TokenSeq& seq);

// Argmax class per row of X under the given head.
std::vector<int> predict_head(const HeadSpec& head, const ParameterSet& params,
                              std::string_view prefix, const Tensor& x);

}  // namespace adebias::nn
