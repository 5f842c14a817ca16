#include "adebias/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "adebias/rng.hpp"

namespace adebias::nn {

const char* head_kind_name(HeadSpec::Kind kind) {
  switch (kind) {
    case HeadSpec::Kind::kLinear: return "linear";
    case HeadSpec::Kind::kMlp2: return "mlp2";
    case HeadSpec::Kind::kMlp3: return "mlp3";
  }
  throw std::logic_error("unreachable head kind");
}

HeadSpec::Kind head_kind_from(std::string_view name) {
  if (name == "linear") return HeadSpec::Kind::kLinear;
  if (name == "mlp2") return HeadSpec::Kind::kMlp2;
  if (name == "mlp3") return HeadSpec::Kind::kMlp3;
  throw std::invalid_argument("unknown head kind: " + std::string(name));
}

const char* encoder_kind_name(EncoderKind kind) {
  return kind == EncoderKind::kMeanPool ? "mean_pool" : "simple_recurrent";
}

EncoderKind encoder_kind_from(std::string_view name) {
  if (name == "mean_pool") return EncoderKind::kMeanPool;
  if (name == "simple_recurrent") return EncoderKind::kSimpleRecurrent;
  throw std::invalid_argument("unknown encoder kind: " + std::string(name));
}

void ModelSpec::validate() const {
  if (vocab == 0) throw std::invalid_argument("model spec: vocabulary must be non-empty");
  if (embed_dim == 0 || repr_dim == 0) {
    throw std::invalid_argument("model spec: embed_dim and repr_dim must be positive");
  }
}

Tensor& ParameterSet::add(std::string name, Tensor t) {
  if (has(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  entries_.emplace_back(std::move(name), std::move(t));
  return entries_.back().second;
}

Tensor& ParameterSet::get(std::string_view name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::invalid_argument("unknown parameter: " + std::string(name));
}

const Tensor& ParameterSet::get(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

bool ParameterSet::has(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

Tensor xavier_tensor(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(seed);
  Tensor t({fan_in, fan_out});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

namespace {

std::size_t head_hidden(const HeadSpec& head, std::size_t input_dim) {
  return head.hidden == 0 ? input_dim : head.hidden;
}

}  // namespace

void init_head(ParameterSet& params, const HeadSpec& head, std::size_t input_dim,
               std::string_view prefix, std::uint64_t seed) {
  const std::string p(prefix);
  auto w = [&](int i, std::size_t fi, std::size_t fo) {
    const std::string name = p + ".w" + std::to_string(i);
    params.add(name, xavier_tensor(fi, fo, Rng::derive(seed, name)));
    params.add(p + ".b" + std::to_string(i), Tensor({fo}));
  };
  const std::size_t h = head_hidden(head, input_dim);
  switch (head.kind) {
    case HeadSpec::Kind::kLinear:
      w(0, input_dim, 3);
      break;
    case HeadSpec::Kind::kMlp2:
      w(0, input_dim, h);
      w(1, h, 3);
      break;
    case HeadSpec::Kind::kMlp3:
      w(0, input_dim, h);
      w(1, h, h);
      w(2, h, 3);
      break;
  }
}

ParameterSet init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParameterSet params;
  auto add = [&](const std::string& name, std::size_t fi, std::size_t fo) {
    params.add(name, xavier_tensor(fi, fo, Rng::derive(seed, name)));
  };
  add("encoder.embedding", spec.vocab, spec.embed_dim);
  if (spec.encoder == EncoderKind::kMeanPool) {
    add("encoder.proj", spec.embed_dim, spec.repr_dim);
  } else {
    add("encoder.wx", spec.embed_dim, spec.repr_dim);
    add("encoder.wh", spec.repr_dim, spec.repr_dim);
    params.add("encoder.b", Tensor({spec.repr_dim}));
  }
  init_head(params, spec.task_head, 4 * spec.repr_dim, "task", seed);
  for (std::size_t i = 0; i < spec.adversaries; ++i) {
    init_head(params, spec.adversary_head, spec.repr_dim, "adv" + std::to_string(i), seed);
  }
  return params;
}

NodeMap make_leaves(Graph& g, const ParameterSet& params, bool requires_grad) {
  NodeMap leaves;
  for (const auto& [name, tensor] : params.entries()) {
    leaves.emplace(name, g.leaf(tensor, requires_grad));
  }
  return leaves;
}

namespace {

NodeId leaf_of(const NodeMap& leaves, const std::string& name) {
  auto it = leaves.find(name);
  if (it == leaves.end()) throw std::invalid_argument("missing parameter leaf: " + name);
  return it->second;
}

// h_t = tanh(x_t Wx + h_{t-1} Wh + b), pooled by elementwise max over t.
NodeId encode_recurrent(Graph& g, const NodeMap& leaves, const TokenSeq& seq,
                        std::size_t repr_dim) {
  if (seq.empty()) throw std::invalid_argument("encode: empty sequence");
  const NodeId emb = leaf_of(leaves, "encoder.embedding");
  const NodeId wx = leaf_of(leaves, "encoder.wx");
  const NodeId wh = leaf_of(leaves, "encoder.wh");
  const NodeId b = leaf_of(leaves, "encoder.b");
  NodeId h = g.leaf(Tensor({repr_dim}));  // h_0 = 0
  std::vector<NodeId> states;
  states.reserve(seq.size());
  for (int tok : seq) {
    const NodeId x = g.embed_row(emb, tok);
    h = g.tanh(g.add(g.add(g.matmul(x, wx), g.matmul(h, wh)), b));
    states.push_back(h);
  }
  return g.max_over_time(states);
}

}  // namespace

NodeId encode_batch(Graph& g, const ModelSpec& spec, const NodeMap& leaves,
                    const std::vector<TokenSeq>& seqs) {
  if (seqs.empty()) throw std::invalid_argument("encode: no sequences");
  if (spec.encoder == EncoderKind::kMeanPool) {
    return g.matmul(g.embed_mean(leaf_of(leaves, "encoder.embedding"), seqs),
                    leaf_of(leaves, "encoder.proj"));
  }
  std::vector<NodeId> rows;
  rows.reserve(seqs.size());
  for (const TokenSeq& seq : seqs) {
    rows.push_back(encode_recurrent(g, leaves, seq, spec.repr_dim));
  }
  return g.stack_rows(rows);
}

NodeId combine(Graph& g, NodeId e_h, NodeId e_p) {
  return g.concat({e_h, e_p, g.sub(e_h, e_p), g.elementwise_mul(e_h, e_p)});
}

NodeId head_logits(Graph& g, const HeadSpec& head, const NodeMap& leaves,
                   std::string_view prefix, NodeId input) {
  const std::string p(prefix);
  auto affine = [&](NodeId x, int i) {
    const NodeId z = g.matmul(x, leaf_of(leaves, p + ".w" + std::to_string(i)));
    const NodeId bias = leaf_of(leaves, p + ".b" + std::to_string(i));
    return g.value(z).rank() == 2 ? g.add_rows(z, bias) : g.add(z, bias);
  };
  switch (head.kind) {
    case HeadSpec::Kind::kLinear:
      return affine(input, 0);
    case HeadSpec::Kind::kMlp2:
      return affine(g.tanh(affine(input, 0)), 1);
    case HeadSpec::Kind::kMlp3:
      return affine(g.tanh(affine(g.tanh(affine(input, 0)), 1)), 2);
  }
  throw std::logic_error("unreachable head kind");
}

Tensor encode_all(const ModelSpec& spec, const ParameterSet& params,
                  const std::vector<TokenSeq>& seqs, std::size_t batch_size) {
  if (seqs.empty()) throw std::invalid_argument("encode: no sequences");
  Tensor out({seqs.size(), spec.repr_dim});
  for (std::size_t start = 0; start < seqs.size(); start += batch_size) {
    const std::size_t end = std::min(seqs.size(), start + batch_size);
    Graph g;
    const NodeMap leaves = make_leaves(g, params, /*requires_grad=*/false);
    const std::vector<TokenSeq> chunk(seqs.begin() + start, seqs.begin() + end);
    const Tensor& enc = g.value(encode_batch(g, spec, leaves, chunk));
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      for (std::size_t c = 0; c < spec.repr_dim; ++c) {
        // single-row batches come back rank-1
        out.at(start + r, c) = enc[r * spec.repr_dim + c];
      }
    }
  }
  return out;
}

std::vector<double> encode(const ModelSpec& spec, const ParameterSet& params,
                           const TokenSeq& seq) {
  const Tensor row = encode_all(spec, params, {seq});
  return {row.data(), row.data() + row.size()};
}

std::vector<int> predict_head(const HeadSpec& head, const ParameterSet& params,
                              std::string_view prefix, const Tensor& x) {
  Graph g;
  const NodeMap leaves = make_leaves(g, params, /*requires_grad=*/false);
  const Tensor& logits = g.value(head_logits(g, head, leaves, prefix, g.leaf(x)));
  const std::size_t rows = logits.rows();
  const std::size_t classes = logits.cols();
  std::vector<int> pred(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    int best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits[r * classes + c] > logits[r * classes + best]) best = static_cast<int>(c);
    }
    pred[r] = best;
  }
  return pred;
}

}  // namespace adebias::nn
