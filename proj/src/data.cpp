#include "adebias/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "adebias/rng.hpp"

namespace adebias::data {

using nlohmann::json;

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

const std::vector<Example>& Corpus::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split: " + std::string(name));
}

const char* label_name(int label) {
  switch (label) {
    case kEntailment: return "entailment";
    case kContradiction: return "contradiction";
    case kNeutral: return "neutral";
  }
  throw std::invalid_argument("label out of range: " + std::to_string(label));
}

int label_from_name(const std::string& name) {
  if (name == "entailment") return kEntailment;
  if (name == "contradiction") return kContradiction;
  if (name == "neutral") return kNeutral;
  return -1;
}

void SyntheticSpec::validate() const {
  if (content_vocab == 0 || content_vocab % 2 != 0) {
    throw std::invalid_argument("content vocabulary must be even and positive (antonym pairing)");
  }
  if (!(leak_rate >= 0.0 && leak_rate <= 1.0)) {
    throw std::invalid_argument("leak rate must lie in [0,1]");
  }
  if (premise_min == 0 || premise_min > premise_max || hyp_min == 0 || hyp_min > hyp_max) {
    throw std::invalid_argument("invalid length ranges");
  }
  if (hyp_min > premise_min) {
    throw std::invalid_argument("hypothesis minimum length cannot exceed premise minimum");
  }
  // Need absent tokens for neutral hypotheses and antonym replacements.
  if (content_vocab < premise_max + hyp_max + 2) {
    throw std::invalid_argument("content vocabulary too small for the length ranges");
  }
}

namespace {

// Distinct sample of `count` elements from [0, vocab) excluding `taken`.
TokenSeq sample_absent(Rng& rng, std::size_t vocab, std::size_t count,
                       const std::unordered_set<int>& taken) {
  TokenSeq out;
  std::unordered_set<int> used;
  while (out.size() < count) {
    const int t = static_cast<int>(rng.below(vocab));
    if (taken.count(t) || used.count(t)) continue;
    out.push_back(t);
    used.insert(t);
  }
  return out;
}

// Distinct sample of `count` positions from `pool` (partial Fisher-Yates).
TokenSeq sample_from(Rng& rng, TokenSeq pool, std::size_t count) {
  TokenSeq out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

Example make_example(Rng& rng, const SyntheticSpec& spec) {
  const auto v = spec.content_vocab;
  const int label = static_cast<int>(rng.below(3));

  for (int attempt = 0; attempt < 100; ++attempt) {
    const auto premise_len =
        static_cast<std::size_t>(rng.range(static_cast<long>(spec.premise_min),
                                           static_cast<long>(spec.premise_max)));
    TokenSeq premise = sample_absent(rng, v, premise_len, {});
    const std::unordered_set<int> in_premise(premise.begin(), premise.end());

    std::size_t hyp_hi = std::min(spec.hyp_max, premise_len);
    if (spec.length_artifact && label == kEntailment) {
      hyp_hi = spec.hyp_min + (hyp_hi - spec.hyp_min) / 2;
    }
    const auto hyp_len = static_cast<std::size_t>(
        rng.range(static_cast<long>(spec.hyp_min), static_cast<long>(hyp_hi)));

    TokenSeq hyp;
    if (label == kEntailment) {
      hyp = sample_from(rng, premise, hyp_len);
    } else if (label == kContradiction) {
      hyp = sample_from(rng, premise, hyp_len);
      std::vector<std::size_t> candidates;  // positions whose antonym is absent
      for (std::size_t i = 0; i < hyp.size(); ++i) {
        if (!in_premise.count(hyp[i] ^ 1)) candidates.push_back(i);
      }
      if (candidates.empty()) continue;  // retry with a fresh premise
      const std::size_t pos = candidates[rng.below(candidates.size())];
      hyp[pos] ^= 1;
    } else {
      const std::size_t n_in = hyp_len / 2;
      hyp = sample_from(rng, premise, n_in);
      for (int t : sample_absent(rng, v, hyp_len - n_in, in_premise)) hyp.push_back(t);
      rng.shuffle(hyp);
    }

    const int leak = rng.uniform() < spec.leak_rate
                         ? spec.leak_token(label)
                         : spec.leak_token(static_cast<int>(rng.below(3)));
    hyp.push_back(leak);
    return Example{std::move(premise), std::move(hyp), label};
  }
  throw std::runtime_error("synthetic generation failed: no valid antonym replacement "
                           "(vocabulary too small)");
}

std::vector<Example> make_split(const SyntheticSpec& spec, std::uint64_t stream_seed,
                                std::size_t count) {
  Rng rng(stream_seed);
  std::vector<Example> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_example(rng, spec));
  return out;
}

}  // namespace

Corpus generate(const SyntheticSpec& spec, const SplitSizes& sizes) {
  spec.validate();
  Corpus corpus;
  for (std::size_t i = 0; i < spec.content_vocab; ++i) {
    corpus.vocab.add("w" + std::to_string(i));
  }
  corpus.vocab.add("leak_ent");
  corpus.vocab.add("leak_con");
  corpus.vocab.add("leak_neu");
  corpus.train = make_split(spec, Rng::derive(spec.seed, "split", 0), sizes.train);
  corpus.dev = make_split(spec, Rng::derive(spec.seed, "split", 1), sizes.dev);
  corpus.test = make_split(spec, Rng::derive(spec.seed, "split", 2), sizes.test);
  return corpus;
}

namespace {

TokenSeq tokenize(const std::string& text, Vocabulary& vocab, bool extend,
                  const std::string& path, std::size_t line_no) {
  TokenSeq seq;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    int id = extend ? vocab.add(tok) : vocab.find(tok);
    if (id < 0) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": token \"" + tok +
                               "\" not in the train-split vocabulary");
    }
    seq.push_back(id);
  }
  if (seq.empty()) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty utterance");
  }
  return seq;
}

std::vector<Example> load_split(const std::string& path, Vocabulary& vocab, bool extend) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.contains("premise") || !obj.contains("hypothesis") || !obj.contains("label")) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": missing premise/hypothesis/label field");
    }
    const int label = label_from_name(obj.at("label").get<std::string>());
    if (label < 0) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown label \"" +
                               obj.at("label").get<std::string>() + "\"");
    }
    Example ex;
    ex.premise = tokenize(obj.at("premise").get<std::string>(), vocab, extend, path, line_no);
    ex.hypothesis = tokenize(obj.at("hypothesis").get<std::string>(), vocab, extend, path, line_no);
    ex.label = label;
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw std::runtime_error(path + ": no examples");
  return out;
}

std::string detokenize(const TokenSeq& seq, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(seq[i]);
  }
  return out;
}

}  // namespace

Corpus load_jsonl(const std::string& train_path, const std::string& dev_path,
                  const std::string& test_path) {
  Corpus corpus;
  corpus.train = load_split(train_path, corpus.vocab, /*extend=*/true);
  corpus.dev = load_split(dev_path, corpus.vocab, /*extend=*/false);
  corpus.test = load_split(test_path, corpus.vocab, /*extend=*/false);
  return corpus;
}

void write_jsonl(const Corpus& corpus, const std::string& dir) {
  const std::pair<const char*, const std::vector<Example>*> splits[] = {
      {"train", &corpus.train}, {"dev", &corpus.dev}, {"test", &corpus.test}};
  for (const auto& [name, examples] : splits) {
    const std::string path = dir + "/" + name + ".jsonl";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const Example& ex : *examples) {
      json obj;
      obj["premise"] = detokenize(ex.premise, corpus.vocab);
      obj["hypothesis"] = detokenize(ex.hypothesis, corpus.vocab);
      obj["label"] = label_name(ex.label);
      out << obj.dump() << '\n';
    }
  }
}

Corpus remap(const Corpus& corpus, const Vocabulary& target) {
  if (corpus.vocab == target) return corpus;
  Corpus out;
  out.vocab = target;
  auto map_seq = [&](const TokenSeq& seq) {
    TokenSeq mapped;
    mapped.reserve(seq.size());
    for (int id : seq) {
      const std::string& tok = corpus.vocab.token(id);
      const int t = target.find(tok);
      if (t < 0) {
        throw std::runtime_error("vocabulary mismatch: token \"" + tok +
                                 "\" is not in the checkpoint vocabulary");
      }
      mapped.push_back(t);
    }
    return mapped;
  };
  auto map_split = [&](const std::vector<Example>& split) {
    std::vector<Example> mapped;
    mapped.reserve(split.size());
    for (const Example& ex : split) {
      mapped.push_back({map_seq(ex.premise), map_seq(ex.hypothesis), ex.label});
    }
    return mapped;
  };
  out.train = map_split(corpus.train);
  out.dev = map_split(corpus.dev);
  out.test = map_split(corpus.test);
  return out;
}

Tensor load_embeddings(const std::string& path, const Vocabulary& vocab, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  std::vector<std::pair<int, std::vector<double>>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    std::vector<double> vals;
    double v = 0.0;
    while (ls >> v) vals.push_back(v);
    if (vals.empty() || (dim != 0 && vals.size() != dim)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed embedding row");
    }
    if (!ls.eof()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": non-numeric embedding value");
    }
    dim = vals.size();
    const int id = vocab.find(tok);
    if (id >= 0) rows.emplace_back(id, std::move(vals));
  }
  if (dim == 0) throw std::runtime_error(path + ": no embedding rows");

  // Tokens missing from the file get seed-derived Xavier rows.
  const double bound = std::sqrt(6.0 / static_cast<double>(vocab.size() + dim));
  Tensor table({vocab.size(), dim});
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    Rng rng(Rng::derive(seed, "embedding", id));
    for (std::size_t c = 0; c < dim; ++c) table.at(id, c) = rng.uniform(-bound, bound);
  }
  for (const auto& [id, vals] : rows) {
    for (std::size_t c = 0; c < dim; ++c) table.at(static_cast<std::size_t>(id), c) = vals[c];
  }
  return table;
}

double majority_baseline(const std::vector<Example>& split) {
  if (split.empty()) throw std::invalid_argument("majority baseline of an empty split");
  std::size_t counts[kNumClasses] = {0, 0, 0};
  for (const Example& ex : split) counts[ex.label]++;
  return static_cast<double>(*std::max_element(counts, counts + kNumClasses)) /
         static_cast<double>(split.size());
}

}  // namespace adebias::data
