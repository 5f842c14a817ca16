#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "adebias/nn.hpp"
#include "adebias/tensor.hpp"

namespace adebias::data {

using nn::TokenSeq;

inline constexpr int kEntailment = 0;
inline constexpr int kContradiction = 1;
inline constexpr int kNeutral = 2;
inline constexpr int kNumClasses = 3;

struct Example {
  TokenSeq premise;
  TokenSeq hypothesis;
  int label = 0;
};

class Vocabulary {
 public:
  int add(const std::string& token);           // existing id if already present
  int find(const std::string& token) const;    // -1 if missing
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct Corpus {
  Vocabulary vocab;
  std::vector<Example> train, dev, test;

  const std::vector<Example>& split(std::string_view name) const;
};

// Synthetic corpus with a planted hypothesis-only leak. Content tokens form
// antonym pairs (2j <-> 2j+1); three extra leak tokens mark the classes.
struct SyntheticSpec {
  std::size_t content_vocab = 120;  // V, must be even
  double leak_rate = 0.9;           // beta in [0,1]
  std::size_t premise_min = 5, premise_max = 12;
  std::size_t hyp_min = 3, hyp_max = 8;
  bool length_artifact = false;  // entailment hypotheses drawn from the short half
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t total_vocab() const { return content_vocab + 3; }
  int leak_token(int label) const { return static_cast<int>(content_vocab) + label; }
};

struct SplitSizes {
  std::size_t train = 20000;
  std::size_t dev = 2000;
  std::size_t test = 2000;
};

// Deterministic generation: a fixed spec reproduces the corpus bitwise.
// Labels are uniform; hypothesis construction per class:
//   entailment     distinct premise tokens
//   contradiction  distinct premise tokens with one replaced by its antonym,
//                  the replacement guaranteed absent from the premise
//   neutral        half premise tokens, half tokens absent from the premise
// With probability beta the label's leak token is appended, otherwise a
// uniformly random leak token (leak presence is uninformative).
Corpus generate(const SyntheticSpec& spec, const SplitSizes& sizes);

// JSONL corpora: one object per line with string fields premise/hypothesis
// and label in {entailment, contradiction, neutral}. Whitespace tokenization;
// the vocabulary is built from the train split.
Corpus load_jsonl(const std::string& train_path, const std::string& dev_path,
                  const std::string& test_path);
void write_jsonl(const Corpus& corpus, const std::string& dir);

// Re-tokenizes a corpus under another vocabulary (checkpoint interop).
// Throws if any surface token is missing from `target`.
Corpus remap(const Corpus& corpus, const Vocabulary& target);

// Text embeddings, one row per line: token then dim space-separated reals.
// Tokens absent from the file get seed-derived Xavier rows.
Tensor load_embeddings(const std::string& path, const Vocabulary& vocab,
                       std::uint64_t seed);

// Frequency of the most common label.
double majority_baseline(const std::vector<Example>& split);

const char* label_name(int label);
int label_from_name(const std::string& name);  // -1 if unknown

}  // namespace adebias::data
