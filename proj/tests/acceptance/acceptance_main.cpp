// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.
//
// Training-based criteria use a fixed desk-scale setup calibrated once before
// these thresholds were frozen: 40 content tokens, d=50, k=64 unless stated,
// MLP2(64) task head, fixed (frozen) embedding table, batch 64, 25 epochs
// without early stop, probe protocol lr 0.1 / patience 5.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "adebias/data.hpp"
#include "adebias/experiment.hpp"
#include "adebias/graph.hpp"
#include "adebias/nn.hpp"
#include "adebias/probe.hpp"
#include "adebias/rng.hpp"
#include "adebias/stats.hpp"
#include "adebias/train.hpp"

using namespace adebias;

namespace {

int g_failures = 0;

void report(int number, bool ok, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s — %s\n", ok ? "PASS" : "FAIL", number, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void parallel(std::vector<std::function<void()>> work) {
  std::atomic<std::size_t> next{0};
  auto loop = [&]() {
    for (std::size_t i = next.fetch_add(1); i < work.size(); i = next.fetch_add(1)) work[i]();
  };
  std::thread other(loop);
  loop();
  other.join();
}

// --- shared experiment setup (fixed before the thresholds were frozen) ---

data::Corpus make_corpus(double beta) {
  data::SyntheticSpec spec;
  spec.content_vocab = 40;
  spec.leak_rate = beta;
  spec.seed = 100;
  return data::generate(spec, {8000, 1500, 1500});
}

train::TrainConfig base_config() {
  train::TrainConfig cfg;
  cfg.repr_dim = 64;
  cfg.embed_dim = 50;
  cfg.task_head = {nn::HeadSpec::Kind::kMlp2, 64};
  cfg.adversary_head = {nn::HeadSpec::Kind::kMlp3, 64};
  cfg.lambda = 0.95;
  cfg.learning_rate = 0.5;
  cfg.batch_size = 64;
  cfg.max_epochs = 25;
  cfg.patience = 25;
  cfg.spectator_probes = 0;
  cfg.freeze_embeddings = true;
  return cfg;
}

probe::ProbeOptions probe_options(std::size_t count = 20) {
  probe::ProbeOptions o;
  o.count = count;
  o.seed = 500;
  o.workers = 1;
  return o;
}

// train + relearn for one grid cell
double relearned_bias(const data::Corpus& corpus, const train::TrainConfig& cfg,
                      nn::HeadSpec probe_head = {}) {
  const auto trained = train::train(corpus, cfg);
  train::Checkpoint ckpt{cfg, corpus.vocab, trained.params};
  probe::ProbeOptions o = probe_options();
  o.head = probe_head;
  return probe::relearn_bias(ckpt, corpus, o).max_accuracy;
}

// --- criterion 1: gradient correctness ---

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-2.0, 2.0);
  return t;
}

using Builder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

double fd_check(const Builder& build, const std::vector<Tensor>& inputs,
                const Builder& fd_build_opt = nullptr) {
  const Builder& fd_build = fd_build_opt ? fd_build_opt : build;
  Graph g;
  std::vector<NodeId> leaves;
  for (const Tensor& t : inputs) leaves.push_back(g.leaf(t, true));
  g.backward(build(g, leaves));
  double worst = 0.0;
  for (std::size_t li = 0; li < inputs.size(); ++li) {
    const Tensor& analytic = g.grad(leaves[li]);
    for (std::size_t i = 0; i < inputs[li].size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Tensor> shifted = inputs;
        shifted[li][i] += delta;
        Graph g2;
        std::vector<NodeId> ls;
        for (const Tensor& t : shifted) ls.push_back(g2.leaf(t, false));
        return g2.value(fd_build(g2, ls))[0];
      };
      const double fd = (eval(1e-5) - eval(-1e-5)) / 2e-5;
      const double denom = std::max({1e-3, std::abs(fd), std::abs(analytic[i])});
      worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
    }
  }
  return worst;
}

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(404);
  double worst = 0.0;
  int graphs = 0;

  // mean-pool encoder through the combiner, task branch plus a reversed
  // adversary branch. The reversed branch has no parameters of its own, so
  // the equivalent differentiable function just rescales it by -c.
  auto mean_pool = [](Graph& g, const std::vector<NodeId>& L) {
    const NodeId e_h = g.matmul(g.embed_mean(L[0], {{0, 2}, {3, 1, 4}}), L[1]);
    const NodeId e_p = g.matmul(g.embed_mean(L[0], {{1, 1}, {2, 0, 3}}), L[1]);
    const NodeId f = g.concat({e_h, e_p, g.sub(e_h, e_p), g.elementwise_mul(e_h, e_p)});
    const NodeId task = g.mean(
        g.softmax_cross_entropy_rows(g.add_rows(g.matmul(f, L[2]), L[3]), {0, 2}));
    const NodeId rev = g.grad_reverse(e_h, ReversalCoefficient(0.4));
    const NodeId adv = g.mean(g.softmax_cross_entropy_rows(rev, {1, 0}));
    return g.add(g.scale(task, 0.7), g.scale(adv, 0.3));
  };
  auto mean_pool_fd = [](Graph& g, const std::vector<NodeId>& L) {
    const NodeId e_h = g.matmul(g.embed_mean(L[0], {{0, 2}, {3, 1, 4}}), L[1]);
    const NodeId e_p = g.matmul(g.embed_mean(L[0], {{1, 1}, {2, 0, 3}}), L[1]);
    const NodeId f = g.concat({e_h, e_p, g.sub(e_h, e_p), g.elementwise_mul(e_h, e_p)});
    const NodeId task = g.mean(
        g.softmax_cross_entropy_rows(g.add_rows(g.matmul(f, L[2]), L[3]), {0, 2}));
    const NodeId adv = g.mean(g.softmax_cross_entropy_rows(e_h, {1, 0}));
    return g.add(g.scale(task, 0.7), g.scale(adv, 0.3 * -0.4));
  };
  // recurrent encoder with max-over-time pooling
  auto recurrent = [](Graph& g, const std::vector<NodeId>& L) {
    auto encode = [&](const std::vector<int>& toks) {
      NodeId h = g.leaf(Tensor({3}));
      std::vector<NodeId> states;
      for (int tok : toks) {
        const NodeId x = g.embed_row(L[0], tok);
        h = g.tanh(g.add(g.add(g.matmul(x, L[1]), g.matmul(h, L[2])), L[3]));
        states.push_back(h);
      }
      return g.max_over_time(states);
    };
    const NodeId rows = g.stack_rows({encode({0, 3, 1}), encode({4, 2})});
    return g.mean(g.softmax_cross_entropy_rows(g.matmul(rows, L[4]), {2, 1}));
  };
  // elementwise chain exercising sum/tanh/mul
  auto chain = [](Graph& g, const std::vector<NodeId>& L) {
    const NodeId z = g.tanh(g.elementwise_mul(L[0], L[1]));
    return g.sum(g.elementwise_mul(z, z));
  };

  for (int trial = 0; trial < 17; ++trial) {
    worst = std::max(worst, fd_check(mean_pool,
                                     {random_tensor({5, 3}, rng), random_tensor({3, 4}, rng),
                                      random_tensor({16, 3}, rng), random_tensor({3}, rng)},
                                     mean_pool_fd));
    ++graphs;
    worst = std::max(worst, fd_check(recurrent, {random_tensor({5, 2}, rng),
                                                 random_tensor({2, 3}, rng),
                                                 random_tensor({3, 3}, rng),
                                                 random_tensor({3}, rng),
                                                 random_tensor({3, 3}, rng)}));
    ++graphs;
    worst = std::max(worst,
                     fd_check(chain, {random_tensor({6}, rng), random_tensor({6}, rng)}));
    ++graphs;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(1, graphs >= 50 && worst < 1e-4 && secs < 60.0, "gradient correctness",
         std::to_string(graphs) + " graphs, max relative error " + fmt(worst) + ", " +
             fmt(secs) + "s");
}

// --- criterion 2: Eq. 1 decomposition ---

void criterion_2() {
  const data::Corpus corpus = make_corpus(0.9);
  train::Batch batch;
  for (int i = 0; i < 24; ++i) {
    batch.premises.push_back(corpus.train[i].premise);
    batch.hypotheses.push_back(corpus.train[i].hypothesis);
    batch.labels.push_back(corpus.train[i].label);
  }
  double worst = 0.0;
  for (double lambda : {0.0, 0.3, 1.0}) {
    for (std::size_t n : {1u, 3u, 5u}) {
      nn::ModelSpec spec = base_config().model_spec(corpus.vocab.size());
      spec.adversaries = n;
      const nn::ParameterSet params = nn::init_params(spec, 21);

      Graph g;
      const auto leaves = nn::make_leaves(g, params, true);
      g.backward(train::minimax_loss(g, spec, leaves, batch, lambda, n).total);

      for (const char* name : {"encoder.embedding", "encoder.proj"}) {
        Graph gt;
        const auto lt = nn::make_leaves(gt, params, true);
        const NodeId e_h = nn::encode_batch(gt, spec, lt, batch.hypotheses);
        const NodeId e_p = nn::encode_batch(gt, spec, lt, batch.premises);
        gt.backward(gt.mean(gt.softmax_cross_entropy_rows(
            nn::head_logits(gt, spec.task_head, lt, "task", nn::combine(gt, e_h, e_p)),
            batch.labels)));
        const Tensor& g_task = gt.grad(lt.at(name));
        Tensor expected = Tensor::zeros(g_task.shape());
        for (std::size_t i = 0; i < expected.size(); ++i) {
          expected[i] = (1.0 - lambda) * g_task[i];
        }
        for (std::size_t a = 0; a < n; ++a) {
          Graph ga;
          const auto la = nn::make_leaves(ga, params, true);
          const NodeId eh = nn::encode_batch(ga, spec, la, batch.hypotheses);
          ga.backward(ga.mean(ga.softmax_cross_entropy_rows(
              nn::head_logits(ga, spec.adversary_head, la, "adv" + std::to_string(a), eh),
              batch.labels)));
          const Tensor& g_adv = ga.grad(la.at(name));
          for (std::size_t i = 0; i < expected.size(); ++i) {
            expected[i] -= lambda / static_cast<double>(n) * g_adv[i];
          }
        }
        const Tensor& got = g.grad(leaves.at(name));
        for (std::size_t i = 0; i < expected.size(); ++i) {
          worst = std::max(worst, std::abs(got[i] - expected[i]));
        }
      }
    }
  }
  report(2, worst < 1e-10, "minimax objective decomposition",
         "max abs deviation " + std::to_string(worst));
}

// --- criterion 3: gradient-flow separation ---

void criterion_3() {
  const data::Corpus corpus = make_corpus(0.9);
  train::Batch batch;
  for (int i = 0; i < 16; ++i) {
    batch.premises.push_back(corpus.train[i].premise);
    batch.hypotheses.push_back(corpus.train[i].hypothesis);
    batch.labels.push_back(corpus.train[i].label);
  }
  nn::ModelSpec spec = base_config().model_spec(corpus.vocab.size());
  spec.adversaries = 2;
  const nn::ParameterSet params = nn::init_params(spec, 33);

  bool zeros_ok = true;
  {
    Graph g;  // lambda=1: the task head must receive exactly zero gradient
    const auto leaves = nn::make_leaves(g, params, true);
    g.backward(train::minimax_loss(g, spec, leaves, batch, 1.0, 2).total);
    for (const char* name : {"task.w0", "task.b0", "task.w1", "task.b1"}) {
      for (double v : g.grad(leaves.at(name)).values()) zeros_ok &= v == 0.0;
    }
  }
  {
    Graph g;  // lambda=0: adversaries must receive exactly zero gradient
    const auto leaves = nn::make_leaves(g, params, true);
    g.backward(train::minimax_loss(g, spec, leaves, batch, 0.0, 2).total);
    for (const char* name : {"adv0.w0", "adv1.w0"}) {
      for (double v : g.grad(leaves.at(name)).values()) zeros_ok &= v == 0.0;
    }
  }

  // lambda=0 trajectory bitwise equals a no-adversary build
  data::SyntheticSpec small;
  small.content_vocab = 40;
  small.leak_rate = 0.9;
  small.seed = 7;
  const data::Corpus quick = data::generate(small, {1200, 300, 100});
  train::TrainConfig with_advs = base_config();
  with_advs.adversaries = 5;
  with_advs.lambda = 0.0;
  with_advs.max_epochs = 4;
  with_advs.patience = 4;
  train::TrainConfig without = with_advs;
  without.adversaries = 0;
  const auto a = train::train(quick, with_advs);
  const auto b = train::train(quick, without);
  bool bitwise = true;
  for (const auto& [name, tensor] : b.params.entries()) {
    bitwise &= a.params.get(name).values() == tensor.values();
  }
  report(3, zeros_ok && bitwise, "gradient-flow separation",
         std::string("cross-branch gradients ") + (zeros_ok ? "zero" : "NONZERO") +
             ", lambda=0 trajectory " + (bitwise ? "bitwise equal" : "DIVERGED"));
}

// --- criterion 4: synthetic debias trend ---

void criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  const data::Corpus corpus = make_corpus(0.9);
  const std::size_t ns[] = {0, 5, 10};
  const std::uint64_t seeds[] = {1, 2, 3};
  double relearn[3][3];  // [n index][seed index]

  std::vector<std::function<void()>> cells;
  for (int ni = 0; ni < 3; ++ni) {
    for (int si = 0; si < 3; ++si) {
      cells.push_back([&, ni, si]() {
        train::TrainConfig cfg = base_config();
        cfg.adversaries = ns[ni];
        if (ns[ni] == 0) cfg.lambda = 0.0;
        cfg.seed = seeds[si];
        relearn[ni][si] = relearned_bias(corpus, cfg);
      });
    }
  }
  parallel(std::move(cells));

  double means[3];
  for (int ni = 0; ni < 3; ++ni) {
    means[ni] = (relearn[ni][0] + relearn[ni][1] + relearn[ni][2]) / 3.0;
  }
  const double best_adv = std::min(means[1], means[2]);
  const bool baseline_ok = means[0] >= 0.90;
  const bool drop_ok = means[0] - best_adv >= 0.15;
  int inversions = 0;
  double worst_inversion = 0.0;
  for (int ni = 1; ni < 3; ++ni) {
    if (means[ni] > means[ni - 1]) {
      ++inversions;
      worst_inversion = std::max(worst_inversion, means[ni] - means[ni - 1]);
    }
  }
  const bool monotone_ok = inversions == 0 || (inversions == 1 && worst_inversion <= 0.02);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(4, baseline_ok && drop_ok && monotone_ok && secs < 900.0, "synthetic debias trend",
         "relearned means n=0/5/10: " + fmt(means[0]) + "/" + fmt(means[1]) + "/" +
             fmt(means[2]) + ", drop " + fmt(means[0] - best_adv) + " (need >= 0.15), " +
             std::to_string(inversions) + " inversion(s), " + fmt(secs) + "s");
}

// --- criterion 5: dimensionality interaction ---

void criterion_5() {
  const data::Corpus corpus = make_corpus(0.9);
  double k32[3], k128[3];
  std::vector<std::function<void()>> cells;
  for (int si = 0; si < 3; ++si) {
    cells.push_back([&, si]() {
      train::TrainConfig cfg = base_config();
      cfg.adversaries = 1;
      cfg.repr_dim = 32;
      cfg.seed = static_cast<std::uint64_t>(si + 1);
      k32[si] = relearned_bias(corpus, cfg);
    });
    cells.push_back([&, si]() {
      train::TrainConfig cfg = base_config();
      cfg.adversaries = 1;
      cfg.repr_dim = 128;
      cfg.seed = static_cast<std::uint64_t>(si + 1);
      k128[si] = relearned_bias(corpus, cfg);
    });
  }
  parallel(std::move(cells));
  const double m32 = (k32[0] + k32[1] + k32[2]) / 3.0;
  const double m128 = (k128[0] + k128[1] + k128[2]) / 3.0;
  report(5, m128 >= m32 + 0.02, "dimensionality interaction at n=1",
         "relearned bias k=128 " + fmt(m128) + " vs k=32 " + fmt(m32) + " (margin " +
             fmt(m128 - m32) + ", need >= 0.02)");
}

// --- criterion 6: hard-subset direction ---

void criterion_6() {
  const data::Corpus corpus = make_corpus(0.8);
  train::TrainConfig hyp_cfg = base_config();
  hyp_cfg.adversaries = 0;
  hyp_cfg.lambda = 0.0;
  hyp_cfg.learning_rate = 0.1;
  hyp_cfg.seed = 999;
  const auto hyp_only = probe::train_hypothesis_only(corpus, hyp_cfg);
  const auto hard = probe::hard_subset(corpus.test, hyp_only.predictor());
  if (hard.empty()) {
    report(6, false, "hard-subset direction", "hard subset is empty");
    return;
  }

  std::vector<double> base(3), ens(3);
  std::vector<std::function<void()>> cells;
  for (int si = 0; si < 3; ++si) {
    cells.push_back([&, si]() {
      train::TrainConfig cfg = base_config();
      cfg.adversaries = 0;
      cfg.lambda = 0.0;
      cfg.seed = static_cast<std::uint64_t>(si + 1);
      const auto trained = train::train(corpus, cfg);
      train::Checkpoint ckpt{cfg, corpus.vocab, trained.params};
      base[si] = probe::evaluate_examples(ckpt, hard);
    });
    cells.push_back([&, si]() {
      train::TrainConfig cfg = base_config();
      cfg.adversaries = 10;
      cfg.seed = static_cast<std::uint64_t>(si + 1);
      const auto trained = train::train(corpus, cfg);
      train::Checkpoint ckpt{cfg, corpus.vocab, trained.params};
      ens[si] = probe::evaluate_examples(ckpt, hard);
    });
  }
  parallel(std::move(cells));
  const auto boot = stats::bootstrap_test(ens, base, 10000, 42);
  report(6, mean_of(ens) >= mean_of(base), "hard-subset direction",
         "hard accuracy n=10 " + fmt(mean_of(ens)) + " vs n=0 " + fmt(mean_of(base)) +
             " on " + std::to_string(hard.size()) + " examples (one-sided bootstrap p " +
             fmt(boot.p_raw) + ")");
}

// --- criterion 7: scenario matrix direction ---

void criterion_7() {
  const data::Corpus corpus = make_corpus(0.9);
  double lin_train_lin_probe[3], lin_train_mlp_probe[3], mlp_train_mlp_probe[3];
  std::vector<std::function<void()>> cells;
  for (int si = 0; si < 3; ++si) {
    cells.push_back([&, si]() {
      train::TrainConfig cfg = base_config();
      cfg.adversaries = 5;
      cfg.seed = static_cast<std::uint64_t>(si + 1);
      probe::ScenarioSpec spec;
      spec.train_adversary = {nn::HeadSpec::Kind::kLinear, 0};
      spec.probe_head = {nn::HeadSpec::Kind::kMlp3, 64};
      const auto result = probe::run_scenario(spec, corpus, cfg, probe_options(10));
      lin_train_lin_probe[si] = result.linear_probes.max_accuracy;
      lin_train_mlp_probe[si] = result.mlp_probes.max_accuracy;
    });
    cells.push_back([&, si]() {
      train::TrainConfig cfg = base_config();
      cfg.adversaries = 5;
      cfg.seed = static_cast<std::uint64_t>(si + 1);
      probe::ScenarioSpec spec;
      spec.train_adversary = {nn::HeadSpec::Kind::kMlp3, 64};
      spec.probe_head = {nn::HeadSpec::Kind::kMlp3, 64};
      const auto result = probe::run_scenario(spec, corpus, cfg, probe_options(10));
      mlp_train_mlp_probe[si] = result.mlp_probes.max_accuracy;
    });
  }
  parallel(std::move(cells));

  const double lt_lp = (lin_train_lin_probe[0] + lin_train_lin_probe[1] +
                        lin_train_lin_probe[2]) / 3.0;
  const double lt_mp = (lin_train_mlp_probe[0] + lin_train_mlp_probe[1] +
                        lin_train_mlp_probe[2]) / 3.0;
  const double mt_mp = (mlp_train_mlp_probe[0] + mlp_train_mlp_probe[1] +
                        mlp_train_mlp_probe[2]) / 3.0;
  const bool mlp_adv_removes_more = mt_mp <= lt_mp;
  const bool mlp_probe_finds_more = lt_mp >= lt_lp;
  report(7, mlp_adv_removes_more && mlp_probe_finds_more, "scenario matrix direction",
         "mlp-train/mlp-probe " + fmt(mt_mp) + " <= linear-train/mlp-probe " + fmt(lt_mp) +
             "; linear-train mlp-probe " + fmt(lt_mp) + " >= linear-probe " + fmt(lt_lp));
}

// --- criterion 8: statistics exactness ---

double brute_force_mwu_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  const std::size_t n_a = a.size();
  auto u_of = [&](const std::vector<double>& ga, const std::vector<double>& gb) {
    double u = 0.0;
    for (double x : ga) {
      for (double y : gb) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    }
    return u;
  };
  const double center = static_cast<double>(n_a * b.size()) / 2.0;
  const double obs = std::abs(u_of(a, b) - center);
  std::size_t total = 0, extreme = 0;
  for (std::size_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n_a) continue;
    std::vector<double> ga, gb;
    for (std::size_t i = 0; i < n; ++i) (mask & (1u << i) ? ga : gb).push_back(pooled[i]);
    ++total;
    if (std::abs(u_of(ga, gb) - center) >= obs) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

void criterion_8() {
  Rng rng(808);
  int cases = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n_a = 1 + rng.below(8);
    const std::size_t n_b = 1 + rng.below(9 - std::min<std::size_t>(n_a, 8));
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n_a; ++i) a.push_back(static_cast<double>(rng.below(6)) / 5);
    for (std::size_t i = 0; i < n_b; ++i) b.push_back(static_cast<double>(rng.below(6)) / 5);
    worst = std::max(worst,
                     std::abs(stats::mann_whitney_u(a, b).p_raw - brute_force_mwu_p(a, b)));
    ++cases;
  }
  const bool mwu_ok = worst < 1e-12;
  const bool bonf_ok = stats::bonferroni(0.002, 4) == 0.008;

  int rejections = 0;
  Rng null_rng(2024);
  for (int sim = 0; sim < 200; ++sim) {
    std::vector<double> a, b;
    for (int i = 0; i < 10; ++i) {
      a.push_back(null_rng.uniform(0.4, 0.6));
      b.push_back(null_rng.uniform(0.4, 0.6));
    }
    if (stats::bootstrap_test(a, b, 1000, null_rng.next_u64()).p_raw < 0.05) ++rejections;
  }
  const double fraction = rejections / 200.0;
  const bool calib_ok = fraction >= 0.01 && fraction <= 0.12;
  report(8, mwu_ok && bonf_ok && calib_ok, "statistics exactness",
         std::to_string(cases) + " MWU cases max |diff| " + std::to_string(worst) +
             ", bonferroni(0.002,4)=" + fmt(stats::bonferroni(0.002, 4)) +
             ", null rejection fraction " + fmt(fraction));
}

// --- criterion 9: determinism & persistence ---

void criterion_9() {
  namespace fs = std::filesystem;
  const fs::path dir = "/tmp/adebias_acceptance_ckpt";
  fs::create_directories(dir);

  data::SyntheticSpec small;
  small.content_vocab = 40;
  small.leak_rate = 0.9;
  small.seed = 42;
  const data::Corpus corpus = data::generate(small, {1500, 400, 100});
  train::TrainConfig cfg = base_config();
  cfg.adversaries = 2;
  cfg.max_epochs = 5;
  cfg.patience = 5;

  auto run_once = [&](const std::string& name) {
    const auto trained = train::train(corpus, cfg);
    const std::string path = (dir / name).string();
    train::save_checkpoint(trained.params, cfg, corpus.vocab, path);
    train::Checkpoint ckpt{cfg, corpus.vocab, trained.params};
    return std::make_pair(path, probe::relearn_bias(ckpt, corpus, probe_options(3)));
  };
  const auto [path_a, report_a] = run_once("a.bin");
  const auto [path_b, report_b] = run_once("b.bin");
  const bool files_identical = train::file_hash(path_a) == train::file_hash(path_b);
  const bool reports_identical = report_a.accuracies == report_b.accuracies &&
                                 report_a.max_accuracy == report_b.max_accuracy;

  const train::Checkpoint loaded = train::load_checkpoint(path_a);
  const nn::ModelSpec spec = cfg.model_spec(corpus.vocab.size());
  double encode_diff = 0.0;
  const auto trained = train::train(corpus, cfg);
  for (int i = 0; i < 20; ++i) {
    const auto x = nn::encode(spec, trained.params, corpus.dev[i].hypothesis);
    const auto y = nn::encode(spec, loaded.params, corpus.dev[i].hypothesis);
    for (std::size_t c = 0; c < x.size(); ++c) {
      encode_diff = std::max(encode_diff, std::abs(x[c] - y[c]));
    }
  }

  bool corruption_detected = false;
  {
    std::ifstream in(path_a, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();
    bytes[1] = 'X';
    const std::string bad = (dir / "bad.bin").string();
    std::ofstream(bad, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    try {
      train::load_checkpoint(bad);
    } catch (const std::runtime_error&) {
      corruption_detected = true;
    }
  }
  fs::remove_all(dir);
  report(9, files_identical && reports_identical && encode_diff <= 1e-6 && corruption_detected,
         "determinism & persistence",
         std::string("checkpoints ") + (files_identical ? "bitwise equal" : "DIFFER") +
             ", probe reports " + (reports_identical ? "identical" : "DIFFER") +
             ", encode round-trip diff " + std::to_string(encode_diff) + ", corruption " +
             (corruption_detected ? "detected" : "MISSED"));
}

// --- criterion 10: spectator observation ---

void criterion_10() {
  const data::Corpus corpus = make_corpus(0.9);
  int ok_seeds = 0;
  std::string detail;
  std::vector<std::pair<double, double>> results(3);
  std::vector<std::function<void()>> cells;
  for (int si = 0; si < 3; ++si) {
    cells.push_back([&, si]() {
      train::TrainConfig cfg = base_config();
      cfg.adversaries = 1;
      cfg.adversary_head = {nn::HeadSpec::Kind::kLinear, 0};
      cfg.lambda = 0.85;
      cfg.learning_rate = 0.05;
      cfg.spectator_probes = 20;
      cfg.seed = static_cast<std::uint64_t>(si + 1);
      const auto trained = train::train(corpus, cfg);
      const auto& last = trained.log.epochs.back();
      double adv = 0.0, spect = 0.0;
      for (double v : last.adversary_dev_accuracy) adv = std::max(adv, v);
      for (double v : last.spectator_dev_accuracy) spect = std::max(spect, v);
      results[si] = {adv, spect};
    });
  }
  parallel(std::move(cells));
  for (int si = 0; si < 3; ++si) {
    if (results[si].first < results[si].second) ++ok_seeds;
    detail += (si ? "; " : "") + std::string("seed ") + std::to_string(si + 1) + ": adv " +
              fmt(results[si].first) + " vs spectators " + fmt(results[si].second);
  }
  report(10, ok_seeds >= 2, "spectator observation",
         detail + " (" + std::to_string(ok_seeds) + "/3 seeds)");
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_4();
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d of 10 criteria failed (total %.0fs)\n", g_failures, secs);
  return g_failures == 0 ? 0 : 1;
}
