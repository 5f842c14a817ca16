#include "adebias/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "adebias/rng.hpp"
#include "adebias/serialize.hpp"
#include "adebias/stats.hpp"

namespace adebias::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
  if (dims.empty() || adversary_counts.empty() || seeds.empty()) {
    throw std::invalid_argument("experiment grid must not be empty");
  }
  std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() != seeds.size()) {
    throw std::invalid_argument("experiment seeds must be distinct");
  }
  if (out_dir.empty()) throw std::invalid_argument("output directory required");
  train_template.validate();
}

namespace {

void to_json(json& j, const data::SyntheticSpec& s) {
  j = json{{"content_vocab", s.content_vocab},
           {"leak_rate", s.leak_rate},
           {"premise_min", s.premise_min},
           {"premise_max", s.premise_max},
           {"hyp_min", s.hyp_min},
           {"hyp_max", s.hyp_max},
           {"length_artifact", s.length_artifact},
           {"seed", s.seed}};
}

void from_json(const json& j, data::SyntheticSpec& s) {
  const data::SyntheticSpec d;
  s.content_vocab = j.value("content_vocab", d.content_vocab);
  s.leak_rate = j.value("leak_rate", d.leak_rate);
  s.premise_min = j.value("premise_min", d.premise_min);
  s.premise_max = j.value("premise_max", d.premise_max);
  s.hyp_min = j.value("hyp_min", d.hyp_min);
  s.hyp_max = j.value("hyp_max", d.hyp_max);
  s.length_artifact = j.value("length_artifact", d.length_artifact);
  s.seed = j.value("seed", d.seed);
}

json config_to_json(const ExperimentConfig& c) {
  json jd;
  to_json(jd, c.synthetic);
  return json{{"data",
               {{"synthetic", jd},
                {"use_jsonl", c.use_jsonl},
                {"jsonl",
                 {{"train", c.jsonl_train}, {"dev", c.jsonl_dev}, {"test", c.jsonl_test}}},
                {"sizes", {{"train", c.sizes.train}, {"dev", c.sizes.dev}, {"test", c.sizes.test}}}}},
              {"grid", {{"dims", c.dims}, {"adversaries", c.adversary_counts}, {"seeds", c.seeds}}},
              {"train", c.train_template},
              {"probe", c.probe_options},
              {"workers", c.workers},
              {"out", c.out_dir}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("data")) {
    const json& d = j.at("data");
    if (d.contains("synthetic")) from_json(d.at("synthetic"), c.synthetic);
    c.use_jsonl = d.value("use_jsonl", false);
    if (d.contains("jsonl")) {
      c.jsonl_train = d.at("jsonl").value("train", "");
      c.jsonl_dev = d.at("jsonl").value("dev", "");
      c.jsonl_test = d.at("jsonl").value("test", "");
    }
    if (d.contains("sizes")) {
      c.sizes.train = d.at("sizes").value("train", c.sizes.train);
      c.sizes.dev = d.at("sizes").value("dev", c.sizes.dev);
      c.sizes.test = d.at("sizes").value("test", c.sizes.test);
    }
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (g.contains("dims")) c.dims = g.at("dims").get<std::vector<std::size_t>>();
    if (g.contains("adversaries")) {
      c.adversary_counts = g.at("adversaries").get<std::vector<std::size_t>>();
    }
    if (g.contains("seeds")) c.seeds = g.at("seeds").get<std::vector<std::uint64_t>>();
  }
  if (j.contains("train")) j.at("train").get_to(c.train_template);
  if (j.contains("probe")) j.at("probe").get_to(c.probe_options);
  c.workers = j.value("workers", std::size_t{0});
  c.out_dir = j.value("out", std::string("out"));
  return c;
}

std::string hash_of(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

// Content hash of everything that determines a cell's outcome.
std::string cell_id(const ExperimentConfig& config, const train::TrainConfig& cell_cfg) {
  json j;
  json jd;
  to_json(jd, config.synthetic);
  j["data"] = config.use_jsonl
                  ? json{{"jsonl", {config.jsonl_train, config.jsonl_dev, config.jsonl_test}}}
                  : json{{"synthetic", jd},
                         {"sizes", {config.sizes.train, config.sizes.dev, config.sizes.test}}};
  j["train"] = cell_cfg;
  j["probe"] = config.probe_options;
  return hash_of(j.dump());
}

json cell_to_json(const CellResult& c) {
  json j;
  j["id"] = c.id;
  j["dim"] = c.dim;
  j["adversaries"] = c.adversaries;
  j["seed"] = c.seed;
  j["ok"] = c.ok;
  j["error"] = c.error;
  j["checkpoint_path"] = c.checkpoint_path;
  j["checkpoint_id"] = c.checkpoint_id;
  j["best_dev_accuracy"] = c.best_dev_accuracy;
  j["best_epoch"] = c.best_epoch;
  j["epochs_run"] = c.epochs_run;
  j["final_adversary_dev_max"] = c.final_adversary_dev_max;
  j["final_spectator_dev_max"] = c.final_spectator_dev_max;
  j["probe_report"] = json::parse(probe::report_to_json(c.probes));
  j["test_accuracy"] = c.test_accuracy;
  j["hard_accuracy"] = c.hard_accuracy;
  j["hard_size"] = c.hard_size;
  return j;
}

CellResult cell_from_json(const json& j) {
  CellResult c;
  c.id = j.at("id").get<std::string>();
  c.dim = j.at("dim").get<std::size_t>();
  c.adversaries = j.at("adversaries").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.ok = j.at("ok").get<bool>();
  c.error = j.value("error", "");
  c.checkpoint_path = j.value("checkpoint_path", "");
  c.checkpoint_id = j.value("checkpoint_id", "");
  c.best_dev_accuracy = j.value("best_dev_accuracy", 0.0);
  c.best_epoch = j.value("best_epoch", std::size_t{0});
  c.epochs_run = j.value("epochs_run", std::size_t{0});
  c.final_adversary_dev_max = j.value("final_adversary_dev_max", 0.0);
  c.final_spectator_dev_max = j.value("final_spectator_dev_max", 0.0);
  if (j.contains("probe_report")) {
    c.probes = probe::report_from_json(j.at("probe_report").dump());
  }
  c.test_accuracy = j.value("test_accuracy", 0.0);
  c.hard_accuracy = j.value("hard_accuracy", 0.0);
  c.hard_size = j.value("hard_size", std::size_t{0});
  return c;
}

data::Corpus load_corpus(const ExperimentConfig& config) {
  if (config.use_jsonl) {
    return data::load_jsonl(config.jsonl_train, config.jsonl_dev, config.jsonl_test);
  }
  return data::generate(config.synthetic, config.sizes);
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid experiment config: ") + e.what());
  }
  return config_from_json(j);
}

std::string config_to_json_text(const ExperimentConfig& config) {
  return config_to_json(config).dump(2);
}

ExperimentConfig desk_preset() {
  ExperimentConfig c;
  c.synthetic.leak_rate = 0.9;
  c.sizes = {20000, 2000, 2000};
  c.dims = {32, 64, 128};
  c.adversary_counts = {0, 1, 5, 10};
  c.seeds = {1, 2, 3};
  c.train_template.lambda = 0.5;
  c.train_template.max_epochs = 50;
  c.probe_options.count = 20;
  return c;
}

ExperimentConfig full_preset() {
  ExperimentConfig c;
  c.synthetic.leak_rate = 0.9;
  c.sizes = {20000, 2000, 2000};
  c.dims = {256, 512, 1024, 2048};
  c.adversary_counts = {0, 1, 5, 10, 20};
  c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  c.probe_options.count = 20;
  return c;
}

std::string cell_to_json_text(const CellResult& cell) { return cell_to_json(cell).dump(2); }

CellResult cell_from_json_text(const std::string& text) {
  return cell_from_json(json::parse(text));
}

bool GridResult::all_ok() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
}

GridResult run_grid(const ExperimentConfig& config) {
  config.validate();
  const fs::path out(config.out_dir);
  fs::create_directories(out / "cells");
  fs::create_directories(out / "checkpoints");
  fs::create_directories(out / "probes");

  struct Cell {
    train::TrainConfig cfg;
    std::string id;
    std::size_t index;
  };
  std::vector<Cell> todo;
  GridResult result;

  std::size_t index = 0;
  for (std::size_t dim : config.dims) {
    for (std::size_t n : config.adversary_counts) {
      for (std::uint64_t seed : config.seeds) {
        train::TrainConfig cfg = config.train_template;
        cfg.repr_dim = dim;
        cfg.adversaries = n;
        cfg.seed = seed;
        const std::string id = cell_id(config, cfg);

        const fs::path cell_path = out / "cells" / (id + ".json");
        bool restored = false;
        if (fs::exists(cell_path)) {
          try {
            std::ifstream in(cell_path);
            std::stringstream ss;
            ss << in.rdbuf();
            CellResult prev = cell_from_json_text(ss.str());
            if (prev.id == id && prev.ok) {
              result.cells.push_back(std::move(prev));
              ++result.skipped;
              restored = true;
            }
          } catch (...) {
            // unreadable cell file: recompute
          }
        }
        if (!restored) {
          result.cells.emplace_back();
          result.cells.back().id = id;
          result.cells.back().dim = dim;
          result.cells.back().adversaries = n;
          result.cells.back().seed = seed;
          todo.push_back({cfg, id, result.cells.size() - 1});
        }
        ++index;
      }
    }
  }
  (void)index;

  if (todo.empty()) return result;

  // Corpus and hard subset are built once and shared read-only. A failing
  // hypothesis-only model leaves the hard subset empty; cells still proceed.
  const data::Corpus corpus = load_corpus(config);
  std::vector<data::Example> hard;
  try {
    train::TrainConfig hyp_cfg = config.train_template;
    hyp_cfg.adversaries = 0;
    hyp_cfg.seed = Rng::derive(config.train_template.seed, "hard-subset");
    const probe::HypOnlyModel hyp_only = probe::train_hypothesis_only(corpus, hyp_cfg);
    hard = probe::hard_subset(corpus.test, hyp_only.predictor());
    result.hyp_only_test_accuracy =
        1.0 - static_cast<double>(hard.size()) / static_cast<double>(corpus.test.size());
  } catch (const std::exception&) {
    hard.clear();
  }
  result.hard_size = hard.size();

  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  auto run_cell = [&](Cell& cell) {
    CellResult& r = result.cells[cell.index];
    try {
      const train::TrainResult trained = train::train(corpus, cell.cfg);
      const std::string ckpt_path = (out / "checkpoints" / (cell.id + ".bin")).string();
      train::save_checkpoint(trained.params, cell.cfg, corpus.vocab, ckpt_path);

      train::Checkpoint ckpt;
      ckpt.config = cell.cfg;
      ckpt.vocab = corpus.vocab;
      ckpt.params = trained.params;

      probe::ProbeOptions popts = config.probe_options;
      popts.workers = 1;  // cells already run in parallel
      popts.checkpoint_id = train::file_hash(ckpt_path);
      r.checkpoint_path = ckpt_path;
      r.checkpoint_id = popts.checkpoint_id;
      r.probes = probe::relearn_bias(ckpt, corpus, popts);

      r.best_dev_accuracy = trained.log.best_dev_accuracy;
      r.best_epoch = trained.log.best_epoch;
      r.epochs_run = trained.log.epochs.size();
      const train::EpochStats& last = trained.log.epochs.back();
      r.final_adversary_dev_max =
          last.adversary_dev_accuracy.empty()
              ? 0.0
              : *std::max_element(last.adversary_dev_accuracy.begin(),
                                  last.adversary_dev_accuracy.end());
      r.final_spectator_dev_max =
          last.spectator_dev_accuracy.empty()
              ? 0.0
              : *std::max_element(last.spectator_dev_accuracy.begin(),
                                  last.spectator_dev_accuracy.end());
      r.test_accuracy = probe::evaluate_examples(ckpt, corpus.test);
      r.hard_size = hard.size();
      r.hard_accuracy = hard.empty() ? 0.0 : probe::evaluate_examples(ckpt, hard);
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
    {
      std::lock_guard<std::mutex> lock(io_mutex);
      std::ofstream cf(out / "cells" / (cell.id + ".json"));
      cf << cell_to_json_text(r) << '\n';
      std::ofstream pf(out / "probes" / (cell.id + ".json"));
      pf << probe::report_to_json(r.probes) << '\n';
    }
  };

  std::size_t workers =
      config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, todo.size());
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < todo.size(); i = next.fetch_add(1)) {
      run_cell(todo[i]);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Aggregator is the single writer of summary files.
  json summary;
  summary["config"] = config_to_json(config);
  summary["hyp_only_test_accuracy"] = result.hyp_only_test_accuracy;
  summary["hard_size"] = result.hard_size;
  summary["cells"] = json::array();
  for (const CellResult& c : result.cells) summary["cells"].push_back(cell_to_json(c));
  std::ofstream sf(out / "summary.json");
  sf << summary.dump(2) << '\n';
  return result;
}

// --- report emission ---

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());  // '.' decimal separator
  os << std::setprecision(6) << v;
  return os.str();
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

}  // namespace

void write_reports(const std::string& out_dir) {
  const fs::path out(out_dir);
  std::vector<CellResult> cells;
  if (fs::is_directory(out / "cells")) {
    for (const auto& entry : fs::directory_iterator(out / "cells")) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      std::stringstream ss;
      ss << in.rdbuf();
      try {
        cells.push_back(cell_from_json_text(ss.str()));
      } catch (const std::exception&) {
        // partial writes are treated as missing cells
      }
    }
  }
  if (cells.empty()) throw std::runtime_error("no completed cells under " + out_dir);
  std::sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    return std::tie(a.dim, a.adversaries, a.seed) < std::tie(b.dim, b.adversaries, b.seed);
  });

  fs::create_directories(out / "reports");
  json provenance;

  std::set<std::size_t> dims, counts;
  for (const CellResult& c : cells) {
    if (!c.ok) continue;
    dims.insert(c.dim);
    counts.insert(c.adversaries);
  }
  auto group = [&](std::size_t dim, std::size_t n) {
    std::vector<const CellResult*> g;
    for (const CellResult& c : cells) {
      if (c.ok && c.dim == dim && c.adversaries == n) g.push_back(&c);
    }
    return g;
  };

  // (a) relearned-bias table: rows = dim, columns = adversary count
  {
    std::ofstream f(out / "reports" / "bias_relearn.csv");
    f << "dim";
    for (std::size_t n : counts) f << ",n" << n;
    f << "\n";
    for (std::size_t dim : dims) {
      f << dim;
      for (std::size_t n : counts) {
        const auto g = group(dim, n);
        if (g.empty()) {
          f << ",NA";
          continue;
        }
        std::vector<double> vals;
        json ids = json::array();
        for (const auto* c : g) {
          vals.push_back(c->probes.max_accuracy);
          ids.push_back(c->id);
        }
        provenance["bias_relearn"][std::to_string(dim)][std::to_string(n)] = ids;
        f << ',' << fmt(mean_of(vals));
      }
      f << "\n";
    }
  }

  // (b) significance table: n=1 vs n=5 per dim, Bonferroni over the dims
  {
    std::ofstream f(out / "reports" / "significance.csv");
    f << "dim,mw_p,mw_p_corrected,b_p,b_p_corrected,mean_n1,median_n1,mean_n5,median_n5\n";
    const int factor = static_cast<int>(dims.size());
    for (std::size_t dim : dims) {
      const auto g1 = group(dim, 1);
      const auto g5 = group(dim, 5);
      if (g1.empty() || g5.empty()) {
        f << dim << ",NA,NA,NA,NA,NA,NA,NA,NA\n";
        continue;
      }
      std::vector<double> a, b;
      json ids = json::array();
      for (const auto* c : g1) {
        a.push_back(c->probes.max_accuracy);
        ids.push_back(c->id);
      }
      for (const auto* c : g5) {
        b.push_back(c->probes.max_accuracy);
        ids.push_back(c->id);
      }
      provenance["significance"][std::to_string(dim)] = ids;
      const auto mw = stats::with_bonferroni(stats::mann_whitney_u(a, b), factor);
      const auto bs = stats::with_bonferroni(
          stats::bootstrap_test(a, b, 10000, Rng::derive(1, "report-bootstrap", dim)), factor);
      f << dim << ',' << fmt(mw.p_raw) << ',' << fmt(mw.p_corrected) << ',' << fmt(bs.p_raw)
        << ',' << fmt(bs.p_corrected) << ',' << fmt(mean_of(a)) << ',' << fmt(median_of(a))
        << ',' << fmt(mean_of(b)) << ',' << fmt(median_of(b)) << "\n";
    }
  }

  // (c) per-corpus accuracy deltas vs the n=0 baseline
  {
    std::ofstream f(out / "reports" / "accuracy_delta.csv");
    f << "corpus,baseline";
    std::vector<std::size_t> adv_counts;
    for (std::size_t n : counts) {
      if (n > 0) {
        f << ",delta_n" << n;
        adv_counts.push_back(n);
      }
    }
    f << "\n";
    const std::pair<const char*, double CellResult::*> corpora[] = {
        {"test", &CellResult::test_accuracy}, {"hard", &CellResult::hard_accuracy}};
    std::map<std::size_t, std::vector<double>> all_deltas;
    for (const auto& [name, member] : corpora) {
      // baseline = mean over n=0 cells across all dims/seeds
      std::vector<double> base;
      json base_ids = json::array();
      for (const CellResult& c : cells) {
        if (c.ok && c.adversaries == 0) {
          base.push_back(c.*member);
          base_ids.push_back(c.id);
        }
      }
      if (base.empty()) {
        f << name << ",NA";
        for (std::size_t i = 0; i < adv_counts.size(); ++i) f << ",NA";
        f << "\n";
        continue;
      }
      provenance["accuracy_delta"][name]["baseline"] = base_ids;
      f << name << ',' << fmt(mean_of(base));
      for (std::size_t n : adv_counts) {
        std::vector<double> vals;
        json ids = json::array();
        for (const CellResult& c : cells) {
          if (c.ok && c.adversaries == n) {
            vals.push_back(c.*member);
            ids.push_back(c.id);
          }
        }
        if (vals.empty()) {
          f << ",NA";
          continue;
        }
        provenance["accuracy_delta"][name]["n" + std::to_string(n)] = ids;
        const double delta = mean_of(vals) - mean_of(base);
        all_deltas[n].push_back(delta);
        f << ',' << fmt(delta);
      }
      f << "\n";
    }
    f << "Average,";
    for (std::size_t n : adv_counts) {
      f << ',';
      if (!all_deltas[n].empty()) f << fmt(mean_of(all_deltas[n]));
    }
    f << "\n";
  }

  json summary;
  summary["cells"] = json::array();
  for (const CellResult& c : cells) {
    summary["cells"].push_back({{"id", c.id},
                                {"dim", c.dim},
                                {"adversaries", c.adversaries},
                                {"seed", c.seed},
                                {"ok", c.ok},
                                {"relearned_bias_max", c.probes.max_accuracy},
                                {"test_accuracy", c.test_accuracy},
                                {"hard_accuracy", c.hard_accuracy}});
  }
  summary["provenance"] = provenance;
  std::ofstream sf(out / "reports" / "summary.json");
  sf << summary.dump(2) << '\n';
}

}  // namespace adebias::experiment
