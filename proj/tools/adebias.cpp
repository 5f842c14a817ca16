// Experiment CLI: synthetic corpora, ensemble adversarial training, the
// freeze-and-relearn probe protocol, grids, statistics, and report tables.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adebias/data.hpp"
#include "adebias/experiment.hpp"
#include "adebias/probe.hpp"
#include "adebias/serialize.hpp"
#include "adebias/stats.hpp"
#include "adebias/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace adebias;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCellFailed = 1;
constexpr int kExitConfigError = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct CommonFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> preset;
  std::optional<double> lambda;
  std::optional<std::size_t> adversaries;
  std::optional<std::size_t> dim;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta;
  std::optional<std::string> out;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "experiment config JSON file");
  cmd->add_option("--preset", f.preset, "config preset: desk or full");
  cmd->add_option("--lambda", f.lambda, "adversarial trade-off in [0,1]");
  cmd->add_option("--adversaries", f.adversaries, "number of adversaries n");
  cmd->add_option("--dim", f.dim, "representation dimension k");
  cmd->add_option("--seed", f.seed, "training seed");
  cmd->add_option("--beta", f.beta, "synthetic leak rate");
  cmd->add_option("--out", f.out, "output directory");
}

experiment::ExperimentConfig resolve_config(const CommonFlags& f) {
  experiment::ExperimentConfig cfg;
  if (f.preset) {
    if (*f.preset == "desk") {
      cfg = experiment::desk_preset();
    } else if (*f.preset == "full") {
      cfg = experiment::full_preset();
    } else {
      throw std::invalid_argument("unknown preset: " + *f.preset);
    }
  }
  if (f.config_path) cfg = experiment::config_from_json_text(read_file(*f.config_path));
  if (f.lambda) cfg.train_template.lambda = *f.lambda;
  if (f.adversaries) {
    cfg.train_template.adversaries = *f.adversaries;
    cfg.adversary_counts = {*f.adversaries};
  }
  if (f.dim) {
    cfg.train_template.repr_dim = *f.dim;
    cfg.dims = {*f.dim};
  }
  if (f.seed) {
    cfg.train_template.seed = *f.seed;
    cfg.seeds = {*f.seed};
  }
  if (f.beta) cfg.synthetic.leak_rate = *f.beta;
  if (f.out) cfg.out_dir = *f.out;
  return cfg;
}

data::Corpus corpus_of(const experiment::ExperimentConfig& cfg) {
  if (cfg.use_jsonl) {
    return data::load_jsonl(cfg.jsonl_train, cfg.jsonl_dev, cfg.jsonl_test);
  }
  return data::generate(cfg.synthetic, cfg.sizes);
}

std::vector<double> parse_samples(const std::string& arg) {
  // Either a comma list of numbers or a path to a JSON array / ProbeReport dir
  std::vector<double> out;
  if (fs::exists(arg)) {
    const json j = json::parse(read_file(arg));
    if (j.is_array()) {
      for (const auto& v : j) out.push_back(v.get<double>());
    } else if (j.contains("accuracies")) {
      for (const auto& v : j.at("accuracies")) out.push_back(v.get<double>());
    } else {
      throw std::runtime_error(arg + ": expected a JSON array or a probe report");
    }
    return out;
  }
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::runtime_error("no samples in \"" + arg + "\"");
  return out;
}

int cmd_gen_data(const CommonFlags& flags) {
  const auto cfg = resolve_config(flags);
  const data::Corpus corpus = corpus_of(cfg);
  fs::create_directories(cfg.out_dir);
  data::write_jsonl(corpus, cfg.out_dir);
  std::cout << "wrote train/dev/test JSONL under " << cfg.out_dir << " ("
            << corpus.train.size() << "/" << corpus.dev.size() << "/" << corpus.test.size()
            << " examples, vocabulary " << corpus.vocab.size() << ")\n";
  return kExitOk;
}

int cmd_train(const CommonFlags& flags) {
  const auto cfg = resolve_config(flags);
  const data::Corpus corpus = corpus_of(cfg);
  const train::TrainResult result = train::train(corpus, cfg.train_template);
  fs::create_directories(cfg.out_dir);
  const std::string ckpt = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
  train::save_checkpoint(result.params, cfg.train_template, corpus.vocab, ckpt);

  json log;
  log["best_epoch"] = result.log.best_epoch;
  log["best_dev_accuracy"] = result.log.best_dev_accuracy;
  log["epochs"] = json::array();
  for (const auto& e : result.log.epochs) {
    log["epochs"].push_back({{"epoch", e.epoch},
                             {"train_loss", e.train_loss},
                             {"dev_task_accuracy", e.dev_task_accuracy},
                             {"adversary_dev_accuracy", e.adversary_dev_accuracy},
                             {"spectator_dev_accuracy", e.spectator_dev_accuracy}});
  }
  write_file((fs::path(cfg.out_dir) / "train_log.json").string(), log.dump(2) + "\n");
  std::cout << "checkpoint " << ckpt << " (best dev accuracy "
            << result.log.best_dev_accuracy << " at epoch " << result.log.best_epoch
            << ")\n";
  return kExitOk;
}

int cmd_probe(const CommonFlags& flags, const std::string& checkpoint_path,
              std::size_t count, const std::string& kind) {
  const auto cfg = resolve_config(flags);
  const data::Corpus corpus = corpus_of(cfg);
  const train::Checkpoint ckpt = train::load_checkpoint(checkpoint_path);

  probe::ProbeOptions opts = cfg.probe_options;
  opts.count = count;
  opts.head.kind = nn::head_kind_from(kind);
  if (flags.seed) opts.seed = *flags.seed;
  opts.checkpoint_id = train::file_hash(checkpoint_path);
  const probe::ProbeReport report = probe::relearn_bias(ckpt, corpus, opts);

  fs::create_directories(cfg.out_dir);
  const std::string path = (fs::path(cfg.out_dir) / "probe_report.json").string();
  write_file(path, probe::report_to_json(report) + "\n");
  std::cout << "relearned bias: max " << report.max_accuracy << " over "
            << report.accuracies.size() << " probes -> " << path << "\n";
  return kExitOk;
}

int cmd_scenario(const CommonFlags& flags, const std::string& name) {
  const auto cfg = resolve_config(flags);
  const auto sep = name.find('-');
  if (sep == std::string::npos) {
    throw std::invalid_argument("scenario must look like linear-mlp3 (train-probe)");
  }
  probe::ScenarioSpec spec;
  spec.train_adversary.kind = nn::head_kind_from(name.substr(0, sep));
  spec.probe_head.kind = nn::head_kind_from(name.substr(sep + 1));
  const data::Corpus corpus = corpus_of(cfg);
  const probe::ScenarioResult result =
      probe::run_scenario(spec, corpus, cfg.train_template, cfg.probe_options);

  fs::create_directories(cfg.out_dir);
  json j;
  j["scenario"] = name;
  j["best_dev_accuracy"] = result.log.best_dev_accuracy;
  j["linear_probes"] = json::parse(probe::report_to_json(result.linear_probes));
  j["mlp_probes"] = json::parse(probe::report_to_json(result.mlp_probes));
  const std::string path = (fs::path(cfg.out_dir) / ("scenario_" + name + ".json")).string();
  write_file(path, j.dump(2) + "\n");
  std::cout << "scenario " << name << ": linear-probe max " << result.linear_probes.max_accuracy
            << ", mlp-probe max " << result.mlp_probes.max_accuracy << " -> " << path << "\n";
  return kExitOk;
}

int cmd_stats(const std::string& a_arg, const std::string& b_arg, std::size_t iterations,
              int bonferroni_m, std::uint64_t seed, const std::string& out_path) {
  const std::vector<double> a = parse_samples(a_arg);
  const std::vector<double> b = parse_samples(b_arg);
  const auto mw = stats::with_bonferroni(stats::mann_whitney_u(a, b), bonferroni_m);
  const auto bs =
      stats::with_bonferroni(stats::bootstrap_test(a, b, iterations, seed), bonferroni_m);

  auto mean = [](const std::vector<double>& xs) {
    double s = 0;
    for (double v : xs) s += v;
    return s / static_cast<double>(xs.size());
  };
  auto median = [](std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return xs.size() % 2 ? xs[xs.size() / 2]
                         : 0.5 * (xs[xs.size() / 2 - 1] + xs[xs.size() / 2]);
  };

  json j;
  j["mann_whitney"] = {{"U", mw.statistic},
                       {"p", mw.p_raw},
                       {"p_corrected", mw.p_corrected},
                       {"correction_factor", mw.correction_factor}};
  j["bootstrap"] = {{"mean_difference", bs.statistic},
                    {"p", bs.p_raw},
                    {"p_corrected", bs.p_corrected},
                    {"correction_factor", bs.correction_factor},
                    {"iterations", iterations}};
  j["group_a"] = {{"n", a.size()}, {"mean", mean(a)}, {"median", median(a)}};
  j["group_b"] = {{"n", b.size()}, {"mean", mean(b)}, {"median", median(b)}};

  std::cout << "group A: n=" << a.size() << " mean=" << mean(a) << " median=" << median(a)
            << "\n";
  std::cout << "group B: n=" << b.size() << " mean=" << mean(b) << " median=" << median(b)
            << "\n";
  std::cout << "MW  p=" << mw.p_raw << " corrected=" << mw.p_corrected << " (U=" << mw.statistic
            << ")\n";
  std::cout << "B   p=" << bs.p_raw << " corrected=" << bs.p_corrected
            << " (mean diff=" << bs.statistic << ")\n";
  if (!out_path.empty()) write_file(out_path, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_grid(const CommonFlags& flags, std::size_t workers) {
  auto cfg = resolve_config(flags);
  if (workers) cfg.workers = workers;
  const experiment::GridResult result = experiment::run_grid(cfg);
  std::size_t failed = 0;
  for (const auto& c : result.cells) {
    if (!c.ok) {
      ++failed;
      std::cerr << "cell " << c.id << " (k=" << c.dim << " n=" << c.adversaries
                << " seed=" << c.seed << ") failed: " << c.error << "\n";
    }
  }
  std::cout << result.cells.size() << " cells (" << result.skipped << " restored, " << failed
            << " failed) -> " << cfg.out_dir << "\n";
  if (result.hard_size == 0 && result.skipped < result.cells.size()) {
    std::cerr << "warning: hard subset is empty (hypothesis-only model made no errors)\n";
  }
  return failed ? kExitCellFailed : kExitOk;
}

int cmd_report(const std::string& dir) {
  experiment::write_reports(dir);
  std::cout << "reports under " << (fs::path(dir) / "reports").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble adversarial debiasing experiments"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus as JSONL");
  add_common_flags(gen, flags);

  auto* tr = app.add_subcommand("train", "train one model and save a checkpoint");
  add_common_flags(tr, flags);

  auto* pr = app.add_subcommand("probe", "relearn bias probes on a frozen checkpoint");
  add_common_flags(pr, flags);
  std::string checkpoint_path;
  std::size_t probe_count = 20;
  std::string probe_kind = "linear";
  pr->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  pr->add_option("--probes", probe_count, "number of probes m");
  pr->add_option("--probe-kind", probe_kind, "linear or mlp3");

  auto* sc = app.add_subcommand("scenario", "adversary-kind x probe-kind scenario run");
  add_common_flags(sc, flags);
  std::string scenario_name = "linear-linear";
  sc->add_option("--scenario", scenario_name, "train-probe kinds, e.g. mlp3-linear");

  auto* st = app.add_subcommand("stats", "bootstrap + Mann-Whitney tests on two samples");
  std::string a_arg, b_arg, stats_out;
  std::size_t iterations = 10000;
  int bonferroni_m = 1;
  std::uint64_t stats_seed = 1;
  st->add_option("--a", a_arg, "comma list, JSON array file, or probe report")->required();
  st->add_option("--b", b_arg, "comma list, JSON array file, or probe report")->required();
  st->add_option("--iterations", iterations, "bootstrap iterations");
  st->add_option("--bonferroni", bonferroni_m, "correction factor");
  st->add_option("--seed", stats_seed, "bootstrap seed");
  st->add_option("--out", stats_out, "write TestResult JSON here");

  auto* gr = app.add_subcommand("grid", "run the dimension x adversaries x seed grid");
  add_common_flags(gr, flags);
  std::size_t workers = 0;
  gr->add_option("--workers", workers, "worker pool size (default: logical cores)");

  auto* rp = app.add_subcommand("report", "emit CSV tables and summary from grid output");
  std::string report_dir;
  rp->add_option("--dir", report_dir, "grid output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfigError;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(flags);
    if (tr->parsed()) return cmd_train(flags);
    if (pr->parsed()) return cmd_probe(flags, checkpoint_path, probe_count, probe_kind);
    if (sc->parsed()) return cmd_scenario(flags, scenario_name);
    if (st->parsed()) return cmd_stats(a_arg, b_arg, iterations, bonferroni_m, stats_seed,
                                       stats_out);
    if (gr->parsed()) return cmd_grid(flags, workers);
    if (rp->parsed()) return cmd_report(report_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCellFailed;
  }
  return kExitConfigError;
}
