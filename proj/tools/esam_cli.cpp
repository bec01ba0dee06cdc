#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "esam/checkpoint.hpp"
#include "esam/config.hpp"
#include "esam/eval.hpp"
#include "esam/synth.hpp"
#include "esam/trainer.hpp"

namespace fs = std::filesystem;

namespace {

esam::InteractionLog load_dataset(const esam::RunConfig& cfg) {
  if (cfg.dataset == "movielens") return esam::load_movielens(cfg.data_dir);
  return esam::load_generic_log(cfg.data_dir);
}

void write_per_query(const esam::SlicedMetrics& m, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw esam::IoError("cannot write " + path);
  f << std::setprecision(17);
  f << "slice\tquery\tndcg\trecall\tap\n";
  auto block = [&](const char* name, const esam::SliceReport& s) {
    for (const auto& [q, t] : s.per_query)
      f << name << '\t' << q << '\t' << t.ndcg << '\t' << t.recall << '\t'
        << t.map << '\n';
  };
  block("hot", m.hot);
  block("long_tail", m.long_tail);
  block("entire", m.entire);
}

int cmd_train(const std::string& config_path, std::int64_t seed_override) {
  esam::RunConfig cfg = esam::parse_run_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  esam::InteractionLog log = load_dataset(cfg);
  esam::Split split = esam::split_records(log, cfg.seed);

  fs::create_directories(cfg.out_dir);
  esam::write_run_config(cfg, cfg.out_dir + "/config.json");
  std::ofstream train_log(cfg.out_dir + "/train_log.txt", std::ios::trunc);

  struct Tee : std::ostream, std::streambuf {
    std::ostream &a, &b;
    Tee(std::ostream& a, std::ostream& b) : std::ostream(this), a(a), b(b) {}
    int overflow(int c) override {
      a.put(static_cast<char>(c));
      b.put(static_cast<char>(c));
      return c;
    }
  } tee(std::cout, train_log);

  esam::TrainResult result = esam::train_model(cfg, log, split, &tee);

  esam::Checkpoint ckpt;
  ckpt.tower = result.tower;
  ckpt.scoring = cfg.scoring();
  ckpt.loss = cfg.loss;
  ckpt.params = result.best_params;
  ckpt.adam = result.best_adam;
  esam::save_checkpoint(ckpt, cfg.out_dir + "/checkpoint.ckpt");

  esam::DisplayFrequencyIndex freq =
      esam::build_display_frequency(split.train, log.num_items());
  esam::EvalSetup setup{&result.best_params, &result.tower, cfg.scoring(), &log,
                        cfg.k};
  esam::SlicedMetrics metrics = esam::evaluate_sliced(setup, split.val,
                                                      split.train, freq);
  esam::write_metrics_report(metrics, cfg.out_dir + "/val_metrics.tsv");
  std::cout << "best epoch " << result.best_epoch << ", validation metrics:\n"
            << esam::format_metrics(metrics);
  return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& config_path,
                 const std::string& split_name, bool cold_start, std::int64_t k,
                 std::string out_dir) {
  std::string cfg_path = config_path.empty()
                             ? (fs::path(ckpt_path).parent_path() / "config.json").string()
                             : config_path;
  esam::RunConfig cfg = esam::parse_run_config(cfg_path);
  if (k > 0) cfg.k = static_cast<std::size_t>(k);
  esam::Checkpoint ckpt = esam::load_checkpoint(ckpt_path);
  esam::InteractionLog log = load_dataset(cfg);
  if (ckpt.tower.num_items != log.num_items() ||
      ckpt.tower.item_field_vocab != log.item_field_vocab ||
      ckpt.tower.query_field_vocab != log.query_field_vocab)
    throw esam::ConfigError(
        "checkpoint/config mismatch: tower vocab sizes disagree with dataset");
  esam::Split split = esam::split_records(log, cfg.seed);

  const std::vector<esam::Interaction>* train = &split.train;
  const std::vector<esam::Interaction>* eval_recs =
      split_name == "val" ? &split.val : &split.test;
  esam::ColdStartSplit cold;
  if (cold_start) {
    cold = esam::cold_start_split(split.test, split.train, cfg.seed);
    std::cout << "cold-start protocol: catalog " << log.num_items()
              << " items, training records " << split.train.size() << " -> "
              << cold.reduced_train.size() << ", cold test records "
              << cold.cold_test.size() << "\n";
    train = &cold.reduced_train;
    eval_recs = &cold.cold_test;
  }
  esam::DisplayFrequencyIndex freq =
      esam::build_display_frequency(*train, log.num_items());
  esam::EvalSetup setup{&ckpt.params, &ckpt.tower, ckpt.scoring, &log, cfg.k};
  esam::SlicedMetrics metrics = esam::evaluate_sliced(setup, *eval_recs, *train, freq);

  if (out_dir.empty()) out_dir = fs::path(ckpt_path).parent_path().string();
  if (out_dir.empty()) out_dir = ".";
  fs::create_directories(out_dir);
  std::string tag = std::string(cold_start ? "cold_" : "") + split_name;
  esam::write_metrics_report(metrics, out_dir + "/metrics_" + tag + ".tsv");
  write_per_query(metrics, out_dir + "/per_query_" + tag + ".tsv");
  std::cout << esam::format_metrics(metrics);
  return 0;
}

int cmd_diagnose(const std::string& ckpt_path, const std::string& config_path,
                 const std::string& out_dir, std::uint64_t seed) {
  std::string cfg_path = config_path.empty()
                             ? (fs::path(ckpt_path).parent_path() / "config.json").string()
                             : config_path;
  esam::RunConfig cfg = esam::parse_run_config(cfg_path);
  esam::Checkpoint ckpt = esam::load_checkpoint(ckpt_path);
  esam::InteractionLog log = load_dataset(cfg);
  esam::Split split = esam::split_records(log, cfg.seed);
  esam::EvalSetup setup{&ckpt.params, &ckpt.tower, ckpt.scoring, &log, cfg.k};
  esam::export_diagnostics(setup, split.train, out_dir, seed);

  std::size_t batch = std::min<std::size_t>(256, split.train.size() / 2);
  esam::DomainDistances d =
      esam::domain_distance(setup, split.train, batch, seed);
  std::cout << "domain distance (src-src, tgt-tgt, src-tgt): " << d.src_src
            << " " << d.tgt_tgt << " " << d.src_tgt << "\n";
  std::cout << "diagnostics written to " << out_dir << "\n";
  return 0;
}

int cmd_synth(const std::string& out_dir, const esam::SynthConfig& scfg) {
  esam::SynthWorld world = esam::generate_world(scfg);
  esam::InteractionLog log = esam::emit_log(world, esam::Rng::mix(scfg.seed, 0x106));
  esam::write_synth_dataset(world, log, out_dir);
  std::cout << "wrote " << log.records.size() << " records, "
            << log.num_items() << " items, " << log.num_queries()
            << " queries to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ESAM two-tower ranking: training, evaluation and diagnostics"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a model from a config file");
  std::string train_config;
  std::int64_t train_seed = -1;
  train->add_option("--config", train_config, "run config JSON")->required();
  train->add_option("--seed", train_seed, "override config seed");

  auto* eval = app.add_subcommand("evaluate", "sliced metrics for a checkpoint");
  std::string eval_ckpt, eval_config, eval_split = "test", eval_out;
  bool eval_cold = false;
  std::int64_t eval_k = -1;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--config", eval_config, "run config (default: sibling config.json)");
  eval->add_option("--split", eval_split, "val or test")
      ->check(CLI::IsMember({"val", "test"}));
  eval->add_flag("--cold-start", eval_cold, "cold-start deletion protocol");
  eval->add_option("--k", eval_k, "metric cutoff (default from config, 20)");
  eval->add_option("--out", eval_out, "output directory");

  auto* diag = app.add_subcommand("diagnose", "export model diagnostics");
  std::string diag_ckpt, diag_config, diag_out;
  std::uint64_t diag_seed = 7;
  diag->add_option("--checkpoint", diag_ckpt, "checkpoint file")->required();
  diag->add_option("--config", diag_config, "run config (default: sibling config.json)");
  diag->add_option("--out", diag_out, "output directory")->required();
  diag->add_option("--seed", diag_seed, "sampling seed");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out;
  esam::SynthConfig scfg;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--queries", scfg.num_queries, "number of queries");
  synth->add_option("--items", scfg.num_items, "number of items");
  synth->add_option("--alpha", scfg.alpha, "popularity power-law exponent");
  synth->add_option("--latent-dim", scfg.latent_dim, "latent factor dimension");
  synth->add_option("--relevant", scfg.relevant_per_query, "relevant items per query");
  synth->add_option("--impressions", scfg.impressions_per_query,
                    "displayed items per query");
  synth->add_option("--noise", scfg.label_noise, "label flip probability");
  synth->add_option("--exposure-bias", scfg.exposure_bias,
                    "correlation of popularity with the first latent factor");
  synth->add_option("--seed", scfg.seed, "world seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_config, train_seed);
    if (*eval)
      return cmd_evaluate(eval_ckpt, eval_config, eval_split, eval_cold, eval_k,
                          eval_out);
    if (*diag) return cmd_diagnose(diag_ckpt, diag_config, diag_out, diag_seed);
    if (*synth) return cmd_synth(synth_out, scfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
