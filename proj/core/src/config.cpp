#include "esam/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace esam {

using json = nlohmann::json;

void RunConfig::validate() const {
  if (dataset != "movielens" && dataset != "generic")
    throw ConfigError("config: dataset must be 'movielens' or 'generic'");
  if (mode != "recommendation" && mode != "search")
    throw ConfigError("config: mode must be 'recommendation' or 'search'");
  if (data_dir.empty()) throw ConfigError("config: data_dir is required");
  if (optimizer != "adam" && optimizer != "sgd")
    throw ConfigError("config: optimizer must be 'adam' or 'sgd'");
  if (hidden.empty() || hidden.back() == 0)
    throw ConfigError("config: hidden must end in the feature dimension L > 0");
  if (embed_dim == 0) throw ConfigError("config: embed_dim must be > 0");
  if (n_items == 0) throw ConfigError("config: n_items must be > 0");
  if (batch_size == 0) throw ConfigError("config: batch_size must be > 0");
  if (epochs == 0) throw ConfigError("config: epochs must be > 0");
  if (k == 0) throw ConfigError("config: k must be > 0");
  if (learning_rate <= 0) throw ConfigError("config: learning_rate must be > 0");
  if (grad_clip < 0) throw ConfigError("config: grad_clip must be >= 0");
  loss.validate();
}

RunConfig parse_run_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  static const std::set<std::string> known = {
      "dataset",    "data_dir",   "mode",       "out_dir",    "embed_dim",
      "hidden",     "normalize_features", "lambda1", "lambda2", "lambda3", "m1",
      "m2",         "p1",         "p2",         "num_classes", "detach_centers",
      "optimizer",  "learning_rate", "grad_clip", "n_items",  "batch_size",
      "epochs",     "k",          "patience",   "seed"};
  for (const auto& [key, val] : j.items())
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");

  RunConfig c;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  get("dataset", c.dataset);
  get("data_dir", c.data_dir);
  get("mode", c.mode);
  get("out_dir", c.out_dir);
  get("embed_dim", c.embed_dim);
  get("hidden", c.hidden);
  get("normalize_features", c.normalize_features);
  get("lambda1", c.loss.lambda1);
  get("lambda2", c.loss.lambda2);
  get("lambda3", c.loss.lambda3);
  get("m1", c.loss.m1);
  get("m2", c.loss.m2);
  get("p1", c.loss.p1);
  get("p2", c.loss.p2);
  get("num_classes", c.loss.num_classes);
  get("detach_centers", c.loss.detach_centers);
  get("optimizer", c.optimizer);
  get("learning_rate", c.learning_rate);
  get("grad_clip", c.grad_clip);
  get("n_items", c.n_items);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("k", c.k);
  get("patience", c.patience);
  get("seed", c.seed);
  c.validate();
  return c;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_run_config_text(ss.str());
}

std::string run_config_to_json(const RunConfig& c) {
  json j{{"dataset", c.dataset},
         {"data_dir", c.data_dir},
         {"mode", c.mode},
         {"out_dir", c.out_dir},
         {"embed_dim", c.embed_dim},
         {"hidden", c.hidden},
         {"normalize_features", c.normalize_features},
         {"lambda1", c.loss.lambda1},
         {"lambda2", c.loss.lambda2},
         {"lambda3", c.loss.lambda3},
         {"m1", c.loss.m1},
         {"m2", c.loss.m2},
         {"p1", c.loss.p1},
         {"p2", c.loss.p2},
         {"num_classes", c.loss.num_classes},
         {"detach_centers", c.loss.detach_centers},
         {"optimizer", c.optimizer},
         {"learning_rate", c.learning_rate},
         {"grad_clip", c.grad_clip},
         {"n_items", c.n_items},
         {"batch_size", c.batch_size},
         {"epochs", c.epochs},
         {"k", c.k},
         {"patience", c.patience},
         {"seed", c.seed}};
  return j.dump(2);
}

void write_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << run_config_to_json(cfg) << '\n';
}

}  // namespace esam
