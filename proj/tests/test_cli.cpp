#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "test_util.hpp"

namespace fs = std::filesystem;
using esam::test::TempDir;
using esam::test::slurp;

namespace {

std::string cli_bin() {
  const char* bin = std::getenv("ESAM_CLI_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "ESAM_CLI_BIN must point at the cli binary");
  return bin;
}

int run(const std::string& args, const std::string& out_file) {
  std::string cmd = cli_bin() + " " + args + " > " + out_file + " 2>&1";
  int rc = std::system(cmd.c_str());
  return rc < 0 ? rc : WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("cli end-to-end: synth, train, evaluate, diagnose") {
  TempDir dir("esam_cli");
  std::string data = dir.file("data");
  std::string out = dir.file("run");
  std::string log = dir.file("out.txt");

  REQUIRE(run("synth --out " + data + " --queries 120 --items 300 --seed 5", log) == 0);
  CHECK(slurp(log).find("wrote") != std::string::npos);
  for (const char* f : {"log.tsv", "items.tsv", "queries.tsv", "truth.tsv"})
    CHECK(fs::exists(data + "/" + f));

  dir.write("config.json", R"({
    "dataset": "generic",
    "data_dir": ")" + data + R"(",
    "out_dir": ")" + out + R"(",
    "embed_dim": 4,
    "hidden": [16, 8],
    "batch_size": 64,
    "epochs": 2,
    "n_items": 4,
    "k": 10,
    "seed": 3
  })");
  REQUIRE(run("train --config " + dir.file("config.json"), log) == 0);
  std::string train_out = slurp(log);
  CHECK(train_out.find("model=ESAM") != std::string::npos);
  CHECK(train_out.find("epoch=1") != std::string::npos);
  CHECK(train_out.find("L_DA=") != std::string::npos);
  for (const char* f : {"config.json", "train_log.txt", "checkpoint.ckpt",
                        "val_metrics.tsv"})
    CHECK(fs::exists(out + "/" + f));
  // the persisted log matches what was printed
  CHECK(train_out.find(slurp(out + "/train_log.txt").substr(0, 40)) !=
        std::string::npos);

  REQUIRE(run("evaluate --checkpoint " + out + "/checkpoint.ckpt --split test", log) == 0);
  CHECK(slurp(log).find("entire") != std::string::npos);
  CHECK(fs::exists(out + "/metrics_test.tsv"));
  CHECK(fs::exists(out + "/per_query_test.tsv"));

  REQUIRE(run("evaluate --checkpoint " + out + "/checkpoint.ckpt --split test --cold-start", log) == 0);
  CHECK(slurp(log).find("cold-start") != std::string::npos);
  CHECK(fs::exists(out + "/metrics_cold_test.tsv"));

  REQUIRE(run("diagnose --checkpoint " + out + "/checkpoint.ckpt --out " +
              dir.file("diag"), log) == 0);
  CHECK(slurp(log).find("domain distance") != std::string::npos);
  for (const char* f : {"score_histogram.tsv", "similarity_matrix.tsv",
                        "feature_dump.tsv", "domain_distance.tsv"})
    CHECK(fs::exists(dir.file("diag") + "/" + f));

  // a base-model run announces itself as such
  dir.write("base.json", R"({
    "dataset": "generic",
    "data_dir": ")" + data + R"(",
    "out_dir": ")" + dir.file("base_run") + R"(",
    "embed_dim": 4,
    "hidden": [16, 8],
    "batch_size": 64,
    "epochs": 1,
    "n_items": 4,
    "k": 10,
    "lambda1": 0, "lambda2": 0, "lambda3": 0
  })");
  REQUIRE(run("train --config " + dir.file("base.json"), log) == 0);
  CHECK(slurp(log).find("model=BaseModel") != std::string::npos);
}

TEST_CASE("cli fails cleanly on bad input") {
  TempDir dir("esam_cli_bad");
  std::string log = dir.file("out.txt");

  CHECK(run("train --config " + dir.file("absent.json"), log) != 0);
  CHECK(slurp(log).find("error:") != std::string::npos);

  dir.write("bad.json", R"({"data_dir": "/nowhere", "typo_key": 1})");
  CHECK(run("train --config " + dir.file("bad.json"), log) != 0);
  CHECK(slurp(log).find("typo_key") != std::string::npos);

  CHECK(run("evaluate --checkpoint " + dir.file("none.ckpt"), log) != 0);
  CHECK(run("frobnicate", log) != 0);
}
