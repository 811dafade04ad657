#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args, const std::string& env = "") {
  const fs::path log = fs::temp_directory_path() / ("bysgnn_cli_" + std::to_string(std::random_device{}()) + ".log");
  const std::string cmd = env + " \"" BYSGNN_CLI "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  fs::remove(log);
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("bysgnn_cli_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return "\"" + (path / leaf).string() + "\""; }
};

const char* kTiny =
    " --epochs 1 --window 8 --horizon 2 --lift-dim 8 --temporal-dim 16 --semantic-dim 8 --embed-dim 16"
    " --heads 2 --gnn-hidden 8 --gnn-out 8 --train-stride 4 --eval-stride 4";

}  // namespace

TEST_CASE("synth, train, eval and inspect-graph end to end") {
  TempDir d;
  { std::ofstream(d.path / "spec.txt") << "n_pois=5\nn_categories=2\ndays=35\nclusters=2\n"; }
  REQUIRE(cli("synth --spec " + (d / "spec.txt") + " --out " + (d / "data") + " --seed 2").code == 0);
  CHECK(fs::exists(d.path / "data" / "visits.csv"));
  CHECK(fs::exists(d.path / "data" / "metadata.csv"));

  const auto train = cli("train --data " + (d / "data") + " --out " + (d / "run") + kTiny);
  CAPTURE(train.out);
  REQUIRE(train.code == 0);
  for (const char* f : {"checkpoint.json", "train_log.csv", "config.json"}) CHECK(fs::exists(d.path / "run" / f));

  const auto eval = cli("eval --checkpoint " + (d / "run/checkpoint.json") + " --data " + (d / "data") + " --out " +
                        (d / "run"));
  CAPTURE(eval.out);
  CHECK(eval.code == 0);
  CHECK(fs::exists(d.path / "run" / "eval_report.csv"));

  const auto graph = cli("inspect-graph --checkpoint " + (d / "run/checkpoint.json") + " --data " + (d / "data") +
                         " --timestamp 2019-02-01T10:00:00Z --out " + (d / "graph"));
  CAPTURE(graph.out);
  CHECK(graph.code == 0);
  CHECK(fs::exists(d.path / "graph" / "adjacency.csv"));

  const auto outside = cli("inspect-graph --checkpoint " + (d / "run/checkpoint.json") + " --data " + (d / "data") +
                           " --timestamp 2030-01-01T00:00:00Z --out " + (d / "graph"));
  CHECK(outside.code == 2);
}

TEST_CASE("input errors exit with status 2") {
  TempDir d;
  CHECK(cli("train --data " + (d / "missing") + " --out " + (d / "run")).code == 2);
  CHECK(cli("train --out " + (d / "run")).code == 2);  // required option
  CHECK(cli("no-such-command").code == 2);
  { std::ofstream(d.path / "bad_spec.txt") << "n_pois=5\nflavour=mint\n"; }
  const auto spec = cli("synth --spec " + (d / "bad_spec.txt") + " --out " + (d / "data"));
  CHECK(spec.code == 2);
  CHECK(spec.out.find("n_pois") != std::string::npos);  // lists the valid keys
  { std::ofstream(d.path / "bad.json") << R"({"train": {"learning_rate": 0.1}})"; }
  REQUIRE(cli("synth --out " + (d / "data") + " --seed 1").code == 0);
  CHECK(cli("train --data " + (d / "data") + " --out " + (d / "run") + " --config " + (d / "bad.json")).code == 2);
  CHECK(cli("--threads 0 synth --out " + (d / "data2")).code == 2);
}

TEST_CASE("diverging training exits with status 3") {
  TempDir d;
  { std::ofstream(d.path / "spec.txt") << "n_pois=4\nn_categories=2\ndays=21\nclusters=2\n"; }
  REQUIRE(cli("synth --spec " + (d / "spec.txt") + " --out " + (d / "data") + " --seed 3").code == 0);
  const auto r = cli("train --data " + (d / "data") + " --out " + (d / "run") + kTiny + " --lr 1e300");
  CAPTURE(r.out);
  CHECK(r.code == 3);
}

TEST_CASE("BYSGNN_THREADS is read and validated") {
  TempDir d;
  CHECK(cli("synth --out " + (d / "a")).code == 0);
  const auto bad = cli("synth --out " + (d / "b"), "BYSGNN_THREADS=zero");
  CHECK(bad.code == 0);
  CHECK(bad.out.find("BYSGNN_THREADS") != std::string::npos);
}
