#include "nntuck/io.hpp"
#include "nntuck/synth.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

using namespace nntuck;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

const char* cli_path() {
  const char* p = std::getenv("NNTUCK_CLI");
  REQUIRE_MESSAGE(p != nullptr, "NNTUCK_CLI must point at the built binary");
  return p;
}

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(cli_path()) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) res.output += buf.data();
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("nntuck_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string write_two_schema_dataset(const TempDir& tmp, int n, int l,
                                     std::uint64_t seed) {
  CssDataset ds;
  const PlantedScenario sc = PlantedScenario::balanced(
      n, l, ModelSpec{Regime::dependent, 2, 2, false}, 2.5, 0.4, 2.0, seed);
  ds.tensor = sc.sample_tensor();
  for (int i = 0; i < n; ++i) ds.node_labels.push_back("p" + std::to_string(i));
  if (l == n)
    ds.layer_labels = ds.node_labels;
  else
    for (int i = 0; i < l; ++i) ds.layer_labels.push_back("w" + std::to_string(i));
  const std::string path = tmp / ("data" + std::to_string(seed) + ".tsv");
  save_dataset(ds, path, DataFormat::long_tsv);
  return path;
}

}  // namespace

TEST_CASE("cli fit writes the report bundle and exits 0") {
  const TempDir tmp("fit");
  const std::string data = write_two_schema_dataset(tmp, 8, 8, 1);
  const CliResult res = run_cli("fit --data " + data +
                                " --regime dependent --k 2 --c 2 --restarts 3 "
                                "--max-iters 150 --seed 7 --out-dir " +
                                (tmp / "out"));
  CHECK(res.exit_code == 0);
  CHECK(fs::exists(tmp.path / "out" / "model.json"));
  CHECK(fs::exists(tmp.path / "out" / "manifest.json"));
  const json manifest = json::parse(read_text_file(tmp.path / "out" / "manifest.json"));
  CHECK(manifest.at("command") == "fit");
  CHECK(manifest.at("outputs").size() >= 10);
}

TEST_CASE("cli rejects an SCA fit when layers differ from nodes") {
  const TempDir tmp("sca");
  const std::string data = write_two_schema_dataset(tmp, 8, 6, 2);
  const CliResult res = run_cli("fit --data " + data +
                                " --regime sca --k 3 --out-dir " + (tmp / "out"));
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("SCA requires L = N") != std::string::npos);
}

TEST_CASE("cli reruns with identical flags produce identical artifacts") {
  const TempDir tmp("det");
  const std::string data = write_two_schema_dataset(tmp, 8, 8, 3);
  const std::string flags = " --regime dependent --k 2 --c 2 --restarts 3 "
                            "--max-iters 120 --seed 9 --out-dir ";
  CHECK(run_cli("fit --data " + data + flags + (tmp / "a")).exit_code == 0);
  CHECK(run_cli("fit --data " + data + flags + (tmp / "b")).exit_code == 0);
  for (const auto& entry : fs::directory_iterator(tmp.path / "a")) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") {
      const json ma = json::parse(read_text_file(entry.path()));
      const json mb = json::parse(read_text_file(tmp.path / "b" / name));
      CHECK(ma.at("config_hash") == mb.at("config_hash"));
      continue;  // wall time differs by design
    }
    CHECK(read_text_file(entry.path()) == read_text_file(tmp.path / "b" / name));
  }
}

TEST_CASE("cli sweep emits the full grid") {
  const TempDir tmp("sweep");
  const std::string data = write_two_schema_dataset(tmp, 8, 8, 4);
  const CliResult res = run_cli(
      "sweep --data " + data +
      " --regimes dependent,independent,redundant --k 1..2 --c 1..2 --folds 2 "
      "--restarts 2 --max-iters 100 --seed 3 --out-dir " +
      (tmp / "out"));
  CHECK(res.exit_code == 0);
  const std::string csv = read_text_file(tmp.path / "out" / "sweep.csv");
  long rows = std::count(csv.begin(), csv.end(), '\n') - 1;
  CHECK(rows == 8);  // dependent 2x2 + independent 2 + redundant 2
}

TEST_CASE("cli sweep rejects a single fold") {
  const TempDir tmp("fold1");
  const std::string data = write_two_schema_dataset(tmp, 8, 8, 5);
  const CliResult res =
      run_cli("sweep --data " + data + " --regimes dependent --k 1 --c 1 --folds 1 "
              "--out-dir " + (tmp / "out"));
  CHECK(res.exit_code == 2);
}

TEST_CASE("cli split test echoes the 1/alpha threshold") {
  const TempDir tmp("split");
  const std::string data = write_two_schema_dataset(tmp, 8, 8, 6);
  const CliResult res = run_cli(
      "test --data " + data +
      " --kind split-lrt --null-regime redundant --null-k 2 --alt-regime dependent "
      "--alt-k 2 --alt-c 2 --alpha 0.05 --restarts 2 --max-iters 100 --seed 4 "
      "--out-dir " + (tmp / "out"));
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("threshold 1/alpha = 20") != std::string::npos);
  CHECK(fs::exists(tmp.path / "out" / "test_result.json"));
  CHECK(fs::exists(tmp.path / "out" / "decision.txt"));
}

TEST_CASE("cli standard test rejects the redundant null on two-schema data") {
  const TempDir tmp("reject");
  const std::string data = write_two_schema_dataset(tmp, 10, 8, 7);
  const CliResult res = run_cli(
      "test --data " + data +
      " --kind standard-lrt --null-regime redundant --null-k 2 --alt-regime "
      "dependent --alt-k 2 --alt-c 2 --restarts 4 --max-iters 200 --seed 2 "
      "--out-dir " + (tmp / "out"));
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("reject H0") != std::string::npos);
  CHECK(res.output.find("fail to reject H0") == std::string::npos);
}

TEST_CASE("cli standard test keeps a true dependent null across seeds") {
  int fail_to_reject = 0;
  for (int s = 0; s < 3; ++s) {
    const TempDir tmp("null" + std::to_string(s));
    const std::string data =
        write_two_schema_dataset(tmp, 10, 8, 100 + static_cast<std::uint64_t>(s));
    const CliResult res = run_cli(
        "test --data " + data +
        " --kind standard-lrt --null-regime dependent --null-k 2 --null-c 2 "
        "--alt-regime independent --alt-k 2 --alpha 0.01 --restarts 4 "
        "--max-iters 200 --seed " + std::to_string(40 + s) + " --out-dir " +
        (tmp / "out"));
    CHECK(res.exit_code == 0);
    fail_to_reject += res.output.find("fail to reject H0") != std::string::npos;
  }
  CHECK(fail_to_reject >= 2);
}

TEST_CASE("cli relative emits the basis and transformed factors") {
  const TempDir tmp("rel");
  const std::string data = write_two_schema_dataset(tmp, 8, 8, 8);
  REQUIRE(run_cli("fit --data " + data +
                  " --regime dependent --k 2 --c 2 --restarts 3 --max-iters 150 "
                  "--seed 5 --out-dir " +
                  (tmp / "fit")).exit_code == 0);
  const CliResult res = run_cli("relative --model " + (tmp / "fit") + "/model.json "
                                "--basis auto --out-dir " + (tmp / "rel"));
  CHECK(res.exit_code == 0);
  CHECK(fs::exists(tmp.path / "rel" / "y_star.csv"));
  const json manifest = json::parse(read_text_file(tmp.path / "rel" / "manifest.json"));
  CHECK(manifest.at("config").contains("basis"));
  const json basis = json::parse(read_text_file(tmp.path / "rel" / "basis.json"));
  CHECK(basis.at("basis_layers").size() == 2);
}

TEST_CASE("cli consensus writes an edge list") {
  const TempDir tmp("con");
  const std::string data = write_two_schema_dataset(tmp, 8, 8, 9);
  const CliResult res =
      run_cli("consensus --data " + data + " --out-dir " + (tmp / "out"));
  CHECK(res.exit_code == 0);
  const std::string tsv = read_text_file(tmp.path / "out" / "consensus.tsv");
  CHECK(tsv.rfind("from\tto\n", 0) == 0);
}

TEST_CASE("cli simulate is reproducible from the seed") {
  const TempDir tmp("sim");
  write_text_file(tmp / "scenario.json",
                  R"({"n": 6, "l": 6, "spec": {"regime": "dependent", "k": 2, "c": 2},
                      "within_rate": 2.0, "between_rate": 0.5, "seed": 12})");
  CHECK(run_cli("simulate --scenario " + (tmp / "scenario.json") + " --out-dir " +
                (tmp / "s1")).exit_code == 0);
  CHECK(run_cli("simulate --scenario " + (tmp / "scenario.json") + " --out-dir " +
                (tmp / "s2")).exit_code == 0);
  CHECK(read_text_file(tmp.path / "s1" / "dataset.tsv") ==
        read_text_file(tmp.path / "s2" / "dataset.tsv"));
  CHECK(run_cli("simulate --scenario " + (tmp / "scenario.json") + " --seed 99 "
                "--out-dir " + (tmp / "s3")).exit_code == 0);
  CHECK(read_text_file(tmp.path / "s1" / "dataset.tsv") !=
        read_text_file(tmp.path / "s3" / "dataset.tsv"));
}

TEST_CASE("cli three-step pipeline: sweep, test trio, inspect") {
  // model selection, the three hypothesis tests, then the relative rewrite,
  // chained the way a survey analysis would run them
  const TempDir tmp("pipeline");
  const std::string data = write_two_schema_dataset(tmp, 10, 10, 42);
  const std::string knobs = " --restarts 3 --max-iters 150 --seed 31 ";

  CHECK(run_cli("sweep --data " + data +
                " --regimes dependent,independent,redundant --k 1..2 --c 1..2 "
                "--folds 2" + knobs + "--out-dir " + (tmp / "sweep")).exit_code == 0);

  const CliResult redundance = run_cli(
      "test --data " + data + " --kind split-lrt --null-regime redundant "
      "--null-k 2 --alt-regime dependent --alt-k 2 --alt-c 2" + knobs +
      "--out-dir " + (tmp / "t_red"));
  const CliResult dependence = run_cli(
      "test --data " + data + " --kind split-lrt --null-regime dependent "
      "--null-k 2 --null-c 2 --alt-regime independent --alt-k 2" + knobs +
      "--out-dir " + (tmp / "t_dep"));
  const CliResult agreement = run_cli(
      "test --data " + data + " --kind split-lrt --null-regime sca --null-k 2 "
      "--alt-regime dependent --alt-k 2 --alt-c 2" + knobs + "--out-dir " +
      (tmp / "t_sca"));
  for (const CliResult* res : {&redundance, &dependence, &agreement}) {
    CHECK(res->exit_code == 0);
    const bool decided = res->output.find("reject H0") != std::string::npos;
    CHECK(decided);
  }
  CHECK(agreement.output.find("caution") != std::string::npos);

  CHECK(run_cli("fit --data " + data + " --regime dependent --k 2 --c 2" + knobs +
                "--out-dir " + (tmp / "fit")).exit_code == 0);
  CHECK(run_cli("relative --model " + (tmp / "fit") + "/model.json --out-dir " +
                (tmp / "rel")).exit_code == 0);
  CHECK(fs::exists(tmp.path / "rel" / "heatmap_y_star.svg"));
}

TEST_CASE("cli maps estimation failures to exit 3") {
  const TempDir tmp("est");
  CssDataset ds;
  ds.tensor = Tensor3(1, 1, 1);
  ds.node_labels = {"solo"};
  ds.layer_labels = ds.node_labels;
  save_dataset(ds, tmp / "solo.tsv", DataFormat::long_tsv);
  // every cell is a self-tie, so nothing is observed once the diagonal drops
  const CliResult res = run_cli("fit --data " + (tmp / "solo.tsv") +
                                " --regime redundant --k 1 --out-dir " + (tmp / "out"));
  CHECK(res.exit_code == 3);
}
