// Batch command-line surface for the NNTuck toolkit: estimation, rank
// sweeps, hypothesis tests, interpretive transforms, and seeded simulation.
// Every command is a pure function of its flags, input bytes and seed; the
// only run-varying output is the wall time recorded in the manifest.

#include "nntuck/analysis.hpp"
#include "nntuck/estimate.hpp"
#include "nntuck/io.hpp"
#include "nntuck/model.hpp"
#include "nntuck/modelselect.hpp"
#include "nntuck/rng.hpp"
#include "nntuck/stats.hpp"
#include "nntuck/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nntuck;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitEstimation = 3;

struct ManifestWriter {
  std::string command;
  json config;
  std::uint64_t master_seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void add_input(const fs::path& path) {
    if (fs::is_directory(path)) {
      // digest the manifest file; the per-layer files are covered by the load
      inputs.emplace_back(path.string(), file_digest(path / "manifest.json"));
    } else {
      inputs.emplace_back(path.string(), file_digest(path));
    }
  }

  void write(const fs::path& out_dir) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    json in = json::array();
    for (const auto& [path, digest] : inputs)
      in.push_back({{"path", path}, {"digest", digest}});
    std::sort(outputs.begin(), outputs.end());
    const json manifest = {{"command", command},
                           {"config", config},
                           {"config_hash", fnv1a64_hex(config.dump())},
                           {"master_seed", master_seed},
                           {"inputs", in},
                           {"outputs", outputs},
                           {"wall_time_seconds", wall}};
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  }
};

CssDataset load_input(const std::string& path, const std::string& format) {
  if (format == "auto") return load_dataset_auto(path);
  return load_dataset(path, data_format_from_name(format));
}

std::vector<int> parse_range(const std::string& text) {
  std::vector<int> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = std::stoi(text.substr(0, dots));
    const int hi = std::stoi(text.substr(dots + 2));
    if (hi < lo) throw CLI::ValidationError("range", "range upper bound below lower");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string piece =
        text.substr(start, comma == std::string::npos ? std::string::npos
                                                      : comma - start);
    if (!piece.empty()) out.push_back(std::stoi(piece));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw CLI::ValidationError("range", "empty range");
  return out;
}

ModelSpec make_spec(const std::string& regime, int k, int c, bool symmetric) {
  ModelSpec spec;
  spec.regime = regime_from_name(regime);
  spec.k = k;
  spec.c = c;
  spec.symmetric = symmetric;
  return spec;
}

// Shared estimation knobs.
struct FitFlags {
  int restarts = 0;
  int max_iters = 2000;
  double rel_tol = 1e-6;
  double init_scale = 0.0;
  std::string sca_strategy = "averaged-factors";
  bool include_diagonal = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--restarts", restarts,
                    "random restarts (0 = regime default: 20, SCA 50)");
    cmd->add_option("--max-iters", max_iters, "iteration cap per restart");
    cmd->add_option("--rel-tol", rel_tol, "relative KL change to stop at");
    cmd->add_option("--init-scale", init_scale,
                    "initialization scale (0 = match the observed mean)");
    cmd->add_option("--sca-strategy", sca_strategy,
                    "averaged-factors | naive | averaged-updates")
        ->check(CLI::IsMember({"averaged-factors", "naive", "averaged-updates"}));
    cmd->add_flag("--include-diagonal", include_diagonal,
                  "keep self-ties in the likelihood");
  }

  FitConfig config(const ModelSpec& spec, std::uint64_t seed) const {
    FitConfig cfg;
    cfg.spec = spec;
    cfg.restarts = restarts;
    cfg.max_iters = max_iters;
    cfg.rel_tol = rel_tol;
    cfg.init_scale = init_scale;
    cfg.sca_strategy = sca_strategy_from_name(sca_strategy);
    cfg.exclude_diagonal = !include_diagonal;
    cfg.seed = seed;
    return cfg;
  }
};

int cmd_fit(const std::string& data_path, const std::string& format,
            const std::string& regime, int k, int c, bool symmetric,
            const FitFlags& flags, std::uint64_t seed, const fs::path& out_dir) {
  ManifestWriter manifest;
  manifest.command = "fit";
  manifest.master_seed = seed;

  const CssDataset ds = load_input(data_path, format);
  manifest.add_input(data_path);
  const ModelSpec spec = make_spec(regime, k, c, symmetric);
  spec.validate(ds.tensor.n1(), ds.tensor.n3());
  const FitConfig cfg = flags.config(spec, seed);
  manifest.config = fit_config_to_json(cfg);

  fs::create_directories(out_dir);
  ReportBundle bundle;
  bundle.node_labels = ds.node_labels;
  bundle.layer_labels = ds.layer_labels;
  bundle.fit = fit(ds.tensor, Mask3::ones(ds.tensor.n1(), ds.tensor.n2(), ds.tensor.n3()),
                   cfg);
  bundle.fit_config = cfg;
  manifest.outputs = save_report(bundle, out_dir);
  manifest.write(out_dir);
  std::cout << "fit: final KL " << format_double(bundle.fit->final_kl)
            << ", log-likelihood " << format_double(bundle.fit->final_loglik)
            << ", " << bundle.fit->iterations << " iterations\n";
  return kExitOk;
}

int cmd_sweep(const std::string& data_path, const std::string& format,
              const std::string& regimes_text, const std::string& k_text,
              const std::string& c_text, int folds, const std::string& fold_mode,
              const FitFlags& flags, std::uint64_t seed, const fs::path& out_dir) {
  ManifestWriter manifest;
  manifest.command = "sweep";
  manifest.master_seed = seed;

  const CssDataset ds = load_input(data_path, format);
  manifest.add_input(data_path);

  std::vector<Regime> regimes;
  for (const std::string& name : CLI::detail::split(regimes_text, ','))
    regimes.push_back(regime_from_name(name));
  const std::vector<int> k_range = parse_range(k_text);
  const std::vector<int> c_range = parse_range(c_text);

  const FoldPlan plan = make_folds(ds.tensor.n1(), ds.tensor.n3(), folds,
                                   rng::derive(seed, 0xF01D), fold_mode == "iid");
  const FitConfig cfg = flags.config(ModelSpec{}, seed);
  manifest.config = {{"fit", fit_config_to_json(cfg)},
                     {"regimes", regimes_text},
                     {"k", k_text},
                     {"c", c_text},
                     {"folds", folds},
                     {"fold_mode", fold_mode}};

  const SweepResult result = sweep(ds.tensor, regimes, k_range, c_range, plan, cfg);

  fs::create_directories(out_dir);
  ReportBundle bundle;
  bundle.sweep = result;
  manifest.outputs = save_report(bundle, out_dir);
  manifest.write(out_dir);

  const SweepCell& chosen = result.grid[static_cast<std::size_t>(result.chosen)];
  std::cout << "sweep: chose " << regime_name(chosen.regime) << " K=" << chosen.k
            << " C=" << chosen.c << " (mean test AUC "
            << format_double(chosen.mean_auc) << ")\n"
            << result.note << "\n";
  return kExitOk;
}

int cmd_test(const std::string& data_path, const std::string& format,
             const std::string& kind, const std::string& null_regime, int null_k,
             int null_c, const std::string& alt_regime, int alt_k, int alt_c,
             bool symmetric, double alpha, double split_fraction,
             const std::string& granularity, const FitFlags& flags,
             std::uint64_t seed, const fs::path& out_dir) {
  ManifestWriter manifest;
  manifest.command = "test";
  manifest.master_seed = seed;

  const CssDataset ds = load_input(data_path, format);
  manifest.add_input(data_path);

  TestSpec spec;
  spec.null_spec = make_spec(null_regime, null_k, null_c, symmetric);
  spec.alt_spec = make_spec(alt_regime, alt_k, alt_c, symmetric);
  spec.alpha = alpha;
  spec.kind = test_kind_from_name(kind);
  spec.split_fraction = split_fraction;
  spec.granularity = split_granularity_from_name(granularity);
  spec.validate(ds.tensor.n1(), ds.tensor.n3());

  const FitConfig cfg = flags.config(spec.null_spec, seed);
  manifest.config = {{"test", test_spec_to_json(spec)},
                     {"fit", fit_config_to_json(cfg)}};

  const TestResult result = spec.kind == TestKind::standard_lrt
                                ? standard_lrt(ds.tensor, spec, cfg)
                                : split_lrt(ds.tensor, spec, cfg, seed);

  fs::create_directories(out_dir);
  ReportBundle bundle;
  bundle.test = result;
  bundle.test_spec = spec;
  bundle.fit_config = cfg;
  manifest.outputs = save_report(bundle, out_dir);
  manifest.write(out_dir);

  std::cout << "H0: " << regime_name(spec.null_spec.regime) << " K=" << spec.null_spec.k;
  if (spec.null_spec.regime == Regime::dependent) std::cout << " C=" << spec.null_spec.c;
  std::cout << " | H1: " << regime_name(spec.alt_spec.regime) << " K=" << spec.alt_spec.k;
  if (spec.alt_spec.regime == Regime::dependent) std::cout << " C=" << spec.alt_spec.c;
  std::cout << " | " << kind << " | ";
  if (result.p_value)
    std::cout << "statistic " << format_double(result.statistic) << ", df " << *result.df
              << ", p " << format_double(*result.p_value);
  else
    std::cout << "log statistic " << format_double(result.statistic) << ", threshold 1/alpha = "
              << format_double(*result.threshold);
  std::cout << " | " << result.decision() << "\n";
  if (!result.warning.empty()) std::cerr << "warning: " << result.warning << "\n";
  return kExitOk;
}

int cmd_relative(const std::string& model_path, const std::string& basis_text,
                 const fs::path& out_dir) {
  ManifestWriter manifest;
  manifest.command = "relative";

  const ModelDocument doc = model_from_json(json::parse(read_text_file(model_path)));
  manifest.add_input(model_path);
  manifest.config = {{"basis", basis_text}, {"model", model_path}};

  std::vector<int> basis;
  if (basis_text == "auto") {
    basis = select_basis_layers(doc.model.y);
  } else {
    for (int v : parse_range(basis_text)) basis.push_back(v);
  }
  const RelativeSpace rel = to_relative(doc.model, basis);

  fs::create_directories(out_dir);
  ReportBundle bundle;
  bundle.relative = rel;
  manifest.outputs = save_report(bundle, out_dir);
  manifest.write(out_dir);

  std::cout << "relative: basis layers";
  for (int idx : rel.basis_layers) std::cout << ' ' << idx;
  if (rel.has_negative)
    std::cout << " (some relative memberships are negative)";
  std::cout << "\n";
  return kExitOk;
}

int cmd_consensus(const std::string& data_path, const std::string& format,
                  const std::string& structure, const fs::path& out_dir) {
  ManifestWriter manifest;
  manifest.command = "consensus";

  const CssDataset ds = load_input(data_path, format);
  manifest.add_input(data_path);
  manifest.config = {{"structure", structure}};

  const Eigen::MatrixXi edges = structure == "las"
                                    ? locally_aggregated(ds.tensor)
                                    : consensus(ds.tensor);
  fs::create_directories(out_dir);
  const std::string name = structure == "las" ? "las.tsv" : "consensus.tsv";
  write_text_file(out_dir / name, edges_to_tsv(edges, ds.node_labels));
  manifest.outputs = {name};
  manifest.write(out_dir);
  std::cout << structure << ": " << edges.sum() << " edges\n";
  return kExitOk;
}

int cmd_simulate(const std::string& scenario_path, std::uint64_t seed,
                 bool seed_given, const std::string& format,
                 const fs::path& out_dir) {
  ManifestWriter manifest;
  manifest.command = "simulate";

  PlantedScenario scenario =
      scenario_from_json(json::parse(read_text_file(scenario_path)));
  manifest.add_input(scenario_path);
  if (seed_given) scenario.seed = seed;
  manifest.master_seed = scenario.seed;
  manifest.config = scenario_to_json(scenario);

  CssDataset ds;
  ds.tensor = scenario.sample_tensor();
  for (int i = 0; i < scenario.num_nodes; ++i)
    ds.node_labels.push_back("n" + std::to_string(i));
  for (int l = 0; l < scenario.num_layers; ++l)
    ds.layer_labels.push_back(scenario.num_layers == scenario.num_nodes
                                  ? ds.node_labels[static_cast<std::size_t>(l)]
                                  : "w" + std::to_string(l));
  ds.metadata["generator"] = "splitmix64-counter poisson-inversion";
  ds.metadata["generator_seed"] = std::to_string(scenario.seed);
  ds.metadata["scenario_digest"] = fnv1a64_hex(scenario_to_json(scenario).dump());

  fs::create_directories(out_dir);
  const DataFormat fmt = data_format_from_name(format);
  const std::string name = fmt == DataFormat::long_tsv
                               ? "dataset.tsv"
                               : fmt == DataFormat::dense_json ? "dataset.json"
                                                               : "dataset";
  save_dataset(ds, out_dir / name, fmt);
  manifest.outputs = {name};
  manifest.write(out_dir);
  std::cout << "simulate: wrote " << name << " (" << scenario.num_nodes << " nodes, "
            << scenario.num_layers << " layers)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NNTuck: multilayer block models for network perception data"};
  app.require_subcommand(1);

  std::string data_path, format = "auto", out_dir = "out";
  std::uint64_t seed = 0;

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "estimate a decomposition");
  std::string regime = "dependent";
  int k = 1, c = 1;
  bool symmetric = false;
  FitFlags fit_flags;
  fit_cmd->add_option("--data", data_path, "dataset path")->required();
  fit_cmd->add_option("--format", format, "auto | long-tsv | layer-matrices | dense-json");
  fit_cmd->add_option("--regime", regime, "independent | dependent | redundant | sca")
      ->required();
  fit_cmd->add_option("--k", k, "social rank K")->required();
  fit_cmd->add_option("--c", c, "layer rank C (dependent only)");
  fit_cmd->add_flag("--symmetric", symmetric, "tie U = V for undirected data");
  fit_flags.attach(fit_cmd);
  fit_cmd->add_option("--seed", seed, "master seed");
  fit_cmd->add_option("--out-dir", out_dir, "output directory");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "cross-validated rank selection");
  std::string regimes_text = "dependent,independent,redundant";
  std::string k_text = "1..4", c_text = "1..4", fold_mode = "balanced";
  int folds = 5;
  FitFlags sweep_flags;
  sweep_cmd->add_option("--data", data_path, "dataset path")->required();
  sweep_cmd->add_option("--format", format, "input format");
  sweep_cmd->add_option("--regimes", regimes_text, "comma-separated regimes");
  sweep_cmd->add_option("--k", k_text, "K values, e.g. 1..6 or 2,3");
  sweep_cmd->add_option("--c", c_text, "C values for the dependent cells");
  sweep_cmd->add_option("--folds", folds, "tubular folds (b >= 2)");
  sweep_cmd->add_option("--fold-mode", fold_mode, "balanced | iid")
      ->check(CLI::IsMember({"balanced", "iid"}));
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--seed", seed, "master seed");
  sweep_cmd->add_option("--out-dir", out_dir, "output directory");

  // test
  auto* test_cmd = app.add_subcommand("test", "likelihood-ratio tests");
  std::string kind = "split-lrt", null_regime, alt_regime;
  int null_k = 1, null_c = 1, alt_k = 1, alt_c = 1;
  double alpha = 0.05, split_fraction = 0.5;
  std::string granularity = "entry";
  FitFlags test_flags;
  test_cmd->add_option("--data", data_path, "dataset path")->required();
  test_cmd->add_option("--format", format, "input format");
  test_cmd->add_option("--kind", kind, "standard-lrt | split-lrt")
      ->check(CLI::IsMember({"standard-lrt", "split-lrt"}));
  test_cmd->add_option("--null-regime", null_regime, "null regime")->required();
  test_cmd->add_option("--null-k", null_k)->required();
  test_cmd->add_option("--null-c", null_c);
  test_cmd->add_option("--alt-regime", alt_regime, "alternative regime")->required();
  test_cmd->add_option("--alt-k", alt_k)->required();
  test_cmd->add_option("--alt-c", alt_c);
  test_cmd->add_flag("--symmetric", symmetric, "tie U = V on both sides");
  test_cmd->add_option("--alpha", alpha, "significance level");
  test_cmd->add_option("--split-fraction", split_fraction, "estimation-half share");
  test_cmd->add_option("--split-granularity", granularity, "entry | tube")
      ->check(CLI::IsMember({"entry", "tube"}));
  test_flags.attach(test_cmd);
  test_cmd->add_option("--seed", seed, "master seed");
  test_cmd->add_option("--out-dir", out_dir, "output directory");

  // relative
  auto* rel_cmd = app.add_subcommand("relative", "rewrite Y in a layer basis");
  std::string model_path, basis_text = "auto";
  rel_cmd->add_option("--model", model_path, "model.json from a fit")->required();
  rel_cmd->add_option("--basis", basis_text, "auto or layer indices, e.g. 6,14,10");
  rel_cmd->add_option("--out-dir", out_dir, "output directory");

  // consensus
  auto* con_cmd = app.add_subcommand("consensus", "single-layer summary structures");
  std::string structure = "consensus";
  con_cmd->add_option("--data", data_path, "dataset path")->required();
  con_cmd->add_option("--format", format, "input format");
  con_cmd->add_option("--structure", structure, "consensus | las")
      ->check(CLI::IsMember({"consensus", "las"}));
  con_cmd->add_option("--out-dir", out_dir, "output directory");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "sample from a planted scenario");
  std::string scenario_path, sim_format = "long-tsv";
  sim_cmd->add_option("--scenario", scenario_path, "scenario json")->required();
  auto* sim_seed_opt = sim_cmd->add_option("--seed", seed, "override the scenario seed");
  sim_cmd->add_option("--format", sim_format, "output format")
      ->check(CLI::IsMember({"long-tsv", "layer-matrices", "dense-json"}));
  sim_cmd->add_option("--out-dir", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (fit_cmd->parsed())
      return cmd_fit(data_path, format, regime, k, c, symmetric, fit_flags, seed,
                     out_dir);
    if (sweep_cmd->parsed())
      return cmd_sweep(data_path, format, regimes_text, k_text, c_text, folds,
                       fold_mode, sweep_flags, seed, out_dir);
    if (test_cmd->parsed())
      return cmd_test(data_path, format, kind, null_regime, null_k, null_c,
                      alt_regime, alt_k, alt_c, symmetric, alpha, split_fraction,
                      granularity, test_flags, seed, out_dir);
    if (rel_cmd->parsed()) return cmd_relative(model_path, basis_text, out_dir);
    if (con_cmd->parsed()) return cmd_consensus(data_path, format, structure, out_dir);
    if (sim_cmd->parsed())
      return cmd_simulate(scenario_path, seed, sim_seed_opt->count() > 0, sim_format,
                          out_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimation;
  }
  return kExitUsage;
}
