#include "nntuck/modelselect.hpp"

#include "nntuck/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nntuck {

FoldPlan make_folds(int num_nodes, int num_layers, int b, std::uint64_t seed,
                    bool iid) {
  if (num_nodes < 2) throw std::invalid_argument("make_folds: need at least 2 nodes");
  if (num_layers < 1) throw std::invalid_argument("make_folds: need at least 1 layer");
  if (b < 2) throw std::invalid_argument("make_folds: b must be at least 2");
  const long tube_count = static_cast<long>(num_nodes) * num_nodes - num_nodes;
  if (b > tube_count)
    throw std::invalid_argument("make_folds: b exceeds the off-diagonal tube count");

  FoldPlan plan;
  plan.num_nodes = num_nodes;
  plan.num_layers = num_layers;
  plan.b = b;
  plan.seed = seed;
  plan.tube_fold.assign(static_cast<std::size_t>(num_nodes) * num_nodes, -1);

  std::vector<long> tubes;
  tubes.reserve(static_cast<std::size_t>(tube_count));
  for (int j = 0; j < num_nodes; ++j)
    for (int i = 0; i < num_nodes; ++i)
      if (i != j) tubes.push_back(i + static_cast<long>(num_nodes) * j);

  rng::Stream s = rng::stream(seed);
  if (iid) {
    for (long t : tubes)
      plan.tube_fold[static_cast<std::size_t>(t)] =
          static_cast<int>(s.next_unit() * b) % b;
  } else {
    // Fisher-Yates shuffle, then deal round-robin for balanced folds.
    for (std::size_t i = tubes.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(s.next_unit() * static_cast<double>(i + 1));
      std::swap(tubes[i], tubes[std::min(j, i)]);
    }
    for (std::size_t pos = 0; pos < tubes.size(); ++pos)
      plan.tube_fold[static_cast<std::size_t>(tubes[pos])] =
          static_cast<int>(pos % static_cast<std::size_t>(b));
  }

  plan.masks.reserve(static_cast<std::size_t>(b));
  for (int f = 0; f < b; ++f) {
    Mask3 m(num_nodes, num_nodes, num_layers);
    for (int j = 0; j < num_nodes; ++j)
      for (int i = 0; i < num_nodes; ++i) {
        const int fold = plan.tube_fold[static_cast<std::size_t>(
            i + static_cast<long>(num_nodes) * j)];
        if (fold < 0 || fold == f) continue;  // diagonal or held out
        for (int k = 0; k < num_layers; ++k) m(i, j, k) = 1;
      }
    plan.masks.push_back(std::move(m));
  }
  return plan;
}

std::optional<double> auc(std::span<const double> scores,
                          std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: scores and labels differ in length");
  long positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
    positives += l;
  }
  const long negatives = static_cast<long>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk tie groups in ascending score order; every positive beats the
  // negatives strictly below it and half-ties the negatives in its group.
  long long twice_concordant = 0;
  long negatives_below = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    long pos_in_group = 0, neg_in_group = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]]) ++pos_in_group;
      else ++neg_in_group;
      ++j;
    }
    twice_concordant += 2ll * pos_in_group * negatives_below;
    twice_concordant += static_cast<long long>(pos_in_group) * neg_in_group;
    negatives_below += neg_in_group;
    i = j;
  }
  return static_cast<double>(twice_concordant) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

CvResult cv_score(const Tensor3& a, const ModelSpec& spec, const FoldPlan& plan,
                  const FitConfig& cfg) {
  if (a.n1() != plan.num_nodes || a.n2() != plan.num_nodes ||
      a.n3() != plan.num_layers)
    throw std::invalid_argument("cv_score: fold plan dims do not match the data");
  spec.validate(a.n1(), a.n3());

  CvResult out;
  std::vector<double> defined;
  double loglik_sum = 0.0;
  for (int f = 0; f < plan.b; ++f) {
    FitConfig fold_cfg = cfg;
    fold_cfg.spec = spec;
    fold_cfg.seed = rng::derive(cfg.seed, static_cast<std::uint64_t>(f));
    const FitResult fitted = fit(a, plan.masks[static_cast<std::size_t>(f)], fold_cfg);
    const Tensor3 rates = reconstruct(fitted.model);

    std::vector<double> scores;
    std::vector<int> labels;
    for (int j = 0; j < a.n2(); ++j)
      for (int i = 0; i < a.n1(); ++i) {
        if (plan.tube_fold[static_cast<std::size_t>(i + static_cast<long>(a.n1()) * j)] != f)
          continue;
        for (int k = 0; k < a.n3(); ++k) {
          scores.push_back(rates(i, j, k));
          labels.push_back(a(i, j, k) > 0.0 ? 1 : 0);
        }
      }

    FoldDetail detail;
    detail.fold = f;
    detail.auc = auc(scores, labels);
    detail.train_loglik = fitted.final_loglik;
    loglik_sum += fitted.final_loglik;
    if (detail.auc)
      defined.push_back(*detail.auc);
    else
      ++out.dropped_folds;
    out.folds.push_back(detail);
  }

  if (defined.empty())
    throw EstimationError("cv_score: AUC undefined on every fold (single-class data)");
  out.mean_auc = std::accumulate(defined.begin(), defined.end(), 0.0) /
                 static_cast<double>(defined.size());
  if (defined.size() > 1) {
    double ss = 0.0;
    for (double v : defined) ss += (v - out.mean_auc) * (v - out.mean_auc);
    out.std_auc = std::sqrt(ss / static_cast<double>(defined.size() - 1));
  }
  out.mean_train_loglik = loglik_sum / static_cast<double>(plan.b);
  return out;
}

SweepResult sweep(const Tensor3& a, const std::vector<Regime>& regimes,
                  const std::vector<int>& k_range, const std::vector<int>& c_range,
                  const FoldPlan& plan, const FitConfig& cfg) {
  if (regimes.empty() || k_range.empty())
    throw std::invalid_argument("sweep: regimes and K range must be nonempty");
  const int l = a.n3();

  // Grid cells in deterministic (regime, K, C) order.
  struct Cell { Regime regime; int k; int c; };
  std::vector<Cell> cells;
  for (Regime r : regimes) {
    for (int k : k_range) {
      if (k < 1 || k > a.n1()) continue;
      switch (r) {
        case Regime::dependent:
          for (int c : c_range)
            if (c >= 1 && c < l) cells.push_back({r, k, c});
          break;
        case Regime::independent: cells.push_back({r, k, l}); break;
        case Regime::redundant: cells.push_back({r, k, 1}); break;
        case Regime::sca:
          if (a.n1() == l) cells.push_back({r, k, k});
          else throw std::invalid_argument("sweep: SCA cells require L = N");
          break;
      }
    }
  }
  if (cells.empty()) throw std::invalid_argument("sweep: no valid grid cells");

  SweepResult out;
  out.grid.resize(cells.size());
  for (std::size_t idx = 0; idx < cells.size(); ++idx) {
    const Cell& cell = cells[idx];
    ModelSpec spec;
    spec.regime = cell.regime;
    spec.k = cell.k;
    spec.c = cell.c;
    spec.symmetric = cfg.spec.symmetric;

    FitConfig cell_cfg = cfg;
    cell_cfg.seed = rng::derive(
        cfg.seed, (static_cast<std::uint64_t>(cell.regime) << 32) ^
                      (static_cast<std::uint64_t>(cell.k) << 16) ^
                      static_cast<std::uint64_t>(cell.c));
    const CvResult cv = cv_score(a, spec, plan, cell_cfg);

    SweepCell& row = out.grid[idx];
    row.regime = cell.regime;
    row.k = cell.k;
    row.c = cell.c;
    row.mean_auc = cv.mean_auc;
    row.std_auc = cv.std_auc;
    row.mean_train_loglik = cv.mean_train_loglik;
    row.params = param_count(spec, a.n1(), l);
    row.dropped_folds = cv.dropped_folds;
  }

  out.chosen = 0;
  for (std::size_t idx = 1; idx < out.grid.size(); ++idx)
    if (out.grid[idx].mean_auc > out.grid[static_cast<std::size_t>(out.chosen)].mean_auc)
      out.chosen = static_cast<int>(idx);

  const SweepCell& best = out.grid[static_cast<std::size_t>(out.chosen)];
  std::string note;
  for (const SweepCell& cell : out.grid) {
    if (cell.params >= best.params) continue;
    if (cell.mean_auc < best.mean_auc - best.std_auc) continue;
    if (!note.empty()) note += ", ";
    note += std::string(regime_name(cell.regime)) + " K=" + std::to_string(cell.k) +
            " C=" + std::to_string(cell.c);
  }
  out.note = note.empty()
                 ? "no smaller cell within one std of the best mean AUC"
                 : "within one std of the best mean AUC with fewer parameters: " + note;
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

nlohmann::json sweep_to_json(const SweepResult& s) {
  nlohmann::json grid = nlohmann::json::array();
  for (const SweepCell& c : s.grid)
    grid.push_back({{"regime", std::string(regime_name(c.regime))},
                    {"k", c.k},
                    {"c", c.c},
                    {"mean_test_auc", c.mean_auc},
                    {"std_test_auc", c.std_auc},
                    {"mean_train_loglik", c.mean_train_loglik},
                    {"param_count", c.params},
                    {"dropped_folds", c.dropped_folds}});
  return {{"grid", grid}, {"chosen", s.chosen}, {"note", s.note}};
}

std::string sweep_to_csv(const SweepResult& s) {
  std::string csv =
      "regime,k,c,mean_test_auc,std_test_auc,mean_train_loglik,param_count,"
      "dropped_folds,chosen\n";
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const SweepCell& c = s.grid[i];
    csv += std::string(regime_name(c.regime)) + "," + std::to_string(c.k) + "," +
           std::to_string(c.c) + "," + format_double(c.mean_auc) + "," +
           format_double(c.std_auc) + "," + format_double(c.mean_train_loglik) +
           "," + std::to_string(c.params) + "," + std::to_string(c.dropped_folds) +
           "," + (static_cast<int>(i) == s.chosen ? "1" : "0") + "\n";
  }
  return csv;
}

}  // namespace nntuck
