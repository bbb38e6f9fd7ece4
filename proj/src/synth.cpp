#include "nntuck/synth.hpp"

#include "nntuck/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace nntuck {

Tensor3 sample(const NNTuckModel& m, std::uint64_t seed) {
  const Tensor3 rates = reconstruct(m);
  Tensor3 out(rates.n1(), rates.n2(), rates.n3());
  for (int k = 0; k < rates.n3(); ++k)
    for (int j = 0; j < rates.n2(); ++j)
      for (int i = 0; i < rates.n1(); ++i) {
        rng::Stream s = rng::entry_stream(seed, i, j, k);
        out(i, j, k) = static_cast<double>(rng::sample_poisson(s, rates(i, j, k)));
      }
  return out;
}

Tensor3 binarize(const Tensor3& a) {
  Tensor3 out(a.n1(), a.n2(), a.n3());
  for (std::size_t idx = 0; idx < a.values().size(); ++idx)
    out.values()[idx] = a.values()[idx] > 0.0 ? 1.0 : 0.0;
  return out;
}

PlantedScenario PlantedScenario::balanced(int num_nodes, int num_layers,
                                          ModelSpec spec, double within_rate,
                                          double between_rate, double degree_spread,
                                          std::uint64_t seed) {
  PlantedScenario s;
  s.num_nodes = num_nodes;
  s.num_layers = num_layers;
  s.spec = spec;
  s.within_rate = within_rate;
  s.between_rate = between_rate;
  s.degree_spread = degree_spread;
  s.seed = seed;
  s.node_blocks.resize(static_cast<std::size_t>(num_nodes));
  for (int i = 0; i < num_nodes; ++i)
    s.node_blocks[static_cast<std::size_t>(i)] = i % spec.k;
  const int c = spec.resolved_c(num_layers);
  s.layer_groups.resize(static_cast<std::size_t>(num_layers));
  for (int l = 0; l < num_layers; ++l)
    s.layer_groups[static_cast<std::size_t>(l)] = l % c;
  return s;
}

void PlantedScenario::validate() const {
  spec.validate(num_nodes, num_layers);
  if (!(within_rate >= between_rate && between_rate >= 0.0))
    throw std::invalid_argument(
        "planted scenario: requires within_rate >= between_rate >= 0");
  if (degree_spread < 1.0)
    throw std::invalid_argument("planted scenario: degree_spread must be >= 1");
  if (static_cast<int>(node_blocks.size()) != num_nodes)
    throw std::invalid_argument("planted scenario: node_blocks size mismatch");
  const int c = spec.resolved_c(num_layers);
  for (int b : node_blocks)
    if (b < 0 || b >= spec.k)
      throw std::invalid_argument("planted scenario: node block out of range");
  if (spec.regime == Regime::dependent || spec.regime == Regime::independent) {
    if (static_cast<int>(layer_groups.size()) != num_layers)
      throw std::invalid_argument("planted scenario: layer_groups size mismatch");
    for (int g : layer_groups)
      if (g < 0 || g >= c)
        throw std::invalid_argument("planted scenario: layer group out of range");
  }
}

NNTuckModel PlantedScenario::build_model() const {
  validate();
  const int n = num_nodes, l = num_layers, k = spec.k;
  const int c = spec.resolved_c(l);

  // Node degree factors, log-uniform on [1/spread, spread].
  std::vector<double> degree(static_cast<std::size_t>(n), 1.0);
  if (degree_spread > 1.0) {
    rng::Stream s = rng::stream(rng::derive(seed, 0xD06));
    const double half = std::log(degree_spread);
    for (int i = 0; i < n; ++i)
      degree[static_cast<std::size_t>(i)] = std::exp(s.next_uniform(-half, half));
  }

  NNTuckModel m;
  m.u = Eigen::MatrixXd::Zero(n, k);
  for (int i = 0; i < n; ++i)
    m.u(i, node_blocks[static_cast<std::size_t>(i)]) = degree[static_cast<std::size_t>(i)];
  m.v = m.u;

  switch (spec.regime) {
    case Regime::independent:
      m.y = Eigen::MatrixXd::Identity(l, l);
      break;
    case Regime::redundant:
      m.y = Eigen::MatrixXd::Ones(l, 1);
      break;
    case Regime::sca:
      m.y = m.u;
      break;
    case Regime::dependent:
      m.y = Eigen::MatrixXd::Zero(l, c);
      for (int lay = 0; lay < l; ++lay)
        m.y(lay, layer_groups[static_cast<std::size_t>(lay)]) = 1.0;
      break;
  }

  // Slice for group c: within_rate on the c-shifted block diagonal. Under
  // the independent regime each layer gets its group's pattern directly.
  m.core = Tensor3(k, k, c);
  for (int slice = 0; slice < c; ++slice) {
    const int group = spec.regime == Regime::independent
                          ? layer_groups[static_cast<std::size_t>(slice)]
                          : slice;
    for (int col = 0; col < k; ++col)
      for (int row = 0; row < k; ++row) {
        bool within = ((col - row) % k + k) % k == group % k;
        if (spec.symmetric) within = within || ((row - col) % k + k) % k == group % k;
        m.core(row, col, slice) = within ? within_rate : between_rate;
      }
  }
  return m;
}

Tensor3 PlantedScenario::sample_tensor() const {
  return sample(build_model(), rng::derive(seed, 0x5A11));
}

nlohmann::json scenario_to_json(const PlantedScenario& s) {
  return {{"n", s.num_nodes},
          {"l", s.num_layers},
          {"spec", spec_to_json(s.spec)},
          {"node_blocks", s.node_blocks},
          {"layer_groups", s.layer_groups},
          {"within_rate", s.within_rate},
          {"between_rate", s.between_rate},
          {"degree_spread", s.degree_spread},
          {"seed", s.seed}};
}

PlantedScenario scenario_from_json(const nlohmann::json& j) {
  PlantedScenario s;
  s.num_nodes = j.at("n").get<int>();
  s.num_layers = j.at("l").get<int>();
  s.spec = spec_from_json(j.at("spec"));
  s.within_rate = j.at("within_rate").get<double>();
  s.between_rate = j.at("between_rate").get<double>();
  s.degree_spread = j.value("degree_spread", 1.0);
  s.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("node_blocks") || j.contains("layer_groups")) {
    s.node_blocks = j.value("node_blocks", std::vector<int>{});
    s.layer_groups = j.value("layer_groups", std::vector<int>{});
  }
  if (s.node_blocks.empty()) {
    const PlantedScenario balanced =
        PlantedScenario::balanced(s.num_nodes, s.num_layers, s.spec, s.within_rate,
                                  s.between_rate, s.degree_spread, s.seed);
    s.node_blocks = balanced.node_blocks;
    if (s.layer_groups.empty()) s.layer_groups = balanced.layer_groups;
  }
  s.validate();
  return s;
}

}  // namespace nntuck
