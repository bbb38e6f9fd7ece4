#include "nntuck/model.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace nntuck {

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::independent: return "independent";
    case Regime::dependent: return "dependent";
    case Regime::redundant: return "redundant";
    case Regime::sca: return "sca";
  }
  return "unknown";
}

Regime regime_from_name(std::string_view name) {
  if (name == "independent") return Regime::independent;
  if (name == "dependent") return Regime::dependent;
  if (name == "redundant") return Regime::redundant;
  if (name == "sca") return Regime::sca;
  throw std::invalid_argument("unknown regime: " + std::string(name));
}

int ModelSpec::resolved_c(int num_layers) const {
  switch (regime) {
    case Regime::independent: return num_layers;
    case Regime::redundant: return 1;
    case Regime::sca: return k;
    case Regime::dependent: return c;
  }
  return c;
}

void ModelSpec::validate(int num_nodes, int num_layers) const {
  if (k < 1) throw std::invalid_argument("spec: K must be positive");
  if (k > num_nodes)
    throw std::invalid_argument("spec: K must not exceed the node count");
  switch (regime) {
    case Regime::dependent:
      if (c < 1) throw std::invalid_argument("spec: C must be positive");
      if (c >= num_layers)
        throw std::invalid_argument("spec: dependent regime requires C < L");
      break;
    case Regime::sca:
      // c is forced to k (resolved_c), so only the shape precondition matters
      if (num_layers != num_nodes)
        throw std::invalid_argument("spec: SCA requires L = N");
      if (symmetric)
        throw std::invalid_argument("spec: symmetric flag is not supported with SCA");
      break;
    case Regime::independent:
    case Regime::redundant:
      break;
  }
}

bool NNTuckModel::operator==(const NNTuckModel& other) const {
  return u == other.u && v == other.v && y == other.y && core == other.core;
}

Tensor3 reconstruct(const NNTuckModel& m) {
  if (m.core.n1() != m.k() || m.core.n2() != static_cast<int>(m.v.cols()) ||
      m.core.n3() != m.c() || m.u.rows() != m.v.rows())
    throw std::invalid_argument("reconstruct: inconsistent factor dims");
  Tensor3 t = mode_product(m.core, m.u, 1);
  t = mode_product(t, m.v, 2);
  return mode_product(t, m.y, 3);
}

long param_count(const ModelSpec& spec, int num_nodes, int num_layers) {
  spec.validate(num_nodes, num_layers);
  const long n = num_nodes;
  const long k = spec.k;
  const long c_eff = spec.resolved_c(num_layers);
  const long membership = spec.symmetric ? n * k : 2 * n * k;
  const long slice = spec.symmetric ? k * (k + 1) / 2 : k * k;
  switch (spec.regime) {
    case Regime::independent:  // y fixed to the identity
      return membership + slice * num_layers;
    case Regime::redundant:  // y fixed to ones
      return membership + slice;
    case Regime::sca:  // u and y are the same matrix, counted once
      return membership + slice * c_eff;
    case Regime::dependent:
      return membership + slice * c_eff + static_cast<long>(num_layers) * c_eff;
  }
  return 0;
}

namespace {

bool is_identity(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - Eigen::MatrixXd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

std::vector<std::string> validate(const NNTuckModel& m, const ModelSpec& spec) {
  std::vector<std::string> violations;
  const double tol = 0.0;  // regime constraints are maintained exactly

  auto nonneg = [](const Eigen::MatrixXd& mat) { return (mat.array() >= 0.0).all(); };
  if (!nonneg(m.u)) violations.push_back("U has negative entries");
  if (!nonneg(m.v)) violations.push_back("V has negative entries");
  if (!nonneg(m.y)) violations.push_back("Y has negative entries");
  if (!m.core.all_nonnegative()) violations.push_back("core has negative entries");

  if (m.k() != spec.k) violations.push_back("K does not match the spec");
  if (m.c() != spec.resolved_c(m.num_layers()))
    violations.push_back("C does not match the regime");
  if (m.core.n1() != m.k() || m.core.n2() != static_cast<int>(m.v.cols()) ||
      m.core.n3() != m.c())
    violations.push_back("core dims inconsistent with factors");

  switch (spec.regime) {
    case Regime::independent:
      if (!is_identity(m.y, tol)) violations.push_back("Y != I under independence");
      break;
    case Regime::redundant:
      if (m.c() != 1 || (m.y.array() != 1.0).any())
        violations.push_back("Y != ones under redundance");
      break;
    case Regime::sca:
      if (m.num_layers() != m.num_nodes())
        violations.push_back("SCA requires L = N");
      if (m.u != m.y) violations.push_back("U != Y under SCA");
      break;
    case Regime::dependent:
      break;
  }

  if (spec.symmetric) {
    if (m.u != m.v) violations.push_back("U != V under the symmetric flag");
    for (int c = 0; c < m.core.n3(); ++c)
      for (int i = 0; i < m.core.n1(); ++i)
        for (int j = 0; j < i; ++j)
          if (m.core(i, j, c) != m.core(j, i, c)) {
            violations.push_back("core slice " + std::to_string(c) +
                                 " is asymmetric");
            i = m.core.n1();  // one report per slice
            break;
          }
  }
  return violations;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  if (rows == 0) throw std::invalid_argument("matrix json: empty");
  const auto cols = j.at(0).size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols)
      throw std::invalid_argument("matrix json: ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

nlohmann::json tensor_to_json(const Tensor3& t) {
  return {{"dims", {t.n1(), t.n2(), t.n3()}}, {"values", t.values()}};
}

Tensor3 tensor_from_json(const nlohmann::json& j) {
  const auto dims = j.at("dims");
  return Tensor3::from_buffer(dims.at(0).get<int>(), dims.at(1).get<int>(),
                              dims.at(2).get<int>(),
                              j.at("values").get<std::vector<double>>());
}

}  // namespace

nlohmann::json spec_to_json(const ModelSpec& spec) {
  return {{"regime", std::string(regime_name(spec.regime))},
          {"k", spec.k},
          {"c", spec.c},
          {"symmetric", spec.symmetric}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.regime = regime_from_name(j.at("regime").get<std::string>());
  spec.k = j.at("k").get<int>();
  spec.c = j.at("c").get<int>();
  spec.symmetric = j.value("symmetric", false);
  return spec;
}

nlohmann::json model_to_json(const NNTuckModel& m, const ModelSpec& spec,
                             std::uint64_t seed, double final_kl) {
  return {{"dims",
           {{"n", m.num_nodes()}, {"l", m.num_layers()}, {"k", m.k()}, {"c", m.c()}}},
          {"u", matrix_to_json(m.u)},
          {"v", matrix_to_json(m.v)},
          {"y", matrix_to_json(m.y)},
          {"core", tensor_to_json(m.core)},
          {"spec", spec_to_json(spec)},
          {"seed", seed},
          {"final_kl", final_kl}};
}

ModelDocument model_from_json(const nlohmann::json& j) {
  ModelDocument doc;
  doc.model.u = matrix_from_json(j.at("u"));
  doc.model.v = matrix_from_json(j.at("v"));
  doc.model.y = matrix_from_json(j.at("y"));
  doc.model.core = tensor_from_json(j.at("core"));
  doc.spec = spec_from_json(j.at("spec"));
  doc.seed = j.at("seed").get<std::uint64_t>();
  doc.final_kl = j.at("final_kl").get<double>();
  return doc;
}

}  // namespace nntuck
