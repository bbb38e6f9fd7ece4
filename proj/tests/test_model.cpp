#include "nntuck/model.hpp"

#include "oracles.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

using namespace nntuck;

TEST_CASE("reconstruct: rank-one and zero-core cases") {
  NNTuckModel m;
  m.u = Eigen::MatrixXd::Ones(3, 1);
  m.v = Eigen::MatrixXd::Ones(3, 1);
  m.y = Eigen::MatrixXd::Ones(2, 1);
  m.core = Tensor3(1, 1, 1);
  m.core(0, 0, 0) = 4.25;
  const Tensor3 r = reconstruct(m);
  CHECK(r.dims() == std::array<int, 3>{3, 3, 2});
  for (double v : r.values()) CHECK(v == 4.25);

  m.core(0, 0, 0) = 0.0;
  const Tensor3 zero = reconstruct(m);
  for (double v : zero.values()) CHECK(v == 0.0);
}

TEST_CASE("reconstruct matches the quadruple-loop sum") {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const NNTuckModel m = oracle::random_model(4, 5, 2, 3, seed);
    const Tensor3 fast = reconstruct(m);
    const Tensor3 slow = oracle::reconstruct(m);
    const double scale = slow.max_abs();
    for (std::size_t i = 0; i < fast.values().size(); ++i)
      CHECK(std::abs(fast.values()[i] - slow.values()[i]) <= 1e-10 * scale);
  }
}

TEST_CASE("reconstruct under the symmetric constraint gives symmetric slices") {
  NNTuckModel m = oracle::random_model(5, 4, 3, 2, 77);
  m.v = m.u;
  for (int c = 0; c < m.core.n3(); ++c)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < i; ++j) {
        const double avg = 0.5 * (m.core(i, j, c) + m.core(j, i, c));
        m.core(i, j, c) = avg;
        m.core(j, i, c) = avg;
      }
  const Tensor3 r = reconstruct(m);
  for (int k = 0; k < r.n3(); ++k)
    for (int i = 0; i < r.n1(); ++i)
      for (int j = 0; j < i; ++j)
        CHECK(r(i, j, k) == doctest::Approx(r(j, i, k)).epsilon(1e-12));
}

TEST_CASE("param_count pins the enumerated examples") {
  ModelSpec dep{Regime::dependent, 2, 2, false};
  CHECK(param_count(dep, 4, 4) == 32);

  ModelSpec ind{Regime::independent, 2, 1, false};
  CHECK(param_count(ind, 4, 4) == 32);

  ModelSpec sca{Regime::sca, 2, 2, false};
  CHECK(param_count(sca, 4, 4) == 24);
}

TEST_CASE("dependent nests in independent exactly when the closed-form df is positive") {
  for (int n : {5, 12, 21})
    for (int l : {4, 9, 21})
      for (int k = 1; k <= 4; ++k)
        for (int c = 1; c < l; ++c) {
          ModelSpec dep{Regime::dependent, k, c, false};
          ModelSpec ind{Regime::independent, k, 0, false};
          const long closed_form = static_cast<long>(l - c) * k * k -
                                   static_cast<long>(l) * c;
          const long diff = param_count(ind, n, l) - param_count(dep, n, l);
          CHECK(diff == closed_form);
          if (closed_form > 0)
            CHECK(param_count(dep, n, l) < param_count(ind, n, l));
        }
  // the working instance from the analyses: K=C=3 on a 21-perceiver network
  CHECK(param_count(ModelSpec{Regime::independent, 3, 0, false}, 21, 21) -
            param_count(ModelSpec{Regime::dependent, 3, 3, false}, 21, 21) ==
        99);
}

TEST_CASE("symmetric flag halves memberships and ties core slices") {
  ModelSpec dep{Regime::dependent, 3, 2, true};
  // N*K + C*K(K+1)/2 + L*C
  CHECK(param_count(dep, 5, 4) == 5 * 3 + 2 * 6 + 4 * 2);
}

TEST_CASE("validate reports regime violations as data") {
  const int n = 4, l = 4, k = 2;

  NNTuckModel ind = oracle::random_model(n, l, k, l, 100);
  ind.y = Eigen::MatrixXd::Identity(l, l);
  CHECK(validate(ind, ModelSpec{Regime::independent, k, l, false}).empty());
  ind.y(0, 1) = 0.25;
  CHECK(!validate(ind, ModelSpec{Regime::independent, k, l, false}).empty());

  NNTuckModel sca = oracle::random_model(n, n, k, k, 101);
  sca.u = sca.y;
  CHECK(validate(sca, ModelSpec{Regime::sca, k, k, false}).empty());
  sca.u(0, 0) += 1.0;
  const auto violations = validate(sca, ModelSpec{Regime::sca, k, k, false});
  REQUIRE(!violations.empty());
  CHECK(violations.front().find("U != Y") != std::string::npos);

  NNTuckModel sym = oracle::random_model(n, l, k, 2, 102);
  sym.v = sym.u;
  sym.core(1, 0, 0) = sym.core(0, 1, 0) + 0.5;
  ModelSpec sym_spec{Regime::dependent, k, 2, true};
  bool found_core = false;
  for (const auto& v : validate(sym, sym_spec))
    found_core = found_core || v.find("asymmetric") != std::string::npos;
  CHECK(found_core);
}

TEST_CASE("spec validation enforces the regime preconditions") {
  CHECK_THROWS_AS((ModelSpec{Regime::dependent, 2, 5, false}.validate(4, 5)),
                  std::invalid_argument);  // needs C < L
  CHECK_THROWS_AS((ModelSpec{Regime::sca, 2, 2, false}.validate(4, 5)),
                  std::invalid_argument);  // needs L = N
  CHECK_THROWS_AS((ModelSpec{Regime::dependent, 9, 2, false}.validate(4, 5)),
                  std::invalid_argument);  // K > N
  CHECK_NOTHROW((ModelSpec{Regime::dependent, 2, 2, false}.validate(4, 5)));
}

TEST_CASE("model json round-trips bit-exactly") {
  const NNTuckModel m = oracle::random_model(3, 4, 2, 2, 200);
  const ModelSpec spec{Regime::dependent, 2, 2, false};
  const nlohmann::json j = model_to_json(m, spec, 42, 1.25e-3);
  const std::string text = j.dump();

  const ModelDocument doc = model_from_json(nlohmann::json::parse(text));
  CHECK(doc.model == m);
  CHECK(doc.seed == 42);
  CHECK(doc.final_kl == 1.25e-3);
  CHECK(doc.spec.regime == Regime::dependent);
  CHECK(doc.spec.k == 2);

  // serialize again: byte-identical
  CHECK(model_to_json(doc.model, doc.spec, doc.seed, doc.final_kl).dump() == text);
}
