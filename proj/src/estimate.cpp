#include "nntuck/estimate.hpp"

#include "nntuck/rng.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace nntuck {

namespace {

constexpr double kMonotoneSlack = 1e-9;

// ---------------------------------------------------------------------------
// Update machinery

// Observed data and mask in every unfolding, fixed for the whole run.
struct Problem {
  Eigen::MatrixXd a1, a2, a3;
  Eigen::MatrixXd m1, m2, m3;
  Tensor3 mask_t;

  Problem(const Tensor3& a, const Mask3& mask)
      : a1(unfold(a, 1)),
        a2(unfold(a, 2)),
        a3(unfold(a, 3)),
        mask_t(mask.as_tensor()) {
    m1 = unfold(mask_t, 1);
    m2 = unfold(mask_t, 2);
    m3 = unfold(mask_t, 3);
  }
};

// Multiplicative ratio for one factor given its linear coefficient matrix w:
//   ratio = [(m o a / max(f*w, floor)) w^T] / max(m w^T, floor)
// Masked entries contribute exactly zero, so held-out values never leak into
// the trajectory.
Eigen::MatrixXd mu_ratio(const Eigen::MatrixXd& f, const Eigen::MatrixXd& w,
                         const Eigen::MatrixXd& a_unf,
                         const Eigen::MatrixXd& m_unf) {
  Eigen::MatrixXd ahat = f * w;
  Eigen::MatrixXd r =
      (m_unf.array() * a_unf.array() / ahat.array().max(kRateFloor)).matrix();
  Eigen::MatrixXd num = r * w.transpose();
  Eigen::MatrixXd den = m_unf * w.transpose();
  return (num.array() / den.array().max(kRateFloor)).matrix();
}

void mu_step(Eigen::MatrixXd& f, const Eigen::MatrixXd& w,
             const Eigen::MatrixXd& a_unf, const Eigen::MatrixXd& m_unf) {
  f = (f.array() * mu_ratio(f, w, a_unf, m_unf).array()).matrix();
}

Eigen::MatrixXd coeff_for_u(const NNTuckModel& m) {
  return unfold(mode_product(mode_product(m.core, m.v, 2), m.y, 3), 1);
}
Eigen::MatrixXd coeff_for_v(const NNTuckModel& m) {
  return unfold(mode_product(mode_product(m.core, m.u, 1), m.y, 3), 2);
}
Eigen::MatrixXd coeff_for_y(const NNTuckModel& m) {
  return unfold(mode_product(mode_product(m.core, m.u, 1), m.v, 2), 3);
}

void core_step(NNTuckModel& m, const Tensor3& a, const Problem& p) {
  const Tensor3 ahat = reconstruct(m);
  std::vector<double> rvals(a.values().size());
  const auto& av = a.values();
  const auto& hv = ahat.values();
  const auto& mv = p.mask_t.values();
  for (std::size_t i = 0; i < rvals.size(); ++i)
    rvals[i] = mv[i] * av[i] / std::max(hv[i], kRateFloor);
  Tensor3 ratio = Tensor3::from_buffer(a.n1(), a.n2(), a.n3(), std::move(rvals));

  const Eigen::MatrixXd ut = m.u.transpose();
  const Eigen::MatrixXd vt = m.v.transpose();
  const Eigen::MatrixXd yt = m.y.transpose();
  const Tensor3 num =
      mode_product(mode_product(mode_product(ratio, ut, 1), vt, 2), yt, 3);
  const Tensor3 den =
      mode_product(mode_product(mode_product(p.mask_t, ut, 1), vt, 2), yt, 3);
  auto& g = m.core.values();
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] *= num.values()[i] / std::max(den.values()[i], kRateFloor);
}

void symmetrize_core(Tensor3& core) {
  for (int c = 0; c < core.n3(); ++c)
    for (int i = 0; i < core.n1(); ++i)
      for (int j = 0; j < i; ++j) {
        const double avg = 0.5 * (core(i, j, c) + core(j, i, c));
        core(i, j, c) = avg;
        core(j, i, c) = avg;
      }
}

void check_finite(const NNTuckModel& m, double kl, int iteration) {
  if (!std::isfinite(kl) || !m.u.allFinite() || !m.v.allFinite() ||
      !m.y.allFinite() || !m.core.all_finite())
    throw NumericalError(
        "non-finite value in factors at iteration " + std::to_string(iteration),
        iteration);
}

Eigen::MatrixXd draw_matrix(rng::Stream& s, int rows, int cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * (1.0 - s.next_unit());
  return m;
}

Tensor3 draw_tensor(rng::Stream& s, int n1, int n2, int n3, double scale) {
  Tensor3 t(n1, n2, n3);
  for (int k = 0; k < n3; ++k)
    for (int j = 0; j < n2; ++j)
      for (int i = 0; i < n1; ++i) t(i, j, k) = scale * (1.0 - s.next_unit());
  return t;
}

// Scale such that the mean of the initial reconstruction roughly matches the
// observed data mean: each reconstructed entry is a sum of K*K*C products of
// nr independent Uniform(0, s] draws with mean s/2 each.
double auto_scale(const Tensor3& a, const Mask3& mask, const ModelSpec& spec,
                  int num_layers) {
  double sum = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i)
    if (mask.bits()[i]) {
      sum += a.values()[i];
      ++count;
    }
  const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
  if (mean <= 0.0) return 1e-3;
  const bool layer_factor_random =
      spec.regime == Regime::dependent || spec.regime == Regime::sca;
  const double nr = layer_factor_random ? 4.0 : 3.0;
  const double kk = static_cast<double>(spec.k) * spec.k *
                    spec.resolved_c(num_layers);
  return 2.0 * std::pow(mean / kk, 1.0 / nr);
}

// Re-applies the regime constraints so explicit starting points and freshly
// drawn factors enter the loop on the constraint manifold.
void apply_constraints(NNTuckModel& m, const ModelSpec& spec, int num_layers) {
  switch (spec.regime) {
    case Regime::independent:
      m.y = Eigen::MatrixXd::Identity(num_layers, num_layers);
      break;
    case Regime::redundant:
      m.y = Eigen::MatrixXd::Ones(num_layers, 1);
      break;
    case Regime::sca:
      m.u = m.y;
      break;
    case Regime::dependent:
      break;
  }
  if (spec.symmetric) {
    m.v = m.u;
    symmetrize_core(m.core);
  }
}

Mask3 effective_mask(const Tensor3& a, const Mask3& mask, const FitConfig& cfg) {
  if (mask.dims() != a.dims())
    throw std::invalid_argument("fit: mask dims must match data dims");
  if (cfg.exclude_diagonal && a.n1() == a.n2()) return mask.without_diagonal();
  return mask;
}

struct Termination {
  double rel_tol;
  bool done(double prev, double cur) const {
    return std::abs(prev - cur) <= rel_tol * std::max(std::abs(cur), 1e-15);
  }
};

}  // namespace

void FitConfig::validate() const {
  if (rel_tol <= 0.0) throw std::invalid_argument("fit config: rel_tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("fit config: max_iters must be positive");
  if (effective_restarts() < 1)
    throw std::invalid_argument("fit config: restarts must be positive");
  if (init_scale < 0.0)
    throw std::invalid_argument("fit config: init_scale must be nonnegative");
}

std::string_view sca_strategy_name(ScaStrategy s) {
  switch (s) {
    case ScaStrategy::averaged_factors: return "averaged-factors";
    case ScaStrategy::naive: return "naive";
    case ScaStrategy::averaged_updates: return "averaged-updates";
  }
  return "unknown";
}

ScaStrategy sca_strategy_from_name(std::string_view name) {
  if (name == "averaged-factors") return ScaStrategy::averaged_factors;
  if (name == "naive") return ScaStrategy::naive;
  if (name == "averaged-updates") return ScaStrategy::averaged_updates;
  throw std::invalid_argument("unknown SCA strategy: " + std::string(name));
}

nlohmann::json fit_config_to_json(const FitConfig& cfg) {
  return {{"spec", spec_to_json(cfg.spec)},
          {"rel_tol", cfg.rel_tol},
          {"max_iters", cfg.max_iters},
          {"restarts", cfg.effective_restarts()},
          {"seed", cfg.seed},
          {"sca_strategy", std::string(sca_strategy_name(cfg.sca_strategy))},
          {"init_scale", cfg.init_scale},
          {"exclude_diagonal", cfg.exclude_diagonal},
          {"rng", "splitmix64-counter"}};
}

NNTuckModel initial_model(const Tensor3& a, const Mask3& mask, const FitConfig& cfg,
                          std::uint64_t seed, double* scale_used) {
  const int n = a.n1();
  const int l = a.n3();
  const int k = cfg.spec.k;
  const int c = cfg.spec.resolved_c(l);

  if (cfg.init) {
    NNTuckModel m = *cfg.init;
    if (m.num_nodes() != n || m.num_layers() != l || m.k() != k || m.c() != c)
      throw std::invalid_argument("fit: explicit init has wrong dims for the spec");
    apply_constraints(m, cfg.spec, l);
    if (scale_used) *scale_used = 0.0;
    return m;
  }

  const Mask3 eff = effective_mask(a, mask, cfg);
  const double scale =
      cfg.init_scale > 0.0 ? cfg.init_scale : auto_scale(a, eff, cfg.spec, l);
  if (scale_used) *scale_used = scale;

  rng::Stream s = rng::stream(seed);
  NNTuckModel m;
  if (cfg.spec.regime == Regime::sca) {
    // Draw order: Y, V, core; then U = Y.
    m.y = draw_matrix(s, l, c, scale);
    m.v = draw_matrix(s, n, k, scale);
    m.core = draw_tensor(s, k, k, c, scale);
    m.u = m.y;
  } else {
    m.u = draw_matrix(s, n, k, scale);
    m.v = cfg.spec.symmetric ? m.u : draw_matrix(s, n, k, scale);
    if (cfg.spec.regime == Regime::dependent) m.y = draw_matrix(s, l, c, scale);
    m.core = draw_tensor(s, k, k, c, scale);
  }
  apply_constraints(m, cfg.spec, l);
  return m;
}

FitResult fit_once(const Tensor3& a, const Mask3& mask, const FitConfig& cfg,
                   std::uint64_t seed) {
  if (cfg.spec.regime == Regime::sca) return fit_sca_once(a, mask, cfg, seed);
  cfg.validate();
  if (a.n1() != a.n2())
    throw std::invalid_argument("fit: data tensor must be square in modes 1 and 2");
  cfg.spec.validate(a.n1(), a.n3());

  const Mask3 eff = effective_mask(a, mask, cfg);
  if (eff.observed_count() == 0)
    throw EstimationError("fit: no observed entries under the mask");

  FitResult res;
  res.seed_used = seed;
  NNTuckModel m = initial_model(a, mask, cfg, seed, &res.init_scale_used);
  const Problem p(a, eff);
  const Termination term{cfg.rel_tol};
  const bool update_y = cfg.spec.regime == Regime::dependent;

  double prev = kl_div(a, reconstruct(m), eff);
  res.kl_trace.push_back(prev);

  for (int it = 1; it <= cfg.max_iters; ++it) {
    mu_step(m.u, coeff_for_u(m), p.a1, p.m1);
    if (cfg.spec.symmetric)
      m.v = m.u;
    else
      mu_step(m.v, coeff_for_v(m), p.a2, p.m2);
    if (update_y) mu_step(m.y, coeff_for_y(m), p.a3, p.m3);
    core_step(m, a, p);
    if (cfg.spec.symmetric) symmetrize_core(m.core);

    const double cur = kl_div(a, reconstruct(m), eff);
    check_finite(m, cur, it);
    res.kl_trace.push_back(cur);
    if (cur > prev + kMonotoneSlack) res.monotone = false;
    if (term.done(prev, cur)) {
      prev = cur;
      break;
    }
    prev = cur;
  }

  res.iterations = static_cast<int>(res.kl_trace.size()) - 1;
  res.final_kl = res.kl_trace.back();
  res.final_loglik = poisson_loglik(a, reconstruct(m), eff);
  res.model = std::move(m);
  return res;
}

FitResult fit_sca_once(const Tensor3& a, const Mask3& mask, const FitConfig& cfg,
                       std::uint64_t seed) {
  cfg.validate();
  if (cfg.spec.regime != Regime::sca)
    throw std::invalid_argument("fit_sca_once requires an SCA spec");
  if (a.n1() != a.n2() || a.n1() != a.n3())
    throw std::invalid_argument("SCA requires an N x N x N tensor (L = N)");
  cfg.spec.validate(a.n1(), a.n3());

  const Mask3 eff = effective_mask(a, mask, cfg);
  if (eff.observed_count() == 0)
    throw EstimationError("fit: no observed entries under the mask");

  FitResult res;
  res.seed_used = seed;
  NNTuckModel m = initial_model(a, mask, cfg, seed, &res.init_scale_used);
  const Problem p(a, eff);
  const Termination term{cfg.rel_tol};

  double prev = kl_div(a, reconstruct(m), eff);
  res.kl_trace.push_back(prev);
  double min_kl = prev;
  NNTuckModel best = m;

  for (int it = 1; it <= cfg.max_iters; ++it) {
    mu_step(m.v, coeff_for_v(m), p.a2, p.m2);
    switch (cfg.sca_strategy) {
      case ScaStrategy::averaged_factors: {
        mu_step(m.u, coeff_for_u(m), p.a1, p.m1);
        mu_step(m.y, coeff_for_y(m), p.a3, p.m3);
        const Eigen::MatrixXd avg = 0.5 * (m.u + m.y);
        m.u = avg;
        m.y = avg;
        break;
      }
      case ScaStrategy::naive: {
        mu_step(m.u, coeff_for_u(m), p.a1, p.m1);
        m.y = m.u;
        mu_step(m.y, coeff_for_y(m), p.a3, p.m3);
        m.u = m.y;
        break;
      }
      case ScaStrategy::averaged_updates: {
        // Both ratios are computed from the same state, then applied jointly.
        const Eigen::MatrixXd ratio_u = mu_ratio(m.u, coeff_for_u(m), p.a1, p.m1);
        const Eigen::MatrixXd ratio_y = mu_ratio(m.y, coeff_for_y(m), p.a3, p.m3);
        const Eigen::MatrixXd avg = 0.5 * (ratio_u + ratio_y);
        m.u = (m.u.array() * avg.array()).matrix();
        m.y = m.u;
        break;
      }
    }
    if ((m.u.colwise().maxCoeff().array() < 1e-14).any())
      res.averaging_zeroed_column = true;
    core_step(m, a, p);

    const double cur = kl_div(a, reconstruct(m), eff);
    check_finite(m, cur, it);
    res.kl_trace.push_back(cur);
    if (cur > prev + kMonotoneSlack) res.monotone = false;
    if (cur < min_kl) {
      min_kl = cur;
      best = m;
    }
    if (term.done(prev, cur)) {
      prev = cur;
      break;
    }
    prev = cur;
  }

  res.iterations = static_cast<int>(res.kl_trace.size()) - 1;
  res.final_kl = min_kl;
  res.final_loglik = poisson_loglik(a, reconstruct(best), eff);
  res.model = std::move(best);
  return res;
}

int worker_count() {
  if (const char* env = std::getenv("NNTUCK_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return std::min(n, 64);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

void parallel_for_index(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto body = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

FitResult fit(const Tensor3& a, const Mask3& mask, const FitConfig& cfg) {
  cfg.validate();
  const int restarts = cfg.effective_restarts();
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(restarts));
  for (int r = 0; r < restarts; ++r)
    seeds[static_cast<std::size_t>(r)] = rng::derive(cfg.seed, static_cast<std::uint64_t>(r));

  std::vector<std::optional<FitResult>> results(static_cast<std::size_t>(restarts));
  std::vector<std::string> errors(static_cast<std::size_t>(restarts));
  parallel_for_index(restarts, [&](int r) {
    const auto idx = static_cast<std::size_t>(r);
    try {
      results[idx] = cfg.spec.regime == Regime::sca
                         ? fit_sca_once(a, mask, cfg, seeds[idx])
                         : fit_once(a, mask, cfg, seeds[idx]);
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  });

  int best = -1;
  for (int r = 0; r < restarts; ++r) {
    const auto idx = static_cast<std::size_t>(r);
    if (!results[idx]) continue;
    if (best < 0 || results[idx]->final_loglik >
                        results[static_cast<std::size_t>(best)]->final_loglik)
      best = r;
  }
  if (best < 0)
    throw EstimationError("fit: every restart failed; first error: " +
                          (errors.empty() ? std::string("none") : errors.front()));

  FitResult out = std::move(*results[static_cast<std::size_t>(best)]);
  out.restart_seeds = std::move(seeds);
  return out;
}

}  // namespace nntuck
