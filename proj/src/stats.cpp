#include "nntuck/stats.hpp"

#include "nntuck/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nntuck {

std::string_view test_kind_name(TestKind k) {
  return k == TestKind::standard_lrt ? "standard-lrt" : "split-lrt";
}

TestKind test_kind_from_name(std::string_view name) {
  if (name == "standard-lrt") return TestKind::standard_lrt;
  if (name == "split-lrt") return TestKind::split_lrt;
  throw std::invalid_argument("unknown test kind: " + std::string(name));
}

std::string_view split_granularity_name(SplitGranularity g) {
  return g == SplitGranularity::entry ? "entry" : "tube";
}

SplitGranularity split_granularity_from_name(std::string_view name) {
  if (name == "entry") return SplitGranularity::entry;
  if (name == "tube") return SplitGranularity::tube;
  throw std::invalid_argument("unknown split granularity: " + std::string(name));
}

void TestSpec::validate(int num_nodes, int num_layers) const {
  null_spec.validate(num_nodes, num_layers);
  alt_spec.validate(num_nodes, num_layers);
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("test spec: alpha must be in (0, 1)");
  if (kind == TestKind::split_lrt &&
      !(split_fraction > 0.0 && split_fraction < 1.0))
    throw std::invalid_argument("test spec: split_fraction must be in (0, 1)");
  const long null_params = param_count(null_spec, num_nodes, num_layers);
  const long alt_params = param_count(alt_spec, num_nodes, num_layers);
  if (null_params >= alt_params)
    throw std::invalid_argument(
        "test spec: null must be nested in the alternative (fewer parameters)");
  if (null_spec.regime == Regime::sca) {
    // The agreement test compares against a dependent alternative with
    // K' >= K and C' >= K.
    const int k = null_spec.k;
    if (alt_spec.k < k || alt_spec.resolved_c(num_layers) < k)
      throw std::invalid_argument(
          "test spec: the SCA null requires K' >= K and C' >= K in the alternative");
  }
}

long df_between(const ModelSpec& null_spec, const ModelSpec& alt_spec,
                int num_nodes, int num_layers) {
  const long null_params = param_count(null_spec, num_nodes, num_layers);
  const long alt_params = param_count(alt_spec, num_nodes, num_layers);
  if (null_params >= alt_params)
    throw std::invalid_argument("df_between: models are not nested by parameter count");
  return alt_params - null_params;
}

namespace {

// Regularized lower incomplete gamma by its power series; converges fast for
// x < a + 1.
double gamma_p_series(double a, double x) {
  const double gln = std::lgamma(a);
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < 10000; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * std::numeric_limits<double>::epsilon())
      break;
  }
  return sum * std::exp(-x + a * std::log(x) - gln);
}

// Regularized upper incomplete gamma by Lentz's continued fraction; for
// x >= a + 1.
double gamma_q_cf(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() /
                          std::numeric_limits<double>::epsilon();
  const double gln = std::lgamma(a);
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) <= std::numeric_limits<double>::epsilon()) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0 || !std::isfinite(a) || !std::isfinite(x))
    throw std::invalid_argument("gamma_q: requires a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

double chi2_sf(double x, int df) {
  if (df < 1) throw std::invalid_argument("chi2_sf: df must be positive");
  if (x < 0.0) throw std::invalid_argument("chi2_sf: x must be nonnegative");
  return gamma_q(0.5 * df, 0.5 * x);
}

bool split_reject(double log_statistic, double alpha) {
  return log_statistic > std::log(1.0 / alpha);
}

namespace {

FitConfig config_for(const FitConfig& base, const ModelSpec& spec) {
  FitConfig cfg = base;
  cfg.spec = spec;
  return cfg;
}

std::string sca_caution(const TestSpec& spec) {
  if (spec.null_spec.regime == Regime::sca || spec.alt_spec.regime == Regime::sca)
    return "the SCA fit has no optimality guarantee, even to a local optimum; "
           "interpret the determination with caution";
  return {};
}

}  // namespace

TestResult standard_lrt(const Tensor3& a, const TestSpec& spec, const FitConfig& cfg) {
  spec.validate(a.n1(), a.n3());
  const Mask3 full = Mask3::ones(a.n1(), a.n2(), a.n3());

  FitConfig null_cfg = config_for(cfg, spec.null_spec);
  null_cfg.seed = rng::derive(cfg.seed, 0);
  FitConfig alt_cfg = config_for(cfg, spec.alt_spec);
  alt_cfg.seed = rng::derive(cfg.seed, 1);

  TestResult res;
  res.null_config = null_cfg;
  res.alt_config = alt_cfg;
  res.null_fit = fit(a, full, null_cfg);
  res.alt_fit = fit(a, full, alt_cfg);

  const double raw = 2.0 * (res.alt_fit.final_loglik - res.null_fit.final_loglik);
  res.floored = raw < 0.0;
  res.statistic = std::max(raw, 0.0);
  res.df = df_between(spec.null_spec, spec.alt_spec, a.n1(), a.n3());
  res.p_value = chi2_sf(res.statistic, static_cast<int>(*res.df));
  res.reject = *res.p_value < spec.alpha;
  res.warning = sca_caution(spec);
  if (res.floored) {
    if (!res.warning.empty()) res.warning += "; ";
    res.warning +=
        "negative raw statistic floored at 0 (alternative fit fell short of "
        "the null; the optimizer may not have reached a global optimum)";
  }
  return res;
}

TestResult split_lrt(const Tensor3& a, const TestSpec& spec, const FitConfig& cfg,
                     std::uint64_t seed) {
  spec.validate(a.n1(), a.n3());
  const Mask3 base = cfg.exclude_diagonal && a.n1() == a.n2()
                         ? Mask3::ones(a.n1(), a.n2(), a.n3()).without_diagonal()
                         : Mask3::ones(a.n1(), a.n2(), a.n3());

  // Partition the observed cells into the estimation half (d0, fits the
  // alternative) and the evaluation half (d1, fits the null). Redraw when a
  // layer ends up with no observed cells on either half.
  Mask3 d0, d1;
  bool ok = false;
  for (std::uint64_t attempt = 0; attempt < 10 && !ok; ++attempt) {
    rng::Stream s = rng::stream(rng::derive(seed, attempt));
    d0 = Mask3(a.n1(), a.n2(), a.n3());
    d1 = Mask3(a.n1(), a.n2(), a.n3());
    if (spec.granularity == SplitGranularity::entry) {
      for (int k = 0; k < a.n3(); ++k)
        for (int j = 0; j < a.n2(); ++j)
          for (int i = 0; i < a.n1(); ++i) {
            if (!base(i, j, k)) continue;
            const bool estimation = s.next_unit() < spec.split_fraction;
            (estimation ? d0 : d1)(i, j, k) = 1;
          }
    } else {
      for (int j = 0; j < a.n2(); ++j)
        for (int i = 0; i < a.n1(); ++i) {
          if (!base(i, j, 0)) continue;  // base is tubular (ones or diag-cleared)
          const bool estimation = s.next_unit() < spec.split_fraction;
          for (int k = 0; k < a.n3(); ++k) (estimation ? d0 : d1)(i, j, k) = 1;
        }
    }
    ok = true;
    for (int k = 0; k < a.n3() && ok; ++k) {
      long obs0 = 0, obs1 = 0;
      for (int j = 0; j < a.n2(); ++j)
        for (int i = 0; i < a.n1(); ++i) {
          obs0 += d0(i, j, k);
          obs1 += d1(i, j, k);
        }
      ok = obs0 > 0 && obs1 > 0;
    }
  }
  if (!ok)
    throw EstimationError(
        "split_lrt: could not draw a split covering every layer in 10 attempts");

  FitConfig alt_cfg = config_for(cfg, spec.alt_spec);
  alt_cfg.seed = rng::derive(seed, 101);
  alt_cfg.exclude_diagonal = false;  // the split masks already encode the base mask
  FitConfig null_cfg = config_for(cfg, spec.null_spec);
  null_cfg.seed = rng::derive(seed, 102);
  null_cfg.exclude_diagonal = false;

  TestResult res;
  res.null_config = null_cfg;
  res.alt_config = alt_cfg;
  res.alt_fit = fit(a, d0, alt_cfg);
  res.null_fit = fit(a, d1, null_cfg);

  const double ll_alt_on_d1 = poisson_loglik(a, reconstruct(res.alt_fit.model), d1);
  const double ll_null_on_d1 = poisson_loglik(a, reconstruct(res.null_fit.model), d1);
  res.statistic = ll_alt_on_d1 - ll_null_on_d1;
  res.threshold = 1.0 / spec.alpha;
  res.reject = split_reject(res.statistic, spec.alpha);
  res.warning = sca_caution(spec);
  return res;
}

nlohmann::json test_spec_to_json(const TestSpec& spec) {
  return {{"null_spec", spec_to_json(spec.null_spec)},
          {"alt_spec", spec_to_json(spec.alt_spec)},
          {"alpha", spec.alpha},
          {"kind", std::string(test_kind_name(spec.kind))},
          {"split_fraction", spec.split_fraction},
          {"split_granularity", std::string(split_granularity_name(spec.granularity))}};
}

nlohmann::json test_result_to_json(const TestResult& result, const TestSpec& spec,
                                   const FitConfig& cfg) {
  nlohmann::json j = {{"spec", test_spec_to_json(spec)},
                      {"base_fit_config", fit_config_to_json(cfg)},
                      {"null_fit_config", fit_config_to_json(result.null_config)},
                      {"alt_fit_config", fit_config_to_json(result.alt_config)},
                      {"statistic", result.statistic},
                      {"decision", result.decision()},
                      {"warning", result.warning},
                      {"null_fit",
                       {{"final_kl", result.null_fit.final_kl},
                        {"final_loglik", result.null_fit.final_loglik},
                        {"iterations", result.null_fit.iterations},
                        {"seed_used", result.null_fit.seed_used},
                        {"restart_seeds", result.null_fit.restart_seeds}}},
                      {"alt_fit",
                       {{"final_kl", result.alt_fit.final_kl},
                        {"final_loglik", result.alt_fit.final_loglik},
                        {"iterations", result.alt_fit.iterations},
                        {"seed_used", result.alt_fit.seed_used},
                        {"restart_seeds", result.alt_fit.restart_seeds}}}};
  if (result.df) j["df"] = *result.df;
  if (result.p_value) j["p_value"] = *result.p_value;
  if (result.threshold) j["threshold"] = *result.threshold;
  if (result.floored) j["floored"] = true;
  return j;
}

}  // namespace nntuck
