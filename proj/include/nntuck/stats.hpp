#pragma once

// Hypothesis tests for cognitive structure: the standard likelihood-ratio
// test with chi-squared calibration, and the split likelihood-ratio test
// (universal inference), which stays valid without identifiability at the
// cost of power.

#include "nntuck/estimate.hpp"
#include "nntuck/model.hpp"
#include "nntuck/tensor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace nntuck {

enum class TestKind { standard_lrt, split_lrt };
enum class SplitGranularity { entry, tube };

std::string_view test_kind_name(TestKind k);
TestKind test_kind_from_name(std::string_view name);
std::string_view split_granularity_name(SplitGranularity g);
SplitGranularity split_granularity_from_name(std::string_view name);

struct TestSpec {
  ModelSpec null_spec;
  ModelSpec alt_spec;
  double alpha = 0.05;
  TestKind kind = TestKind::standard_lrt;
  double split_fraction = 0.5;
  SplitGranularity granularity = SplitGranularity::entry;

  /// Checks nesting by parameter count (null strictly smaller) plus the
  /// SCA-null side conditions K' >= K and C' >= K.
  void validate(int num_nodes, int num_layers) const;
};

struct TestResult {
  /// Standard: 2*(loglik_alt - loglik_null), floored at zero.
  /// Split: log likelihood ratio on the evaluation half.
  double statistic = 0.0;
  std::optional<long> df;          // standard only
  std::optional<double> p_value;   // standard only
  std::optional<double> threshold; // split only; 1/alpha on the ratio scale
  bool reject = false;
  /// Standard only: the raw statistic was negative before flooring, which
  /// signals an optimization shortfall in the alternative fit.
  bool floored = false;
  std::string warning;
  FitResult null_fit;
  FitResult alt_fit;
  FitConfig null_config;
  FitConfig alt_config;

  std::string decision() const { return reject ? "reject H0" : "fail to reject H0"; }
};

/// Difference in free parameters between the alternative and the null;
/// the degrees of freedom of the standard test.
long df_between(const ModelSpec& null_spec, const ModelSpec& alt_spec,
                int num_nodes, int num_layers);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

/// Chi-squared survival function: Q(df/2, x/2).
double chi2_sf(double x, int df);

/// Split-test decision rule: reject when the log ratio exceeds log(1/alpha).
bool split_reject(double log_statistic, double alpha);

/// Fits null and alternative on the full data (self-ties excluded per the
/// config) and calibrates 2*(ll_alt - ll_null) against chi-squared with
/// df_between degrees of freedom. cfg.spec is ignored; per-side specs come
/// from the test spec.
TestResult standard_lrt(const Tensor3& a, const TestSpec& spec, const FitConfig& cfg);

/// Universal-inference split test. Observed cells are partitioned into an
/// estimation half (fits the alternative) and an evaluation half (fits the
/// null and evaluates both log-likelihoods); rejects when the log ratio
/// exceeds log(1/alpha). A split that leaves some layer with no observed
/// cells on either half is redrawn up to 10 times.
TestResult split_lrt(const Tensor3& a, const TestSpec& spec, const FitConfig& cfg,
                     std::uint64_t seed);

nlohmann::json test_spec_to_json(const TestSpec& spec);
nlohmann::json test_result_to_json(const TestResult& result, const TestSpec& spec,
                                   const FitConfig& cfg);

}  // namespace nntuck
