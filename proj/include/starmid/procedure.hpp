#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "starmid/complexity.hpp"
#include "starmid/core.hpp"

namespace starmid {

// Where the localization radius r_U comes from:
//  - explicit_value: taken verbatim from the config,
//  - plug_in: r_U^2 = kappa * sigma2_hat * log(max(M, 2)) / n1 with sigma2_hat
//    the smallest stage-one empirical risk,
//  - fixed_point: the Monte Carlo localized-complexity radius (needs an oracle).
enum class RUSource { explicit_value, plug_in, fixed_point };

struct AggregationConfig {
  std::size_t block_len = 9;
  double alpha = 0.25;
  double beta = 4.0;
  std::optional<double> rho; // default (alpha / (20 beta))^2
  double threshold_factor = 3.0;
  double guarantee_factor = 6.0; // C in the excess-risk certificate
  double theta = 1.0 / 32.0;     // confidence exponent scale, recorded with results

  RUSource r_u_source = RUSource::plug_in;
  double r_u_value = 0.0;    // explicit_value
  double plug_in_kappa = 8.0;
  ComplexityConstants complexity;  // fixed_point
  ROptOptions complexity_options;

  double resolved_rho() const;
  void validate() const; // throws ConfigError naming the offending field
};

struct CandidateAudit {
  std::size_t id = 0;
  double empirical_risk = 0.0;
  double mom_distance = 0.0; // Med_l |f_hat - f| on the stage-one half
  double threshold = 0.0;
  bool in_v = false;
};

struct VSet {
  std::size_t f_hat = 0;
  double f_hat_risk = 0.0;
  double r_u = 0.0;
  std::vector<std::size_t> ids; // ascending; always contains f_hat
  std::vector<CandidateAudit> audit;
};

// Stage one: ERM winner plus every dictionary member whose empirical risk is
// within threshold_factor * max(r_u^2, rho / alpha^2 * Med^2) of it.
VSet build_v(const EvaluationMatrix& eval, const Eigen::VectorXd& ys,
             const AggregationConfig& cfg, double r_u);

// Stage two candidate list: all midpoint pairs (j <= k) of V, lexicographic.
std::vector<Midpoint> build_w(const std::vector<std::size_t>& v_ids);

struct AggregationResult {
  Midpoint selected;
  double selected_risk = 0.0; // empirical risk of the winner on the second half
  VSet v;
  std::vector<Midpoint> w_pairs;
  std::vector<double> w_risks; // aligned with w_pairs
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

// The full two-stage procedure: split the sample, build V on the first half,
// pick the empirically best midpoint of V on the second half.
AggregationResult aggregate(const SampleSet& sample, const Dictionary& dict,
                            const AggregationConfig& cfg, const RiskOracle* oracle = nullptr);

Hypothesis selected_hypothesis(const Dictionary& dict, const AggregationResult& result);

} // namespace starmid
