#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "starmid/core.hpp"
#include "starmid/procedure.hpp"

namespace starmid {

enum class DesignKind { gaussian, student_t };
enum class NoiseKind { gaussian, student_t, pareto, none };
enum class TargetKind { realizable_noise, midpoint_adversarial, convex_combination };
enum class DictionaryStructure { random, axis_pairs };
// What each method's excess risk is measured against:
//  - dictionary_best: the true-risk minimizer f* over the dictionary, for
//    every method (the usual error-rate definition);
//  - class_best: the minimizer over the method's own search class (dictionary
//    for ERM, midpoints for the two-stage procedure, pairwise segments for the
//    star baseline), which keeps medians positive in adversarial scenarios
//    where midpoints genuinely beat every dictionary element.
enum class ExcessBenchmark { dictionary_best, class_best };

struct DesignSpec {
  DesignKind kind = DesignKind::gaussian;
  std::size_t dim = 8;
  double scale = 1.0;
  double nu = 5.0; // student_t only
};

struct DictionarySpec {
  DictionaryStructure structure = DictionaryStructure::random;
  std::size_t count = 8;
  double scale = 1.0;      // random: sd of iid coefficient entries
  double pair_base = 1.0;  // axis_pairs: half-distance between the two members
  double pair_jitter = 0.0; // axis_pairs: center jitter sd is pair_jitter / sqrt(n)
};

struct TargetSpec {
  TargetKind kind = TargetKind::realizable_noise;
  std::size_t target_id = 0;          // realizable_noise
  std::size_t first = 0;              // midpoint_adversarial pair
  std::size_t second = 1;
  double c = 1.0;                     // perturbation (c / sqrt(n)) * (f_first - f_second)
  std::vector<double> weights;        // convex_combination; empty = seeded Dirichlet(1)
};

struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  double scale = 1.0;
  double nu = 5.0;    // student_t: degrees of freedom (> 2)
  double shape = 3.0; // pareto: tail index (> 2), centered at its mean
  double second_moment() const; // closed form; throws on infinite variance
};

struct OracleSpec {
  bool analytic = true;
  std::size_t samples = 200000; // Monte Carlo oracle size
};

// Exact medians coeff * n^exponent injected instead of running any method;
// exercises the slope-fitting path end to end.
struct StubPowerLaw {
  double coefficient = 4.0;
  double exponent = -1.0;
};

struct ScenarioSpec {
  DesignSpec design;
  DictionarySpec dictionary;
  TargetSpec target;
  NoiseSpec noise;
  std::vector<std::size_t> n_grid;
  std::size_t replications = 200;
  std::uint64_t master_seed = 1;
  AggregationConfig aggregation;
  OracleSpec oracle;
  ExcessBenchmark benchmark = ExcessBenchmark::dictionary_best;
  std::optional<StubPowerLaw> stub;

  void validate() const;
  static ScenarioSpec from_json_file(const std::string& path);
  static ScenarioSpec from_json_text(const std::string& text, const std::string& origin);
};

struct Instance {
  SampleSet sample;
  Dictionary dict;
  RiskOracle oracle;
  Hypothesis bayes; // the regression function E[Y|X]
  double noise_m2 = 0.0;
};

// Reproducible instance for one (n, replication) cell. Draw order is fixed:
// dictionary, target extras (adversarial sign / random weights), covariates
// row-major, then noise.
Instance generate(const ScenarioSpec& scenario, std::size_t n, std::uint64_t replication_seed);

struct StarResult {
  std::size_t f_id = 0;   // segment endpoint chosen from the dictionary
  double lambda = 0.0;    // position on [f_hat1, f_id]
  std::size_t f_hat1 = 0; // stage-one ERM
  double d2_risk = 0.0;
  Hypothesis hypothesis;
};

// The empirical star baseline: ERM on the first half, then exact minimization
// over the segments [f_hat1, f] on the second half.
StarResult empirical_star_baseline(const SampleSet& sample, const Dictionary& dict);

// True-risk minimum over all pairwise segments {lambda f_j + (1 - lambda) f_k}
// (closed-form quadratic in lambda per pair).
double best_segment_risk(const Dictionary& dict, const RiskOracle& oracle);

struct ReportRow {
  std::string method;
  std::size_t n = 0;
  std::size_t replication = 0;
  double excess_risk = 0.0;
  std::uint64_t seed = 0;
};

struct SummaryRow {
  std::string method;
  std::size_t n = 0;
  double median_excess = 0.0;
  double iqr_lo = 0.0;
  double iqr_hi = 0.0;
};

struct SlopeRow {
  std::string method;
  double slope = 0.0;
  double stderr_ = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<SlopeRow> slopes;
  std::vector<std::string> errors; // per-cell failures; rows for them are dropped
};

ExperimentReport run_experiment(const ScenarioSpec& scenario);

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);
void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);
void write_slopes_csv(const std::string& path, const std::vector<SlopeRow>& rows);

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0; // of log y against log n
  double stderr_ = 0.0;
  std::size_t points = 0; // positive-median points actually used
};

// Least squares of log y on log n over the points with y > 0.
PowerLawFit fit_power_law(const std::vector<double>& ns, const std::vector<double>& ys);

// Order-statistic (lower) empirical quantile, matching the project-wide
// lower-median convention.
double lower_quantile(std::vector<double> values, double p);

struct MomCalibration {
  std::size_t block_len = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double coverage = 0.0;
  std::size_t trials = 0;
};

// Fraction of trials in which alpha * ||u - u'|| <= Med <= beta * ||u - u'||
// holds simultaneously over all midpoint pairs.
double mom_band_coverage(const ScenarioSpec& scenario, std::size_t block_len, double alpha,
                         double beta, std::size_t trials, std::uint64_t seed);

// Smallest block length on the grid (and the data-driven band) reaching the
// coverage target over all midpoint pairs.
MomCalibration calibrate_mom_constants(const ScenarioSpec& scenario,
                                       const std::vector<std::size_t>& block_grid,
                                       double target_coverage, std::size_t trials,
                                       std::uint64_t seed);

} // namespace starmid
