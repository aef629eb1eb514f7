#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "starmid/core.hpp"

namespace starmid {

// The candidate set for the second aggregation stage: every midpoint
// (f_j + f_k) / 2 with j <= k, listed in lexicographic pair order. The j == k
// pairs reproduce the dictionary itself.
struct MidpointSet {
  std::vector<Midpoint> members;
  Eigen::MatrixXd columns; // N x |members| evaluations on a sample

  static MidpointSet build(const Dictionary& dict, const EvaluationMatrix& eval);
  Hypothesis hypothesis(const Dictionary& dict, std::size_t idx) const;
  std::size_t size() const { return members.size(); }
};

// A finite class of generators w living inside a star-shaped hull: the
// localized complexities take suprema over {lambda * w : 0 <= lambda <= 1,
// ||lambda * w|| <= r}, which for each generator is attained at
// lambda = min(1, r / ||w||). We therefore only need sample evaluations,
// coefficients and true norms of the generators.
struct LocalizedClass {
  Eigen::MatrixXd columns; // N x k evaluations on the sample
  Eigen::MatrixXd coeffs;  // k x d
  Eigen::VectorXd offsets; // k
  Eigen::VectorXd norms;   // k true L2 norms from the risk oracle

  std::size_t size() const { return static_cast<std::size_t>(norms.size()); }
  double max_norm() const { return size() == 0 ? 0.0 : norms.maxCoeff(); }
};

// Differences u - u' over all midpoint pairs (the class U - U).
LocalizedClass difference_class(const Dictionary& dict, const MidpointSet& mids,
                                const RiskOracle& oracle);

// Differences u - u0 for a fixed center (the class U - u0, center excluded).
LocalizedClass star_class(const Dictionary& dict, const MidpointSet& mids, std::size_t u0,
                          const RiskOracle& oracle);

// OpenMP kernels shared by the sup estimators; serial twins live in
// starmid::ref for the equivalence tests and the kernel benchmark.
namespace kernels {
// rounds x k matrix of |sum_i eps_i * cols(i, j)| with one Rademacher vector
// per round, round t seeded as derive_seed(seed, t).
Eigen::MatrixXd abs_sign_sums(const Eigen::MatrixXd& cols, int rounds, std::uint64_t seed);
// rounds x k matrix of |factor * z|, z standard normal.
Eigen::MatrixXd abs_gaussian_draws(const Eigen::MatrixXd& factor, int rounds, std::uint64_t seed);
} // namespace kernels

struct McOptions {
  int rounds = 2000;
  std::uint64_t seed = 1;
  // Enumerate all 2^N sign vectors instead of sampling (Rademacher and
  // multiplier processes only, N <= 20). Estimates become exact, std_error 0.
  bool exhaustive = false;
};

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// One sup process with its Monte Carlo draws frozen. The expensive part (the
// per-round sums over the sample) does not depend on the radius, so a process
// is built once and then evaluated at many radii by a cheap scan. at(r).ratio
// is the solver predicate value / r^p (p = 1 for mean processes, p = 2 for
// the multiplier quantile); the scan is arranged so that ratio is exactly
// non-increasing in r in floating point, which makes bisection traces
// machine-checkable.
class SupProcess {
public:
  struct Eval {
    double value = 0.0;
    double std_error = 0.0;
    double ratio = 0.0;
  };

  static SupProcess rademacher(const LocalizedClass& cls, const McOptions& opt);
  static SupProcess gaussian(const LocalizedClass& cls, const RiskOracle& oracle,
                             const McOptions& opt);
  static SupProcess multiplier(const LocalizedClass& cls, const Eigen::VectorXd& residuals,
                               double delta, const McOptions& opt);

  Eval at(double r) const;
  int rounds() const { return static_cast<int>(abs_draws_.rows()); }

private:
  SupProcess() = default;
  Eigen::MatrixXd abs_draws_; // rounds x k, pre-scaled
  Eigen::VectorXd inv_norms_;
  bool quantile_ = false;
  double delta_ = 0.0;
  bool exact_ = false; // exhaustive enumeration: no sampling error
};

// Gram matrix of the generators under the oracle's inner product, used to
// draw the Gaussian process exactly.
Eigen::MatrixXd gram_matrix(const LocalizedClass& cls, const RiskOracle& oracle);

// One-shot estimates at a fixed radius.
McEstimate rademacher_sup(const LocalizedClass& cls, double r, const McOptions& opt);
McEstimate gaussian_sup(const LocalizedClass& cls, double r, const RiskOracle& oracle,
                        const McOptions& opt);
McEstimate multiplier_quantile(const LocalizedClass& cls, double r,
                               const Eigen::VectorXd& residuals, double delta,
                               const McOptions& opt);

struct TracePoint {
  double r = 0.0;
  double value = 0.0;
  double ratio = 0.0;
};

struct FixedPointResult {
  double r = 0.0;      // certified radius: smallest bracketed r with ratio <= threshold
  double zeta = 0.0;
  double threshold = 0.0; // zeta * sqrt(N)
  SupProcess::Eval at_r;
  bool collapsed = false; // condition already held at r_min
  std::vector<TracePoint> trace;
};

// Geometric bisection for the smallest radius with at(r).ratio <= zeta *
// sqrt(n_sample). Throws ConfigError when even r_max fails the condition.
FixedPointResult fixed_point(const SupProcess& process, double zeta, std::size_t n_sample,
                             double r_min, double r_max, double rel_tol = 0.02);

struct ComplexityConstants {
  double zeta_m = 0.05;  // multiplier fixed point
  double zeta_q1 = 0.05; // Gaussian fixed point
  double zeta_q2 = 0.05; // Rademacher fixed point
  double delta = 0.05;   // confidence level; the multiplier quantile runs at delta / 2
};

struct ROptOptions {
  int rounds = 2000;
  std::uint64_t seed = 1;
  double rel_tol = 0.02;
  double r_min_factor = 1e-3; // r_min = r_min_factor * (2 * max norm)
};

struct ROptBreakdown {
  double value = 0.0; // 2 * max(sup_u0 r_M^2, r_Q1^2, r_Q2^2)
  double sup_r_m_sq = 0.0;
  FixedPointResult q1; // Gaussian
  FixedPointResult q2; // Rademacher
  std::vector<FixedPointResult> m_results; // one per center u0
  std::vector<Midpoint> centers;
  bool trivial = false; // single distinct midpoint: value is exactly 0
};

ROptBreakdown r_opt(const SampleSet& sample, const Dictionary& dict, const RiskOracle& oracle,
                    const ComplexityConstants& constants, const ROptOptions& options);

// Diagnostic check of the three-part concentration event behind the guarantee,
// evaluated on one sample around a chosen center u0.
struct EventCheckConfig {
  double rho = 0.0;
  double r_u = 0.0;
  double alpha = 0.25;
  double beta = 4.0;
  std::size_t block_len = 9;
};

struct BulletReport {
  bool pass = true;
  double worst_margin = 0.0; // min over checks of (allowed - observed); >= 0 passes
  std::size_t checks = 0;
  std::size_t violations = 0;
};

struct EventReport {
  BulletReport multiplier;  // |P_N - P| of xi * (u - u0) within rho * max(r_u^2, d^2)
  BulletReport lower_bound; // P_N (u1 - u2)^2 >= (1 - rho) * d^2 at distance >= r_u
  BulletReport mom_band;    // Med within [alpha d, beta d] (or <= beta r_u below r_u)
  bool pass = true;
};

EventReport check_event_a(const SampleSet& sample, const Dictionary& dict, const Hypothesis& u0,
                          const RiskOracle& oracle, const EventCheckConfig& cfg);

} // namespace starmid
