#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace starmid {

// Labeled regression sample: n rows of covariates plus responses.
struct SampleSet {
  Eigen::MatrixXd xs; // n x d
  Eigen::VectorXd ys; // n

  std::size_t size() const { return static_cast<std::size_t>(xs.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(xs.cols()); }

  // First floor(n/2) rows; the second half gets the extra point when n is odd.
  SampleSet first_half() const;
  SampleSet second_half() const;
};

// Finite dictionary of affine hypotheses f_j(x) = <coeffs_j, x> + offset_j.
// Hypothesis ids are row indices.
struct Dictionary {
  Eigen::MatrixXd coeffs;  // M x d
  Eigen::VectorXd offsets; // M (zero when the source file had no offset column)

  std::size_t size() const { return static_cast<std::size_t>(coeffs.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(coeffs.cols()); }
};

// A single affine predictor, used for anything outside the dictionary proper
// (midpoints, segment points, oracle targets).
struct Hypothesis {
  Eigen::VectorXd coeffs;
  double offset = 0.0;

  static Hypothesis from_dictionary(const Dictionary& dict, std::size_t id);
  // (f_j + f_k) / 2
  static Hypothesis midpoint(const Dictionary& dict, std::size_t j, std::size_t k);
  // lambda * f_j + (1 - lambda) * f_k
  static Hypothesis segment_point(const Dictionary& dict, std::size_t j, std::size_t k,
                                  double lambda);
};

// Unordered pair of dictionary ids identifying the midpoint (f_j + f_k)/2,
// stored with first <= second.
struct Midpoint {
  std::size_t first = 0;
  std::size_t second = 0;

  Midpoint() = default;
  Midpoint(std::size_t a, std::size_t b) : first(a < b ? a : b), second(a < b ? b : a) {}
  bool operator==(const Midpoint&) const = default;
  // lexicographic; used for deterministic tie-breaks
  bool operator<(const Midpoint& o) const {
    return first != o.first ? first < o.first : second < o.second;
  }
};

// n x M matrix of hypothesis evaluations; construction rejects non-finite
// entries so downstream risk comparisons never see NaN.
struct EvaluationMatrix {
  Eigen::MatrixXd values;

  explicit EvaluationMatrix(Eigen::MatrixXd v);
  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

// Evaluate every dictionary hypothesis on every sample row (OpenMP over rows).
EvaluationMatrix evaluate(const Dictionary& dict, const SampleSet& sample);

// Mean squared residual of one evaluation column against the responses.
double empirical_risk(const Eigen::VectorXd& column, const Eigen::VectorXd& ys);

struct ErmResult {
  std::size_t id = 0;
  double risk = 0.0;
};

// Argmin of empirical risk over the candidate column ids; ties go to the
// lowest id. Errors on an empty candidate list.
ErmResult erm(const EvaluationMatrix& eval, const Eigen::VectorXd& ys,
              const std::vector<std::size_t>& candidates);
ErmResult erm_all(const EvaluationMatrix& eval, const Eigen::VectorXd& ys);

struct RiskEstimate {
  double value = 0.0;
  double std_error = 0.0; // zero in analytic mode
};

// Population risk E (f(X) - Y)^2, either in closed form for a centered design
// with known second moment and an affine regression target plus independent
// noise, or by averaging over a dedicated Monte Carlo sample.
class RiskOracle {
 public:
  static RiskOracle analytic(Eigen::MatrixXd sigma, Eigen::VectorXd target_coeffs,
                             double target_offset, double noise_m2);
  // `big` must be disjoint from any training data; `seed` records how it was drawn.
  static RiskOracle monte_carlo(SampleSet big, std::uint64_t seed);

  RiskEstimate true_risk(const Hypothesis& h) const;
  // E f(X) g(X)
  double inner(const Hypothesis& f, const Hypothesis& g) const;
  // squared L2(mu) distance E (f - g)^2
  double distance2(const Hypothesis& f, const Hypothesis& g) const;
  double distance(const Hypothesis& f, const Hypothesis& g) const;
  // E (u0(X) - Y) g(X), the mean of the multiplier process at g
  double multiplier_mean(const Hypothesis& u0, const Hypothesis& g) const;
  // E [x 1][x 1]^T for affine functionals: inner(f, g) equals
  // [f.coeffs f.offset] * M * [g.coeffs g.offset]^T with this M.
  Eigen::MatrixXd second_moment_augmented(std::size_t dim) const;

  bool is_analytic() const { return analytic_; }
  std::uint64_t seed() const { return seed_; }

  // Exhaustive argmin of true risk over the dictionary; ties to lowest id.
  std::size_t best_in_dictionary(const Dictionary& dict) const;
  // Exhaustive argmin over all midpoints (j <= k); lexicographic tie-break.
  Midpoint best_midpoint(const Dictionary& dict) const;

 private:
  bool analytic_ = true;
  Eigen::MatrixXd sigma_;
  Eigen::VectorXd target_coeffs_;
  double target_offset_ = 0.0;
  double noise_m2_ = 0.0;
  SampleSet big_;
  std::uint64_t seed_ = 0;
};

// ---- CSV interchange ------------------------------------------------------
// Samples: header "x1,...,xd,y", one row per observation.
// Dictionary: header "a1,...,ad[,offset]", one row per hypothesis.
// Parse failures throw ParseError with the offending 1-based line number.

SampleSet read_samples_csv(const std::string& path);
void write_samples_csv(const std::string& path, const SampleSet& sample);
Dictionary read_dictionary_csv(const std::string& path);
void write_dictionary_csv(const std::string& path, const Dictionary& dict);

// Shared low-level helpers (also used by the report writers).
std::string format_double(double v); // shortest exact round-trip decimal
std::vector<double> column_vector(const EvaluationMatrix& eval, std::size_t j);
// Writes via a sibling temp file and rename, so readers never see a torn file.
void write_text_atomic(const std::string& path, const std::string& text);

} // namespace starmid
