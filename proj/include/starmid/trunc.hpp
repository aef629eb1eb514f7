#pragma once

#include <cstddef>
#include <vector>

namespace starmid {

// Truncation level for a real-valued evaluation column. Either given
// explicitly or derived from moment data as (n/m)^(1/q) * lq_norm.
struct TruncationSpec {
  double level = 0.0;
  // Moment-derived parameters, kept for reporting; zero when explicit.
  double q = 0.0;
  bool q_outside_theory = false; // set when q > 4; the bounds degrade gracefully

  static TruncationSpec explicit_level(double level);
  // Requires n >= m >= 1, q > 2, lq_norm >= 0. q > 4 is accepted but flagged.
  static TruncationSpec from_moments(std::size_t n, std::size_t m, double q, double lq_norm);
};

// Clip to [-level, level], preserving sign.
std::vector<double> truncate(const std::vector<double>& values, const TruncationSpec& spec);

struct SurvivorSet {
  std::vector<std::size_t> indices; // exactly the i with |values[i]| <= level
  std::size_t complement_size = 0;
};

SurvivorSet survivor_set(const std::vector<double>& values, const TruncationSpec& spec);

// (1/n) * sum of values[i]^2 over survivors i not in `excluded`.
// Normalized by the full sample size n, not by the number of retained points.
// Indices in `excluded` outside the survivor set are ignored.
double trimmed_second_moment(const std::vector<double>& values, const TruncationSpec& spec,
                             const std::vector<std::size_t>& excluded);

} // namespace starmid
