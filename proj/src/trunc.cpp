#include "starmid/trunc.hpp"

#include <algorithm>
#include <cmath>

#include "starmid/errors.hpp"

namespace starmid {

TruncationSpec TruncationSpec::explicit_level(double level) {
  if (!(level >= 0.0))
    throw ConfigError("level: must be nonnegative");
  TruncationSpec s;
  s.level = level;
  return s;
}

TruncationSpec TruncationSpec::from_moments(std::size_t n, std::size_t m, double q,
                                            double lq_norm) {
  if (m == 0)
    throw ConfigError("m: must be at least 1");
  if (m > n)
    throw ConfigError("m: exceeds sample size");
  if (!(q > 2.0))
    throw ConfigError("q: moment order must exceed 2");
  if (!(lq_norm >= 0.0))
    throw ConfigError("lq_norm: must be nonnegative");
  TruncationSpec s;
  s.level = std::pow(static_cast<double>(n) / static_cast<double>(m), 1.0 / q) * lq_norm;
  s.q = q;
  s.q_outside_theory = q > 4.0;
  return s;
}

std::vector<double> truncate(const std::vector<double>& values, const TruncationSpec& spec) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    out[i] = std::abs(v) <= spec.level ? v : std::copysign(spec.level, v);
  }
  return out;
}

SurvivorSet survivor_set(const std::vector<double>& values, const TruncationSpec& spec) {
  SurvivorSet s;
  s.indices.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(values[i]) <= spec.level)
      s.indices.push_back(i);
  }
  s.complement_size = values.size() - s.indices.size();
  return s;
}

double trimmed_second_moment(const std::vector<double>& values, const TruncationSpec& spec,
                             const std::vector<std::size_t>& excluded) {
  if (values.empty())
    throw ConfigError("values: empty sample");
  std::vector<char> skip(values.size(), 0);
  for (std::size_t i : excluded) {
    if (i < values.size())
      skip[i] = 1;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!skip[i] && std::abs(v) <= spec.level)
      s += v * v;
  }
  return s / static_cast<double>(values.size());
}

} // namespace starmid
