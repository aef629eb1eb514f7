#include "starmid/mom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "starmid/errors.hpp"
#include "starmid/parallel.hpp"

namespace starmid {

BlockPartition partition_blocks(std::size_t n, std::size_t block_len) {
  if (block_len == 0)
    throw ConfigError("block_len: must be at least 1");
  if (block_len > n)
    throw ConfigError("block_len: exceeds sample size");
  return BlockPartition{n, block_len, n / block_len};
}

std::vector<double> block_means(const std::vector<double>& values, const BlockPartition& part) {
  std::vector<double> means(part.count);
  const double inv = 1.0 / static_cast<double>(part.block_len);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(part.count); ++j) {
    double s = 0.0;
    for (std::size_t i = part.begin(j); i < part.end(j); ++i)
      s += values[i];
    means[j] = s * inv;
  }
  return means;
}

double lower_median(std::vector<double> means) {
  if (means.empty())
    throw ConfigError("block count: no complete blocks");
  // ceil(M/2)-th order statistic, 0-based index ceil(M/2) - 1 = (M-1)/2
  const std::size_t k = (means.size() - 1) / 2;
  std::nth_element(means.begin(), means.begin() + k, means.end());
  return means[k];
}

double median_of_means(const std::vector<double>& values, std::size_t block_len) {
  const BlockPartition part = partition_blocks(values.size(), block_len);
  return lower_median(block_means(values, part));
}

double mom_abs_distance(const std::vector<double>& eval_u, const std::vector<double>& eval_v,
                        std::size_t block_len) {
  if (eval_u.size() != eval_v.size())
    throw ConfigError("eval columns: length mismatch");
  std::vector<double> diff(eval_u.size());
  for (std::size_t i = 0; i < diff.size(); ++i)
    diff[i] = std::abs(eval_u[i] - eval_v[i]);
  return median_of_means(diff, block_len);
}

} // namespace starmid
