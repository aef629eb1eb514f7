#include "starmid/serial_ref.hpp"

#include <algorithm>
#include <cmath>

#include "starmid/errors.hpp"
#include "starmid/rng.hpp"

namespace starmid::ref {

Eigen::MatrixXd evaluate(const Dictionary& dict, const SampleSet& sample) {
  if (dict.dim() != sample.dim())
    throw ConfigError("dictionary dimension: does not match sample");
  const auto n = static_cast<Eigen::Index>(sample.size());
  const auto m = static_cast<Eigen::Index>(dict.size());
  Eigen::MatrixXd vals(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j)
      vals(i, j) = dict.coeffs.row(j).dot(sample.xs.row(i)) + dict.offsets(j);
  }
  return vals;
}

std::vector<double> block_means(const std::vector<double>& values, const BlockPartition& part) {
  std::vector<double> means(part.count);
  const double inv = 1.0 / static_cast<double>(part.block_len);
  for (std::size_t j = 0; j < part.count; ++j) {
    double s = 0.0;
    for (std::size_t i = part.begin(j); i < part.end(j); ++i)
      s += values[i];
    means[j] = s * inv;
  }
  return means;
}

double median_of_means(const std::vector<double>& values, std::size_t block_len) {
  const BlockPartition part = partition_blocks(values.size(), block_len);
  std::vector<double> means = ref::block_means(values, part);
  if (means.empty())
    throw ConfigError("block count: no complete blocks");
  std::sort(means.begin(), means.end());
  return means[(means.size() - 1) / 2];
}

Eigen::MatrixXd abs_sign_sums(const Eigen::MatrixXd& cols, int rounds, std::uint64_t seed) {
  const Eigen::Index n = cols.rows();
  const Eigen::Index k = cols.cols();
  Eigen::MatrixXd out(rounds, k);
  for (int t = 0; t < rounds; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eps = rng.rademacher();
      for (Eigen::Index j = 0; j < k; ++j)
        s(j) += eps * cols(i, j);
    }
    for (Eigen::Index j = 0; j < k; ++j)
      out(t, j) = std::abs(s(j));
  }
  return out;
}

Eigen::MatrixXd abs_gaussian_draws(const Eigen::MatrixXd& factor, int rounds, std::uint64_t seed) {
  const Eigen::Index k = factor.rows();
  const Eigen::Index r = factor.cols();
  Eigen::MatrixXd out(rounds, k);
  for (int t = 0; t < rounds; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    Eigen::VectorXd z(r);
    for (Eigen::Index c = 0; c < r; ++c)
      z(c) = rng.normal();
    for (Eigen::Index j = 0; j < k; ++j) {
      double g = 0.0;
      for (Eigen::Index c = 0; c < r; ++c)
        g += factor(j, c) * z(c);
      out(t, j) = std::abs(g);
    }
  }
  return out;
}

} // namespace starmid::ref
