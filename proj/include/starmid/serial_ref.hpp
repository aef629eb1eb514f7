#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "starmid/core.hpp"
#include "starmid/mom.hpp"

// Serial reference implementations of the OpenMP kernels. Plain loops, no
// pragmas. Tests assert bit-identical agreement with the parallel paths and
// the benchmark tool times the two side by side.
namespace starmid::ref {

Eigen::MatrixXd evaluate(const Dictionary& dict, const SampleSet& sample);

std::vector<double> block_means(const std::vector<double>& values, const BlockPartition& part);

double median_of_means(const std::vector<double>& values, std::size_t block_len);

// rounds x k matrix of |sum_i eps_i * cols(i, j)|, one Rademacher vector per
// round, seeded as derive_seed(seed, round).
Eigen::MatrixXd abs_sign_sums(const Eigen::MatrixXd& cols, int rounds, std::uint64_t seed);

// rounds x k matrix of |factor * z| with z standard normal per round.
Eigen::MatrixXd abs_gaussian_draws(const Eigen::MatrixXd& factor, int rounds, std::uint64_t seed);

} // namespace starmid::ref
