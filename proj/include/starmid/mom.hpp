#pragma once

#include <cstddef>
#include <vector>

namespace starmid {

// Contiguous equal-length blocks over {0, ..., n-1}; the tail n - count*len
// is dropped. Block j covers [j*len, (j+1)*len).
struct BlockPartition {
  std::size_t n = 0;
  std::size_t block_len = 0;
  std::size_t count = 0;

  std::size_t begin(std::size_t j) const { return j * block_len; }
  std::size_t end(std::size_t j) const { return (j + 1) * block_len; }
};

// Errors if block_len is zero or exceeds n.
BlockPartition partition_blocks(std::size_t n, std::size_t block_len);

// Mean of each block, summed in index order.
std::vector<double> block_means(const std::vector<double>& values, const BlockPartition& part);

// Lower median of the block means: sort the count block means and take the
// ceil(count/2)-th smallest. Always one of the achieved block means.
double lower_median(std::vector<double> means);

// Median-of-means of `values` with the given block length.
double median_of_means(const std::vector<double>& values, std::size_t block_len);

// Med_l |u - v| evaluated on paired sample columns: the median-of-means of
// the pointwise absolute differences. Errors if the columns differ in length.
double mom_abs_distance(const std::vector<double>& eval_u, const std::vector<double>& eval_v,
                        std::size_t block_len);

} // namespace starmid
