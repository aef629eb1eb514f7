// Times the OpenMP kernels against their serial reference implementations and
// reports the largest absolute elementwise difference (expected: exactly 0).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <Eigen/Dense>

#include "starmid/complexity.hpp"
#include "starmid/core.hpp"
#include "starmid/mom.hpp"
#include "starmid/parallel.hpp"
#include "starmid/rng.hpp"
#include "starmid/serial_ref.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F> double time_ms(F&& fn, int reps) {
  // One warm-up call, then the best of `reps` timed calls.
  fn();
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void print_row(const char* name, double serial_ms, double parallel_ms, double diff) {
  std::printf("%-20s %12.3f %12.3f %9.2fx %14.3g\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, diff);
}

} // namespace

int main(int argc, char** argv) {
  std::size_t n = 200000;
  std::size_t dim = 16;
  std::size_t m = 24;
  int rounds = 400;
  int reps = 5;
  if (argc > 1)
    n = static_cast<std::size_t>(std::strtoull(argv[1], nullptr, 10));
  if (argc > 2)
    rounds = std::atoi(argv[2]);
  if (const char* env = std::getenv("STARMID_THREADS"))
    starmid::set_thread_count(std::atoi(env));

  starmid::Rng rng(7);
  starmid::SampleSet sample;
  sample.xs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  sample.ys.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < sample.xs.rows(); ++i) {
    for (Eigen::Index j = 0; j < sample.xs.cols(); ++j)
      sample.xs(i, j) = rng.normal();
    sample.ys(i) = rng.normal();
  }
  starmid::Dictionary dict;
  dict.coeffs.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim));
  dict.offsets.resize(static_cast<Eigen::Index>(m));
  for (Eigen::Index j = 0; j < dict.coeffs.rows(); ++j) {
    for (Eigen::Index d = 0; d < dict.coeffs.cols(); ++d)
      dict.coeffs(j, d) = rng.normal();
    dict.offsets(j) = rng.normal();
  }

  std::printf("n = %zu, dim = %zu, dictionary = %zu, mc rounds = %d, threads = %d\n\n", n, dim, m,
              rounds, starmid::max_thread_count());
  std::printf("%-20s %12s %12s %10s %14s\n", "kernel", "serial_ms", "parallel_ms", "speedup",
              "max_abs_diff");

  // evaluate
  Eigen::MatrixXd eval_par, eval_ser;
  const double t_eval_par = time_ms([&] { eval_par = starmid::evaluate(dict, sample).values; }, reps);
  const double t_eval_ser = time_ms([&] { eval_ser = starmid::ref::evaluate(dict, sample); }, reps);
  print_row("evaluate", t_eval_ser, t_eval_par, (eval_par - eval_ser).cwiseAbs().maxCoeff());

  // block_means
  std::vector<double> col(n);
  for (std::size_t i = 0; i < n; ++i)
    col[i] = eval_par(static_cast<Eigen::Index>(i), 0);
  const starmid::BlockPartition part = starmid::partition_blocks(n, 9);
  std::vector<double> bm_par, bm_ser;
  const double t_bm_par = time_ms([&] { bm_par = starmid::block_means(col, part); }, reps);
  const double t_bm_ser = time_ms([&] { bm_ser = starmid::ref::block_means(col, part); }, reps);
  double bm_diff = 0.0;
  for (std::size_t i = 0; i < bm_par.size(); ++i)
    bm_diff = std::max(bm_diff, std::abs(bm_par[i] - bm_ser[i]));
  print_row("block_means", t_bm_ser, t_bm_par, bm_diff);

  // median_of_means (nth_element vs full sort on top of the same block means)
  double mom_par = 0.0, mom_ser = 0.0;
  const double t_mom_par = time_ms([&] { mom_par = starmid::median_of_means(col, 9); }, reps);
  const double t_mom_ser = time_ms([&] { mom_ser = starmid::ref::median_of_means(col, 9); }, reps);
  print_row("median_of_means", t_mom_ser, t_mom_par, std::abs(mom_par - mom_ser));

  // abs_sign_sums
  Eigen::MatrixXd ss_par, ss_ser;
  const double t_ss_par =
      time_ms([&] { ss_par = starmid::kernels::abs_sign_sums(eval_par, rounds, 11); }, reps);
  const double t_ss_ser =
      time_ms([&] { ss_ser = starmid::ref::abs_sign_sums(eval_par, rounds, 11); }, reps);
  print_row("abs_sign_sums", t_ss_ser, t_ss_par, (ss_par - ss_ser).cwiseAbs().maxCoeff());

  // abs_gaussian_draws
  Eigen::MatrixXd factor(m, m);
  for (Eigen::Index i = 0; i < factor.rows(); ++i)
    for (Eigen::Index j = 0; j < factor.cols(); ++j)
      factor(i, j) = rng.normal();
  Eigen::MatrixXd gd_par, gd_ser;
  const double t_gd_par =
      time_ms([&] { gd_par = starmid::kernels::abs_gaussian_draws(factor, rounds, 13); }, reps);
  const double t_gd_ser =
      time_ms([&] { gd_ser = starmid::ref::abs_gaussian_draws(factor, rounds, 13); }, reps);
  print_row("abs_gaussian_draws", t_gd_ser, t_gd_par, (gd_par - gd_ser).cwiseAbs().maxCoeff());

  return 0;
}
