#include "starmid/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "starmid/errors.hpp"
#include "starmid/mom.hpp"
#include "starmid/parallel.hpp"
#include "starmid/rng.hpp"

namespace starmid {

// ---- class builders ---------------------------------------------------------

MidpointSet MidpointSet::build(const Dictionary& dict, const EvaluationMatrix& eval) {
  const std::size_t m = dict.size();
  if (m == 0)
    throw ConfigError("dictionary: empty");
  if (static_cast<std::size_t>(eval.values.cols()) != m)
    throw ConfigError("evaluation matrix: column count does not match dictionary");
  MidpointSet out;
  out.members.reserve(m * (m + 1) / 2);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = j; k < m; ++k)
      out.members.push_back(Midpoint{j, k});
  out.columns.resize(eval.values.rows(), static_cast<Eigen::Index>(out.members.size()));
  for (std::size_t idx = 0; idx < out.members.size(); ++idx) {
    const auto& p = out.members[idx];
    out.columns.col(static_cast<Eigen::Index>(idx)) =
        0.5 * (eval.values.col(static_cast<Eigen::Index>(p.first)) +
               eval.values.col(static_cast<Eigen::Index>(p.second)));
  }
  return out;
}

Hypothesis MidpointSet::hypothesis(const Dictionary& dict, std::size_t idx) const {
  if (idx >= members.size())
    throw ConfigError("midpoint index: out of range");
  return Hypothesis::midpoint(dict, members[idx].first, members[idx].second);
}

namespace {

std::vector<Hypothesis> midpoint_hypotheses(const Dictionary& dict, const MidpointSet& mids) {
  std::vector<Hypothesis> hyps;
  hyps.reserve(mids.size());
  for (std::size_t i = 0; i < mids.size(); ++i)
    hyps.push_back(mids.hypothesis(dict, i));
  return hyps;
}

} // namespace

LocalizedClass difference_class(const Dictionary& dict, const MidpointSet& mids,
                                const RiskOracle& oracle) {
  const std::vector<Hypothesis> hyps = midpoint_hypotheses(dict, mids);
  const std::size_t u = mids.size();
  const std::size_t k = u * (u - 1) / 2;
  LocalizedClass cls;
  cls.columns.resize(mids.columns.rows(), static_cast<Eigen::Index>(k));
  cls.coeffs.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dict.dim()));
  cls.offsets.resize(static_cast<Eigen::Index>(k));
  cls.norms.resize(static_cast<Eigen::Index>(k));
  Eigen::Index row = 0;
  for (std::size_t p = 0; p < u; ++p) {
    for (std::size_t q = p + 1; q < u; ++q, ++row) {
      cls.columns.col(row) = mids.columns.col(static_cast<Eigen::Index>(p)) -
                             mids.columns.col(static_cast<Eigen::Index>(q));
      cls.coeffs.row(row) = (hyps[p].coeffs - hyps[q].coeffs).transpose();
      cls.offsets(row) = hyps[p].offset - hyps[q].offset;
      cls.norms(row) = oracle.distance(hyps[p], hyps[q]);
    }
  }
  return cls;
}

LocalizedClass star_class(const Dictionary& dict, const MidpointSet& mids, std::size_t u0,
                          const RiskOracle& oracle) {
  if (u0 >= mids.size())
    throw ConfigError("center index: out of range");
  const std::vector<Hypothesis> hyps = midpoint_hypotheses(dict, mids);
  const std::size_t k = mids.size() - 1;
  LocalizedClass cls;
  cls.columns.resize(mids.columns.rows(), static_cast<Eigen::Index>(k));
  cls.coeffs.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dict.dim()));
  cls.offsets.resize(static_cast<Eigen::Index>(k));
  cls.norms.resize(static_cast<Eigen::Index>(k));
  Eigen::Index row = 0;
  for (std::size_t p = 0; p < mids.size(); ++p) {
    if (p == u0)
      continue;
    cls.columns.col(row) = mids.columns.col(static_cast<Eigen::Index>(p)) -
                           mids.columns.col(static_cast<Eigen::Index>(u0));
    cls.coeffs.row(row) = (hyps[p].coeffs - hyps[u0].coeffs).transpose();
    cls.offsets(row) = hyps[p].offset - hyps[u0].offset;
    cls.norms(row) = oracle.distance(hyps[p], hyps[u0]);
    ++row;
  }
  return cls;
}

// ---- Monte Carlo kernels ------------------------------------------------------

namespace kernels {

Eigen::MatrixXd abs_sign_sums(const Eigen::MatrixXd& cols, int rounds, std::uint64_t seed) {
  const Eigen::Index n = cols.rows();
  const Eigen::Index k = cols.cols();
  Eigen::MatrixXd out(rounds, k);
#pragma omp parallel for schedule(static)
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
#pragma omp parallel for schedule(static)
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

} // namespace kernels

namespace {

// All 2^n sign vectors, n <= 20; row t uses bit i of t as the sign of eps_i.
Eigen::MatrixXd exhaustive_sign_sums(const Eigen::MatrixXd& cols) {
  const Eigen::Index n = cols.rows();
  const Eigen::Index k = cols.cols();
  if (n > 20)
    throw ConfigError("exhaustive mode: sample too large (max 20 points)");
  const std::int64_t patterns = std::int64_t{1} << n;
  Eigen::MatrixXd out(patterns, k);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < patterns; ++t) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eps = ((t >> i) & 1) != 0 ? 1.0 : -1.0;
      for (Eigen::Index j = 0; j < k; ++j)
        s(j) += eps * cols(i, j);
    }
    for (Eigen::Index j = 0; j < k; ++j)
      out(t, j) = std::abs(s(j));
  }
  return out;
}

void check_mc_options(const McOptions& opt) {
  if (opt.rounds < 1)
    throw ConfigError("mc_rounds: must be at least 1");
}

Eigen::VectorXd inverse_norms(const LocalizedClass& cls) {
  Eigen::VectorXd inv(cls.norms.size());
  for (Eigen::Index j = 0; j < cls.norms.size(); ++j) {
    if (cls.norms(j) < 0.0)
      throw ConfigError("norms: must be nonnegative");
    inv(j) = cls.norms(j) > 0.0 ? 1.0 / cls.norms(j) : std::numeric_limits<double>::infinity();
  }
  return inv;
}

} // namespace

// ---- sup processes ------------------------------------------------------------

SupProcess SupProcess::rademacher(const LocalizedClass& cls, const McOptions& opt) {
  check_mc_options(opt);
  SupProcess p;
  const double scale = cls.columns.rows() > 0
                           ? 1.0 / std::sqrt(static_cast<double>(cls.columns.rows()))
                           : 0.0;
  p.abs_draws_ = opt.exhaustive ? exhaustive_sign_sums(cls.columns)
                                : kernels::abs_sign_sums(cls.columns, opt.rounds, opt.seed);
  p.abs_draws_ *= scale;
  p.inv_norms_ = inverse_norms(cls);
  p.exact_ = opt.exhaustive;
  return p;
}

SupProcess SupProcess::gaussian(const LocalizedClass& cls, const RiskOracle& oracle,
                                const McOptions& opt) {
  check_mc_options(opt);
  SupProcess p;
  const Eigen::Index k = cls.norms.size();
  if (k == 0) {
    p.abs_draws_ = Eigen::MatrixXd::Zero(opt.rounds, 0);
    p.inv_norms_.resize(0);
    return p;
  }
  Eigen::MatrixXd gram = gram_matrix(cls, oracle);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success)
    throw NumericError("gram matrix: eigendecomposition failed");
  const double top = std::max(1.0, eig.eigenvalues().maxCoeff());
  Eigen::VectorXd lam = eig.eigenvalues();
  for (Eigen::Index c = 0; c < lam.size(); ++c) {
    if (lam(c) < -1e-8 * top)
      throw NumericError("gram matrix: not positive semidefinite");
    lam(c) = std::sqrt(std::max(0.0, lam(c)));
  }
  const Eigen::MatrixXd factor = eig.eigenvectors() * lam.asDiagonal();
  p.abs_draws_ = kernels::abs_gaussian_draws(factor, opt.rounds, opt.seed);
  p.inv_norms_ = inverse_norms(cls);
  return p;
}

SupProcess SupProcess::multiplier(const LocalizedClass& cls, const Eigen::VectorXd& residuals,
                                  double delta, const McOptions& opt) {
  check_mc_options(opt);
  if (residuals.size() != cls.columns.rows())
    throw ConfigError("residuals: length does not match the sample");
  if (!(delta > 0.0 && delta < 1.0))
    throw ConfigError("delta: must lie in (0, 1)");
  SupProcess p;
  const Eigen::MatrixXd scaled = residuals.asDiagonal() * cls.columns;
  const double scale = cls.columns.rows() > 0
                           ? 1.0 / std::sqrt(static_cast<double>(cls.columns.rows()))
                           : 0.0;
  p.abs_draws_ = opt.exhaustive ? exhaustive_sign_sums(scaled)
                                : kernels::abs_sign_sums(scaled, opt.rounds, opt.seed);
  p.abs_draws_ *= scale;
  p.inv_norms_ = inverse_norms(cls);
  p.quantile_ = true;
  p.delta_ = delta;
  p.exact_ = opt.exhaustive;
  return p;
}

SupProcess::Eval SupProcess::at(double r) const {
  if (!(r > 0.0))
    throw ConfigError("radius: must be positive");
  const Eigen::Index rounds = abs_draws_.rows();
  const Eigen::Index k = abs_draws_.cols();
  const double inv_r = 1.0 / r;
  // Per-round sup of the localized class, divided by r: the star-shaped
  // scaling min(1, r / ||w||) enters as r * min(1/r, 1/||w||) so this scan is
  // exactly non-increasing in r coefficient-wise.
  std::vector<double> per_round(static_cast<std::size_t>(rounds));
  for (Eigen::Index t = 0; t < rounds; ++t) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double v = std::min(inv_r, inv_norms_(j)) * abs_draws_(t, j);
      if (v > m)
        m = v;
    }
    per_round[static_cast<std::size_t>(t)] = m;
  }
  Eval e;
  if (!quantile_) {
    double s = 0.0;
    for (const double v : per_round)
      s += v;
    const double mean = s / static_cast<double>(rounds);
    e.ratio = mean;
    e.value = r * mean;
    if (!exact_ && rounds > 1) {
      double ss = 0.0;
      for (const double v : per_round)
        ss += (v - mean) * (v - mean);
      e.std_error = r * std::sqrt(ss / (static_cast<double>(rounds) * (static_cast<double>(rounds) - 1.0)));
    }
    return e;
  }
  std::sort(per_round.begin(), per_round.end());
  const auto total = static_cast<double>(per_round.size());
  auto rank = static_cast<std::ptrdiff_t>(std::ceil((1.0 - delta_) * total));
  rank = std::clamp<std::ptrdiff_t>(rank, 1, static_cast<std::ptrdiff_t>(per_round.size()));
  const double q = per_round[static_cast<std::size_t>(rank - 1)];
  // Fixed-point condition for the quantile process compares against
  // zeta * r^2 * sqrt(N); normalizing twice keeps the predicate uniform.
  e.ratio = q * inv_r;
  e.value = r * q;
  if (!exact_) {
    const auto bracket = static_cast<std::ptrdiff_t>(
        std::ceil(1.96 * std::sqrt(total * delta_ * (1.0 - delta_))));
    const auto lo = std::clamp<std::ptrdiff_t>(rank - 1 - bracket, 0,
                                               static_cast<std::ptrdiff_t>(per_round.size()) - 1);
    const auto hi = std::clamp<std::ptrdiff_t>(rank - 1 + bracket, 0,
                                               static_cast<std::ptrdiff_t>(per_round.size()) - 1);
    e.std_error = r * 0.5 * (per_round[static_cast<std::size_t>(hi)] -
                             per_round[static_cast<std::size_t>(lo)]);
  }
  return e;
}

Eigen::MatrixXd gram_matrix(const LocalizedClass& cls, const RiskOracle& oracle) {
  const Eigen::Index k = cls.coeffs.rows();
  const Eigen::Index d = cls.coeffs.cols();
  Eigen::MatrixXd aug(k, d + 1);
  aug.leftCols(d) = cls.coeffs;
  aug.col(d) = cls.offsets;
  const Eigen::MatrixXd m = oracle.second_moment_augmented(static_cast<std::size_t>(d));
  Eigen::MatrixXd gram = aug * m * aug.transpose();
  gram = 0.5 * (gram + gram.transpose()).eval();
  return gram;
}

McEstimate rademacher_sup(const LocalizedClass& cls, double r, const McOptions& opt) {
  const SupProcess::Eval e = SupProcess::rademacher(cls, opt).at(r);
  return McEstimate{e.value, e.std_error};
}

McEstimate gaussian_sup(const LocalizedClass& cls, double r, const RiskOracle& oracle,
                        const McOptions& opt) {
  const SupProcess::Eval e = SupProcess::gaussian(cls, oracle, opt).at(r);
  return McEstimate{e.value, e.std_error};
}

McEstimate multiplier_quantile(const LocalizedClass& cls, double r,
                               const Eigen::VectorXd& residuals, double delta,
                               const McOptions& opt) {
  const SupProcess::Eval e = SupProcess::multiplier(cls, residuals, delta, opt).at(r);
  return McEstimate{e.value, e.std_error};
}

// ---- fixed points ---------------------------------------------------------------

FixedPointResult fixed_point(const SupProcess& process, double zeta, std::size_t n_sample,
                             double r_min, double r_max, double rel_tol) {
  if (!(zeta > 0.0))
    throw ConfigError("zeta: must be positive");
  if (n_sample == 0)
    throw ConfigError("n_sample: must be positive");
  if (!(r_min > 0.0) || !(r_max > r_min))
    throw ConfigError("radius bracket: need 0 < r_min < r_max");
  if (!(rel_tol > 0.0))
    throw ConfigError("rel_tol: must be positive");

  FixedPointResult out;
  out.zeta = zeta;
  out.threshold = zeta * std::sqrt(static_cast<double>(n_sample));
  auto probe = [&](double r) {
    const SupProcess::Eval e = process.at(r);
    out.trace.push_back(TracePoint{r, e.value, e.ratio});
    return e;
  };

  const SupProcess::Eval at_min = probe(r_min);
  if (at_min.ratio <= out.threshold) {
    out.r = r_min;
    out.at_r = at_min;
    out.collapsed = true;
    return out;
  }
  SupProcess::Eval at_hi = probe(r_max);
  if (at_hi.ratio > out.threshold)
    throw ConfigError("zeta: no fixed point at or below r_max; increase zeta or r_max");
  double lo = r_min;
  double hi = r_max;
  while (hi > lo * (1.0 + rel_tol)) {
    const double mid = std::sqrt(lo * hi);
    const SupProcess::Eval e = probe(mid);
    if (e.ratio <= out.threshold) {
      hi = mid;
      at_hi = e;
    } else {
      lo = mid;
    }
  }
  out.r = hi;
  out.at_r = at_hi;
  return out;
}

ROptBreakdown r_opt(const SampleSet& sample, const Dictionary& dict, const RiskOracle& oracle,
                    const ComplexityConstants& constants, const ROptOptions& options) {
  if (!(constants.delta > 0.0 && constants.delta < 1.0))
    throw ConfigError("delta: must lie in (0, 1)");
  if (!(options.r_min_factor > 0.0 && options.r_min_factor < 1.0))
    throw ConfigError("r_min_factor: must lie in (0, 1)");
  const EvaluationMatrix eval = evaluate(dict, sample);
  const MidpointSet mids = MidpointSet::build(dict, eval);

  ROptBreakdown out;
  out.centers = mids.members;
  const LocalizedClass diffs = difference_class(dict, mids, oracle);
  if (diffs.size() == 0 || diffs.max_norm() == 0.0) {
    out.trivial = true; // a single distinct midpoint: nothing to localize over
    return out;
  }
  const double r_max = 2.0 * diffs.max_norm();
  const double r_min = options.r_min_factor * r_max;
  const std::size_t n = sample.size();

  const McOptions q1_opt{options.rounds, derive_seed(options.seed, 1), false};
  out.q1 = fixed_point(SupProcess::gaussian(diffs, oracle, q1_opt), constants.zeta_q1, n, r_min,
                       r_max, options.rel_tol);
  const McOptions q2_opt{options.rounds, derive_seed(options.seed, 2), false};
  out.q2 = fixed_point(SupProcess::rademacher(diffs, q2_opt), constants.zeta_q2, n, r_min, r_max,
                       options.rel_tol);

  out.m_results.reserve(mids.size());
  for (std::size_t c = 0; c < mids.size(); ++c) {
    const LocalizedClass star = star_class(dict, mids, c, oracle);
    if (star.max_norm() == 0.0) {
      out.m_results.push_back(FixedPointResult{}); // degenerate center, sup is identically 0
      continue;
    }
    const Eigen::VectorXd residuals =
        mids.columns.col(static_cast<Eigen::Index>(c)) - sample.ys;
    const McOptions m_opt{options.rounds, derive_seed(options.seed, 3, c), false};
    const SupProcess proc = SupProcess::multiplier(star, residuals, constants.delta / 2.0, m_opt);
    const double star_max = 2.0 * star.max_norm();
    FixedPointResult fp = fixed_point(proc, constants.zeta_m, n, options.r_min_factor * star_max,
                                      star_max, options.rel_tol);
    out.sup_r_m_sq = std::max(out.sup_r_m_sq, fp.r * fp.r);
    out.m_results.push_back(std::move(fp));
  }

  out.value = 2.0 * std::max(out.sup_r_m_sq, std::max(out.q1.r * out.q1.r, out.q2.r * out.q2.r));
  return out;
}

// ---- event diagnostics -----------------------------------------------------------

namespace {

void reduce_margins(const std::vector<double>& margins, BulletReport& report) {
  for (const double m : margins) {
    if (std::isnan(m))
      continue; // skipped check (e.g. pair below the localization radius)
    ++report.checks;
    if (m < report.worst_margin)
      report.worst_margin = m;
    if (m < 0.0)
      ++report.violations;
  }
  if (report.checks == 0)
    report.worst_margin = 0.0;
  report.pass = report.violations == 0;
}

} // namespace

EventReport check_event_a(const SampleSet& sample, const Dictionary& dict, const Hypothesis& u0,
                          const RiskOracle& oracle, const EventCheckConfig& cfg) {
  if (!(cfg.rho > 0.0))
    throw ConfigError("rho: must be positive");
  if (!(cfg.r_u > 0.0))
    throw ConfigError("r_u: must be positive");
  if (!(cfg.alpha > 0.0) || !(cfg.beta >= cfg.alpha))
    throw ConfigError("alpha/beta: need 0 < alpha <= beta");
  if (u0.coeffs.size() != static_cast<Eigen::Index>(sample.dim()))
    throw ConfigError("u0: dimension does not match sample");
  partition_blocks(sample.size(), cfg.block_len); // validates block_len

  const EvaluationMatrix eval = evaluate(dict, sample);
  const MidpointSet mids = MidpointSet::build(dict, eval);
  const std::vector<Hypothesis> hyps = midpoint_hypotheses(dict, mids);
  const auto n = static_cast<Eigen::Index>(sample.size());
  const auto u = static_cast<std::ptrdiff_t>(mids.size());

  Eigen::VectorXd u0_col(n);
  for (Eigen::Index i = 0; i < n; ++i)
    u0_col(i) = u0.coeffs.dot(sample.xs.row(i)) + u0.offset;
  const Eigen::VectorXd xi = u0_col - sample.ys;

  EventReport report;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  report.multiplier.worst_margin = inf;
  report.lower_bound.worst_margin = inf;
  report.mom_band.worst_margin = inf;

  // Multiplier deviations over the midpoint set.
  std::vector<double> mult_margins(mids.size(), nan);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < u; ++p) {
    const auto pi = static_cast<std::size_t>(p);
    double emp = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      emp += xi(i) * (mids.columns(i, p) - u0_col(i));
    emp /= static_cast<double>(n);
    Hypothesis g{hyps[pi].coeffs - u0.coeffs, hyps[pi].offset - u0.offset};
    const double truth = oracle.multiplier_mean(u0, g);
    const double allowed =
        cfg.rho * std::max(cfg.r_u * cfg.r_u, oracle.distance2(hyps[pi], u0));
    mult_margins[pi] = allowed - std::abs(emp - truth);
  }
  reduce_margins(mult_margins, report.multiplier);

  // Pairwise quadratic lower bound and median-of-means bands.
  const std::size_t pairs = mids.size() * (mids.size() - 1) / 2;
  std::vector<double> quad_margins(pairs, nan);
  std::vector<double> mom_margins(pairs, nan);
  std::vector<std::pair<std::size_t, std::size_t>> pair_ids;
  pair_ids.reserve(pairs);
  for (std::size_t p = 0; p < mids.size(); ++p)
    for (std::size_t q = p + 1; q < mids.size(); ++q)
      pair_ids.emplace_back(p, q);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < static_cast<std::ptrdiff_t>(pair_ids.size()); ++idx) {
    const auto [p, q] = pair_ids[static_cast<std::size_t>(idx)];
    const double d2 = oracle.distance2(hyps[p], hyps[q]);
    const double d = std::sqrt(std::max(0.0, d2));
    std::vector<double> diff(static_cast<std::size_t>(n));
    double emp2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dv =
          mids.columns(i, static_cast<Eigen::Index>(p)) - mids.columns(i, static_cast<Eigen::Index>(q));
      diff[static_cast<std::size_t>(i)] = std::abs(dv);
      emp2 += dv * dv;
    }
    emp2 /= static_cast<double>(n);
    if (d >= cfg.r_u)
      quad_margins[static_cast<std::size_t>(idx)] = emp2 - (1.0 - cfg.rho) * d2;
    const double med = median_of_means(diff, cfg.block_len);
    mom_margins[static_cast<std::size_t>(idx)] =
        d >= cfg.r_u ? std::min(med - cfg.alpha * d, cfg.beta * d - med)
                     : cfg.beta * cfg.r_u - med;
  }
  reduce_margins(quad_margins, report.lower_bound);
  reduce_margins(mom_margins, report.mom_band);

  report.pass = report.multiplier.pass && report.lower_bound.pass && report.mom_band.pass;
  return report;
}

} // namespace starmid
