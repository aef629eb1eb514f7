#include "starmid/procedure.hpp"

#include <algorithm>
#include <cmath>

#include "starmid/errors.hpp"
#include "starmid/mom.hpp"
#include "starmid/parallel.hpp"

namespace starmid {

double AggregationConfig::resolved_rho() const {
  return rho ? *rho : std::pow(alpha / (20.0 * beta), 2);
}

void AggregationConfig::validate() const {
  if (block_len == 0)
    throw ConfigError("block_len: must be at least 1");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("alpha: must lie in (0, 1]");
  if (!(beta >= 1.0))
    throw ConfigError("beta: must be at least 1");
  if (rho && !(*rho > 0.0))
    throw ConfigError("rho: must be positive");
  if (!(threshold_factor > 0.0))
    throw ConfigError("threshold_factor: must be positive");
  if (!(guarantee_factor > 0.0))
    throw ConfigError("guarantee_factor: must be positive");
  if (!(theta > 0.0 && theta <= 1.0))
    throw ConfigError("theta: must lie in (0, 1]");
  if (r_u_source == RUSource::explicit_value && !(r_u_value >= 0.0))
    throw ConfigError("r_u_value: must be nonnegative");
  if (r_u_source == RUSource::plug_in && !(plug_in_kappa > 0.0))
    throw ConfigError("plug_in_kappa: must be positive");
}

VSet build_v(const EvaluationMatrix& eval, const Eigen::VectorXd& ys,
             const AggregationConfig& cfg, double r_u) {
  cfg.validate();
  if (!(r_u >= 0.0))
    throw ConfigError("r_u: must be nonnegative");
  std::vector<double> risks(eval.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(risks.size()); ++j)
    risks[static_cast<std::size_t>(j)] =
        empirical_risk(eval.values.col(j), ys);
  const ErmResult winner = erm_all(eval, ys);
  const double rho = cfg.resolved_rho();
  const double med_factor = cfg.threshold_factor * rho / (cfg.alpha * cfg.alpha);
  const double base = cfg.threshold_factor * r_u * r_u;
  const std::vector<double> f_hat_col = column_vector(eval, winner.id);

  VSet v;
  v.f_hat = winner.id;
  v.f_hat_risk = winner.risk;
  v.r_u = r_u;
  v.audit.resize(risks.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(risks.size()); ++j) {
    const auto id = static_cast<std::size_t>(j);
    CandidateAudit a;
    a.id = id;
    a.empirical_risk = risks[id];
    a.mom_distance = mom_abs_distance(f_hat_col, column_vector(eval, id), cfg.block_len);
    a.threshold = std::max(base, med_factor * a.mom_distance * a.mom_distance);
    a.in_v = risks[id] <= winner.risk + a.threshold;
    v.audit[id] = a;
  }
  for (const CandidateAudit& a : v.audit)
    if (a.in_v)
      v.ids.push_back(a.id);
  // The threshold is nonnegative, so the winner always qualifies.
  if (!std::binary_search(v.ids.begin(), v.ids.end(), v.f_hat))
    throw NumericError("V set: lost the empirical minimizer");
  return v;
}

std::vector<Midpoint> build_w(const std::vector<std::size_t>& v_ids) {
  if (v_ids.empty())
    throw ConfigError("v_ids: empty");
  std::vector<std::size_t> ids = v_ids;
  std::sort(ids.begin(), ids.end());
  std::vector<Midpoint> w;
  w.reserve(ids.size() * (ids.size() + 1) / 2);
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (std::size_t b = a; b < ids.size(); ++b)
      w.push_back(Midpoint{ids[a], ids[b]});
  return w;
}

AggregationResult aggregate(const SampleSet& sample, const Dictionary& dict,
                            const AggregationConfig& cfg, const RiskOracle* oracle) {
  cfg.validate();
  if (sample.size() < 2 * cfg.block_len)
    throw ConfigError("sample: need at least two blocks' worth of data to split");
  const SampleSet d1 = sample.first_half();
  const SampleSet d2 = sample.second_half();
  const EvaluationMatrix eval1 = evaluate(dict, d1);

  double r_u = 0.0;
  switch (cfg.r_u_source) {
  case RUSource::explicit_value:
    r_u = cfg.r_u_value;
    break;
  case RUSource::plug_in: {
    const ErmResult winner = erm_all(eval1, d1.ys);
    const double log_m = std::log(static_cast<double>(std::max<std::size_t>(dict.size(), 2)));
    r_u = std::sqrt(cfg.plug_in_kappa * winner.risk * log_m / static_cast<double>(d1.size()));
    break;
  }
  case RUSource::fixed_point: {
    if (oracle == nullptr)
      throw ConfigError("r_u_source: fixed_point needs a risk oracle");
    const ROptBreakdown opt = r_opt(d1, dict, *oracle, cfg.complexity, cfg.complexity_options);
    r_u = std::sqrt(opt.value);
    break;
  }
  }

  AggregationResult out;
  out.n1 = d1.size();
  out.n2 = d2.size();
  out.v = build_v(eval1, d1.ys, cfg, r_u);
  out.w_pairs = build_w(out.v.ids);

  const EvaluationMatrix eval2 = evaluate(dict, d2);
  out.w_risks.resize(out.w_pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(out.w_pairs.size()); ++i) {
    const Midpoint& mp = out.w_pairs[static_cast<std::size_t>(i)];
    const Eigen::VectorXd mid =
        0.5 * (eval2.values.col(static_cast<Eigen::Index>(mp.first)) +
               eval2.values.col(static_cast<Eigen::Index>(mp.second)));
    out.w_risks[static_cast<std::size_t>(i)] = empirical_risk(mid, d2.ys);
  }
  // w_pairs is in lexicographic order, so strict improvement keeps the
  // lexicographically smallest pair on ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.w_risks.size(); ++i)
    if (out.w_risks[i] < out.w_risks[best])
      best = i;
  out.selected = out.w_pairs[best];
  out.selected_risk = out.w_risks[best];
  return out;
}

Hypothesis selected_hypothesis(const Dictionary& dict, const AggregationResult& result) {
  return Hypothesis::midpoint(dict, result.selected.first, result.selected.second);
}

} // namespace starmid
