#include "starmid/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "starmid/complexity.hpp"
#include "starmid/errors.hpp"
#include "starmid/mom.hpp"
#include "starmid/parallel.hpp"
#include "starmid/rng.hpp"

namespace starmid {

using nlohmann::json;

// ---- scenario ----------------------------------------------------------------

double NoiseSpec::second_moment() const {
  switch (kind) {
  case NoiseKind::gaussian:
    return scale * scale;
  case NoiseKind::student_t:
    if (!(nu > 2.0))
      throw ConfigError("noise.nu: needs nu > 2 for a finite variance");
    return scale * scale * nu / (nu - 2.0);
  case NoiseKind::pareto:
    if (!(shape > 2.0))
      throw ConfigError("noise.shape: needs shape > 2 for a finite variance");
    return scale * scale * shape / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0));
  case NoiseKind::none:
    return 0.0;
  }
  throw ConfigError("noise.kind: unknown");
}

void ScenarioSpec::validate() const {
  if (design.dim == 0)
    throw ConfigError("design.dim: must be at least 1");
  if (!(design.scale > 0.0))
    throw ConfigError("design.scale: must be positive");
  if (design.kind == DesignKind::student_t && !(design.nu > 2.0))
    throw ConfigError("design.nu: needs nu > 2 for a finite variance");
  if (dictionary.count == 0)
    throw ConfigError("dictionary.count: must be at least 1");
  if (dictionary.structure == DictionaryStructure::random && !(dictionary.scale > 0.0))
    throw ConfigError("dictionary.scale: must be positive");
  if (dictionary.structure == DictionaryStructure::axis_pairs) {
    if (dictionary.count % 2 != 0)
      throw ConfigError("dictionary.count: axis_pairs needs an even count");
    if (dictionary.count / 2 > design.dim)
      throw ConfigError("dictionary.count: axis_pairs needs count/2 <= design.dim");
    if (!(dictionary.pair_base > 0.0))
      throw ConfigError("dictionary.pair_base: must be positive");
    if (!(dictionary.pair_jitter >= 0.0))
      throw ConfigError("dictionary.pair_jitter: must be nonnegative");
  }
  switch (target.kind) {
  case TargetKind::realizable_noise:
    if (target.target_id >= dictionary.count)
      throw ConfigError("target.target_id: out of range");
    break;
  case TargetKind::midpoint_adversarial:
    if (target.first >= dictionary.count || target.second >= dictionary.count)
      throw ConfigError("target.first/second: out of range");
    if (target.first == target.second)
      throw ConfigError("target.first/second: must reference two distinct ids");
    break;
  case TargetKind::convex_combination:
    if (!target.weights.empty()) {
      if (target.weights.size() != dictionary.count)
        throw ConfigError("target.weights: size must match dictionary.count");
      double sum = 0.0;
      for (const double w : target.weights) {
        if (!(w >= 0.0))
          throw ConfigError("target.weights: entries must be nonnegative");
        sum += w;
      }
      if (!(sum > 0.0))
        throw ConfigError("target.weights: must not all be zero");
    }
    break;
  }
  (void)noise.second_moment(); // validates the tail parameters
  if (n_grid.empty())
    throw ConfigError("n_grid: must not be empty");
  for (const std::size_t n : n_grid)
    if (n < std::max<std::size_t>(4, 2 * aggregation.block_len))
      throw ConfigError("n_grid: every n must allow a split with at least one block per half");
  if (replications == 0)
    throw ConfigError("replications: must be at least 1");
  aggregation.validate();
  if (!oracle.analytic && oracle.samples < 100)
    throw ConfigError("oracle.samples: must be at least 100");
}

namespace {

[[noreturn]] void missing_field(const std::string& path) {
  throw ConfigError(path + ": missing");
}

const json& require(const json& j, const char* key, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end())
    missing_field(path + "." + key);
  return *it;
}

double num(const json& j, const std::string& path) {
  if (!j.is_number())
    throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

std::size_t count_field(const json& j, const std::string& path) {
  if (!j.is_number_unsigned())
    throw ConfigError(path + ": expected a nonnegative integer");
  return j.get<std::size_t>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string())
    throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

double num_or(const json& j, const char* key, double fallback, const std::string& path) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : num(*it, path + "." + key);
}

AggregationConfig aggregation_from_json(const json& j, const std::string& path) {
  AggregationConfig cfg;
  if (j.contains("block_len"))
    cfg.block_len = count_field(j["block_len"], path + ".block_len");
  cfg.alpha = num_or(j, "alpha", cfg.alpha, path);
  cfg.beta = num_or(j, "beta", cfg.beta, path);
  if (j.contains("rho") && !j["rho"].is_null())
    cfg.rho = num(j["rho"], path + ".rho");
  cfg.threshold_factor = num_or(j, "threshold_factor", cfg.threshold_factor, path);
  cfg.guarantee_factor = num_or(j, "guarantee_factor", cfg.guarantee_factor, path);
  cfg.theta = num_or(j, "theta", cfg.theta, path);
  if (j.contains("r_u")) {
    const json& r = j["r_u"];
    const std::string source = text(require(r, "source", path + ".r_u"), path + ".r_u.source");
    if (source == "explicit") {
      cfg.r_u_source = RUSource::explicit_value;
      cfg.r_u_value = num(require(r, "value", path + ".r_u"), path + ".r_u.value");
    } else if (source == "plug_in") {
      cfg.r_u_source = RUSource::plug_in;
      cfg.plug_in_kappa = num_or(r, "kappa", cfg.plug_in_kappa, path + ".r_u");
    } else if (source == "fixed_point") {
      cfg.r_u_source = RUSource::fixed_point;
      cfg.complexity.zeta_m = num_or(r, "zeta_m", cfg.complexity.zeta_m, path + ".r_u");
      cfg.complexity.zeta_q1 = num_or(r, "zeta_q1", cfg.complexity.zeta_q1, path + ".r_u");
      cfg.complexity.zeta_q2 = num_or(r, "zeta_q2", cfg.complexity.zeta_q2, path + ".r_u");
      cfg.complexity.delta = num_or(r, "delta", cfg.complexity.delta, path + ".r_u");
      if (r.contains("mc_rounds"))
        cfg.complexity_options.rounds =
            static_cast<int>(count_field(r["mc_rounds"], path + ".r_u.mc_rounds"));
    } else {
      throw ConfigError(path + ".r_u.source: expected explicit, plug_in or fixed_point");
    }
  }
  return cfg;
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec s;
  const std::string root = "scenario";
  if (j.contains("schema_version") &&
      (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != 1))
    throw ConfigError("scenario.schema_version: expected 1");

  const json& design = require(j, "design", root);
  const std::string design_kind = text(require(design, "kind", root + ".design"), root + ".design.kind");
  if (design_kind == "gaussian")
    s.design.kind = DesignKind::gaussian;
  else if (design_kind == "student_t")
    s.design.kind = DesignKind::student_t;
  else
    throw ConfigError(root + ".design.kind: expected gaussian or student_t");
  s.design.dim = count_field(require(design, "dim", root + ".design"), root + ".design.dim");
  s.design.scale = num_or(design, "scale", s.design.scale, root + ".design");
  s.design.nu = num_or(design, "nu", s.design.nu, root + ".design");

  const json& dict = require(j, "dictionary", root);
  if (dict.contains("structure")) {
    const std::string st = text(dict["structure"], root + ".dictionary.structure");
    if (st == "random")
      s.dictionary.structure = DictionaryStructure::random;
    else if (st == "axis_pairs")
      s.dictionary.structure = DictionaryStructure::axis_pairs;
    else
      throw ConfigError(root + ".dictionary.structure: expected random or axis_pairs");
  }
  s.dictionary.count =
      count_field(require(dict, "count", root + ".dictionary"), root + ".dictionary.count");
  s.dictionary.scale = num_or(dict, "scale", s.dictionary.scale, root + ".dictionary");
  s.dictionary.pair_base = num_or(dict, "pair_base", s.dictionary.pair_base, root + ".dictionary");
  s.dictionary.pair_jitter =
      num_or(dict, "pair_jitter", s.dictionary.pair_jitter, root + ".dictionary");

  const json& target = require(j, "target", root);
  const std::string target_kind = text(require(target, "kind", root + ".target"), root + ".target.kind");
  if (target_kind == "realizable_noise") {
    s.target.kind = TargetKind::realizable_noise;
    if (target.contains("target_id"))
      s.target.target_id = count_field(target["target_id"], root + ".target.target_id");
  } else if (target_kind == "midpoint_adversarial") {
    s.target.kind = TargetKind::midpoint_adversarial;
    s.target.first = count_field(require(target, "first", root + ".target"), root + ".target.first");
    s.target.second =
        count_field(require(target, "second", root + ".target"), root + ".target.second");
    s.target.c = num_or(target, "c", s.target.c, root + ".target");
  } else if (target_kind == "convex_combination") {
    s.target.kind = TargetKind::convex_combination;
    if (target.contains("weights")) {
      if (!target["weights"].is_array())
        throw ConfigError(root + ".target.weights: expected an array");
      for (const auto& w : target["weights"])
        s.target.weights.push_back(num(w, root + ".target.weights[]"));
    }
  } else {
    throw ConfigError(root + ".target.kind: expected realizable_noise, midpoint_adversarial or "
                      "convex_combination");
  }

  const json& noise = require(j, "noise", root);
  const std::string noise_kind = text(require(noise, "kind", root + ".noise"), root + ".noise.kind");
  if (noise_kind == "gaussian")
    s.noise.kind = NoiseKind::gaussian;
  else if (noise_kind == "student_t")
    s.noise.kind = NoiseKind::student_t;
  else if (noise_kind == "pareto")
    s.noise.kind = NoiseKind::pareto;
  else if (noise_kind == "none")
    s.noise.kind = NoiseKind::none;
  else
    throw ConfigError(root + ".noise.kind: expected gaussian, student_t, pareto or none");
  s.noise.scale = num_or(noise, "scale", s.noise.scale, root + ".noise");
  s.noise.nu = num_or(noise, "nu", s.noise.nu, root + ".noise");
  s.noise.shape = num_or(noise, "shape", s.noise.shape, root + ".noise");

  const json& grid = require(j, "n_grid", root);
  if (!grid.is_array() || grid.empty())
    throw ConfigError(root + ".n_grid: expected a nonempty array");
  for (const auto& n : grid)
    s.n_grid.push_back(count_field(n, root + ".n_grid[]"));
  s.replications =
      count_field(require(j, "replications", root), root + ".replications");
  const json& seed_j = require(j, "master_seed", root);
  if (!seed_j.is_number_unsigned())
    throw ConfigError(root + ".master_seed: expected a nonnegative integer");
  s.master_seed = seed_j.get<std::uint64_t>();

  if (j.contains("aggregation"))
    s.aggregation = aggregation_from_json(j["aggregation"], root + ".aggregation");
  if (j.contains("oracle")) {
    const std::string kind = text(require(j["oracle"], "kind", root + ".oracle"), root + ".oracle.kind");
    if (kind == "analytic") {
      s.oracle.analytic = true;
    } else if (kind == "monte_carlo") {
      s.oracle.analytic = false;
      if (j["oracle"].contains("samples"))
        s.oracle.samples = count_field(j["oracle"]["samples"], root + ".oracle.samples");
    } else {
      throw ConfigError(root + ".oracle.kind: expected analytic or monte_carlo");
    }
  }
  if (j.contains("benchmark")) {
    const std::string b = text(j["benchmark"], root + ".benchmark");
    if (b == "dictionary_best")
      s.benchmark = ExcessBenchmark::dictionary_best;
    else if (b == "class_best")
      s.benchmark = ExcessBenchmark::class_best;
    else
      throw ConfigError(root + ".benchmark: expected dictionary_best or class_best");
  }
  if (j.contains("stub_power_law")) {
    StubPowerLaw stub;
    stub.coefficient = num(require(j["stub_power_law"], "coefficient", root + ".stub_power_law"),
                           root + ".stub_power_law.coefficient");
    stub.exponent = num(require(j["stub_power_law"], "exponent", root + ".stub_power_law"),
                        root + ".stub_power_law.exponent");
    s.stub = stub;
  }
  s.validate();
  return s;
}

} // namespace

ScenarioSpec ScenarioSpec::from_json_text(const std::string& content, const std::string& origin) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::parse_error& e) {
    throw ParseError(origin + ": " + e.what());
  }
  return scenario_from_json(j);
}

ScenarioSpec ScenarioSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str(), path);
}

// ---- instance generation ---------------------------------------------------------

namespace {

double design_second_moment(const DesignSpec& d) {
  if (d.kind == DesignKind::student_t)
    return d.scale * d.scale * d.nu / (d.nu - 2.0);
  return d.scale * d.scale;
}

double draw_design(Rng& rng, const DesignSpec& d) {
  if (d.kind == DesignKind::student_t)
    return d.scale * rng.student_t(d.nu);
  return d.scale * rng.normal();
}

double draw_noise(Rng& rng, const NoiseSpec& n) {
  switch (n.kind) {
  case NoiseKind::gaussian:
    return n.scale * rng.normal();
  case NoiseKind::student_t:
    return n.scale * rng.student_t(n.nu);
  case NoiseKind::pareto:
    return n.scale * (rng.pareto(n.shape) - n.shape / (n.shape - 1.0));
  case NoiseKind::none:
    return 0.0;
  }
  return 0.0;
}

Dictionary draw_dictionary(Rng& rng, const ScenarioSpec& sc, std::size_t n) {
  const auto m = static_cast<Eigen::Index>(sc.dictionary.count);
  const auto d = static_cast<Eigen::Index>(sc.design.dim);
  Dictionary dict;
  dict.coeffs = Eigen::MatrixXd::Zero(m, d);
  dict.offsets = Eigen::VectorXd::Zero(m);
  if (sc.dictionary.structure == DictionaryStructure::random) {
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        dict.coeffs(i, j) = sc.dictionary.scale * rng.normal();
    return dict;
  }
  // axis_pairs: pair k sits on axis k at jittered center +- pair_base; the
  // jitter shrinks as 1/sqrt(n) like the adversarial perturbation, so the
  // near-tie structure persists across the whole n grid.
  const double jitter_sd = sc.dictionary.pair_jitter / std::sqrt(static_cast<double>(n));
  for (Eigen::Index k = 0; k < m / 2; ++k) {
    const double center = jitter_sd * rng.normal();
    dict.coeffs(2 * k, k) = center + sc.dictionary.pair_base;
    dict.coeffs(2 * k + 1, k) = center - sc.dictionary.pair_base;
  }
  return dict;
}

Hypothesis target_hypothesis(Rng& rng, const ScenarioSpec& sc, const Dictionary& dict,
                             std::size_t n) {
  switch (sc.target.kind) {
  case TargetKind::realizable_noise:
    return Hypothesis::from_dictionary(dict, sc.target.target_id);
  case TargetKind::midpoint_adversarial: {
    const double s = rng.rademacher();
    const Hypothesis f1 = Hypothesis::from_dictionary(dict, sc.target.first);
    const Hypothesis f2 = Hypothesis::from_dictionary(dict, sc.target.second);
    const double gamma = s * sc.target.c / std::sqrt(static_cast<double>(n));
    Hypothesis h;
    h.coeffs = 0.5 * (f1.coeffs + f2.coeffs) + gamma * (f1.coeffs - f2.coeffs);
    h.offset = 0.5 * (f1.offset + f2.offset) + gamma * (f1.offset - f2.offset);
    return h;
  }
  case TargetKind::convex_combination: {
    std::vector<double> w = sc.target.weights;
    if (w.empty()) {
      w.resize(dict.size());
      for (double& wi : w)
        wi = -std::log(rng.uniform_pos()); // Dirichlet(1, ..., 1)
    }
    double sum = 0.0;
    for (const double wi : w)
      sum += wi;
    Hypothesis h;
    h.coeffs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dict.dim()));
    h.offset = 0.0;
    for (std::size_t j = 0; j < dict.size(); ++j) {
      const double wj = w[j] / sum;
      h.coeffs += wj * dict.coeffs.row(static_cast<Eigen::Index>(j)).transpose();
      h.offset += wj * dict.offsets(static_cast<Eigen::Index>(j));
    }
    return h;
  }
  }
  throw ConfigError("target.kind: unknown");
}

SampleSet draw_sample(Rng& rng, const ScenarioSpec& sc, const Hypothesis& bayes, std::size_t n) {
  SampleSet s;
  s.xs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(sc.design.dim));
  s.ys.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(sc.design.dim); ++j)
      s.xs(i, j) = draw_design(rng, sc.design);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i)
    s.ys(i) = bayes.coeffs.dot(s.xs.row(i)) + bayes.offset + draw_noise(rng, sc.noise);
  return s;
}

} // namespace

Instance generate(const ScenarioSpec& scenario, std::size_t n, std::uint64_t replication_seed) {
  scenario.validate();
  if (n == 0)
    throw ConfigError("n: must be positive");
  Rng rng(replication_seed);
  Dictionary dict = draw_dictionary(rng, scenario, n);
  const Hypothesis bayes = target_hypothesis(rng, scenario, dict, n);
  SampleSet sample = draw_sample(rng, scenario, bayes, n);
  const double noise_m2 = scenario.noise.second_moment();

  if (scenario.oracle.analytic) {
    const double m2 = design_second_moment(scenario.design);
    Eigen::MatrixXd sigma =
        m2 * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(scenario.design.dim),
                                       static_cast<Eigen::Index>(scenario.design.dim));
    RiskOracle oracle = RiskOracle::analytic(std::move(sigma), bayes.coeffs, bayes.offset, noise_m2);
    return Instance{std::move(sample), std::move(dict), std::move(oracle), bayes, noise_m2};
  }
  const std::uint64_t oracle_seed = derive_seed(replication_seed, 1000);
  Rng orng(oracle_seed);
  SampleSet big = draw_sample(orng, scenario, bayes, scenario.oracle.samples);
  RiskOracle oracle = RiskOracle::monte_carlo(std::move(big), oracle_seed);
  return Instance{std::move(sample), std::move(dict), std::move(oracle), bayes, noise_m2};
}

// ---- baselines -----------------------------------------------------------------

StarResult empirical_star_baseline(const SampleSet& sample, const Dictionary& dict) {
  if (sample.size() < 4)
    throw ConfigError("sample: the star baseline needs at least 4 points");
  const SampleSet d1 = sample.first_half();
  const SampleSet d2 = sample.second_half();
  const EvaluationMatrix eval1 = evaluate(dict, d1);
  const std::size_t f_hat1 = erm_all(eval1, d1.ys).id;

  const EvaluationMatrix eval2 = evaluate(dict, d2);
  const auto n2 = static_cast<double>(d2.size());
  const Eigen::VectorXd r_hat =
      eval2.values.col(static_cast<Eigen::Index>(f_hat1)) - d2.ys;

  StarResult best;
  bool have = false;
  for (std::size_t f = 0; f < dict.size(); ++f) {
    const Eigen::VectorXd r_f = eval2.values.col(static_cast<Eigen::Index>(f)) - d2.ys;
    const Eigen::VectorXd a = r_f - r_hat; // residual change from lambda = 0 to 1
    const double denom = a.squaredNorm();
    double lambda = 0.0;
    if (denom > 0.0)
      lambda = std::clamp(r_f.dot(a) / denom, 0.0, 1.0);
    const Eigen::VectorXd res = r_f - lambda * a; // lambda r_hat + (1 - lambda) r_f
    const double risk = res.squaredNorm() / n2;
    if (!have || risk < best.d2_risk) {
      have = true;
      best.f_id = f;
      best.lambda = lambda;
      best.d2_risk = risk;
    }
  }
  best.f_hat1 = f_hat1;
  const Hypothesis fh = Hypothesis::from_dictionary(dict, f_hat1);
  const Hypothesis fe = Hypothesis::from_dictionary(dict, best.f_id);
  best.hypothesis.coeffs = best.lambda * fh.coeffs + (1.0 - best.lambda) * fe.coeffs;
  best.hypothesis.offset = best.lambda * fh.offset + (1.0 - best.lambda) * fe.offset;
  return best;
}

double best_segment_risk(const Dictionary& dict, const RiskOracle& oracle) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < dict.size(); ++j) {
    const Hypothesis fj = Hypothesis::from_dictionary(dict, j);
    for (std::size_t k = j; k < dict.size(); ++k) {
      const Hypothesis fk = Hypothesis::from_dictionary(dict, k);
      const Hypothesis dh{fj.coeffs - fk.coeffs, fj.offset - fk.offset};
      const double a = oracle.distance2(fj, fk);
      const double base = oracle.true_risk(fk).value;
      double value = base;
      if (a > 0.0) {
        const double b = oracle.multiplier_mean(fk, dh); // E (f_k(X) - Y) dh(X)
        const double lambda = std::clamp(-b / a, 0.0, 1.0);
        value = base + 2.0 * lambda * b + lambda * lambda * a;
      }
      best = std::min(best, value);
    }
  }
  return best;
}

// ---- experiment sweep -------------------------------------------------------------

double lower_quantile(std::vector<double> values, double p) {
  if (values.empty())
    throw ConfigError("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0))
    throw ConfigError("quantile: p must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::ptrdiff_t>(std::ceil(p * static_cast<double>(values.size())));
  rank = std::clamp<std::ptrdiff_t>(rank, 1, static_cast<std::ptrdiff_t>(values.size()));
  return values[static_cast<std::size_t>(rank - 1)];
}

PowerLawFit fit_power_law(const std::vector<double>& ns, const std::vector<double>& ys) {
  if (ns.size() != ys.size())
    throw ConfigError("power law fit: input length mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] > 0.0 && ys[i] > 0.0) {
      lx.push_back(std::log(ns[i]));
      ly.push_back(std::log(ys[i]));
    }
  }
  PowerLawFit fit;
  fit.points = lx.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (fit.points < 2) {
    fit.slope = nan;
    fit.intercept = nan;
    fit.stderr_ = nan;
    return fit;
  }
  const auto k = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) {
    fit.slope = nan;
    fit.intercept = nan;
    fit.stderr_ = nan;
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (fit.points > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      const double r = ly[i] - fit.intercept - fit.slope * lx[i];
      rss += r * r;
    }
    fit.stderr_ = std::sqrt(rss / (k - 2.0) / sxx);
  }
  return fit;
}

namespace {

constexpr const char* kMethods[3] = {"aggregate", "erm", "star"};

struct CellResult {
  double excess[3];
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
};

CellResult run_cell(const ScenarioSpec& sc, std::size_t n, std::uint64_t seed) {
  CellResult cell;
  cell.seed = seed;
  const Instance inst = generate(sc, n, seed);

  const EvaluationMatrix eval = evaluate(inst.dict, inst.sample);
  const std::size_t erm_id = erm_all(eval, inst.sample.ys).id;
  const Hypothesis erm_hyp = Hypothesis::from_dictionary(inst.dict, erm_id);

  const AggregationResult agg = aggregate(inst.sample, inst.dict, sc.aggregation, &inst.oracle);
  const Hypothesis agg_hyp = selected_hypothesis(inst.dict, agg);

  const StarResult star = empirical_star_baseline(inst.sample, inst.dict);

  const double dict_best =
      inst.oracle.true_risk(Hypothesis::from_dictionary(inst.dict, inst.oracle.best_in_dictionary(inst.dict)))
          .value;
  double bench[3] = {dict_best, dict_best, dict_best};
  if (sc.benchmark == ExcessBenchmark::class_best) {
    const Midpoint mid = inst.oracle.best_midpoint(inst.dict);
    bench[0] =
        inst.oracle.true_risk(Hypothesis::midpoint(inst.dict, mid.first, mid.second)).value;
    bench[2] = best_segment_risk(inst.dict, inst.oracle);
  }
  cell.excess[0] = inst.oracle.true_risk(agg_hyp).value - bench[0];
  cell.excess[1] = inst.oracle.true_risk(erm_hyp).value - bench[1];
  cell.excess[2] = inst.oracle.true_risk(star.hypothesis).value - bench[2];
  cell.ok = true;
  return cell;
}

ExperimentReport stub_report(const ScenarioSpec& sc) {
  ExperimentReport report;
  std::vector<double> ns, medians;
  for (const std::size_t n : sc.n_grid) {
    const double v = sc.stub->coefficient *
                     std::pow(static_cast<double>(n), sc.stub->exponent);
    report.rows.push_back(ReportRow{"stub", n, 0, v, sc.master_seed});
    report.summary.push_back(SummaryRow{"stub", n, v, v, v});
    ns.push_back(static_cast<double>(n));
    medians.push_back(v);
  }
  const PowerLawFit fit = fit_power_law(ns, medians);
  report.slopes.push_back(SlopeRow{"stub", fit.slope, fit.stderr_});
  return report;
}

} // namespace

ExperimentReport run_experiment(const ScenarioSpec& scenario) {
  scenario.validate();
  if (scenario.stub)
    return stub_report(scenario);

  const std::size_t grid = scenario.n_grid.size();
  const std::size_t reps = scenario.replications;
  std::vector<CellResult> cells(grid * reps);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(grid * reps); ++t) {
    const std::size_t n_idx = static_cast<std::size_t>(t) / reps;
    const std::size_t rep = static_cast<std::size_t>(t) % reps;
    const std::uint64_t seed = derive_seed(scenario.master_seed, n_idx + 1, rep + 1);
    CellResult& cell = cells[static_cast<std::size_t>(t)];
    try {
      cell = run_cell(scenario, scenario.n_grid[n_idx], seed);
    } catch (const std::exception& e) {
      cell.seed = seed;
      cell.error = "n=" + std::to_string(scenario.n_grid[n_idx]) + " replication=" +
                   std::to_string(rep) + ": " + e.what();
    }
  }

  ExperimentReport report;
  for (std::size_t n_idx = 0; n_idx < grid; ++n_idx) {
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const CellResult& cell = cells[n_idx * reps + rep];
      if (!cell.ok) {
        report.errors.push_back(cell.error);
        continue;
      }
      for (int m = 0; m < 3; ++m)
        report.rows.push_back(ReportRow{kMethods[m], scenario.n_grid[n_idx], rep,
                                        cell.excess[m], cell.seed});
    }
  }

  for (int m = 0; m < 3; ++m) {
    std::vector<double> ns, medians;
    for (std::size_t n_idx = 0; n_idx < grid; ++n_idx) {
      std::vector<double> excesses;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const CellResult& cell = cells[n_idx * reps + rep];
        if (cell.ok)
          excesses.push_back(cell.excess[m]);
      }
      if (excesses.empty())
        continue;
      SummaryRow row;
      row.method = kMethods[m];
      row.n = scenario.n_grid[n_idx];
      row.median_excess = lower_quantile(excesses, 0.5);
      row.iqr_lo = lower_quantile(excesses, 0.25);
      row.iqr_hi = lower_quantile(excesses, 0.75);
      report.summary.push_back(row);
      ns.push_back(static_cast<double>(row.n));
      medians.push_back(row.median_excess);
    }
    const PowerLawFit fit = fit_power_law(ns, medians);
    report.slopes.push_back(SlopeRow{kMethods[m], fit.slope, fit.stderr_});
  }
  return report;
}

// ---- report files ------------------------------------------------------------------

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::string out = "# schema: starmid.report.v1\n";
  out += "method,n,replication,excess_risk,seed\n";
  for (const ReportRow& r : rows) {
    out += r.method;
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += std::to_string(r.replication);
    out += ',';
    out += format_double(r.excess_risk);
    out += ',';
    out += std::to_string(r.seed);
    out += '\n';
  }
  write_text_atomic(path, out);
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::string out = "# schema: starmid.summary.v1\n";
  out += "method,n,median_excess,iqr_lo,iqr_hi\n";
  for (const SummaryRow& r : rows) {
    out += r.method;
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += format_double(r.median_excess);
    out += ',';
    out += format_double(r.iqr_lo);
    out += ',';
    out += format_double(r.iqr_hi);
    out += '\n';
  }
  write_text_atomic(path, out);
}

void write_slopes_csv(const std::string& path, const std::vector<SlopeRow>& rows) {
  std::string out = "# schema: starmid.slopes.v1\n";
  out += "method,slope,stderr\n";
  for (const SlopeRow& r : rows) {
    out += r.method;
    out += ',';
    out += format_double(r.slope);
    out += ',';
    out += format_double(r.stderr_);
    out += '\n';
  }
  write_text_atomic(path, out);
}

// ---- calibration -------------------------------------------------------------------

namespace {

struct TrialRatios {
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = 0.0;
  bool any = false;
};

TrialRatios band_ratios(const ScenarioSpec& scenario, std::size_t n, std::size_t block_len,
                        std::uint64_t seed) {
  const Instance inst = generate(scenario, n, seed);
  const EvaluationMatrix eval = evaluate(inst.dict, inst.sample);
  const MidpointSet mids = MidpointSet::build(inst.dict, eval);
  TrialRatios out;
  for (std::size_t p = 0; p < mids.size(); ++p) {
    const Hypothesis hp = mids.hypothesis(inst.dict, p);
    for (std::size_t q = p + 1; q < mids.size(); ++q) {
      const Hypothesis hq = mids.hypothesis(inst.dict, q);
      const double dist = inst.oracle.distance(hp, hq);
      if (!(dist > 1e-12))
        continue;
      std::vector<double> diff(inst.sample.size());
      for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = std::abs(mids.columns(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) -
                           mids.columns(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)));
      const double ratio = median_of_means(diff, block_len) / dist;
      out.min_ratio = std::min(out.min_ratio, ratio);
      out.max_ratio = std::max(out.max_ratio, ratio);
      out.any = true;
    }
  }
  return out;
}

} // namespace

double mom_band_coverage(const ScenarioSpec& scenario, std::size_t block_len, double alpha,
                         double beta, std::size_t trials, std::uint64_t seed) {
  scenario.validate();
  if (trials == 0)
    throw ConfigError("trials: must be at least 1");
  const std::size_t n = scenario.n_grid.back();
  std::vector<char> pass(trials, 0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(trials); ++t) {
    const TrialRatios r =
        band_ratios(scenario, n, block_len, derive_seed(seed, static_cast<std::uint64_t>(t) + 1));
    pass[static_cast<std::size_t>(t)] =
        (!r.any || (r.min_ratio >= alpha && r.max_ratio <= beta)) ? 1 : 0;
  }
  std::size_t count = 0;
  for (const char p : pass)
    count += p;
  return static_cast<double>(count) / static_cast<double>(trials);
}

MomCalibration calibrate_mom_constants(const ScenarioSpec& scenario,
                                       const std::vector<std::size_t>& block_grid,
                                       double target_coverage, std::size_t trials,
                                       std::uint64_t seed) {
  scenario.validate();
  if (block_grid.empty())
    throw ConfigError("block_grid: must not be empty");
  if (!(target_coverage > 0.0 && target_coverage < 1.0))
    throw ConfigError("target_coverage: must lie in (0, 1)");
  if (trials < 10)
    throw ConfigError("trials: need at least 10 for calibration");
  const std::size_t n = scenario.n_grid.back();

  std::vector<std::size_t> grid = block_grid;
  std::sort(grid.begin(), grid.end());
  for (const std::size_t block_len : grid) {
    std::vector<double> mins(trials), maxs(trials);
    std::vector<char> any(trials, 0);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(trials); ++t) {
      const TrialRatios r = band_ratios(scenario, n, block_len,
                                        derive_seed(seed, static_cast<std::uint64_t>(t) + 1));
      mins[static_cast<std::size_t>(t)] = r.min_ratio;
      maxs[static_cast<std::size_t>(t)] = r.max_ratio;
      any[static_cast<std::size_t>(t)] = r.any ? 1 : 0;
    }
    const double p_tail = (1.0 - target_coverage) / 2.0;
    const double alpha = std::min(lower_quantile(mins, p_tail), 1.0);
    const double beta = std::max(lower_quantile(maxs, 1.0 - p_tail), 1.0);
    std::size_t covered = 0;
    for (std::size_t t = 0; t < trials; ++t)
      if (!any[t] || (mins[t] >= alpha && maxs[t] <= beta))
        ++covered;
    const double coverage = static_cast<double>(covered) / static_cast<double>(trials);
    if (coverage >= target_coverage)
      return MomCalibration{block_len, alpha, beta, coverage, trials};
  }
  throw ConfigError("target_coverage: unreachable with the given block grid (tails too heavy)");
}

} // namespace starmid
