// starmid: two-stage midpoint aggregation over a finite dictionary under
// squared loss, with median-of-means localization. Subcommands cover the
// procedure itself (aggregate), the simulation sweep (simulate), the localized
// complexity radius (complexity), the concentration-event diagnostic
// (check-event), and median-of-means band calibration (calibrate).
//
// Exit codes: 0 success, 2 malformed input, 3 invalid configuration,
// 4 numeric failure (including partial simulation failures).

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "starmid/bench.hpp"
#include "starmid/complexity.hpp"
#include "starmid/core.hpp"
#include "starmid/errors.hpp"
#include "starmid/parallel.hpp"
#include "starmid/procedure.hpp"
#include "starmid/rng.hpp"

namespace {

using ojson = nlohmann::ordered_json;

void emit(const ojson& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    starmid::write_text_atomic(out_path, text);
}

ojson bullet_json(const starmid::BulletReport& b) {
  ojson j;
  j["pass"] = b.pass;
  j["worst_margin"] = b.worst_margin;
  j["checks"] = b.checks;
  j["violations"] = b.violations;
  return j;
}

ojson fixed_point_json(const starmid::FixedPointResult& f, bool with_trace) {
  ojson j;
  j["r"] = f.r;
  j["zeta"] = f.zeta;
  j["threshold"] = f.threshold;
  j["value"] = f.at_r.value;
  j["ratio"] = f.at_r.ratio;
  j["std_error"] = f.at_r.std_error;
  j["collapsed"] = f.collapsed;
  if (with_trace) {
    ojson trace = ojson::array();
    for (const starmid::TracePoint& p : f.trace) {
      ojson row;
      row["r"] = p.r;
      row["value"] = p.value;
      row["ratio"] = p.ratio;
      trace.push_back(row);
    }
    j["trace"] = trace;
  }
  return j;
}

struct AggregateArgs {
  std::string samples_path;
  std::string dict_path;
  std::string out_path;
  std::string r_u_source = "plug_in";
  double r_u_value = 0.0;
  bool audit = false;
  starmid::AggregationConfig cfg;
};

int run_aggregate(const AggregateArgs& a) {
  starmid::AggregationConfig cfg = a.cfg;
  if (a.r_u_source == "explicit") {
    cfg.r_u_source = starmid::RUSource::explicit_value;
    cfg.r_u_value = a.r_u_value;
  } else if (a.r_u_source == "plug_in") {
    cfg.r_u_source = starmid::RUSource::plug_in;
  } else {
    throw starmid::ConfigError(
        "--r-u-source: expected explicit or plug_in (fixed_point needs a model oracle; "
        "use the complexity subcommand on a scenario and pass the radius explicitly)");
  }
  const starmid::SampleSet sample = starmid::read_samples_csv(a.samples_path);
  const starmid::Dictionary dict = starmid::read_dictionary_csv(a.dict_path);
  const starmid::AggregationResult res = starmid::aggregate(sample, dict, cfg);

  ojson j;
  j["schema_version"] = 1;
  j["n"] = sample.size();
  j["n1"] = res.n1;
  j["n2"] = res.n2;
  j["dictionary_size"] = dict.size();
  j["r_u"] = res.v.r_u;
  j["rho"] = cfg.resolved_rho();
  j["f_hat"] = res.v.f_hat;
  j["f_hat_risk"] = res.v.f_hat_risk;
  j["v_ids"] = res.v.ids;
  j["w_count"] = res.w_pairs.size();
  j["selected"] = ojson{{"first", res.selected.first}, {"second", res.selected.second}};
  j["selected_risk"] = res.selected_risk;
  if (a.audit) {
    ojson audit = ojson::array();
    for (const starmid::CandidateAudit& c : res.v.audit) {
      ojson row;
      row["id"] = c.id;
      row["empirical_risk"] = c.empirical_risk;
      row["mom_distance"] = c.mom_distance;
      row["threshold"] = c.threshold;
      row["in_v"] = c.in_v;
      audit.push_back(row);
    }
    j["audit"] = audit;
  }
  emit(j, a.out_path);
  return 0;
}

struct SimulateArgs {
  std::string scenario_path;
  std::string out_dir = ".";
  std::size_t replications = 0; // 0 = keep the scenario's value
  std::uint64_t master_seed = 0;
  bool seed_given = false;
  bool quiet = false;
};

int run_simulate(const SimulateArgs& a) {
  starmid::ScenarioSpec scenario = starmid::ScenarioSpec::from_json_file(a.scenario_path);
  if (a.replications > 0)
    scenario.replications = a.replications;
  if (a.seed_given)
    scenario.master_seed = a.master_seed;
  const starmid::ExperimentReport report = starmid::run_experiment(scenario);

  starmid::write_report_csv(a.out_dir + "/report.csv", report.rows);
  starmid::write_summary_csv(a.out_dir + "/summary.csv", report.summary);
  starmid::write_slopes_csv(a.out_dir + "/slopes.csv", report.slopes);

  if (!a.quiet) {
    std::cout << "wrote " << a.out_dir << "/report.csv, summary.csv, slopes.csv\n";
    std::cout << "method           n     median_excess\n";
    for (const starmid::SummaryRow& row : report.summary) {
      std::cout << row.method;
      for (std::size_t i = row.method.size(); i < 12; ++i)
        std::cout << ' ';
      std::string n = std::to_string(row.n);
      for (std::size_t i = n.size(); i < 6; ++i)
        std::cout << ' ';
      std::cout << n << "     " << starmid::format_double(row.median_excess) << "\n";
    }
    for (const starmid::SlopeRow& s : report.slopes)
      std::cout << "slope[" << s.method << "] = " << starmid::format_double(s.slope)
                << " (se " << starmid::format_double(s.stderr_) << ")\n";
  }
  if (!report.errors.empty()) {
    for (const std::string& e : report.errors)
      std::cerr << "cell failed: " << e << "\n";
    std::cerr << report.errors.size() << " of "
              << scenario.n_grid.size() * scenario.replications << " cells failed\n";
    return 4;
  }
  return 0;
}

struct ComplexityArgs {
  std::string scenario_path;
  std::string out_path;
  std::size_t n = 0;
  std::size_t replication = 0;
  bool trace = false;
  starmid::ComplexityConstants constants;
  starmid::ROptOptions options;
};

int run_complexity(const ComplexityArgs& a) {
  const starmid::ScenarioSpec scenario = starmid::ScenarioSpec::from_json_file(a.scenario_path);
  const std::uint64_t seed = starmid::derive_seed(scenario.master_seed, a.n, a.replication);
  const starmid::Instance inst = starmid::generate(scenario, a.n, seed);
  const starmid::ROptBreakdown breakdown =
      starmid::r_opt(inst.sample, inst.dict, inst.oracle, a.constants, a.options);

  ojson j;
  j["schema_version"] = 1;
  j["n"] = a.n;
  j["replication"] = a.replication;
  j["instance_seed"] = seed;
  j["r_opt_sq"] = breakdown.value;
  j["r_opt"] = std::sqrt(breakdown.value);
  j["sup_r_m_sq"] = breakdown.sup_r_m_sq;
  j["trivial"] = breakdown.trivial;
  if (!breakdown.trivial) {
    j["q1"] = fixed_point_json(breakdown.q1, a.trace);
    j["q2"] = fixed_point_json(breakdown.q2, a.trace);
    ojson centers = ojson::array();
    for (std::size_t i = 0; i < breakdown.centers.size(); ++i) {
      ojson row;
      row["center"] = ojson{{"first", breakdown.centers[i].first},
                            {"second", breakdown.centers[i].second}};
      row["r"] = breakdown.m_results[i].r;
      row["collapsed"] = breakdown.m_results[i].collapsed;
      centers.push_back(row);
    }
    j["multiplier"] = centers;
  }
  emit(j, a.out_path);
  return 0;
}

struct CheckEventArgs {
  std::string scenario_path;
  std::string out_path;
  std::size_t n = 0;
  std::size_t replication = 0;
  double r_u = 0.0;
  double rho = -1.0; // < 0 = derive from alpha and beta
  double alpha = 0.25;
  double beta = 4.0;
  std::size_t block_len = 9;
  long long u0_first = -1; // < 0 = stage-one empirical minimizer, as (id, id)
  long long u0_second = -1;
};

int run_check_event(const CheckEventArgs& a) {
  const starmid::ScenarioSpec scenario = starmid::ScenarioSpec::from_json_file(a.scenario_path);
  const std::uint64_t seed = starmid::derive_seed(scenario.master_seed, a.n, a.replication);
  const starmid::Instance inst = starmid::generate(scenario, a.n, seed);

  starmid::EventCheckConfig cfg;
  cfg.r_u = a.r_u;
  cfg.alpha = a.alpha;
  cfg.beta = a.beta;
  cfg.block_len = a.block_len;
  cfg.rho = a.rho >= 0.0 ? a.rho
                         : (a.alpha / (20.0 * a.beta)) * (a.alpha / (20.0 * a.beta));

  std::size_t first, second;
  if (a.u0_first >= 0 || a.u0_second >= 0) {
    if (a.u0_first < 0 || a.u0_second < 0)
      throw starmid::ConfigError("--u0-first/--u0-second: give both or neither");
    first = static_cast<std::size_t>(a.u0_first);
    second = static_cast<std::size_t>(a.u0_second);
  } else {
    const starmid::EvaluationMatrix eval = starmid::evaluate(inst.dict, inst.sample);
    first = second = starmid::erm_all(eval, inst.sample.ys).id;
  }
  if (first >= inst.dict.size() || second >= inst.dict.size())
    throw starmid::ConfigError("--u0-first/--u0-second: out of range");
  const starmid::Hypothesis u0 = starmid::Hypothesis::midpoint(inst.dict, first, second);
  const starmid::EventReport report = starmid::check_event_a(inst.sample, inst.dict, u0,
                                                             inst.oracle, cfg);

  ojson j;
  j["schema_version"] = 1;
  j["n"] = a.n;
  j["replication"] = a.replication;
  j["instance_seed"] = seed;
  j["u0"] = ojson{{"first", first}, {"second", second}};
  j["rho"] = cfg.rho;
  j["r_u"] = cfg.r_u;
  j["pass"] = report.pass;
  j["multiplier"] = bullet_json(report.multiplier);
  j["lower_bound"] = bullet_json(report.lower_bound);
  j["mom_band"] = bullet_json(report.mom_band);
  emit(j, a.out_path);
  return 0;
}

struct CalibrateArgs {
  std::string scenario_path;
  std::string out_path;
  std::vector<std::size_t> blocks = {3, 5, 7, 9};
  double coverage = 0.99;
  std::size_t trials = 200;
  std::uint64_t seed = 1;
};

int run_calibrate(const CalibrateArgs& a) {
  const starmid::ScenarioSpec scenario = starmid::ScenarioSpec::from_json_file(a.scenario_path);
  const starmid::MomCalibration cal =
      starmid::calibrate_mom_constants(scenario, a.blocks, a.coverage, a.trials, a.seed);
  ojson j;
  j["schema_version"] = 1;
  j["block_len"] = cal.block_len;
  j["alpha"] = cal.alpha;
  j["beta"] = cal.beta;
  j["coverage"] = cal.coverage;
  j["trials"] = cal.trials;
  emit(j, a.out_path);
  return 0;
}

void add_aggregation_options(CLI::App* cmd, starmid::AggregationConfig& cfg) {
  cmd->add_option("--block-len", cfg.block_len, "Median-of-means block length");
  cmd->add_option("--alpha", cfg.alpha, "Lower band constant");
  cmd->add_option("--beta", cfg.beta, "Upper band constant");
  cmd->add_option_function<double>(
      "--rho", [&cfg](const double v) { cfg.rho = v; },
      "Deviation budget (default (alpha / (20 beta))^2)");
  cmd->add_option("--threshold-factor", cfg.threshold_factor, "Stage-one retention factor");
  cmd->add_option("--kappa", cfg.plug_in_kappa, "Plug-in radius constant");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage midpoint aggregation over finite dictionaries"};
  app.set_version_flag("--version", "starmid 1.0.0");
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "OpenMP thread count (default: STARMID_THREADS, then the OpenMP runtime)");

  AggregateArgs agg;
  CLI::App* agg_cmd =
      app.add_subcommand("aggregate", "Run the two-stage procedure on CSV inputs");
  agg_cmd->add_option("--samples", agg.samples_path, "Sample CSV (x columns then y)")
      ->required();
  agg_cmd->add_option("--dictionary", agg.dict_path, "Dictionary CSV (coefficients then offset)")
      ->required();
  add_aggregation_options(agg_cmd, agg.cfg);
  agg_cmd->add_option("--r-u-source", agg.r_u_source, "explicit or plug_in")
      ->check(CLI::IsMember({"explicit", "plug_in"}));
  agg_cmd->add_option("--r-u", agg.r_u_value, "Radius for --r-u-source explicit");
  agg_cmd->add_flag("--audit", agg.audit, "Include the per-candidate stage-one audit");
  agg_cmd->add_option("--out", agg.out_path, "Output JSON path (default: stdout)");

  SimulateArgs sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Run a scenario sweep and write CSV reports");
  sim_cmd->add_option("--scenario", sim.scenario_path, "Scenario JSON path")->required();
  sim_cmd->add_option("--out-dir", sim.out_dir, "Directory for report/summary/slopes CSVs");
  sim_cmd->add_option("--replications", sim.replications, "Override the scenario's replications");
  sim_cmd->add_option("--master-seed", sim.master_seed, "Override the scenario's master seed")
      ->each([&sim](const std::string&) { sim.seed_given = true; });
  sim_cmd->add_flag("--quiet", sim.quiet, "Suppress the stdout summary table");

  ComplexityArgs cx;
  CLI::App* cx_cmd =
      app.add_subcommand("complexity", "Monte Carlo localized-complexity radius for one instance");
  cx_cmd->add_option("--scenario", cx.scenario_path, "Scenario JSON path")->required();
  cx_cmd->add_option("--n", cx.n, "Sample size")->required();
  cx_cmd->add_option("--replication", cx.replication, "Instance index (seeds the draw)");
  cx_cmd->add_option("--rounds", cx.options.rounds, "Monte Carlo rounds per radius");
  cx_cmd->add_option("--mc-seed", cx.options.seed, "Monte Carlo seed");
  cx_cmd->add_option("--rel-tol", cx.options.rel_tol, "Bisection relative tolerance");
  cx_cmd->add_option("--r-min-factor", cx.options.r_min_factor, "Lower bracket as a fraction of r_max");
  cx_cmd->add_option("--zeta-m", cx.constants.zeta_m, "Multiplier fixed-point constant");
  cx_cmd->add_option("--zeta-q1", cx.constants.zeta_q1, "Gaussian fixed-point constant");
  cx_cmd->add_option("--zeta-q2", cx.constants.zeta_q2, "Rademacher fixed-point constant");
  cx_cmd->add_option("--delta", cx.constants.delta, "Multiplier quantile confidence level");
  cx_cmd->add_flag("--trace", cx.trace, "Include bisection traces in the output");
  cx_cmd->add_option("--out", cx.out_path, "Output JSON path (default: stdout)");

  CheckEventArgs ev;
  CLI::App* ev_cmd =
      app.add_subcommand("check-event", "Check the concentration event on one instance");
  ev_cmd->add_option("--scenario", ev.scenario_path, "Scenario JSON path")->required();
  ev_cmd->add_option("--n", ev.n, "Sample size")->required();
  ev_cmd->add_option("--replication", ev.replication, "Instance index (seeds the draw)");
  ev_cmd->add_option("--r-u", ev.r_u, "Localization radius")->required();
  ev_cmd->add_option("--rho", ev.rho, "Deviation budget (default (alpha / (20 beta))^2)");
  ev_cmd->add_option("--alpha", ev.alpha, "Lower band constant");
  ev_cmd->add_option("--beta", ev.beta, "Upper band constant");
  ev_cmd->add_option("--block-len", ev.block_len, "Median-of-means block length");
  ev_cmd->add_option("--u0-first", ev.u0_first, "Center midpoint: first id (default: stage-one ERM)");
  ev_cmd->add_option("--u0-second", ev.u0_second, "Center midpoint: second id");
  ev_cmd->add_option("--out", ev.out_path, "Output JSON path (default: stdout)");

  CalibrateArgs cal;
  CLI::App* cal_cmd =
      app.add_subcommand("calibrate", "Calibrate median-of-means band constants for a scenario");
  cal_cmd->add_option("--scenario", cal.scenario_path, "Scenario JSON path")->required();
  cal_cmd->add_option("--blocks", cal.blocks, "Block lengths to try, smallest first")
      ->delimiter(',');
  cal_cmd->add_option("--coverage", cal.coverage, "Target simultaneous coverage");
  cal_cmd->add_option("--trials", cal.trials, "Calibration trials");
  cal_cmd->add_option("--seed", cal.seed, "Calibration seed");
  cal_cmd->add_option("--out", cal.out_path, "Output JSON path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (threads <= 0) {
    if (const char* env = std::getenv("STARMID_THREADS"))
      threads = std::atoi(env);
  }
  starmid::set_thread_count(threads);

  try {
    if (agg_cmd->parsed())
      return run_aggregate(agg);
    if (sim_cmd->parsed())
      return run_simulate(sim);
    if (cx_cmd->parsed())
      return run_complexity(cx);
    if (ev_cmd->parsed())
      return run_check_event(ev);
    if (cal_cmd->parsed())
      return run_calibrate(cal);
  } catch (const starmid::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const starmid::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const starmid::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
