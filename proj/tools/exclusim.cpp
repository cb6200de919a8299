// exclusim — simulate exclusion-driven conductance walks, verify the exact
// finite-state identities, and analyze trajectory ensembles.
//
// Exit codes: 0 all requested work passed, 1 at least one check or test
// failed, 2 usage/config/input error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exclusim/io.hpp"
#include "exclusim/oracle_suite.hpp"
#include "exclusim/simulate.hpp"
#include "exclusim/stats.hpp"
#include "exclusim/version.hpp"

namespace fs = std::filesystem;
using namespace exclusim;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

std::string grid_dir_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "grid-%03zu", index);
  return buf;
}

std::string pass_word(bool pass) { return pass ? "pass" : "FAIL"; }

// ---------------------------------------------------------------------------
// simulate / tagged

struct SimulateFlags {
  std::string config_path;
  std::string out_dir;
  bool seed_set = false;
  std::uint64_t seed = 0;
  bool replicas_set = false;
  std::size_t replicas = 0;
};

int cmd_simulate(const SimulateFlags& flags, bool force_tagged) {
  CampaignConfig campaign = parse_campaign(read_text_file(flags.config_path));
  if (flags.seed_set) campaign.master_seed = flags.seed;
  if (flags.replicas_set) campaign.replicas = flags.replicas;
  if (force_tagged) campaign.modes = {Mode::tagged};

  const TransitionKernel kernel = campaign_kernel(campaign);
  const std::vector<GridPoint> grid = expand_grid(campaign);
  // Validate the whole grid before writing anything.
  std::vector<SimConfig> configs;
  configs.reserve(grid.size());
  for (const GridPoint& point : grid) {
    configs.push_back(grid_sim_config(campaign, point));
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto seeds =
        grid_replica_seeds(campaign.master_seed, g, campaign.replicas);
    const std::vector<Trajectory> ensemble =
        run_with_seeds(configs[g], seeds);
    const fs::path dir = fs::path(flags.out_dir) / grid_dir_name(g);
    write_text_file(dir / "manifest.txt",
                    render_manifest(campaign, grid[g], kernel, seeds));
    write_text_file(dir / "trajectories.csv",
                    render_trajectories_csv(ensemble, kernel));
    std::cout << grid_dir_name(g) << ": L=" << grid[g].side
              << " rho=" << format_double(grid[g].rho)
              << " T=" << format_double(grid[g].horizon)
              << " mode=" << mode_name(grid[g].mode)
              << " replicas=" << campaign.replicas << " -> "
              << (dir / "trajectories.csv").string() << "\n";
  }
  return kExitPass;
}

// ---------------------------------------------------------------------------
// oracle

int cmd_oracle(const std::string& config_path, const std::string& out_dir) {
  const CampaignConfig campaign =
      parse_campaign(read_text_file(config_path), /*need_simulation=*/false);
  const TransitionKernel kernel = campaign_kernel(campaign);
  const oracle::SuiteOptions options;

  std::vector<oracle::CheckRecord> records;
  for (const int side : campaign.sides) {
    const Torus torus(campaign.dimension, side);
    for (const double rho : campaign.rhos) {
      const auto point = oracle::identity_suite(torus, kernel, rho, options);
      records.insert(records.end(), point.begin(), point.end());
    }
  }

  bool all_pass = true;
  std::string summary;
  std::string csv = "name,params,value,tolerance,pass\n";
  for (const oracle::CheckRecord& r : records) {
    all_pass = all_pass && r.pass;
    const std::string line =
        (r.informational ? "info " : pass_word(r.pass) + " ") + r.name + " [" +
        r.params + "] value=" + format_double(r.value) +
        (r.informational ? "" : " tolerance=" + format_double(r.tolerance));
    summary += line + "\n";
    csv += r.name + "," + r.params + "," + format_double(r.value) + "," +
           format_double(r.tolerance) + "," +
           (r.informational ? "info" : (r.pass ? "1" : "0")) + "\n";
  }
  summary += std::string("overall: ") + pass_word(all_pass) + "\n";
  std::cout << summary;
  if (!out_dir.empty()) {
    write_text_file(fs::path(out_dir) / "oracle_summary.txt", summary);
    write_text_file(fs::path(out_dir) / "oracle_checks.csv", csv);
  }
  return all_pass ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------------------
// analyze

struct LoadedRun {
  RunManifest manifest;
  std::vector<Trajectory> trajectories;
};

LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  run.manifest = parse_manifest(read_text_file(dir / "manifest.txt"));
  run.trajectories = parse_trajectories_csv(
      read_text_file(dir / "trajectories.csv"), run.manifest);
  return run;
}

void require_consistent(const RunManifest& a, const RunManifest& b) {
  const bool same =
      a.campaign.dimension == b.campaign.dimension &&
      a.point.side == b.point.side && a.campaign.range == b.campaign.range &&
      a.point.rho == b.point.rho && a.point.horizon == b.point.horizon &&
      a.point.mode == b.point.mode &&
      a.campaign.samples == b.campaign.samples &&
      a.campaign.kernel_lines == b.campaign.kernel_lines;
  if (!same) {
    throw ParameterMismatch(
        "input runs use different parameters and cannot be pooled");
  }
}

const std::set<std::string> kKnownTests = {
    "drift",      "msd",        "scaling", "gaussianity",
    "increments", "martingale", "compare"};

std::set<std::string> resolve_tests(const std::string& list, Mode mode,
                                    int dimension, int side) {
  std::set<std::string> tests;
  if (list.empty() || list == "default") {
    tests = {"drift", "msd", "scaling"};
    if (mode != Mode::tagged) tests.insert("martingale");
    return tests;
  }
  std::string token;
  std::istringstream in(list);
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    if (token == "all") {
      tests.insert({"drift", "msd", "scaling", "gaussianity", "increments"});
      if (mode != Mode::tagged) tests.insert("martingale");
      if (mode == Mode::coupled) {
        // The exact comparison enumerates 2^{L^d} states; auto-include it
        // only where that is feasible.
        double n_sites = 1.0;
        for (int a = 0; a < dimension; ++a) n_sites *= side;
        if (n_sites <= 20.0) tests.insert("compare");
      }
    } else if (kKnownTests.count(token)) {
      tests.insert(token);
    } else {
      throw ConfigParseError("unknown test '" + token + "' in --tests");
    }
  }
  if (tests.empty()) throw ConfigParseError("--tests selected no tests");
  return tests;
}

int cmd_analyze(const std::vector<std::string>& inputs,
                const std::string& tests_list, std::string out_dir) {
  if (inputs.empty()) {
    throw ConfigParseError("analyze needs at least one run directory");
  }
  std::vector<LoadedRun> runs;
  runs.reserve(inputs.size());
  for (const std::string& input : inputs) {
    runs.push_back(load_run(input));
    if (runs.size() > 1) {
      require_consistent(runs.front().manifest, runs.back().manifest);
    }
  }
  std::vector<Trajectory> pooled;
  for (LoadedRun& run : runs) {
    for (Trajectory& tr : run.trajectories) pooled.push_back(std::move(tr));
  }
  const RunManifest& manifest = runs[0].manifest;
  const TransitionKernel kernel = campaign_kernel(manifest.campaign);
  const Ensemble ensemble(std::move(pooled));
  const ParamsEcho& params = ensemble.params();
  std::vector<double> l(static_cast<std::size_t>(params.dimension), 0.0);
  l[0] = 1.0;

  const std::set<std::string> tests = resolve_tests(
      tests_list, params.mode, params.dimension, params.side);
  if (out_dir.empty()) {
    out_dir = (fs::path(inputs[0]) / "reports").string();
  }

  bool all_pass = true;
  std::string summary;
  auto note = [&summary](const std::string& line) { summary += line + "\n"; };
  note("ensemble: N=" + std::to_string(ensemble.size()) + " d=" +
       std::to_string(params.dimension) + " L=" + std::to_string(params.side) +
       " R=" + std::to_string(params.range) + " rho=" +
       format_double(params.rho) + " T=" + format_double(params.horizon) +
       " mode=" + mode_name(params.mode));

  std::vector<VariancePoint> curve;
  if (tests.count("msd") || tests.count("scaling") || tests.count("compare")) {
    curve = msd_curve(ensemble, l);
  }

  if (tests.count("drift")) {
    const DriftReport r = drift_test(ensemble, l);
    note(pass_word(r.pass) + " drift: mean(X_T.l/T)=" + format_double(r.mean) +
         " se=" + format_double(r.se) + " (|mean| <= 3 se)");
    all_pass = all_pass && r.pass;
    std::string csv = "mean,se,pass\n";
    csv += format_double(r.mean) + "," + format_double(r.se) + "," +
           (r.pass ? "1" : "0") + "\n";
    write_text_file(fs::path(out_dir) / "drift.csv", csv);
  }
  if (tests.count("msd")) {
    std::string csv = "t,variance,se\n";
    for (const VariancePoint& p : curve) {
      csv += format_double(p.time) + "," + format_double(p.variance) + "," +
             format_double(p.se) + "\n";
    }
    write_text_file(fs::path(out_dir) / "msd.csv", csv);
    note("info msd: " + std::to_string(curve.size()) +
         " sample times written to msd.csv");
  }
  if (tests.count("scaling")) {
    const double t_hi = params.horizon;
    const double t_lo = params.horizon / 100.0;
    const ScalingReport r = scaling_fit(curve, t_lo, t_hi);
    const double band_lo = params.mode == Mode::tagged ? 0.4 : 0.9;
    const double band_hi = params.mode == Mode::tagged ? 0.6 : 1.1;
    const bool pass = r.slope >= band_lo && r.slope <= band_hi;
    note(pass_word(pass) + " scaling: slope=" + format_double(r.slope) +
         " se=" + format_double(r.slope_se) + " window=[" +
         format_double(t_lo) + "," + format_double(t_hi) + "] band=[" +
         format_double(band_lo) + "," + format_double(band_hi) + "]");
    all_pass = all_pass && pass;
    std::string csv = "t_lo,t_hi,slope,se,band_lo,band_hi,pass\n";
    csv += format_double(t_lo) + "," + format_double(t_hi) + "," +
           format_double(r.slope) + "," + format_double(r.slope_se) + "," +
           format_double(band_lo) + "," + format_double(band_hi) + "," +
           (pass ? "1" : "0") + "\n";
    write_text_file(fs::path(out_dir) / "scaling.csv", csv);
  }
  if (tests.count("gaussianity")) {
    const GaussianityReport r = gaussianity_test(ensemble, l, params.horizon);
    note(pass_word(r.pass) + " gaussianity: t=" + format_double(r.time) +
         " ks=" + format_double(r.ks_statistic) + " threshold=" +
         format_double(r.ks_threshold) + " excess_kurtosis=" +
         format_double(r.excess_kurtosis) + " (3 se = " +
         format_double(3.0 * r.kurtosis_se) + ")");
    all_pass = all_pass && r.pass;
    std::string csv =
        "t,epsilon,n,variance,ks,ks_threshold,ks_pass,excess_kurtosis,"
        "kurtosis_se,kurtosis_pass,pass\n";
    csv += format_double(r.time) + "," + format_double(r.epsilon) + "," +
           std::to_string(r.n) + "," + format_double(r.variance) + "," +
           format_double(r.ks_statistic) + "," +
           format_double(r.ks_threshold) + "," + (r.ks_pass ? "1" : "0") +
           "," + format_double(r.excess_kurtosis) + "," +
           format_double(r.kurtosis_se) + "," +
           (r.kurtosis_pass ? "1" : "0") + "," + (r.pass ? "1" : "0") + "\n";
    write_text_file(fs::path(out_dir) / "gaussianity.csv", csv);
  }
  if (tests.count("increments")) {
    const IncrementReport r = increment_independence(
        ensemble, l, params.horizon / 2.0, params.horizon);
    note(pass_word(r.pass) + " increments: corr(X_{T/2}, X_T - X_{T/2})=" +
         format_double(r.correlation) + " z=" + format_double(r.z) +
         " (|z| <= 3)");
    all_pass = all_pass && r.pass;
    std::string csv = "t1,t2,correlation,z,pass\n";
    csv += format_double(r.t1) + "," + format_double(r.t2) + "," +
           format_double(r.correlation) + "," + format_double(r.z) + "," +
           (r.pass ? "1" : "0") + "\n";
    write_text_file(fs::path(out_dir) / "increments.csv", csv);
  }
  if (tests.count("martingale")) {
    if (params.mode == Mode::tagged) {
      throw ParameterMismatch(
          "martingale test applies to coupled/environment ensembles");
    }
    const MartingaleReport r = martingale_test(ensemble, kernel, l);
    note(pass_word(r.pass) + " martingale: mean(X_T-A_T)=" +
         format_double(r.mean) + " se=" + format_double(r.mean_se) +
         " var=" + format_double(r.variance) + " expected=" +
         format_double(r.expected_variance) + " var_se=" +
         format_double(r.variance_se));
    all_pass = all_pass && r.pass;
    std::string csv =
        "mean,mean_se,mean_pass,variance,variance_se,expected_variance,"
        "variance_pass,pass\n";
    csv += format_double(r.mean) + "," + format_double(r.mean_se) + "," +
           (r.mean_pass ? "1" : "0") + "," + format_double(r.variance) + "," +
           format_double(r.variance_se) + "," +
           format_double(r.expected_variance) + "," +
           (r.variance_pass ? "1" : "0") + "," + (r.pass ? "1" : "0") + "\n";
    write_text_file(fs::path(out_dir) / "martingale.csv", csv);
  }
  if (tests.count("compare")) {
    if (params.mode != Mode::coupled) {
      throw ParameterMismatch("compare requires a coupled-walk ensemble");
    }
    const Torus torus(params.dimension, params.side);
    const oracle::StateSpace space(torus);
    const auto nu = oracle::build_measure(space, params.rho);
    const auto g_ew =
        oracle::build_generator(space, kernel, oracle::GeneratorKind::ew);
    const auto g_se =
        oracle::build_generator(space, kernel, oracle::GeneratorKind::se);
    const auto extrapolation = oracle::variance_extrapolate(
        l, oracle::default_lambda_schedule(), g_ew, g_se, space, kernel, nu);
    OracleSideSummary oracle_side{params.dimension, params.side, params.range,
                                  params.rho, extrapolation.extrapolated};
    const CompareReport r = compare_oracle(params, kernel, curve.back(),
                                           oracle_side, kernel);
    note(pass_word(r.pass) + " compare: Var(X_t)/t=" +
         format_double(r.mc_rate) + " at t=" + format_double(r.time) +
         " oracle sigma2=" + format_double(r.oracle_sigma2) +
         " |diff|=" + format_double(r.discrepancy) + " tolerance=" +
         format_double(r.tolerance) + (extrapolation.stabilized
                                           ? ""
                                           : " [" + extrapolation.message + "]"));
    all_pass = all_pass && r.pass;
    std::string csv =
        "t,mc_rate,mc_rate_se,oracle_sigma2,discrepancy,tolerance,pass\n";
    csv += format_double(r.time) + "," + format_double(r.mc_rate) + "," +
           format_double(r.mc_rate_se) + "," +
           format_double(r.oracle_sigma2) + "," +
           format_double(r.discrepancy) + "," + format_double(r.tolerance) +
           "," + (r.pass ? "1" : "0") + "\n";
    write_text_file(fs::path(out_dir) / "compare.csv", csv);
  }

  note(std::string("overall: ") + pass_word(all_pass));
  std::cout << summary;
  write_text_file(fs::path(out_dir) / "summary.txt", summary);
  return all_pass ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exclusion-driven conductance walk simulator and verifier"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SimulateFlags sim_flags;
  std::string oracle_config, oracle_out;
  std::vector<std::string> analyze_inputs;
  std::string analyze_tests, analyze_out;

  auto add_sim_flags = [&sim_flags](CLI::App* cmd) {
    cmd->add_option("--config", sim_flags.config_path, "key=value config file")
        ->required();
    cmd->add_option("--out", sim_flags.out_dir, "output directory")->required();
    cmd->add_option("--seed", sim_flags.seed, "master seed override");
    cmd->add_option("--replicas", sim_flags.replicas,
                    "replica count override");
  };

  CLI::App* simulate = app.add_subcommand(
      "simulate", "run a simulation campaign from a config grid");
  add_sim_flags(simulate);
  CLI::App* tagged = app.add_subcommand(
      "tagged", "run a tagged-particle campaign (simulate with mode=tagged)");
  add_sim_flags(tagged);

  CLI::App* oracle_cmd = app.add_subcommand(
      "oracle", "run the exact identity-check suite on small tori");
  oracle_cmd->add_option("--config", oracle_config, "key=value config file")
      ->required();
  oracle_cmd->add_option("--out", oracle_out, "report output directory");

  CLI::App* analyze = app.add_subcommand(
      "analyze", "compute statistics and verdicts from simulated runs");
  analyze->add_option("--tests", analyze_tests,
                      "comma list: drift,msd,scaling,gaussianity,increments,"
                      "martingale,compare or 'all'");
  analyze->add_option("--out", analyze_out, "report output directory");
  analyze->add_option("runs", analyze_inputs, "run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    for (CLI::App* cmd : {simulate, tagged}) {
      if (cmd->parsed()) {
        sim_flags.seed_set = cmd->count("--seed") > 0;
        sim_flags.replicas_set = cmd->count("--replicas") > 0;
        return cmd_simulate(sim_flags, cmd == tagged);
      }
    }
    if (oracle_cmd->parsed()) return cmd_oracle(oracle_config, oracle_out);
    if (analyze->parsed()) {
      return cmd_analyze(analyze_inputs, analyze_tests, analyze_out);
    }
  } catch (const SolverFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
