#pragma once
// The full identity-check suite over the exact finite-state machinery: one
// record per check (name, parameters, value, tolerance, pass), consumed by
// the `oracle` subcommand and by the acceptance gate.
//
// Deterministic identities run at 1e-10/1e-12; the two identities that hold
// exactly in floating point (degenerate-density variance, see below) run at
// tolerance 0.

#include <cmath>
#include <string>
#include <vector>

#include "exclusim/oracle.hpp"
#include "exclusim/rng.hpp"

namespace exclusim::oracle {

struct CheckRecord {
  std::string name;
  std::string params;
  double value = 0.0;      // the measured violation / quantity
  double tolerance = 0.0;  // pass iff value <= tolerance (unless informational)
  bool informational = false;
  bool pass = false;
};

struct SuiteOptions {
  std::vector<double> lambdas = default_lambda_schedule();
  std::vector<double> direction;  // empty = first coordinate vector
  int random_functions = 100;
  std::uint64_t rng_seed = 0x5eedf00dULL;
};

inline std::vector<double> suite_direction(int dimension,
                                           const SuiteOptions& options) {
  if (options.direction.empty()) {
    std::vector<double> l(static_cast<std::size_t>(dimension), 0.0);
    l[0] = 1.0;
    return l;
  }
  if (options.direction.size() != static_cast<std::size_t>(dimension)) {
    throw ParameterMismatch("suite direction has wrong dimension");
  }
  return options.direction;
}

// Identity suite for one (torus, kernel, rho) point.
inline std::vector<CheckRecord> identity_suite(const Torus& torus,
                                               const TransitionKernel& kernel,
                                               double rho,
                                               const SuiteOptions& options) {
  std::vector<CheckRecord> records;
  const std::string where =
      "d=" + std::to_string(torus.dimension()) + " L=" +
      std::to_string(torus.side()) + " rho=" + std::to_string(rho);
  auto push = [&records, &where](const std::string& name, double value,
                                 double tolerance) {
    records.push_back(
        CheckRecord{name, where, value, tolerance, false, value <= tolerance});
  };
  auto push_info = [&records, &where](const std::string& name, double value) {
    records.push_back(CheckRecord{name, where, value, 0.0, true, true});
  };
  auto push_flag = [&records, &where](const std::string& name, bool ok,
                                      double value) {
    records.push_back(CheckRecord{name, where, value, 0.0, false, ok});
  };

  const StateSpace space(torus);
  const VectorXd nu = build_measure(space, rho);
  const GeneratorMatrix g_se = build_generator(space, kernel, GeneratorKind::se);
  const GeneratorMatrix g_rc = build_generator(space, kernel, GeneratorKind::rc);
  const GeneratorMatrix g_ew = build_generator(space, kernel, GeneratorKind::ew);
  const std::vector<double> l = suite_direction(torus.dimension(), options);

  // Generator structure: zero row sums, reversibility, stationarity.
  for (const GeneratorMatrix* g : {&g_se, &g_rc, &g_ew}) {
    const std::string kind = kind_name(g->kind);
    const VectorXd ones = VectorXd::Ones(space.n_states());
    push("row_sums_" + kind, (g->mat * ones).cwiseAbs().maxCoeff(), 1e-12);
    push("reversibility_" + kind, check_reversibility(*g, nu), 1e-12);
    push("stationarity_" + kind, check_stationarity(*g, nu), 1e-12);
  }

  // The local drift is centered under the stationary measure.
  const VectorXd phi = drift_projection(space, kernel, l);
  push("drift_centered", std::abs(inner(phi, VectorXd::Ones(space.n_states()), nu)),
       1e-12);

  // E_nu[c_{0,y}] = rho^2 for every support displacement.
  double conductance_dev = 0.0;
  for (const Displacement& y : kernel.support()) {
    conductance_dev = std::max(
        conductance_dev,
        std::abs(expected_conductance(space, nu, torus, y) - rho * rho));
  }
  push("expected_conductance", conductance_dev, 1e-12);

  // Dirichlet additivity D_ew = D_se + D_rc and the matrix-vs-explicit dual
  // route, on pseudo-random test functions.
  Rng rng(options.rng_seed);
  double additivity = 0.0;
  double dual_route = 0.0;
  for (int trial = 0; trial < options.random_functions; ++trial) {
    VectorXd f(space.n_states());
    for (std::int64_t i = 0; i < space.n_states(); ++i) {
      f(i) = 2.0 * rng.uniform() - 1.0;
    }
    const double d_se = dirichlet_form(f, g_se, nu);
    const double d_rc = dirichlet_form(f, g_rc, nu);
    const double d_ew = dirichlet_form(f, g_ew, nu);
    additivity = std::max(additivity, std::abs(d_ew - d_se - d_rc));
    dual_route = std::max(
        dual_route,
        std::abs(d_ew - dirichlet_form_explicit(f, space, kernel, nu,
                                                GeneratorKind::ew)));
    dual_route = std::max(
        dual_route,
        std::abs(d_se - dirichlet_form_explicit(f, space, kernel, nu,
                                                GeneratorKind::se)));
  }
  push("dirichlet_additivity", additivity, 1e-10);
  push("dirichlet_dual_route", dual_route, 1e-10);

  // Resolvent solves along the lambda schedule, with the pairing identity
  // <phi.l, f> = lambda ||f||^2 + D_ew(f) and the variance decomposition
  // sigma2(lambda) = sigma2_M - 2 D_ew(f) - 4 lambda ||f||^2, where sigma2_M
  // is the bare jump rate sum_y (y.l)^2 E_nu[c_{0,y}].
  double sigma2_m = 0.0;
  for (const Displacement& y : kernel.support()) {
    double yl = 0.0;
    for (std::size_t a = 0; a < l.size(); ++a) yl += y[a] * l[a];
    sigma2_m += yl * yl * expected_conductance(space, nu, torus, y);
  }
  double max_residual = 0.0;
  double pairing_dev = 0.0;
  double decomposition_dev = 0.0;
  bool solves_ok = true;
  for (const double lambda : options.lambdas) {
    try {
      const ResolventSolution sol =
          solve_resolvent(lambda, l, g_ew, space, kernel);
      max_residual = std::max(max_residual, sol.residual);
      const double norm_sq = inner(sol.f, sol.f, nu);
      const double d_ew = dirichlet_form(sol.f, g_ew, nu);
      const double pairing = inner(phi, sol.f, nu);
      pairing_dev = std::max(
          pairing_dev, std::abs(pairing - lambda * norm_sq - d_ew));
      const MartingaleVariance mv =
          martingale_variance(l, sol.f, g_se, space, kernel, nu);
      decomposition_dev = std::max(
          decomposition_dev,
          std::abs(mv.sigma2 - (sigma2_m - 2.0 * d_ew - 4.0 * lambda * norm_sq)));
    } catch (const SolverFailure&) {
      solves_ok = false;
    }
  }
  push("resolvent_residual", solves_ok ? max_residual : 1.0, 1e-10);
  push("pairing_identity", pairing_dev, 1e-10);
  push("variance_decomposition", decomposition_dev, 1e-10);

  // Variational sandwich and boundedness of the est2 ratio.
  const InequalityChainReport chain =
      check_inequality_chain(l, options.lambdas, g_ew, g_se, space, kernel, nu);
  double min_margin = 0.0;
  bool first = true;
  for (const InequalityRow& row : chain.rows) {
    const double margin = row.pairing - row.d_ew;
    min_margin = first ? margin : std::min(min_margin, margin);
    first = false;
  }
  push_flag("inequality_dew_le_pairing", chain.all_first_ok, min_margin);
  push_flag("est2_ratio_bounded", chain.ratio_bounded, chain.max_ratio);

  // Variance extrapolation; both H^1-norm routes must agree along the way.
  const VarianceExtrapolation extrapolation = variance_extrapolate(
      l, options.lambdas, g_ew, g_se, space, kernel, nu);
  double h1_dev = 0.0;
  for (std::size_t i = 0; i < extrapolation.h1_norm_sq.size(); ++i) {
    h1_dev = std::max(h1_dev, std::abs(extrapolation.h1_norm_sq[i] -
                                       extrapolation.h1_explicit[i]));
  }
  push("h1_route_equality", h1_dev, 1e-10);

  if (rho == 0.0 || rho == 1.0) {
    // Point-mass densities evaluate exactly: f_lambda vanishes on the atom,
    // so sigma2(lambda) = rho^2 sum_y (y.l)^2 with no rounding at all.
    double quad = 0.0;
    for (const Displacement& y : kernel.support()) {
      double yl = 0.0;
      for (std::size_t a = 0; a < l.size(); ++a) yl += y[a] * l[a];
      quad += yl * yl;
    }
    const double expected = rho * rho * quad;
    push("sigma2_degenerate_exact",
         std::abs(extrapolation.extrapolated - expected), 0.0);
  } else {
    push_flag("sigma2_positive_stabilized",
              extrapolation.stabilized && extrapolation.extrapolated > 0.0,
              extrapolation.extrapolated);
    // Independent spectral route to the same limit (kept to small spaces:
    // the dense eigendecomposition is cubic in 2^{L^d}).
    if (space.n_states() <= 4096) {
      const WalkVarianceExact exact(l, g_ew, space, kernel, nu);
      push("extrapolation_vs_spectral",
           std::abs(extrapolation.extrapolated - exact.sigma2_limit()), 1e-8);
    }
  }
  push_info("sigma2", extrapolation.extrapolated);
  return records;
}

}  // namespace exclusim::oracle
