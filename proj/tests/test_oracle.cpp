// Exact finite-state machinery: generator construction, reversibility and
// stationarity, Dirichlet identities, resolvent solves, and the lambda -> 0
// variance extrapolation.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "exclusim/oracle.hpp"
#include "exclusim/oracle_suite.hpp"

using namespace exclusim;
using oracle::GeneratorKind;
using oracle::StateSpace;

namespace {

const std::vector<double> kDirection{1.0};

struct SmallModel {
  Torus torus;
  TransitionKernel kernel;
  StateSpace space;
  SmallModel(int side, int range = 1)
      : torus(1, side), kernel(uniform_kernel(1, range)), space(torus) {}
};

}  // namespace

TEST_CASE("state space bijection round-trips and the cap is enforced") {
  const SmallModel m(5);
  REQUIRE(m.space.n_states() == 32);
  for (std::uint32_t state = 0; state < 32; ++state) {
    REQUIRE(m.space.to_index(m.space.to_configuration(state)) == state);
  }
  REQUIRE_THROWS_AS(StateSpace(Torus(1, 21)), StateSpaceTooLarge);
}

TEST_CASE("the environment generator is the exact sum of its parts") {
  const SmallModel m(5);
  const auto g_se = oracle::build_generator(m.space, m.kernel, GeneratorKind::se);
  const auto g_rc = oracle::build_generator(m.space, m.kernel, GeneratorKind::rc);
  const auto g_ew = oracle::build_generator(m.space, m.kernel, GeneratorKind::ew);
  const Eigen::MatrixXd diff =
      Eigen::MatrixXd(g_ew.mat) - Eigen::MatrixXd(g_se.mat) - Eigen::MatrixXd(g_rc.mat);
  REQUIRE(diff.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the all-ones state of a 3-ring has a zero environment row") {
  // Exchanges are no-ops and both shifts map the full state to itself.
  const SmallModel m(3);
  const auto g_ew = oracle::build_generator(m.space, m.kernel, GeneratorKind::ew);
  const std::uint32_t full = (1u << 3) - 1u;
  const Eigen::MatrixXd dense(g_ew.mat);
  for (std::int64_t col = 0; col < m.space.n_states(); ++col) {
    REQUIRE(dense(full, col) == 0.0);
  }
}

TEST_CASE("generator rows sum to zero with nonnegative off-diagonals") {
  const SmallModel m(4);
  for (const auto kind : {GeneratorKind::se, GeneratorKind::rc, GeneratorKind::ew}) {
    const auto g = oracle::build_generator(m.space, m.kernel, kind);
    const Eigen::MatrixXd dense(g.mat);
    for (std::int64_t r = 0; r < m.space.n_states(); ++r) {
      REQUIRE(std::abs(dense.row(r).sum()) < 1e-12);
      for (std::int64_t c = 0; c < m.space.n_states(); ++c) {
        if (r != c) REQUIRE(dense(r, c) >= 0.0);
      }
    }
  }
}

TEST_CASE("shift rows move mass only across unit-conductance shifts") {
  // Structural check: the off-diagonal mass of an L_rc row at eta sits
  // exactly on the shifted states tau_y eta with c_{0,y}(eta) = 1.
  const SmallModel m(4);
  const auto g_rc = oracle::build_generator(m.space, m.kernel, GeneratorKind::rc);
  const Eigen::MatrixXd dense(g_rc.mat);
  for (std::uint32_t state = 0; state < 16; ++state) {
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(16);
    const Configuration eta = m.space.to_configuration(state);
    for (const Displacement& y : m.kernel.support()) {
      if (conductance(eta, m.torus, m.kernel, 0, m.torus.neighbor(0, y)) == 0) {
        continue;
      }
      const auto perm = oracle::shift_permutation(m.torus, y);
      expected(m.space.shifted(state, perm)) += 1.0;
    }
    for (std::int64_t col = 0; col < 16; ++col) {
      if (static_cast<std::uint32_t>(col) == state) continue;
      REQUIRE(dense(state, col) == expected(col));
    }
  }
}

TEST_CASE("reversibility holds exactly and the detector has teeth") {
  for (const double rho : {0.25, 0.5, 0.75}) {
    const SmallModel m4(4);
    const auto nu4 = oracle::build_measure(m4.space, rho);
    const auto g_se = oracle::build_generator(m4.space, m4.kernel, GeneratorKind::se);
    REQUIRE(oracle::check_reversibility(g_se, nu4) < 1e-12);
  }
  const SmallModel m5(5);
  const auto nu5 = oracle::build_measure(m5.space, 0.5);
  const auto g_ew = oracle::build_generator(m5.space, m5.kernel, GeneratorKind::ew);
  REQUIRE(oracle::check_reversibility(g_ew, nu5) < 1e-12);

  // A deliberately non-reversible generator must register a violation.
  oracle::GeneratorMatrix bad;
  bad.kind = GeneratorKind::se;
  bad.mat = oracle::SparseMat(2, 2);
  bad.mat.insert(0, 1) = 1.0;
  bad.mat.insert(0, 0) = -1.0;
  bad.mat.insert(1, 0) = 3.0;
  bad.mat.insert(1, 1) = -3.0;
  Eigen::VectorXd uniform(2);
  uniform << 0.5, 0.5;
  REQUIRE(oracle::check_reversibility(bad, uniform) > 0.1);
}

TEST_CASE("stationarity of the product measure") {
  const SmallModel m(5);
  const auto g_ew = oracle::build_generator(m.space, m.kernel, GeneratorKind::ew);
  const auto g_rc = oracle::build_generator(m.space, m.kernel, GeneratorKind::rc);
  REQUIRE(oracle::check_stationarity(g_ew, oracle::build_measure(m.space, 0.3)) < 1e-12);
  REQUIRE(oracle::check_stationarity(g_rc, oracle::build_measure(m.space, 0.5)) < 1e-12);
  // Point mass at the all-ones state: that row is absorbing for ew.
  REQUIRE(oracle::check_stationarity(g_ew, oracle::build_measure(m.space, 1.0)) < 1e-12);
}

TEST_CASE("Dirichlet forms: nonnegative, additive, dual-route equal") {
  const SmallModel m(4);
  const auto nu = oracle::build_measure(m.space, 0.5);
  const auto g_se = oracle::build_generator(m.space, m.kernel, GeneratorKind::se);
  const auto g_rc = oracle::build_generator(m.space, m.kernel, GeneratorKind::rc);
  const auto g_ew = oracle::build_generator(m.space, m.kernel, GeneratorKind::ew);

  const Eigen::VectorXd constant = Eigen::VectorXd::Constant(m.space.n_states(), 3.7);
  REQUIRE(std::abs(oracle::dirichlet_form(constant, g_se, nu)) < 1e-12);
  REQUIRE(std::abs(oracle::dirichlet_form(constant, g_rc, nu)) < 1e-12);
  REQUIRE(std::abs(oracle::dirichlet_form(constant, g_ew, nu)) < 1e-12);

  std::srand(42);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd f = Eigen::VectorXd::Random(m.space.n_states());
    const double d_se = oracle::dirichlet_form(f, g_se, nu);
    const double d_rc = oracle::dirichlet_form(f, g_rc, nu);
    const double d_ew = oracle::dirichlet_form(f, g_ew, nu);
    REQUIRE(d_se >= 0.0);
    REQUIRE(d_rc >= 0.0);
    REQUIRE(d_ew >= 0.0);
    // Matrix route vs explicit sum-of-squares route.
    REQUIRE(std::abs(d_se - oracle::dirichlet_form_explicit(
                                f, m.space, m.kernel, nu, GeneratorKind::se)) < 1e-10);
    REQUIRE(std::abs(d_rc - oracle::dirichlet_form_explicit(
                                f, m.space, m.kernel, nu, GeneratorKind::rc)) < 1e-10);
    // Additivity of the decomposition.
    REQUIRE(std::abs(d_ew - d_se - d_rc) < 1e-10);
  }
}

TEST_CASE("the environment generator is self-adjoint in L2(nu)") {
  const SmallModel m(5);
  const auto nu = oracle::build_measure(m.space, 0.4);
  const auto g_ew = oracle::build_generator(m.space, m.kernel, GeneratorKind::ew);
  std::srand(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd f = Eigen::VectorXd::Random(m.space.n_states());
    const Eigen::VectorXd g = Eigen::VectorXd::Random(m.space.n_states());
    const double lhs = oracle::inner(f, g_ew.mat * g, nu);
    const double rhs = oracle::inner(Eigen::VectorXd(g_ew.mat * f), g, nu);
    REQUIRE(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("the drift projection is centered for every density") {
  const SmallModel m(5);
  const Eigen::VectorXd phi = oracle::drift_projection(m.space, m.kernel, kDirection);
  for (const double rho : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const auto nu = oracle::build_measure(m.space, rho);
    REQUIRE(std::abs(phi.dot(nu)) < 1e-12);
  }
}

TEST_CASE("resolvent solves meet their residual and asymptotic contracts") {
  const SmallModel m(5);
  const auto nu = oracle::build_measure(m.space, 0.5);
  const auto g_ew = oracle::build_generator(m.space, m.kernel, GeneratorKind::ew);
  const Eigen::VectorXd phi = oracle::drift_projection(m.space, m.kernel, kDirection);

  for (const double lambda : {1.0, 0.25, 1e-3, 1e-6}) {
    const auto sol =
        oracle::solve_resolvent(lambda, kDirection, g_ew, m.space, m.kernel);
    REQUIRE(sol.residual < 1e-10);
    // Pairing identity: <phi.l, f> = lambda ||f||^2 + D_ew(f).
    const double pairing = oracle::inner(phi, sol.f, nu);
    const double rhs = lambda * oracle::inner(sol.f, sol.f, nu) +
                       oracle::dirichlet_form(sol.f, g_ew, nu);
    REQUIRE(std::abs(pairing - rhs) < 1e-10);
  }

  // Large lambda: lambda f_lambda -> phi.l.
  const auto big =
      oracle::solve_resolvent(1e6, kDirection, g_ew, m.space, m.kernel);
  const double deviation =
      (1e6 * big.f - phi).norm() / std::max(phi.norm(), 1e-30);
  REQUIRE(deviation < 1e-4);
}

TEST_CASE("martingale variance: bare rate, full occupancy, positivity") {
  const SmallModel m(5);
  const auto g_se = oracle::build_generator(m.space, m.kernel, GeneratorKind::se);
  for (const double rho : {0.25, 0.5, 0.75}) {
    const auto nu = oracle::build_measure(m.space, rho);
    // f = 0: the variance candidate is the bare-martingale rate
    // rho^2 sum_y (y.l)^2, matching the direct StateSpace expectation.
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.space.n_states());
    const auto bare = oracle::martingale_variance(kDirection, zero, g_se,
                                                  m.space, m.kernel, nu);
    REQUIRE(std::abs(bare.sigma2 - 2.0 * rho * rho) < 1e-12);
    double direct = 0.0;
    for (const Displacement& y : m.kernel.support()) {
      direct += static_cast<double>(y[0] * y[0]) *
                oracle::expected_conductance(m.space, nu, m.torus, y);
    }
    REQUIRE(std::abs(bare.sigma2 - direct) < 1e-12);
  }
  // rho = 1: the free-walk rate, sum over the support of (y.l)^2 = 2.
  const auto nu1 = oracle::build_measure(m.space, 1.0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.space.n_states());
  const auto free = oracle::martingale_variance(kDirection, zero, g_se,
                                                m.space, m.kernel, nu1);
  REQUIRE(free.sigma2 == 2.0);
  // Positivity through the actual resolvent solutions.
  const auto g_ew = oracle::build_generator(m.space, m.kernel, GeneratorKind::ew);
  const auto nu = oracle::build_measure(m.space, 0.5);
  for (const double lambda : {1.0, 1e-2, 1e-4}) {
    const auto sol =
        oracle::solve_resolvent(lambda, kDirection, g_ew, m.space, m.kernel);
    const auto mv = oracle::martingale_variance(kDirection, sol.f, g_se,
                                                m.space, m.kernel, nu);
    REQUIRE(mv.sigma2 > 0.0);
  }
}

TEST_CASE("variance extrapolation: degenerate densities and error paths") {
  const SmallModel m(5);
  const auto g_ew = oracle::build_generator(m.space, m.kernel, GeneratorKind::ew);
  const auto g_se = oracle::build_generator(m.space, m.kernel, GeneratorKind::se);

  // rho = 1: sequence constant at 2, extrapolation exact.
  const auto full = oracle::variance_extrapolate(
      kDirection, oracle::default_lambda_schedule(), g_ew, g_se, m.space,
      m.kernel, oracle::build_measure(m.space, 1.0));
  for (const double s : full.sigma2) REQUIRE(s == 2.0);
  REQUIRE(full.extrapolated == 2.0);

  // rho = 0: frozen walker, sigma^2 = 0.
  const auto empty = oracle::variance_extrapolate(
      kDirection, oracle::default_lambda_schedule(), g_ew, g_se, m.space,
      m.kernel, oracle::build_measure(m.space, 0.0));
  REQUIRE(empty.extrapolated == 0.0);

  // Empty lambda schedule is a configuration error.
  REQUIRE_THROWS_AS(
      oracle::variance_extrapolate(kDirection, {}, g_ew, g_se, m.space,
                                   m.kernel, oracle::build_measure(m.space, 0.5)),
      ConfigParseError);
}

TEST_CASE("inequality chain: sandwich holds, ratio stays bounded") {
  const SmallModel m(5);
  const auto g_ew = oracle::build_generator(m.space, m.kernel, GeneratorKind::ew);
  const auto g_se = oracle::build_generator(m.space, m.kernel, GeneratorKind::se);
  for (const double rho : {0.25, 0.5, 0.75}) {
    const auto nu = oracle::build_measure(m.space, rho);
    const auto report = oracle::check_inequality_chain(
        kDirection, oracle::default_lambda_schedule(), g_ew, g_se, m.space,
        m.kernel, nu);
    for (const auto& row : report.rows) {
      REQUIRE(row.d_ew <= row.pairing + 1e-12);
    }
    REQUIRE(report.all_first_ok);
    REQUIRE(report.ratio_bounded);
  }
  // rho = 1: both sides of the chain vanish.
  const auto nu1 = oracle::build_measure(m.space, 1.0);
  const auto trivial = oracle::check_inequality_chain(
      kDirection, {1.0, 0.5, 0.25}, g_ew, g_se, m.space, m.kernel, nu1);
  for (const auto& row : trivial.rows) {
    REQUIRE(row.d_ew == 0.0);
    REQUIRE(row.pairing == 0.0);
  }
}

TEST_CASE("the full identity suite passes on the 5-site torus") {
  for (const double rho : {0.25, 0.5, 0.75}) {
    const auto records =
        oracle::identity_suite(Torus(1, 5), uniform_kernel(1, 1), rho, {});
    for (const auto& r : records) {
      INFO(r.name << " [" << r.params << "] value=" << r.value);
      if (!r.informational) REQUIRE(r.pass);
    }
  }
}

TEST_CASE("the identity suite surfaces an empty lambda schedule") {
  oracle::SuiteOptions options;
  options.lambdas.clear();
  REQUIRE_THROWS_AS(
      oracle::identity_suite(Torus(1, 4), uniform_kernel(1, 1), 0.5, options),
      ConfigParseError);
}

TEST_CASE("extrapolated variance agrees with the spectral route") {
  // Two independent exact routes to Var(X_t): the resolvent lambda -> 0
  // extrapolation and the eigendecomposition-based finite-t curve, compared
  // through its long-time rate.
  const SmallModel m(6);
  const auto nu = oracle::build_measure(m.space, 0.5);
  const auto g_ew = oracle::build_generator(m.space, m.kernel, GeneratorKind::ew);
  const auto g_se = oracle::build_generator(m.space, m.kernel, GeneratorKind::se);
  const auto ext = oracle::variance_extrapolate(
      kDirection, oracle::default_lambda_schedule(), g_ew, g_se, m.space,
      m.kernel, nu);
  REQUIRE(ext.stabilized);
  REQUIRE(ext.extrapolated > 0.0);
  const oracle::WalkVarianceExact exact(kDirection, g_ew, m.space, m.kernel, nu);
  REQUIRE(std::abs(exact.sigma2_limit() - ext.extrapolated) < 1e-8);
}
