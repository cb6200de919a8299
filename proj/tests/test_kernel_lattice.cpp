// Geometry, kernel validation, configurations, and the conductance/drift
// fields: the deterministic foundations everything else consumes.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>

#include "exclusim/fields.hpp"
#include "exclusim/kernel.hpp"
#include "exclusim/rng.hpp"
#include "exclusim/torus.hpp"

using namespace exclusim;

namespace {

std::map<Displacement, double> nn_weights(double plus, double minus) {
  return {{{1}, plus}, {{-1}, minus}};
}

Configuration from_bits(const std::vector<int>& bits) {
  Configuration xi(static_cast<std::int64_t>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    xi.set(static_cast<std::int64_t>(i), static_cast<std::uint8_t>(bits[i]));
  }
  return xi;
}

}  // namespace

TEST_CASE("build_kernel accepts the symmetric nearest-neighbor law") {
  const TransitionKernel k = build_kernel(1, 1, nn_weights(0.5, 0.5));
  REQUIRE(k.dimension() == 1);
  REQUIRE(k.range() == 1);
  REQUIRE(k.support() == std::vector<Displacement>{{-1}, {1}});
  REQUIRE(k.rate_of({1}) == 0.5);
  REQUIRE(k.rate_of({-1}) == 0.5);
  REQUIRE(k.total_rate() == 1.0);
}

TEST_CASE("build_kernel rejects an asymmetric law and names the displacement") {
  try {
    build_kernel(1, 1, nn_weights(0.6, 0.4));
    FAIL("expected SymmetryViolation");
  } catch (const SymmetryViolation& e) {
    REQUIRE(std::string(e.what()).find("(-1)") != std::string::npos);
  }
}

TEST_CASE("build_kernel accepts the uniform range-2 law") {
  const TransitionKernel k = build_kernel(
      1, 2, {{{1}, 0.25}, {{-1}, 0.25}, {{2}, 0.25}, {{-2}, 0.25}});
  REQUIRE(k.support().size() == 4);
  REQUIRE(k.total_rate() == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("build_kernel rejects non-normalized weights") {
  REQUIRE_THROWS_AS(build_kernel(1, 1, nn_weights(0.4, 0.4)),
                    NormalizationViolation);
}

TEST_CASE("build_kernel rejects gaps, zeros, and out-of-range entries") {
  // Missing support entry: range 2 requires +-2 as well.
  REQUIRE_THROWS_AS(build_kernel(1, 2, nn_weights(0.5, 0.5)), RangeViolation);
  // Zero weight on a required displacement.
  REQUIRE_THROWS_AS(build_kernel(1, 1, nn_weights(0.0, 0.0)), RangeViolation);
  // Displacement outside the range.
  REQUIRE_THROWS_AS(
      build_kernel(1, 1,
                   {{{1}, 0.25}, {{-1}, 0.25}, {{2}, 0.25}, {{-2}, 0.25}}),
      RangeViolation);
  // The error names the offending displacement.
  try {
    build_kernel(1, 1, {{{1}, 0.5}, {{-1}, 0.4}, {{2}, 0.1}});
    FAIL("expected RangeViolation");
  } catch (const RangeViolation& e) {
    REQUIRE(std::string(e.what()).find("(2)") != std::string::npos);
  }
}

TEST_CASE("uniform kernels normalize over the full range support") {
  const TransitionKernel k1 = uniform_kernel(1, 1);
  REQUIRE(k1.rates() == std::vector<double>{0.5, 0.5});
  const TransitionKernel k2 = uniform_kernel(2, 1);
  REQUIRE(k2.support().size() == 4);
  for (double p : k2.rates()) REQUIRE(p == 0.25);
}

TEST_CASE("kernel table round-trips through its text form") {
  const TransitionKernel k = build_kernel(
      1, 2, {{{1}, 0.3}, {{-1}, 0.3}, {{2}, 0.2}, {{-2}, 0.2}});
  const TransitionKernel back = parse_kernel_table(1, 2, k.to_table());
  REQUIRE(back.support() == k.support());
  REQUIRE(back.rates() == k.rates());
}

TEST_CASE("torus indexing is bijective and wraps correctly") {
  const Torus torus(2, 5);
  REQUIRE(torus.n_sites() == 25);
  std::set<std::int64_t> seen;
  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) {
      const std::int64_t s = torus.flatten({a, b});
      REQUIRE(torus.unflatten(s) == std::vector<int>{a, b});
      seen.insert(s);
    }
  }
  REQUIRE(seen.size() == 25);
  // Wrapping: site (0,0) stepped by (-1,-1) lands at (4,4).
  REQUIRE(torus.neighbor(torus.flatten({0, 0}), {-1, -1}) ==
          torus.flatten({4, 4}));
  // Wrapped distance: 0 and L-1 are adjacent on each axis.
  const Torus line(1, 6);
  REQUIRE(line.wrapped_l1(0, 5) == 1);
  REQUIRE(line.wrapped_l1(0, 3) == 3);
}

TEST_CASE("exchange matches its defining examples") {
  // (1,0,0) swap sites 0,1 -> (0,1,0).
  REQUIRE(exchange(from_bits({1, 0, 0}), 0, 1) == from_bits({0, 1, 0}));
  // Equal occupancies leave the configuration unchanged.
  REQUIRE(exchange(from_bits({1, 1, 0}), 0, 1) == from_bits({1, 1, 0}));
}

TEST_CASE("exchange is an involution and conserves particles, exhaustively") {
  // Every configuration of a 12-site line, every site pair.
  const std::int64_t n = 12;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    Configuration xi(n);
    for (std::int64_t s = 0; s < n; ++s) xi.set(s, (mask >> s) & 1u);
    const std::int64_t count = xi.particle_count();
    for (std::int64_t y = 0; y < n; ++y) {
      for (std::int64_t z = y + 1; z < n; ++z) {
        const Configuration once = exchange(xi, y, z);
        REQUIRE(once.particle_count() == count);
        REQUIRE(exchange(once, y, z) == xi);
      }
    }
  }
}

TEST_CASE("configuration particle count tracks mutations") {
  Configuration xi(8);
  REQUIRE(xi.particle_count() == 0);
  xi.set(3, 1);
  xi.set(5, 1);
  REQUIRE(xi.particle_count() == 2);
  xi.set(3, 1);  // idempotent write
  REQUIRE(xi.particle_count() == 2);
  xi.set(3, 0);
  REQUIRE(xi.particle_count() == 1);
}

TEST_CASE("conductance is the occupancy product cut off at range R") {
  const Torus torus(1, 8);
  const TransitionKernel k = uniform_kernel(1, 1);
  Configuration xi = from_bits({1, 1, 0, 1, 0, 0, 1, 1});
  // Both occupied, adjacent: 1.
  REQUIRE(conductance(xi, torus, k, 0, 1) == 1);
  // One empty, adjacent: 0.
  REQUIRE(conductance(xi, torus, k, 1, 2) == 0);
  // Both occupied but |x-y|_1 = R+1: 0.
  REQUIRE(conductance(xi, torus, k, 1, 3) == 0);
  // Wrapped adjacency: sites 0 and 7 are neighbors on the ring.
  REQUIRE(conductance(xi, torus, k, 0, 7) == 1);
}

TEST_CASE("conductance is symmetric in its two sites") {
  const Torus torus(1, 10);
  const TransitionKernel k = uniform_kernel(1, 2);
  Rng rng(123);
  const Configuration xi = sample_bernoulli(torus, 0.5, rng);
  for (std::int64_t x = 0; x < 10; ++x) {
    for (std::int64_t y = 0; y < 10; ++y) {
      REQUIRE(conductance(xi, torus, k, x, y) ==
              conductance(xi, torus, k, y, x));
    }
  }
}

TEST_CASE("drift_field matches its defining examples") {
  const Torus torus(1, 8);
  const TransitionKernel k = uniform_kernel(1, 1);
  // Fully occupied: the +-1 contributions cancel.
  Configuration full(8);
  for (std::int64_t s = 0; s < 8; ++s) full.set(s, 1);
  REQUIRE(drift_field(full, torus, k) == DriftField{0.0});
  // eta(0)=1, eta(1)=1, eta(-1)=0: the single surviving term gives +1.
  REQUIRE(drift_field(from_bits({1, 1, 0, 0, 0, 0, 0, 0}), torus, k) ==
          DriftField{1.0});
  // Empty origin kills every term.
  REQUIRE(drift_field(from_bits({0, 1, 1, 1, 1, 1, 1, 1}), torus, k) ==
          DriftField{0.0});
}

TEST_CASE("drift_field is odd under reflection") {
  const Torus torus(1, 9);
  const TransitionKernel k = uniform_kernel(1, 2);
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const Configuration eta = sample_bernoulli(torus, 0.4, rng);
    const DriftField phi = drift_field(eta, torus, k);
    const DriftField mirrored = drift_field(reflect(eta, torus), torus, k);
    REQUIRE(mirrored[0] == -phi[0]);
  }
}

TEST_CASE("drift_field averages to zero under the product measure") {
  // E[phi] = rho^2 sum_y y = 0; Monte Carlo over 1e5 samples at 3 SE.
  const Torus torus(1, 16);
  const TransitionKernel k = uniform_kernel(1, 2);
  Rng rng(2024);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Configuration eta = sample_bernoulli(torus, 0.5, rng);
    const double phi = drift_field(eta, torus, k)[0];
    sum += phi;
    sum_sq += phi * phi;
  }
  const double mean = sum / n;
  const double var = (sum_sq - n * mean * mean) / (n - 1);
  const double se = std::sqrt(var / n);
  REQUIRE(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("sample_bernoulli hits the degenerate densities exactly") {
  const Torus torus(1, 32);
  REQUIRE(sample_bernoulli(torus, 0.0, 5).particle_count() == 0);
  REQUIRE(sample_bernoulli(torus, 1.0, 5).particle_count() == 32);
}

TEST_CASE("sample_bernoulli is seed-deterministic") {
  const Torus torus(1, 64);
  REQUIRE(sample_bernoulli(torus, 0.37, 99) ==
          sample_bernoulli(torus, 0.37, 99));
}

TEST_CASE("sample_bernoulli concentrates at the requested density") {
  // Empirical density within 4/sqrt(512) of 0.5 in at least 99% of seeds.
  const Torus torus(1, 512);
  const double bound = 4.0 / std::sqrt(512.0);
  int hits = 0;
  const int seeds = 1000;
  for (int s = 0; s < seeds; ++s) {
    const auto xi = sample_bernoulli(torus, 0.5, static_cast<std::uint64_t>(s));
    const double density = static_cast<double>(xi.particle_count()) / 512.0;
    if (std::abs(density - 0.5) <= bound) ++hits;
  }
  REQUIRE(hits >= static_cast<int>(0.99 * seeds));
}

TEST_CASE("shift relabels sites by a torus translation") {
  const Torus torus(1, 6);
  const Configuration xi = from_bits({1, 0, 1, 1, 0, 0});
  const Configuration tau = shift(xi, torus, {1});
  // tau_y eta(x) = eta(x + y).
  for (std::int64_t x = 0; x < 6; ++x) {
    REQUIRE(tau.at(x) == xi.at(torus.neighbor(x, {1})));
  }
  // Shifting back is the identity.
  REQUIRE(shift(tau, torus, {-1}) == xi);
  REQUIRE(tau.particle_count() == xi.particle_count());
}
