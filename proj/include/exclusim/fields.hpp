#pragma once

#include <vector>

#include "exclusim/configuration.hpp"
#include "exclusim/kernel.hpp"
#include "exclusim/torus.hpp"

namespace exclusim {

// Drift vector phi(eta) = sum_y y c_{0,y}(eta), in lattice units per unit time.
using DriftField = std::vector<double>;

// c_{x,y}(xi) = xi(x) xi(y) when the wrapped l1 distance is at most R, else 0.
inline int conductance(const Configuration& xi, const Torus& torus,
                       const TransitionKernel& kernel, std::int64_t x, std::int64_t y) {
  if (torus.wrapped_l1(x, y) > kernel.range()) return 0;
  return static_cast<int>(xi.at(x)) * static_cast<int>(xi.at(y));
}

// Drift field evaluated with the walker at `site`. Vanishes whenever the
// walker's own site is empty, since every c_{0,y} carries the factor eta(0).
inline DriftField drift_at(const Configuration& xi, const Torus& torus,
                           const TransitionKernel& kernel, std::int64_t site) {
  DriftField phi(static_cast<std::size_t>(kernel.dimension()), 0.0);
  if (!xi.at(site)) return phi;
  const auto& sup = kernel.support();
  for (const auto& y : sup) {
    if (!xi.at(torus.neighbor(site, y))) continue;
    for (int a = 0; a < kernel.dimension(); ++a)
      phi[static_cast<std::size_t>(a)] += static_cast<double>(y[static_cast<std::size_t>(a)]);
  }
  return phi;
}

// phi(eta) for a configuration indexed relative to the walker at the origin.
inline DriftField drift_field(const Configuration& eta, const Torus& torus,
                              const TransitionKernel& kernel) {
  return drift_at(eta, torus, kernel, 0);
}

}  // namespace exclusim
