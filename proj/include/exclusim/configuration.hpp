#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "exclusim/rng.hpp"
#include "exclusim/torus.hpp"

namespace exclusim {

/**
 * Occupation field xi in {0,1}^torus with a cached particle count.
 *
 * The cached count equals the sum of occupancies at all times; the in-place
 * mutators preserve that. Bulk operations (exchange, shift, reflect) return
 * copies, so configurations can be shared across replicas.
 */
class Configuration {
 public:
  explicit Configuration(std::int64_t n_sites)
      : occ_(static_cast<std::size_t>(n_sites), 0), count_(0) {}

  std::int64_t n_sites() const { return static_cast<std::int64_t>(occ_.size()); }
  std::int64_t particle_count() const { return count_; }

  std::uint8_t at(std::int64_t site) const { return occ_[static_cast<std::size_t>(site)]; }

  void set(std::int64_t site, std::uint8_t v) {
    auto& cell = occ_[static_cast<std::size_t>(site)];
    count_ += static_cast<std::int64_t>(v) - static_cast<std::int64_t>(cell);
    cell = v;
  }

  // In-place occupancy swap; count is untouched by construction.
  void swap_sites(std::int64_t y, std::int64_t z) {
    std::swap(occ_[static_cast<std::size_t>(y)], occ_[static_cast<std::size_t>(z)]);
  }

  const std::vector<std::uint8_t>& data() const { return occ_; }

  bool operator==(const Configuration& o) const { return occ_ == o.occ_; }

 private:
  std::vector<std::uint8_t> occ_;
  std::int64_t count_;
};

// xi^{y,z}: copy of xi with the occupation variables at y and z exchanged.
inline Configuration exchange(const Configuration& xi, std::int64_t y, std::int64_t z) {
  Configuration out = xi;
  out.swap_sites(y, z);
  return out;
}

// tau_y xi: the configuration viewed from y, out(z) = xi(z + y).
inline Configuration shift(const Configuration& xi, const Torus& torus,
                           const Displacement& y) {
  Configuration out(xi.n_sites());
  for (std::int64_t s = 0; s < xi.n_sites(); ++s)
    out.set(s, xi.at(torus.neighbor(s, y)));
  return out;
}

// Reflection through the origin, out(z) = xi(-z).
inline Configuration reflect(const Configuration& xi, const Torus& torus) {
  Configuration out(xi.n_sites());
  for (std::int64_t s = 0; s < xi.n_sites(); ++s) {
    auto c = torus.unflatten(s);
    for (int& x : c) x = torus.wrap(-x);
    out.set(torus.flatten(c), xi.at(s));
  }
  return out;
}

// i.i.d. occupancies, each 1 with probability rho.
inline Configuration sample_bernoulli(const Torus& torus, double rho, Rng& rng) {
  Configuration out(torus.n_sites());
  for (std::int64_t s = 0; s < torus.n_sites(); ++s)
    if (rng.bernoulli(rho)) out.set(s, 1);
  return out;
}

inline Configuration sample_bernoulli(const Torus& torus, double rho, std::uint64_t seed) {
  Rng rng(seed);
  return sample_bernoulli(torus, rho, rng);
}

}  // namespace exclusim
