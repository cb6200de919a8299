#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "exclusim/errors.hpp"
#include "exclusim/kernel.hpp"

namespace exclusim {

/**
 * Periodic lattice (Z/LZ)^d with flattened site indexing.
 *
 * Axis 0 varies fastest: site = sum_a coord[a] * L^a. A torus paired with a
 * kernel of range R requires L > 2R so that range-R neighborhoods never
 * self-overlap under wrapping; that check lives where torus and kernel meet
 * (require_compatible).
 */
class Torus {
 public:
  Torus(int dimension, int side) : dimension_(dimension), side_(side) {
    if (dimension < 1) throw std::invalid_argument("torus dimension must be positive");
    if (side < 1) throw std::invalid_argument("torus side must be positive");
    n_sites_ = 1;
    strides_.resize(static_cast<std::size_t>(dimension));
    for (int a = 0; a < dimension; ++a) {
      strides_[static_cast<std::size_t>(a)] = n_sites_;
      if (n_sites_ > (1ll << 40) / side)
        throw std::invalid_argument("torus too large");
      n_sites_ *= side;
    }
  }

  int dimension() const { return dimension_; }
  int side() const { return side_; }
  std::int64_t n_sites() const { return n_sites_; }

  std::int64_t flatten(const std::vector<int>& coords) const {
    std::int64_t s = 0;
    for (int a = 0; a < dimension_; ++a)
      s += static_cast<std::int64_t>(wrap(coords[static_cast<std::size_t>(a)])) *
           strides_[static_cast<std::size_t>(a)];
    return s;
  }

  std::vector<int> unflatten(std::int64_t site) const {
    std::vector<int> c(static_cast<std::size_t>(dimension_));
    for (int a = 0; a < dimension_; ++a) {
      c[static_cast<std::size_t>(a)] = static_cast<int>(site % side_);
      site /= side_;
    }
    return c;
  }

  int wrap(int coord) const {
    int r = coord % side_;
    return r < 0 ? r + side_ : r;
  }

  std::int64_t neighbor(std::int64_t site, const Displacement& y) const {
    auto c = unflatten(site);
    for (int a = 0; a < dimension_; ++a)
      c[static_cast<std::size_t>(a)] = wrap(c[static_cast<std::size_t>(a)] +
                                            y[static_cast<std::size_t>(a)]);
    return flatten(c);
  }

  // l1 distance with per-axis wrapping, min(|dx|, L - |dx|).
  int wrapped_l1(std::int64_t a, std::int64_t b) const {
    auto ca = unflatten(a);
    auto cb = unflatten(b);
    int s = 0;
    for (int ax = 0; ax < dimension_; ++ax) {
      int dx = std::abs(ca[static_cast<std::size_t>(ax)] - cb[static_cast<std::size_t>(ax)]);
      s += std::min(dx, side_ - dx);
    }
    return s;
  }

 private:
  int dimension_;
  int side_;
  std::int64_t n_sites_;
  std::vector<std::int64_t> strides_;
};

inline void require_compatible(const Torus& torus, const TransitionKernel& kernel) {
  if (torus.dimension() != kernel.dimension())
    throw std::invalid_argument("torus and kernel dimension differ");
  if (torus.side() <= 2 * kernel.range())
    throw std::invalid_argument("torus side " + std::to_string(torus.side()) +
                                " must exceed twice the kernel range " +
                                std::to_string(kernel.range()));
}

// Flattened-index offsets for every kernel displacement, one table row per
// site. Hot-loop replacement for Torus::neighbor.
inline std::vector<std::int64_t> build_neighbor_table(const Torus& torus,
                                                      const TransitionKernel& kernel) {
  require_compatible(torus, kernel);
  const auto& sup = kernel.support();
  std::vector<std::int64_t> table(
      static_cast<std::size_t>(torus.n_sites()) * sup.size());
  for (std::int64_t s = 0; s < torus.n_sites(); ++s)
    for (std::size_t k = 0; k < sup.size(); ++k)
      table[static_cast<std::size_t>(s) * sup.size() + k] = torus.neighbor(s, sup[k]);
  return table;
}

}  // namespace exclusim
