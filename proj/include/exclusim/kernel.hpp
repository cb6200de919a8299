#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "exclusim/errors.hpp"

namespace exclusim {

using Displacement = std::vector<int>;

inline int l1_norm(const Displacement& y) {
  int s = 0;
  for (int c : y) s += std::abs(c);
  return s;
}

inline std::string displacement_to_string(const Displacement& y) {
  std::string s = "(";
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(y[i]);
  }
  return s + ")";
}

// All displacements y with 0 < |y|_1 <= range, lexicographically ordered.
inline std::vector<Displacement> range_support(int dimension, int range) {
  std::vector<Displacement> out;
  Displacement cur(dimension, 0);
  auto rec = [&](auto&& self, int axis, int budget) -> void {
    if (axis == dimension) {
      if (l1_norm(cur) > 0) out.push_back(cur);
      return;
    }
    for (int c = -budget; c <= budget; ++c) {
      cur[axis] = c;
      self(self, axis + 1, budget - std::abs(c));
    }
    cur[axis] = 0;
  };
  rec(rec, 0, range);
  std::sort(out.begin(), out.end());
  return out;
}

/**
 * Finite-range symmetric jump law p(.) on Z^d.
 *
 * Valid kernels satisfy p(y) = p(-y), sum_y p(y) = 1 (to 1e-12), and
 * p(y) > 0 for every displacement with 0 < |y|_1 <= range. There is no
 * p(0) entry. Construct through build_kernel, which enforces all three.
 */
class TransitionKernel {
 public:
  int dimension() const { return dimension_; }
  int range() const { return range_; }

  // Support displacements in lexicographic order, paired with rates().
  const std::vector<Displacement>& support() const { return support_; }
  const std::vector<double>& rates() const { return rates_; }

  double total_rate() const { return total_rate_; }

  double rate_of(const Displacement& y) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), y);
    if (it == support_.end() || *it != y) return 0.0;
    return rates_[static_cast<std::size_t>(it - support_.begin())];
  }

  // Index into support()/rates() of displacement y, or -1.
  int index_of(const Displacement& y) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), y);
    if (it == support_.end() || *it != y) return -1;
    return static_cast<int>(it - support_.begin());
  }

  // One line per displacement: "y1 ... yd p".
  std::string to_table() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t k = 0; k < support_.size(); ++k) {
      for (int c : support_[k]) os << c << ' ';
      os << rates_[k] << '\n';
    }
    return os.str();
  }

  friend TransitionKernel build_kernel(int dimension, int range,
                                       const std::map<Displacement, double>& weights);

 private:
  TransitionKernel() = default;

  int dimension_ = 0;
  int range_ = 0;
  std::vector<Displacement> support_;
  std::vector<double> rates_;
  double total_rate_ = 0.0;
};

/**
 * Validate and build a kernel from explicit weights.
 *
 * The weights must be keyed on exactly the displacements with
 * 0 < |y|_1 <= range. Throws SymmetryViolation, NormalizationViolation, or
 * RangeViolation; the message names the offending displacement.
 */
inline TransitionKernel build_kernel(int dimension, int range,
                                     const std::map<Displacement, double>& weights) {
  if (dimension < 1) throw RangeViolation("kernel dimension must be positive");
  if (range < 1) throw RangeViolation("kernel range must be positive");

  const auto expected = range_support(dimension, range);
  for (const auto& [y, p] : weights) {
    if (static_cast<int>(y.size()) != dimension)
      throw RangeViolation("displacement " + displacement_to_string(y) +
                           " has wrong dimension");
    const int n = l1_norm(y);
    if (n == 0 || n > range)
      throw RangeViolation("displacement " + displacement_to_string(y) +
                           " outside 0 < |y|_1 <= " + std::to_string(range));
    if (!(p > 0.0))
      throw RangeViolation("displacement " + displacement_to_string(y) +
                           " has non-positive weight");
  }
  for (const auto& y : expected) {
    if (weights.find(y) == weights.end())
      throw RangeViolation("displacement " + displacement_to_string(y) +
                           " missing from support");
  }

  double sum = 0.0;
  for (const auto& y : expected) {
    const double p = weights.at(y);
    Displacement neg(y);
    for (int& c : neg) c = -c;
    const double q = weights.at(neg);
    if (std::abs(p - q) > 1e-15)
      throw SymmetryViolation("p" + displacement_to_string(y) + " = " + std::to_string(p) +
                              " but p" + displacement_to_string(neg) + " = " +
                              std::to_string(q));
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw NormalizationViolation("kernel weights sum to " + std::to_string(sum));

  TransitionKernel k;
  k.dimension_ = dimension;
  k.range_ = range;
  k.support_ = expected;
  k.rates_.reserve(expected.size());
  for (const auto& y : expected) k.rates_.push_back(weights.at(y));
  k.total_rate_ = sum;
  return k;
}

// Uniform weights over the full range support.
inline TransitionKernel uniform_kernel(int dimension, int range) {
  const auto sup = range_support(dimension, range);
  std::map<Displacement, double> w;
  for (const auto& y : sup) w[y] = 1.0 / static_cast<double>(sup.size());
  return build_kernel(dimension, range, w);
}

// Parse the plain-text table format emitted by TransitionKernel::to_table.
inline TransitionKernel parse_kernel_table(int dimension, int range, const std::string& text) {
  std::map<Displacement, double> w;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Displacement y(dimension);
    for (int a = 0; a < dimension; ++a) {
      if (!(ls >> y[a]))
        throw ConfigParseError("kernel table line " + std::to_string(lineno) +
                               ": expected " + std::to_string(dimension) +
                               " displacement components");
    }
    double p;
    if (!(ls >> p))
      throw ConfigParseError("kernel table line " + std::to_string(lineno) +
                             ": missing rate");
    w[y] = p;
  }
  return build_kernel(dimension, range, w);
}

}  // namespace exclusim
