#pragma once
// Estimators turning replica ensembles into quantitative verdicts: law of
// large numbers drift, mean-squared-displacement curves with jackknife error
// bars, log-log scaling exponents, Gaussianity diagnostics, the martingale
// decomposition check, and the Monte-Carlo-vs-exact variance comparison.
//
// Tolerance policy: statistical tests at 3 standard errors; deterministic
// identities at 1e-10/1e-12; MC-vs-exact at max(3 SE, 1%).  All functions are
// pure over immutable ensembles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "exclusim/errors.hpp"
#include "exclusim/kernel.hpp"
#include "exclusim/world.hpp"

namespace exclusim {

// Replica trajectories sharing a schedule and parameters.
class Ensemble {
 public:
  explicit Ensemble(std::vector<Trajectory> replicas)
      : replicas_(std::move(replicas)) {
    if (replicas_.empty()) {
      throw InsufficientReplicas("ensemble must contain at least one replica");
    }
    const Trajectory& first = replicas_[0];
    for (const Trajectory& tr : replicas_) {
      if (!(tr.params == first.params)) {
        throw ParameterMismatch(
            "ensemble mixes trajectories with different parameters");
      }
      if (tr.samples.size() != first.samples.size()) {
        throw ParameterMismatch("ensemble mixes different sample schedules");
      }
      for (std::size_t i = 0; i < tr.samples.size(); ++i) {
        if (tr.samples[i].time != first.samples[i].time) {
          throw ParameterMismatch("ensemble mixes different sample schedules");
        }
      }
    }
  }

  const std::vector<Trajectory>& replicas() const { return replicas_; }
  std::size_t size() const { return replicas_.size(); }
  const ParamsEcho& params() const { return replicas_[0].params; }

  std::vector<double> sample_times() const {
    std::vector<double> times;
    times.reserve(replicas_[0].samples.size());
    for (const Sample& s : replicas_[0].samples) times.push_back(s.time);
    return times;
  }

  std::size_t sample_index_at(double time) const {
    const auto& samples = replicas_[0].samples;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].time == time) return i;
    }
    throw ParameterMismatch("no sample at t=" + std::to_string(time));
  }

  // X_t . l for every replica at one sample index.
  std::vector<double> projections(std::size_t sample_index,
                                  const std::vector<double>& l) const {
    check_direction(l);
    std::vector<double> out(replicas_.size());
    for (std::size_t i = 0; i < replicas_.size(); ++i) {
      const Sample& s = replicas_[i].samples.at(sample_index);
      double v = 0.0;
      for (std::size_t a = 0; a < l.size(); ++a) {
        v += static_cast<double>(s.displacement[a]) * l[a];
      }
      out[i] = v;
    }
    return out;
  }

  // (X_t - A_t) . l — the martingale part of the walk.
  std::vector<double> martingale_projections(std::size_t sample_index,
                                             const std::vector<double>& l) const {
    check_direction(l);
    std::vector<double> out(replicas_.size());
    for (std::size_t i = 0; i < replicas_.size(); ++i) {
      const Sample& s = replicas_[i].samples.at(sample_index);
      double v = 0.0;
      for (std::size_t a = 0; a < l.size(); ++a) {
        v += (static_cast<double>(s.displacement[a]) - s.compensator[a]) * l[a];
      }
      out[i] = v;
    }
    return out;
  }

 private:
  void check_direction(const std::vector<double>& l) const {
    if (static_cast<int>(l.size()) != params().dimension) {
      throw ParameterMismatch("direction l has wrong dimension");
    }
  }

  std::vector<Trajectory> replicas_;
};

// ---------------------------------------------------------------------------
// Scalar-sample summaries.

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline MeanEstimate mean_se(const std::vector<double>& xs) {
  if (xs.size() < 2) throw InsufficientReplicas("need at least 2 values");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return MeanEstimate{mean, std::sqrt(ss / (n - 1.0) / n), xs.size()};
}

inline double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) throw InsufficientReplicas("need at least 2 values");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / (static_cast<double>(xs.size()) - 1.0);
}

// Leave-one-replica-out jackknife standard error of the unbiased variance.
inline double jackknife_variance_se(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 3) throw InsufficientReplicas("jackknife needs at least 3 values");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  // Work with centered values: variance estimates are translation invariant
  // and the power sums stay small.
  double s1 = 0.0, s2 = 0.0;
  for (double x : xs) {
    const double y = x - mean;
    s1 += y;
    s2 += y * y;
  }
  const double nf = static_cast<double>(n);
  std::vector<double> leave(n);
  double leave_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = xs[i] - mean;
    const double r1 = s1 - y;
    const double r2 = s2 - y * y;
    const double vi = (r2 - r1 * r1 / (nf - 1.0)) / (nf - 2.0);
    leave[i] = vi;
    leave_mean += vi;
  }
  leave_mean /= nf;
  double ss = 0.0;
  for (double vi : leave) ss += (vi - leave_mean) * (vi - leave_mean);
  return std::sqrt((nf - 1.0) / nf * ss);
}

// ---------------------------------------------------------------------------
// Drift (law of large numbers).

struct DriftReport {
  double mean = 0.0;  // mean of X_T . l / T
  double se = 0.0;
  double horizon = 0.0;
  bool pass = false;  // |mean| <= 3 SE
};

inline DriftReport drift_test(const Ensemble& ens, const std::vector<double>& l) {
  if (ens.size() < 30) {
    throw InsufficientReplicas("drift_test needs at least 30 replicas, got " +
                               std::to_string(ens.size()));
  }
  const double horizon = ens.params().horizon;
  if (!(horizon > 0.0)) {
    throw ParameterMismatch("drift_test needs a positive horizon");
  }
  std::vector<double> xs =
      ens.projections(ens.replicas()[0].samples.size() - 1, l);
  for (double& x : xs) x /= horizon;
  const MeanEstimate m = mean_se(xs);
  return DriftReport{m.mean, m.se, horizon, std::abs(m.mean) <= 3.0 * m.se};
}

// ---------------------------------------------------------------------------
// Mean-squared displacement.

struct VariancePoint {
  double time = 0.0;
  double variance = 0.0;
  double se = 0.0;  // jackknife
};

inline std::vector<VariancePoint> msd_curve(const Ensemble& ens,
                                            const std::vector<double>& l) {
  if (ens.size() < 30) {
    throw InsufficientReplicas("msd_curve needs at least 30 replicas, got " +
                               std::to_string(ens.size()));
  }
  const std::vector<double> times = ens.sample_times();
  std::vector<VariancePoint> curve;
  curve.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::vector<double> xs = ens.projections(i, l);
    curve.push_back(VariancePoint{times[i], sample_variance(xs),
                                  jackknife_variance_se(xs)});
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Scaling exponent.

struct ScalingReport {
  double t_lo = 0.0;
  double t_hi = 0.0;
  double slope = 0.0;
  double slope_se = 0.0;
  std::size_t points = 0;
  std::vector<VariancePoint> table;  // the fitted window
};

inline ScalingReport scaling_fit(const std::vector<VariancePoint>& curve,
                                 double t_lo, double t_hi) {
  ScalingReport report;
  report.t_lo = t_lo;
  report.t_hi = t_hi;
  for (const VariancePoint& p : curve) {
    if (p.time >= t_lo && p.time <= t_hi && p.time > 0.0 && p.variance > 0.0) {
      report.table.push_back(p);
    }
  }
  report.points = report.table.size();
  if (report.points < 5) {
    throw DegenerateWindow("scaling_fit window [" + std::to_string(t_lo) +
                           ", " + std::to_string(t_hi) + "] holds only " +
                           std::to_string(report.points) +
                           " usable points (need 5)");
  }
  const double n = static_cast<double>(report.points);
  double sx = 0.0, sy = 0.0;
  for (const VariancePoint& p : report.table) {
    sx += std::log(p.time);
    sy += std::log(p.variance);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const VariancePoint& p : report.table) {
    const double dx = std::log(p.time) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(p.variance) - my);
  }
  if (!(sxx > 0.0)) throw DegenerateWindow("scaling_fit times are degenerate");
  report.slope = sxy / sxx;
  double rss = 0.0;
  for (const VariancePoint& p : report.table) {
    const double fit = my + report.slope * (std::log(p.time) - mx);
    const double r = std::log(p.variance) - fit;
    rss += r * r;
  }
  report.slope_se =
      report.points > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
  if (!std::isfinite(report.slope)) {
    throw DegenerateWindow("scaling_fit slope is not finite");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Gaussianity at a fixed time.

// 1%-level critical value of sup_x |F_N(x) - Phi(x/sigma_hat)| under the
// centered-normal null with estimated scale, as c/sqrt(N).  The constant was
// calibrated by Monte Carlo (40k trials per N in {200,500,1000,2000}; the
// scaled 99th percentile drifts from 1.587 to 1.605), frozen slightly above
// the observed range so the test is marginally conservative for N <= 4000.
inline constexpr double kKsCritical99Scaled = 1.61;

struct GaussianityReport {
  double time = 0.0;
  double epsilon = 0.0;  // diffusive scaling parameter 1/sqrt(t)
  std::size_t n = 0;
  double variance = 0.0;        // sample variance of X_t . l
  double ks_statistic = 0.0;    // sup-CDF distance, in [0,1]
  double ks_threshold = 0.0;    // kKsCritical99Scaled / sqrt(N)
  bool ks_pass = false;
  double excess_kurtosis = 0.0;
  double kurtosis_se = 0.0;  // jackknife
  bool kurtosis_pass = false;
  bool pass = false;
};

inline double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Core test on a raw scalar sample (exposed for detector sanity checks).
inline GaussianityReport gaussianity_of_sample(std::vector<double> xs,
                                               double time) {
  if (xs.size() < 200) {
    throw InsufficientReplicas(
        "gaussianity test needs at least 200 values, got " +
        std::to_string(xs.size()));
  }
  GaussianityReport report;
  report.time = time;
  report.epsilon = time > 0.0 ? 1.0 / std::sqrt(time) : 0.0;
  report.n = xs.size();
  const double n = static_cast<double>(xs.size());
  report.variance = sample_variance(xs);
  const double sd = std::sqrt(report.variance);

  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double c = standard_normal_cdf(sorted[i] / sd);
    d = std::max(d, std::abs(c - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - c));
  }
  report.ks_statistic = d;
  report.ks_threshold = kKsCritical99Scaled / std::sqrt(n);
  report.ks_pass = d < report.ks_threshold;

  // Excess kurtosis with leave-one-out jackknife, from centered power sums.
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double r1 = 0.0, r2 = 0.0, r3 = 0.0, r4 = 0.0;
  for (double x : xs) {
    const double y = x - mean;
    r1 += y;
    r2 += y * y;
    r3 += y * y * y;
    r4 += y * y * y * y;
  }
  auto kurt = [](double q1, double q2, double q3, double q4, double m) {
    const double mu = q1 / m;
    const double m2 = q2 / m - mu * mu;
    const double m4 =
        q4 / m - 4.0 * mu * q3 / m + 6.0 * mu * mu * q2 / m - 3.0 * mu * mu * mu * mu;
    return m4 / (m2 * m2) - 3.0;
  };
  report.excess_kurtosis = kurt(r1, r2, r3, r4, n);
  std::vector<double> leave(xs.size());
  double leave_mean = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double y = xs[i] - mean;
    leave[i] = kurt(r1 - y, r2 - y * y, r3 - y * y * y, r4 - y * y * y * y,
                    n - 1.0);
    leave_mean += leave[i];
  }
  leave_mean /= n;
  double ss = 0.0;
  for (double g : leave) ss += (g - leave_mean) * (g - leave_mean);
  report.kurtosis_se = std::sqrt((n - 1.0) / n * ss);
  report.kurtosis_pass =
      std::abs(report.excess_kurtosis) <= 3.0 * report.kurtosis_se;
  report.pass = report.ks_pass && report.kurtosis_pass;
  return report;
}

inline GaussianityReport gaussianity_test(const Ensemble& ens,
                                          const std::vector<double>& l,
                                          double time) {
  const std::size_t index = ens.sample_index_at(time);
  return gaussianity_of_sample(ens.projections(index, l), time);
}

// Correlation between X_{t1}.l and the later increment X_{t2}.l - X_{t1}.l;
// independence of increments is scored by the Fisher z statistic.
struct IncrementReport {
  double t1 = 0.0;
  double t2 = 0.0;
  double correlation = 0.0;
  double z = 0.0;  // atanh(corr) * sqrt(N-3)
  bool pass = false;
};

inline IncrementReport increment_independence(const Ensemble& ens,
                                              const std::vector<double>& l,
                                              double t1, double t2) {
  if (!(t1 < t2)) throw ParameterMismatch("need t1 < t2");
  if (ens.size() < 30) {
    throw InsufficientReplicas("increment test needs at least 30 replicas");
  }
  const std::vector<double> a = ens.projections(ens.sample_index_at(t1), l);
  std::vector<double> b = ens.projections(ens.sample_index_at(t2), l);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] -= a[i];
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  IncrementReport report;
  report.t1 = t1;
  report.t2 = t2;
  if (saa == 0.0 || sbb == 0.0) {
    report.correlation = 0.0;  // a degenerate leg carries no dependence signal
  } else {
    report.correlation = sab / std::sqrt(saa * sbb);
  }
  report.z = std::atanh(std::clamp(report.correlation, -0.999999, 0.999999)) *
             std::sqrt(n - 3.0);
  report.pass = std::abs(report.z) <= 3.0;
  return report;
}

// ---------------------------------------------------------------------------
// Martingale decomposition: X_t = M_t + A_t with M a martingale whose
// stationary quadratic variation rate is rho^2 * sum_y (y.l)^2.

struct MartingaleReport {
  double horizon = 0.0;
  double mean = 0.0;
  double mean_se = 0.0;
  bool mean_pass = false;
  double variance = 0.0;
  double variance_se = 0.0;
  double expected_variance = 0.0;  // T * rho^2 * sum_y (y.l)^2
  bool variance_pass = false;
  bool pass = false;
};

inline MartingaleReport martingale_test(const Ensemble& ens,
                                        const TransitionKernel& kernel,
                                        const std::vector<double>& l) {
  if (ens.size() < 30) {
    throw InsufficientReplicas("martingale test needs at least 30 replicas");
  }
  const std::size_t last = ens.replicas()[0].samples.size() - 1;
  const std::vector<double> ms = ens.martingale_projections(last, l);
  MartingaleReport report;
  report.horizon = ens.params().horizon;
  const MeanEstimate m = mean_se(ms);
  report.mean = m.mean;
  report.mean_se = m.se;
  report.mean_pass = std::abs(m.mean) <= 3.0 * m.se;
  report.variance = sample_variance(ms);
  report.variance_se = jackknife_variance_se(ms);
  double quad = 0.0;
  for (const Displacement& y : kernel.support()) {
    double yl = 0.0;
    for (std::size_t a = 0; a < l.size(); ++a) yl += y[a] * l[a];
    quad += yl * yl;
  }
  const double rho = ens.params().rho;
  report.expected_variance = report.horizon * rho * rho * quad;
  report.variance_pass = std::abs(report.variance - report.expected_variance) <=
                         3.0 * report.variance_se;
  report.pass = report.mean_pass && report.variance_pass;
  return report;
}

// ---------------------------------------------------------------------------
// Monte Carlo vs exact-limit comparison.

struct OracleSideSummary {
  int dimension = 1;
  int side = 0;
  int range = 1;
  double rho = 0.0;
  double sigma2 = 0.0;  // extrapolated lambda -> 0 variance
};

struct CompareReport {
  double time = 0.0;
  double mc_rate = 0.0;  // Var(X_t . l) / t
  double mc_rate_se = 0.0;
  double oracle_sigma2 = 0.0;
  double discrepancy = 0.0;  // |mc_rate - sigma2|
  double tolerance = 0.0;    // max(3 SE, 1% of sigma2)
  bool pass = false;
};

inline bool kernels_equal(const TransitionKernel& a, const TransitionKernel& b) {
  if (a.dimension() != b.dimension() || a.range() != b.range()) return false;
  if (a.support() != b.support()) return false;
  for (std::size_t k = 0; k < a.rates().size(); ++k) {
    if (a.rates()[k] != b.rates()[k]) return false;
  }
  return true;
}

inline CompareReport compare_oracle(const ParamsEcho& mc_params,
                                    const TransitionKernel& mc_kernel,
                                    const VariancePoint& mc_point,
                                    const OracleSideSummary& oracle,
                                    const TransitionKernel& oracle_kernel) {
  if (mc_params.mode != Mode::coupled) {
    throw ParameterMismatch("compare_oracle expects a coupled-walk ensemble");
  }
  if (mc_params.dimension != oracle.dimension || mc_params.side != oracle.side ||
      mc_params.range != oracle.range || mc_params.rho != oracle.rho ||
      !kernels_equal(mc_kernel, oracle_kernel)) {
    throw ParameterMismatch(
        "compare_oracle: Monte Carlo and exact sides use different (d, L, R, "
        "rho, kernel)");
  }
  if (!(mc_point.time > 0.0)) {
    throw ParameterMismatch("compare_oracle needs a sample at t > 0");
  }
  CompareReport report;
  report.time = mc_point.time;
  report.mc_rate = mc_point.variance / mc_point.time;
  report.mc_rate_se = mc_point.se / mc_point.time;
  report.oracle_sigma2 = oracle.sigma2;
  report.discrepancy = std::abs(report.mc_rate - oracle.sigma2);
  report.tolerance =
      std::max(3.0 * report.mc_rate_se, 0.01 * std::abs(oracle.sigma2));
  report.pass = report.discrepancy <= report.tolerance;
  return report;
}

}  // namespace exclusim
