#pragma once
// Event-driven (Gillespie) simulation of the exclusion environment and the
// conductance walk.  Two competing exponential clocks drive each realization:
//
//   * an exchange clock of constant total rate L^d * sum_y p(y) — one ordered
//     pair (site, displacement) proposes at rate p(y), so each unordered pair
//     fires at aggregate rate 2p; proposals with equal occupancies are no-ops
//     that are sampled and discarded, keeping the clock rate constant;
//   * a walker clock of rate r_W = sum_y c(X, X+y), re-derived from scratch
//     after every event (memorylessness makes the full re-draw valid).
//
// The compensator A accumulates drift * holding-time using the pre-event
// configuration, which is exact because the drift is piecewise constant.
// Samples falling inside a holding interval interpolate A the same way.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "exclusim/configuration.hpp"
#include "exclusim/errors.hpp"
#include "exclusim/fields.hpp"
#include "exclusim/kernel.hpp"
#include "exclusim/rng.hpp"
#include "exclusim/torus.hpp"
#include "exclusim/world.hpp"

namespace exclusim {

// Total rate of the ordered-pair exchange clock: L^d * sum_y p(y).
inline double total_exchange_rate(const Torus& torus,
                                  const TransitionKernel& kernel) {
  return static_cast<double>(torus.n_sites()) * kernel.total_rate();
}

// One realization's event engine.  Public so that tests can drive single
// events; run()/run_environment()/run_tagged() below wrap the sampling loop.
class Engine {
 public:
  Engine(const SimConfig& config, std::uint64_t seed)
      : config_(config),
        neighbors_(build_neighbor_table(config.torus, config.kernel)),
        support_size_(config.kernel.support().size()),
        exchange_rate_(total_exchange_rate(config.torus, config.kernel)),
        rng_(seed),
        drift_(static_cast<std::size_t>(config.torus.dimension()), 0.0) {
    world_.xi = (config.mode == Mode::tagged)
                    ? sample_conditioned(config, rng_)
                    : sample_bernoulli(config.torus, config.rho, rng_);
    world_.walker_site = 0;
    const auto d = static_cast<std::size_t>(config.torus.dimension());
    world_.displacement.assign(d, 0);
    world_.compensator.assign(d, 0.0);
    world_.jump_counts.assign(support_size_, 0);
    refresh_local_rates();
  }

  const WorldState& world() const { return world_; }
  WorldState& world() { return world_; }
  Rng& rng() { return rng_; }
  double walker_rate() const { return static_cast<double>(walker_rate_); }
  const std::vector<double>& drift() const { return drift_; }
  double total_rate() const {
    return exchange_rate_ + static_cast<double>(walker_rate_);
  }

  // Occupied in-range neighbors of the current walker/tag site, and the local
  // drift phi there, from the current configuration.  Tagged mode has no
  // conductance clock, so its walker rate is identically zero.
  void refresh_local_rates() {
    walker_rate_ = 0;
    std::fill(drift_.begin(), drift_.end(), 0.0);
    if (config_.mode == Mode::tagged) return;
    const std::int64_t x = world_.walker_site;
    if (world_.xi.at(x) == 0) return;
    const auto& support = config_.kernel.support();
    const std::int64_t* nbr =
        &neighbors_[static_cast<std::size_t>(x) * support_size_];
    for (std::size_t k = 0; k < support_size_; ++k) {
      if (world_.xi.at(nbr[k]) != 0) {
        ++walker_rate_;
        const Displacement& y = support[k];
        for (std::size_t axis = 0; axis < drift_.size(); ++axis) {
          drift_[axis] += static_cast<double>(y[axis]);
        }
      }
    }
  }

  double draw_holding_time() { return rng_.exponential(total_rate()); }

  // Applies one event (chosen proportionally to the competing clock rates)
  // to the configuration and walker, then refreshes the local rates.  Does
  // NOT advance the clock or the compensator — the caller owns those, so that
  // samples inside the preceding holding interval can use pre-event values.
  EventRecord apply_event() {
    EventRecord record;
    const double z = rng_.uniform() * total_rate();
    if (z < exchange_rate_ || walker_rate_ == 0) {
      record.type = EventType::exchange;
      apply_exchange(record);
    } else {
      record.type = EventType::walker_jump;
      apply_walker_jump(record);
    }
    record.time = world_.time;
    refresh_local_rates();
    return record;
  }

 private:
  static Configuration sample_conditioned(const SimConfig& config, Rng& rng) {
    // Bernoulli product conditioned on an occupied origin: independence makes
    // this "sample freely, then force the origin".
    Configuration xi = sample_bernoulli(config.torus, config.rho, rng);
    if (xi.at(0) == 0) xi.set(0, 1);
    return xi;
  }

  void apply_exchange(EventRecord& record) {
    const auto site = static_cast<std::int64_t>(
        rng_.below(static_cast<std::uint64_t>(config_.torus.n_sites())));
    std::size_t k = 0;
    if (support_size_ > 1) {
      double v = rng_.uniform() * config_.kernel.total_rate();
      const auto& rates = config_.kernel.rates();
      while (k + 1 < support_size_ && v >= rates[k]) {
        v -= rates[k];
        ++k;
      }
    }
    const std::int64_t other =
        neighbors_[static_cast<std::size_t>(site) * support_size_ + k];
    record.site = site;
    record.support_index = k;
    ++world_.exchange_events;
    const std::uint8_t a = world_.xi.at(site);
    const std::uint8_t b = world_.xi.at(other);
    if (a == b) return;  // no-op proposal, discarded by design
    world_.xi.swap_sites(site, other);
    if (config_.mode == Mode::tagged) {
      if (world_.walker_site == site && a != 0) {
        move_tag(other, k, /*forward=*/true);
      } else if (world_.walker_site == other && b != 0) {
        move_tag(site, k, /*forward=*/false);
      }
    }
  }

  void move_tag(std::int64_t destination, std::size_t k, bool forward) {
    world_.walker_site = destination;
    const Displacement& y = config_.kernel.support()[k];
    const int sign = forward ? 1 : -1;
    for (std::size_t axis = 0; axis < world_.displacement.size(); ++axis) {
      world_.displacement[axis] += sign * static_cast<long long>(y[axis]);
    }
    // J indexes the tag's own displacement: the reverse move counts toward
    // the mirrored kernel entry, which exists by symmetry of p.
    if (forward) {
      ++world_.jump_counts[k];
    } else {
      Displacement mirrored = config_.kernel.support()[k];
      for (int& c : mirrored) c = -c;
      ++world_.jump_counts[static_cast<std::size_t>(
          config_.kernel.index_of(mirrored))];
    }
    ++world_.walker_jumps;
  }

  void apply_walker_jump(EventRecord& record) {
    // walker_rate_ occupied in-range neighbors, each at conductance rate 1.
    std::uint64_t pick = rng_.below(static_cast<std::uint64_t>(walker_rate_));
    const std::int64_t x = world_.walker_site;
    const std::int64_t* nbr =
        &neighbors_[static_cast<std::size_t>(x) * support_size_];
    for (std::size_t k = 0; k < support_size_; ++k) {
      if (world_.xi.at(nbr[k]) == 0) continue;
      if (pick-- != 0) continue;
      record.site = x;
      record.support_index = k;
      const Displacement& y = config_.kernel.support()[k];
      for (std::size_t axis = 0; axis < world_.displacement.size(); ++axis) {
        world_.displacement[axis] += y[axis];
      }
      ++world_.jump_counts[k];
      ++world_.walker_jumps;
      if (config_.mode == Mode::environment) {
        // Viewed from the walker: the jump shifts the scenery instead.
        world_.xi = shift(world_.xi, config_.torus, y);
      } else {
        world_.walker_site = nbr[k];
      }
      return;
    }
    throw SolverFailure("walker jump drawn with no occupied neighbor");
  }

  const SimConfig& config_;
  std::vector<std::int64_t> neighbors_;
  std::size_t support_size_;
  double exchange_rate_;
  Rng rng_;
  WorldState world_;
  int walker_rate_ = 0;
  std::vector<double> drift_;
};

// Single-event operation used by tests: advances the clock by one holding
// time, integrates the compensator over it, and applies the event.
inline EventRecord step(Engine& engine) {
  const double dt = engine.draw_holding_time();
  WorldState& world = engine.world();
  for (std::size_t axis = 0; axis < world.compensator.size(); ++axis) {
    world.compensator[axis] += engine.drift()[axis] * dt;
  }
  world.time += dt;
  return engine.apply_event();
}

namespace detail {

inline Sample make_sample(const WorldState& world, const Engine& engine,
                          double at_time, double interval_start) {
  Sample sample;
  sample.time = at_time;
  sample.displacement = world.displacement;
  sample.jump_counts = world.jump_counts;
  sample.compensator = world.compensator;
  const double elapsed = at_time - interval_start;
  for (std::size_t axis = 0; axis < sample.compensator.size(); ++axis) {
    sample.compensator[axis] += engine.drift()[axis] * elapsed;
  }
  return sample;
}

inline Trajectory run_mode(const SimConfig& config, Mode expected) {
  if (config.mode != expected) {
    throw ConfigParseError("run mode mismatch: config says " +
                           mode_name(config.mode) + ", runner expects " +
                           mode_name(expected));
  }
  validate_schedule(config);
  Engine engine(config, config.seed);
  WorldState& world = engine.world();

  Trajectory trajectory;
  trajectory.seed = config.seed;
  trajectory.params = params_echo(config);
  trajectory.samples.reserve(config.schedule.size());

  std::size_t next = 0;
  while (true) {
    const double dt = engine.draw_holding_time();
    const double until = world.time + dt;
    while (next < config.schedule.size() && config.schedule[next] <= until) {
      trajectory.samples.push_back(
          detail::make_sample(world, engine, config.schedule[next], world.time));
      ++next;
    }
    if (next == config.schedule.size()) break;  // horizon sample recorded
    for (std::size_t axis = 0; axis < world.compensator.size(); ++axis) {
      world.compensator[axis] += engine.drift()[axis] * dt;
    }
    world.time = until;
    engine.apply_event();
  }
  return trajectory;
}

}  // namespace detail

// Coupled walk: exclusion environment plus conductance walker, from nu_rho.
inline Trajectory run(const SimConfig& config) {
  return detail::run_mode(config, Mode::coupled);
}

// Environment seen from the walker: the walker stays at the origin and each
// jump shifts the whole configuration; jump_counts record the shift counts.
inline Trajectory run_environment(const SimConfig& config) {
  return detail::run_mode(config, Mode::environment);
}

// Tagged exclusion particle, started from nu_rho conditioned on an occupied
// origin; rho = 0 degenerates to a single forced particle (a free p-walk).
inline Trajectory run_tagged(const SimConfig& config) {
  return detail::run_mode(config, Mode::tagged);
}

inline Trajectory run_any(const SimConfig& config) {
  return detail::run_mode(config, config.mode);
}

// Worker count: min(EXCLUSIM_THREADS if set, hardware concurrency, jobs).
inline unsigned worker_count(std::size_t jobs) {
  unsigned workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  if (const char* cap = std::getenv("EXCLUSIM_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(cap, &end, 10);
    if (end == cap || *end != '\0' || parsed < 1) {
      throw ConfigParseError("EXCLUSIM_THREADS must be a positive integer");
    }
    workers = static_cast<unsigned>(
        std::min<long>(parsed, static_cast<long>(workers)));
  }
  if (jobs < workers) workers = static_cast<unsigned>(jobs);
  return workers == 0 ? 1 : workers;
}

// Replica fan-out over explicit per-replica seeds.  Results land in replica
// order, so output is independent of scheduling.
inline std::vector<Trajectory> run_with_seeds(
    const SimConfig& base, const std::vector<std::uint64_t>& seeds) {
  std::vector<Trajectory> ensemble(seeds.size());
  if (seeds.empty()) return ensemble;
  const unsigned workers = worker_count(seeds.size());
  std::atomic<std::size_t> cursor{0};
  auto body = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= seeds.size()) return;
      SimConfig config = base;
      config.seed = seeds[i];
      ensemble[i] = detail::run_mode(config, base.mode);
    }
  };
  if (workers <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  return ensemble;
}

// Convenience fan-out: replica i runs with replica_seed(master_seed, i).
inline std::vector<Trajectory> run_replicas(const SimConfig& base,
                                            std::size_t replicas,
                                            std::uint64_t master_seed) {
  std::vector<std::uint64_t> seeds(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    seeds[i] = replica_seed(master_seed, static_cast<std::uint64_t>(i));
  }
  return run_with_seeds(base, seeds);
}

}  // namespace exclusim
