#pragma once
// Simulation state for the conductance walk: the mutable world (configuration
// + walker bookkeeping), per-event records, sampled trajectories, and run
// configuration.  The walker displacement is accumulated unwrapped in Z^d
// while the environment is looked up modulo L; the compensator A integrates
// the piecewise-constant local drift exactly (no quadrature error).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "exclusim/configuration.hpp"
#include "exclusim/errors.hpp"
#include "exclusim/kernel.hpp"
#include "exclusim/torus.hpp"

namespace exclusim {

enum class Mode { coupled, environment, tagged };

inline std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::coupled: return "coupled";
    case Mode::environment: return "environment";
    case Mode::tagged: return "tagged";
  }
  return "?";
}

inline Mode parse_mode(const std::string& name) {
  if (name == "coupled") return Mode::coupled;
  if (name == "environment") return Mode::environment;
  if (name == "tagged") return Mode::tagged;
  throw ConfigParseError("unknown mode '" + name +
                         "' (expected coupled, environment, or tagged)");
}

// Mutable state of one realization.  `walker_site` is the wrapped flat index
// of the walker (coupled), the tagged particle (tagged), or fixed at the
// origin (environment mode, where jumps shift the configuration instead).
struct WorldState {
  Configuration xi{0};
  std::int64_t walker_site = 0;
  std::vector<long long> displacement;     // X, unwrapped
  std::vector<double> compensator;         // A = integral of the local drift
  std::vector<std::uint64_t> jump_counts;  // J^y, indexed like kernel.support()
  double time = 0.0;
  std::uint64_t exchange_events = 0;  // includes no-op exchanges
  std::uint64_t walker_jumps = 0;     // walker jumps / shifts / tag moves
};

// Exact integer identity X = sum_y y * J^y, used as a structural check.
inline std::vector<long long> displacement_from_jumps(
    const TransitionKernel& kernel, const std::vector<std::uint64_t>& jumps) {
  std::vector<long long> x(static_cast<std::size_t>(kernel.dimension()), 0);
  for (std::size_t k = 0; k < kernel.support().size(); ++k) {
    const Displacement& y = kernel.support()[k];
    for (std::size_t axis = 0; axis < x.size(); ++axis) {
      x[axis] += static_cast<long long>(y[axis]) *
                 static_cast<long long>(jumps[k]);
    }
  }
  return x;
}

enum class EventType { exchange, walker_jump };

struct EventRecord {
  double time = 0.0;  // clock value after the event
  EventType type = EventType::exchange;
  std::int64_t site = 0;          // exchange: first site of the pair; jump: source
  std::size_t support_index = 0;  // displacement index into kernel.support()
  bool snapshot = false;
};

struct Sample {
  double time = 0.0;
  std::vector<long long> displacement;
  std::vector<double> compensator;
  std::vector<std::uint64_t> jump_counts;
};

// Parameters echoed into every trajectory so downstream consumers can verify
// ensembles are homogeneous without carrying the full config around.
struct ParamsEcho {
  int dimension = 1;
  int side = 0;
  int range = 1;
  double rho = 0.0;
  double horizon = 0.0;
  Mode mode = Mode::coupled;

  friend bool operator==(const ParamsEcho&, const ParamsEcho&) = default;
};

struct Trajectory {
  std::vector<Sample> samples;  // strictly increasing times, first at t=0
  std::uint64_t seed = 0;
  ParamsEcho params;
};

// Geometric sample times T, T/2, ..., T*2^{-(count-1)} plus t=0, ascending.
inline std::vector<double> geometric_schedule(double horizon, int count) {
  if (horizon < 0.0) throw ConfigParseError("horizon T must be nonnegative");
  if (count < 1) throw ConfigParseError("samples must be at least 1");
  std::vector<double> times{0.0};
  if (horizon == 0.0) return times;
  for (int k = count - 1; k >= 0; --k) {
    times.push_back(horizon * std::ldexp(1.0, -k));
  }
  return times;
}

struct SimConfig {
  Torus torus{1, 3};
  TransitionKernel kernel = uniform_kernel(1, 1);
  double rho = 0.5;
  double horizon = 1.0;
  std::vector<double> schedule{0.0, 1.0};  // ascending, starts at 0, ends at T
  Mode mode = Mode::coupled;
  std::uint64_t seed = 0;
};

inline void validate_schedule(const SimConfig& config) {
  const auto& s = config.schedule;
  if (s.empty() || s.front() != 0.0) {
    throw ConfigParseError("sample schedule must start at t=0");
  }
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s[i] > s[i - 1])) {
      throw ConfigParseError("sample times must be strictly increasing");
    }
  }
  if (s.back() > config.horizon) {
    throw ConfigParseError("sample times must not exceed the horizon T");
  }
}

inline SimConfig make_sim_config(Torus torus, TransitionKernel kernel,
                                 double rho, double horizon, int samples,
                                 Mode mode, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw ConfigParseError("density rho must lie in [0, 1]");
  }
  if (horizon < 0.0) throw ConfigParseError("horizon T must be nonnegative");
  require_compatible(torus, kernel);
  SimConfig config{std::move(torus), std::move(kernel), rho,     horizon,
                   geometric_schedule(horizon, samples), mode, seed};
  validate_schedule(config);
  return config;
}

inline ParamsEcho params_echo(const SimConfig& config) {
  return ParamsEcho{config.torus.dimension(), config.torus.side(),
                    config.kernel.range(),    config.rho,
                    config.horizon,           config.mode};
}

}  // namespace exclusim
