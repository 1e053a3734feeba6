#pragma once

#include <vector>

#include "flowembed/field.hpp"

namespace flowembed {

enum class Parameterization {
  arc_length,  // integrate v/|v|; samples equidistant in arc length
  time,        // integrate v; samples equidistant in time
};

enum class Termination {
  complete,        // reached the full half-length
  boundary_exit,   // left the domain
  critical_point,  // |v| dropped below the critical threshold
};

struct TraceConfig {
  int half_length = 0;  // L: samples at indices -L..L
  double step = 0.0;    // arc length (or time) between consecutive samples
  Parameterization mode = Parameterization::arc_length;
};

struct TrajectorySample {
  int index;        // signed sample index in [-L, L]
  double distance;  // signed parameter value index*step
  Vec3 position;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;  // ordered by index; contains index 0
  Vec3 seed{0, 0, 0};
  Termination forward = Termination::complete;
  Termination backward = Termination::complete;

  int first_index() const { return samples.front().index; }
  int last_index() const { return samples.back().index; }
};

/// Stationary-particle speed threshold: 1e-9 * max spacing.
double critical_speed_threshold(const Domain& domain);

/// Classical RK4 streamline integration from `seed`, forward to +L and
/// backward to -L samples. Integration in a direction stops early on domain
/// exit or when the speed falls below the critical threshold; returned
/// samples are exactly those that stayed in-domain.
/// Throws std::invalid_argument if the seed is outside the domain.
Trajectory trace(const VectorField& field, const Vec3& seed, const TraceConfig& cfg);

/// Default integrator step: 0.5 * min cell spacing.
double default_step(const Domain& domain);

}  // namespace flowembed
