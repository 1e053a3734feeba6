#include "flowembed/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flowembed {

namespace {

double norm(const Vec3& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

Vec3 axpy(const Vec3& x, double a, const Vec3& y) {
  return {x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2]};
}

struct StepResult {
  bool ok = false;
  Termination stop = Termination::complete;
  Vec3 next{0, 0, 0};
};

// One RK4 step of size h. In arc-length mode the right-hand side is v/|v|.
// A stage leaving the domain terminates with boundary_exit; a stage speed
// below eps terminates with critical_point.
StepResult rk4_step(const VectorField& field, const Vec3& x, double h,
                    Parameterization mode, double eps) {
  StepResult r;
  auto rhs = [&](const Vec3& p, Vec3& out, Termination& why) -> bool {
    const auto v = field.sample(p);
    if (!v) {
      why = Termination::boundary_exit;
      return false;
    }
    const double speed = norm(*v);
    if (speed < eps) {
      why = Termination::critical_point;
      return false;
    }
    if (mode == Parameterization::arc_length) {
      out = {(*v)[0] / speed, (*v)[1] / speed, (*v)[2] / speed};
    } else {
      out = *v;
    }
    return true;
  };

  Vec3 k1, k2, k3, k4;
  Termination why = Termination::complete;
  if (!rhs(x, k1, why)) { r.stop = why; return r; }
  if (!rhs(axpy(x, 0.5 * h, k1), k2, why)) { r.stop = why; return r; }
  if (!rhs(axpy(x, 0.5 * h, k2), k3, why)) { r.stop = why; return r; }
  if (!rhs(axpy(x, h, k3), k4, why)) { r.stop = why; return r; }
  Vec3 next = x;
  for (int a = 0; a < 3; ++a)
    next[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
  if (!field.domain().contains(next)) {
    r.stop = Termination::boundary_exit;
    return r;
  }
  r.ok = true;
  r.next = next;
  return r;
}

}  // namespace

double critical_speed_threshold(const Domain& domain) {
  return 1e-9 * domain.max_spacing();
}

double default_step(const Domain& domain) { return 0.5 * domain.min_spacing(); }

Trajectory trace(const VectorField& field, const Vec3& seed, const TraceConfig& cfg) {
  if (!field.domain().contains(seed))
    throw std::invalid_argument("tracer: seed outside domain");
  if (cfg.half_length < 0) throw std::invalid_argument("tracer: half_length must be >= 0");
  if (!(cfg.step > 0.0)) throw std::invalid_argument("tracer: step must be > 0");

  const double eps = critical_speed_threshold(field.domain());
  Trajectory traj;
  traj.seed = seed;

  const auto v0 = field.sample(seed);
  if (v0 && norm(*v0) < eps) {
    // Stationary particle: only the seed sample, flagged critical.
    traj.samples.push_back({0, 0.0, seed});
    traj.forward = Termination::critical_point;
    traj.backward = Termination::critical_point;
    return traj;
  }

  std::vector<TrajectorySample> backward;
  Vec3 x = seed;
  for (int i = 1; i <= cfg.half_length; ++i) {
    const auto r = rk4_step(field, x, -cfg.step, cfg.mode, eps);
    if (!r.ok) {
      traj.backward = r.stop;
      break;
    }
    x = r.next;
    backward.push_back({-i, -double(i) * cfg.step, x});
  }
  std::reverse(backward.begin(), backward.end());
  traj.samples = std::move(backward);
  traj.samples.push_back({0, 0.0, seed});
  x = seed;
  for (int i = 1; i <= cfg.half_length; ++i) {
    const auto r = rk4_step(field, x, cfg.step, cfg.mode, eps);
    if (!r.ok) {
      traj.forward = r.stop;
      break;
    }
    x = r.next;
    traj.samples.push_back({i, double(i) * cfg.step, x});
  }
  return traj;
}

}  // namespace flowembed
