#pragma once

// Shared fixtures: small analytic scenes and reference integrators used as
// oracles across the test suites.

#include "dreflex/dynamics.hpp"
#include "dreflex/model.hpp"

#include <functional>
#include <string>

namespace dreflex::testing {

inline std::string humanoid_path() {
  return std::string(DREFLEX_SOURCE_DIR) + "/models/reduced_humanoid.robot.toml";
}

// Fixed-base point-mass pendulum: mass 2 kg on a 0.5 m rod about +y.
inline const char* kPendulumDoc = R"(
[robot]
name = "pendulum"
floating = false
[[link]]
name = "base"
mass = 1.0
inertia = [1.0, 1.0, 1.0]
[[link]]
name = "bob"
mass = 2.0
com = [0.0, 0.0, -0.5]
inertia = [1e-6, 1e-6, 1e-6]
[[joint]]
name = "pivot"
parent = "base"
child = "bob"
axis = [0.0, 1.0, 0.0]
limits = [-10.0, 10.0]
)";

inline constexpr double kPendulumMass = 2.0;
inline constexpr double kPendulumLength = 0.5;

// Fixed-base planar double pendulum, two 1 kg rods of 0.5 m.
inline const char* kDoublePendulumDoc = R"(
[robot]
name = "double_pendulum"
floating = false
[[link]]
name = "base"
mass = 1.0
inertia = [1.0, 1.0, 1.0]
[[link]]
name = "upper"
mass = 1.0
com = [0.0, 0.0, -0.25]
inertia = [0.021, 0.021, 0.0005]
[[link]]
name = "lower"
mass = 1.0
com = [0.0, 0.0, -0.25]
inertia = [0.021, 0.021, 0.0005]
[[joint]]
name = "shoulder"
parent = "base"
child = "upper"
axis = [0.0, 1.0, 0.0]
limits = [-20.0, 20.0]
[[joint]]
name = "elbow"
parent = "upper"
child = "lower"
origin = [0.0, 0.0, -0.5]
axis = [0.0, 1.0, 0.0]
limits = [-20.0, 20.0]
)";

// Planar 2-link arm in the xz plane, joints about +y, link length 1 m each,
// zero configuration pointing along +x.
inline const char* kTwoLinkDoc = R"(
[robot]
name = "two_link"
floating = false
[[link]]
name = "base"
mass = 1.0
inertia = [1.0, 1.0, 1.0]
[[link]]
name = "link1"
mass = 1.0
com = [0.5, 0.0, 0.0]
inertia = [0.01, 0.09, 0.09]
[[link]]
name = "link2"
mass = 1.0
com = [0.5, 0.0, 0.0]
inertia = [0.01, 0.09, 0.09]
[[joint]]
name = "q1"
parent = "base"
child = "link1"
axis = [0.0, 1.0, 0.0]
limits = [-10.0, 10.0]
[[joint]]
name = "q2"
parent = "link1"
child = "link2"
origin = [1.0, 0.0, 0.0]
axis = [0.0, 1.0, 0.0]
limits = [-10.0, 10.0]
)";

// Free-floating ball: floating base only, sphere of radius 0.1.
inline const char* kBallDoc = R"(
[robot]
name = "ball"
[[link]]
name = "ball"
mass = 1.0
inertia = [0.004, 0.004, 0.004]
[[link.sphere]]
center = [0.0, 0.0, 0.0]
radius = 0.1
)";

// RK4 on a fixed-base model (q and dq are plain vectors, no quaternion).
inline void rk4_step_fixed_base(const RobotModel& model, VecX& q, VecX& dq, double dt,
                                const std::function<VecX(const VecX&, const VecX&)>& accel) {
  (void)model;
  const VecX k1q = dq, k1v = accel(q, dq);
  const VecX k2q = dq + 0.5 * dt * k1v, k2v = accel(q + 0.5 * dt * k1q, dq + 0.5 * dt * k1v);
  const VecX k3q = dq + 0.5 * dt * k2v, k3v = accel(q + 0.5 * dt * k2q, dq + 0.5 * dt * k2v);
  const VecX k4q = dq + dt * k3v, k4v = accel(q + dt * k3q, dq + dt * k3v);
  q += dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q);
  dq += dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
}

}  // namespace dreflex::testing
