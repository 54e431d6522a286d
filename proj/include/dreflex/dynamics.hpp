#pragma once

#include "dreflex/kinematics.hpp"
#include "dreflex/model.hpp"

#include <vector>

namespace dreflex {

struct ExternalWrench {
  int link = 0;
  Vec3 world_point = Vec3::Zero();  // application point, world
  Vec3 force = Vec3::Zero();        // world
  Vec3 torque = Vec3::Zero();       // world, about the application point
};

inline constexpr double kGravity = -9.81;
inline Vec3 default_gravity() { return Vec3(0, 0, kGravity); }

// Joint-space mass matrix, nv x nv, symmetric positive definite. Assembled as
// the sum of per-link COM-frame kinetic-energy contributions J^T [mI; I_w] J.
MatX mass_matrix(const RobotModel& model, const FrameCache& fk);
MatX mass_matrix(const RobotModel& model, const VecX& q);

// Generalized forces required to realize ddq, i.e. recursive Newton-Euler:
// tau = M(q) ddq + F(q, dq) - sum J^T w_ext.
VecX inverse_dynamics(const RobotModel& model, const FrameCache& fk, const VecX& q,
                      const VecX& dq, const VecX& ddq, const Vec3& gravity,
                      const std::vector<ExternalWrench>& external = {});

// Coriolis + centrifugal + gravity vector: inverse dynamics at ddq = 0.
VecX nonlinear_effects(const RobotModel& model, const VecX& q, const VecX& dq,
                       const Vec3& gravity);
VecX nonlinear_effects(const RobotModel& model, const FrameCache& fk, const VecX& q,
                       const VecX& dq, const Vec3& gravity);

// Solves M ddq = S^T tau + sum J^T w - F for ddq. `tau` is the full
// nv-dimensional generalized force (zero-padded base rows).
VecX forward_dynamics(const RobotModel& model, const VecX& q, const VecX& dq, const VecX& tau,
                      const Vec3& gravity, const std::vector<ExternalWrench>& external = {});
VecX forward_dynamics(const RobotModel& model, const FrameCache& fk, const VecX& q,
                      const VecX& dq, const VecX& tau, const Vec3& gravity,
                      const std::vector<ExternalWrench>& external = {});

// Velocity-product (bias) acceleration of a world point attached to `link`,
// i.e. the point's acceleration when ddq = 0. Equals Jdot * dq for the
// point's linear Jacobian, computed exactly so that redundant contact-point
// constraints on one rigid body stay mutually consistent.
Vec3 point_acceleration_bias(const RobotModel& model, const FrameCache& fk, int link,
                             const Vec3& world_point, const VecX& dq);

// Spatial version: rows 0..2 linear bias acceleration of the point, rows 3..5
// angular bias acceleration of the link.
Vec6 spatial_acceleration_bias(const RobotModel& model, const FrameCache& fk, int link,
                               const Vec3& world_point, const VecX& dq);

// Generalized force produced by an external wrench: J_p^T f + J_w^T n.
VecX wrench_generalized_force(const RobotModel& model, const FrameCache& fk,
                              const ExternalWrench& w);

// Total mechanical energy (kinetic + gravitational potential); conserved in
// unactuated contact-free motion.
double total_energy(const RobotModel& model, const VecX& q, const VecX& dq, const Vec3& gravity);

}  // namespace dreflex
