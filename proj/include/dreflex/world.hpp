#pragma once

#include "dreflex/dynamics.hpp"
#include "dreflex/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dreflex {

// Wall sample in robot-relative terms: distance and yaw at trigger time.
struct WallConfig {
  double distance = 0.7;    // m, from base origin at placement time
  double alpha = 0.0;       // rad, yaw relative to robot facing
  double friction = 1.0;
  double restitution = 0.0; // penalty model realizes 0 exactly
};

// A placed vertical wall plane plus the 2D frame the contact grid lives in.
struct WallPlane {
  Vec3 point = Vec3::Zero();       // grid origin (0,0) on the plane, world
  Vec3 normal = Vec3::UnitX();     // unit, pointing toward the robot
  Vec3 horizontal = Vec3::UnitY(); // unit, in-plane, z x normal
  double friction = 1.0;

  Vec3 grid_to_world(double x, double y) const {
    return point + x * horizontal + y * Vec3::UnitZ();
  }
  double signed_distance(const Vec3& p) const { return normal.dot(p - point); }
};

// Places the wall relative to the robot's ground-projected base pose: the
// plane sits `distance` ahead of the base origin along the damaged-side
// facing, rotated by alpha about z. Grid origin height = `anchor_height`.
WallPlane place_wall(const WallConfig& cfg, const Vec3& base_position, double base_yaw,
                     double anchor_height);

struct ContactParams {
  double kp = 4.0e5;   // N/m penalty stiffness
  double kd = 3.0e3;   // N s/m normal damping
  double kt = 2.0e4;   // N s/m tangential viscous coefficient (Coulomb-capped)
  double mu_floor = 1.0;
};

struct World {
  Vec3 gravity = default_gravity();
  ContactParams contact;
  std::optional<WallPlane> wall;
};

enum class Surface { Floor, Wall };

struct Contact {
  int link = 0;
  Vec3 world_point = Vec3::Zero();  // deepest point of the primitive
  Vec3 normal = Vec3::Zero();       // surface normal, pointing into the robot
  double depth = 0.0;               // penetration, > 0
  Surface surface = Surface::Floor;
};

struct ContactForce {
  ExternalWrench wrench;
  double normal_force = 0.0;
  Surface surface = Surface::Floor;
  int link = 0;
};

// All primitive/floor and primitive/wall interpenetrations.
std::vector<Contact> detect_contacts(const RobotModel& model, const FrameCache& fk,
                                     const World& world);

// One contact split for implicit integration: the spring part is an explicit
// force, the velocity-dependent part a 3x3 damping matrix C so the integrator
// can solve (M + dt sum J'CJ) dq_next = M dq + dt rhs. Keeping the damping
// implicit is what makes the stiff penalty gains stable at dt = 1e-3 and
// yields restitution 0. The spring itself is also made implicit by folding
// kp*dt into the normal damper (force evaluated at next-step penetration);
// without this the spring/foot-inertia mode sits near the explicit stability
// limit and rings at the Nyquist frequency. The tangential coefficient is
// Coulomb-capped per contact (regularized friction): kt_eff = min(kt, mu N / |v_t|).
struct ContactOperator {
  int link = 0;
  Vec3 world_point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  Surface surface = Surface::Floor;
  double mu = 1.0;
  Vec3 f_spring = Vec3::Zero();  // kp * depth * normal
  Mat3 damping = Mat3::Zero();   // force = f_spring - damping * v_point
};

// `dt` sizes the implicit spring term (pass 0 for a purely explicit spring).
std::vector<ContactOperator> contact_operators(const std::vector<Contact>& contacts,
                                               const RobotModel& model, const FrameCache& fk,
                                               const VecX& dq, const World& world, double dt);

// Penalty normal + regularized Coulomb friction evaluated at the given
// velocity (explicit form of the operators above).
std::vector<ContactForce> contact_forces(const std::vector<Contact>& contacts,
                                         const RobotModel& model, const FrameCache& fk,
                                         const VecX& dq, const World& world);

// True if any collision primitive of the robot penetrates the wall plane.
bool penetrates_wall(const RobotModel& model, const FrameCache& fk, const WallPlane& wall);

}  // namespace dreflex
