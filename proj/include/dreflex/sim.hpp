#pragma once

#include "dreflex/damage.hpp"
#include "dreflex/dynamics.hpp"
#include "dreflex/world.hpp"

#include <optional>
#include <vector>

namespace dreflex {

struct SimState {
  VecX q;
  VecX dq;
  double time = 0;
};

// Per-actuated-joint Stable-PD gains.
struct SpdGains {
  VecX kp;
  VecX kd;
};

// Group gains by joint role (hip/knee/ankle = legs, shoulder/elbow = arms,
// torso). The paper's robot gains are not published; these are tuned on the
// shipped scenes.
struct JointGroupGains {
  double legs_kp = 4000, legs_kd = 130;
  double arms_kp = 400, arms_kd = 20;
  double torso_kp = 2000, torso_kd = 65;

  SpdGains expand(const RobotModel& model) const;
};

// Implicit PD torque: tau = -Kp (q + dt dq - q_target) - Kd dq_next, with
// dq_next resolved through (M + dt Kd). Clamped to model torque limits.
// `M_llt_damped` must factor M + dt * diag(Kd on actuated rows).
VecX stable_pd(const RobotModel& model, const VecX& q, const VecX& dq, const VecX& q_target,
               const SpdGains& gains, double dt, const MatX& M, const VecX& nonlinear);

// Steps one model (intact or damaged) through penalty contacts with
// per-joint commanded positions tracked by Stable-PD. Semi-implicit Euler.
class Simulator {
 public:
  Simulator(const RobotModel& model, const World& world, const SpdGains& gains, double dt);

  // `q_target`: commanded position per actuated joint; `passive` joints (by
  // damaged-model joint index) get exactly zero commanded torque.
  void step(SimState& state, const VecX& q_target, const std::vector<bool>& passive = {});

  const std::vector<Contact>& last_contacts() const { return contacts_; }
  const std::vector<ContactForce>& last_forces() const { return forces_; }
  const VecX& last_tau() const { return tau_; }  // actuated torques, post-clamp
  const World& world() const { return world_; }
  double dt() const { return dt_; }
  bool diverged() const { return diverged_; }

 private:
  const RobotModel& model_;
  World world_;
  SpdGains gains_;
  double dt_;
  bool diverged_ = false;
  std::vector<Contact> contacts_;
  std::vector<ContactForce> forces_;
  VecX tau_;
};

// Fall criterion: any non-foot link touches the floor, or any link other than
// the designated hand touches the wall.
bool detect_fall(const RobotModel& model, const std::vector<Contact>& contacts,
                 const std::vector<int>& foot_links, int hand_link);

// Sum of wall-contact normal forces on one link (wrist force analog).
double wall_normal_force_on(const std::vector<ContactForce>& forces, int link);

}  // namespace dreflex
