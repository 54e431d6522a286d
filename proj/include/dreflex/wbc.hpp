#pragma once

// Whole-body controller. Each tick it assembles a dense QP over
//   x = [ddq (nv), tau (na), lambda (3 per contact point)]
// with task costs sum_k w_k ||A_k ddq - b_k||^2 (contact zero-acceleration
// conditions enter the cost with a dominant weight), the dynamics equality
// M ddq + F = S' tau + J_c' lambda, linearized friction pyramids (4 facets),
// and joint position/velocity/acceleration/torque bounds mapped to
// acceleration rows.
// The solution is integrated to desired joint positions which a Stable-PD
// loop tracks in the plant.

#include "dreflex/dynamics.hpp"
#include "dreflex/qp.hpp"
#include "dreflex/world.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace dreflex {

enum class TaskKind { CartesianPosition, CartesianOrientation, ComPosition, Posture };

struct TaskSpec {
  TaskKind kind = TaskKind::Posture;
  std::string name;                    // unique id ("posture", "com", "hand", ...)
  int link = -1;                       // cartesian tasks
  Vec3 local_point = Vec3::Zero();     // cartesian-position point, link frame
  Vec3 target_point = Vec3::Zero();    // cartesian position / com target, world
  Mat3 target_rot = Mat3::Identity();  // cartesian orientation target, world
  VecX target_posture;                 // actuated joint angles
  double weight = 1.0;
  double kp = 100.0, kd = 20.0;
  bool frozen = false;                 // target held constant (anchored hand)
};

// Bilateral point contact: the point is constrained to zero acceleration and
// carries a force inside the friction pyramid around `normal`.
struct ContactConstraint {
  int link = -1;
  Vec3 local_point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // world, pointing into the robot
  double mu = 1.0;
};

struct ControllerConfig {
  double dt = 1e-3;
  // balance must dominate reaching: two hand tasks at weight comparable to
  // the com task dilute its feedback below the inverted-pendulum threshold
  double w_com = 10.0, w_hand = 2.0, w_posture = 0.1, w_foot_orientation = 1.0;
  double w_hand_urgent = 20.0;  // reflex reach must out-prioritize posture
  double w_contact = 1e3;  // zero-acceleration condition on contacted bodies
  double com_kp = 100.0, com_kd = 20.0;
  double task_kp = 100.0, task_kd = 20.0;
  double posture_kp = 100.0, posture_kd = 20.0;
  double reg_ddq = 1e-6, reg_tau = 1e-6, reg_lambda = 1e-6;
  double ddq_max = 500.0;        // rad/s^2 acceleration bound, actuated joints
  double bounds_dt = 0.05;       // s, preview horizon for position/velocity bounds
  double qp_tol = 1e-8;
  int qp_max_iterations = 200;
  double contact_force_threshold = 5.0;  // N, wrist-sensor analog
};

// Task rows (A, b) with A the task Jacobian on the ddq block and b the desired
// task acceleration: PD feedback minus the Jdot*dq term. Jdot is finite
// differenced against `prev_J` (pass nullptr on the first tick). `J_out`
// receives the Jacobian for the next tick's difference.
void task_rows(const RobotModel& model, const FrameCache& fk, const VecX& q, const VecX& dq,
               const TaskSpec& task, double dt, const MatX* prev_J, MatX& A, VecX& b,
               MatX& J_out);

// Assembled problem plus the decision-variable layout.
struct WbcProblem {
  QPProblem qp;
  int nv = 0, na = 0, nc = 0;  // x = [ddq(nv), tau(na), lambda(3*nc)]
};

// Jacobians carried tick-to-tick for the finite-difference Jdot terms.
struct JacobianHistory {
  std::unordered_map<std::string, MatX> by_key;
};

WbcProblem assemble_qp(const RobotModel& model, const FrameCache& fk, const VecX& q,
                       const VecX& dq, const MatX& M, const VecX& nonlinear,
                       const std::vector<TaskSpec>& tasks,
                       const std::vector<ContactConstraint>& contacts,
                       const ControllerConfig& cfg, JacobianHistory* history = nullptr);

class WholeBodyController {
 public:
  WholeBodyController(RobotModel model, ControllerConfig cfg);

  // Standing setup: posture + CoM + hand-position + foot-orientation tasks and
  // four contact points per foot sole, all anchored at configuration q.
  void set_standing_tasks(const VecX& q, double floor_mu = 1.0);

  std::vector<TaskSpec>& tasks() { return tasks_; }
  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  std::vector<ContactConstraint>& contacts() { return contacts_; }
  TaskSpec* find_task(const std::string& name);

  // Drops every task except the CoM, posture and hand-contact tasks; contact
  // constraints and bounds are untouched. CoM target is left as-is. Idempotent.
  void enter_urgent_mode();
  bool urgent() const { return urgent_; }

  // Adds (or retargets) the hand Cartesian task toward the wall-frame grid
  // point, remembering the wall for the eventual contact constraint.
  void set_hand_contact_target(const WallPlane& wall, double x, double y, int hand_link);

  // On wrist force above threshold: adds the hand contact constraint anchored
  // at the measured hand position and freezes the hand task there.
  void update_contact_anchor(const Vec3& measured_hand_point, double normal_force);
  bool hand_anchored() const { return hand_anchored_; }

  // Tracker gains (per actuated joint) used to build torque-consistent
  // position targets. Without them tick falls back to the kinematic target
  // q + dq dt + 1/2 ddq dt^2, which is fine for open-loop checks but delivers
  // zero torque at equilibrium.
  void set_tracker_gains(const VecX& kp, const VecX& kd) {
    tracker_kp_ = kp;
    tracker_kd_ = kd;
  }

  // One control tick: solve the QP and emit the position target that makes
  // the downstream Stable-PD tracker reproduce the QP's torque (see tick's
  // body for the inversion). On solver failure the previous command is held.
  VecX tick(const VecX& q, const VecX& dq);

  const RobotModel& model() const { return model_; }
  const ControllerConfig& config() const { return config_; }
  const QPSolution& last_solution() const { return last_solution_; }
  const WbcProblem& last_problem() const { return last_problem_; }
  bool last_ok() const { return last_ok_; }

 private:
  RobotModel model_;
  ControllerConfig config_;
  std::vector<TaskSpec> tasks_;
  std::vector<ContactConstraint> contacts_;
  JacobianHistory history_;
  std::vector<int> warm_active_;
  QPSolution last_solution_;
  WbcProblem last_problem_;
  VecX prev_qdes_;
  VecX tracker_kp_, tracker_kd_;
  bool last_ok_ = false;
  bool urgent_ = false;
  bool hand_anchored_ = false;
  int hand_link_ = -1;
  Vec3 hand_local_ = Vec3::Zero();
  Vec3 pending_normal_ = Vec3::UnitX();
  double pending_mu_ = 1.0;
};

// Four sole corner points of a foot link, in the link frame.
std::vector<Vec3> foot_sole_points(const RobotModel& model, int foot_link);

}  // namespace dreflex
