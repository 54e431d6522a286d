#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dreflex/sim.hpp"
#include "dreflex/wbc.hpp"

#include "test_scenes.hpp"

#include <cmath>

using namespace dreflex;
using namespace dreflex::testing;

namespace {

RobotModel humanoid() { return load_robot_model(humanoid_path()); }

VecX standing_q(const RobotModel& m) {
  VecX q = m.neutral_q();
  q[2] = 0.95;  // soles on the floor
  return q;
}

WholeBodyController standing_controller(const RobotModel& m) {
  WholeBodyController wbc(m, ControllerConfig{});
  wbc.set_standing_tasks(standing_q(m));
  return wbc;
}

WallPlane test_wall() {
  WallPlane w;
  w.point = Vec3(0.6, 0.0, 1.3);
  w.normal = Vec3(-1, 0, 0);
  w.horizontal = Vec3(0, -1, 0);
  w.friction = 1.0;
  return w;
}

}  // namespace

TEST_CASE("posture task rows are an actuated-joint selector with PD bias") {
  const RobotModel m = humanoid();
  const VecX q = standing_q(m);
  VecX dq = VecX::Zero(m.nv());
  dq[m.base_nv() + 3] = 0.5;
  const FrameCache fk = forward_kinematics(m, q);
  TaskSpec t;
  t.kind = TaskKind::Posture;
  t.kp = 100;
  t.kd = 20;
  t.target_posture = VecX::Zero(m.n_actuated());
  t.target_posture[3] = 0.2;
  MatX A, J;
  VecX b;
  task_rows(m, fk, q, dq, t, 1e-3, nullptr, A, b, J);
  REQUIRE(A.rows() == m.n_actuated());
  REQUIRE(A.cols() == m.nv());
  for (int i = 0; i < m.n_actuated(); ++i) {
    CHECK(A.row(i).sum() == doctest::Approx(1.0));
    CHECK(A(i, m.base_nv() + m.actuated[i]) == doctest::Approx(1.0));
  }
  // joint 3 is 0.2 rad from target and moving at 0.5 rad/s
  CHECK(b[3] == doctest::Approx(100 * 0.2 - 20 * 0.5));
  CHECK(b[0] == doctest::Approx(0.0));
}

TEST_CASE("com task at its target with zero velocity has zero bias") {
  const RobotModel m = humanoid();
  const VecX q = standing_q(m);
  const VecX dq = VecX::Zero(m.nv());
  const FrameCache fk = forward_kinematics(m, q);
  TaskSpec t;
  t.kind = TaskKind::ComPosition;
  t.target_point = com(m, fk);
  MatX A, J;
  VecX b;
  task_rows(m, fk, q, dq, t, 1e-3, nullptr, A, b, J);
  CHECK(b.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((A - MatX(com_jacobian(m, fk))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hand task rows equal the point jacobian") {
  const RobotModel m = humanoid();
  const VecX q = standing_q(m);
  const VecX dq = VecX::Zero(m.nv());
  const FrameCache fk = forward_kinematics(m, q);
  const int hand = m.link_index("left_forearm");
  TaskSpec t;
  t.kind = TaskKind::CartesianPosition;
  t.link = hand;
  t.local_point = m.links[hand].spheres[0].center;
  t.target_point = Vec3(0.5, 0.2, 1.2);
  MatX A, J;
  VecX b;
  task_rows(m, fk, q, dq, t, 1e-3, nullptr, A, b, J);
  const Vec3 wp = fk.link_pose[hand] * t.local_point;
  const MatX expected = point_jacobian_world(m, fk, hand, wp).topRows(3);
  CHECK((A - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("posture-only problem reduces to a weighted identity on the ddq block") {
  const RobotModel m = humanoid();
  const VecX q = standing_q(m);
  const VecX dq = VecX::Zero(m.nv());
  const FrameCache fk = forward_kinematics(m, q);
  const MatX M = mass_matrix(m, fk);
  const VecX F = nonlinear_effects(m, fk, q, dq, default_gravity());
  std::vector<TaskSpec> tasks(1);
  tasks[0].kind = TaskKind::Posture;
  tasks[0].weight = 2.5;
  tasks[0].target_posture = VecX::Zero(m.n_actuated());
  ControllerConfig cfg;
  const WbcProblem p = assemble_qp(m, fk, q, dq, M, F, tasks, {}, cfg);
  for (int i = 0; i < m.n_actuated(); ++i) {
    const int v = m.base_nv() + m.actuated[i];
    CHECK(p.qp.H(v, v) == doctest::Approx(2.5 + cfg.reg_ddq));
  }
  for (int v = 0; v < m.base_nv(); ++v)
    CHECK(p.qp.H(v, v) == doctest::Approx(cfg.reg_ddq));
}

TEST_CASE("double support stance contributes eight contact points") {
  const RobotModel m = humanoid();
  WholeBodyController wbc = standing_controller(m);
  CHECK(wbc.contacts().size() == 8);
  CHECK(wbc.tasks().size() == 6);
  const VecX q = standing_q(m);
  const VecX dq = VecX::Zero(m.nv());
  const FrameCache fk = forward_kinematics(m, q);
  const MatX M = mass_matrix(m, fk);
  const VecX F = nonlinear_effects(m, fk, q, dq, default_gravity());
  const WbcProblem p =
      assemble_qp(m, fk, q, dq, M, F, wbc.tasks(), wbc.contacts(), wbc.config());
  // contact conditions live in the cost; only the dynamics rows are equalities
  CHECK(p.qp.A_eq.rows() == m.nv());
  CHECK(p.nc == 8);
}

TEST_CASE("standing solution matches the inverse-dynamics gravity oracle") {
  const RobotModel m = humanoid();
  WholeBodyController wbc = standing_controller(m);
  const VecX q = standing_q(m);
  const VecX dq = VecX::Zero(m.nv());
  wbc.tick(q, dq);
  REQUIRE(wbc.last_ok());
  const QPSolution& sol = wbc.last_solution();
  const WbcProblem& p = wbc.last_problem();
  // static setpoint: accelerations essentially zero (the soft contact cost
  // leaves a small residual against the task terms)
  CHECK(sol.x.head(p.nv).cwiseAbs().maxCoeff() < 0.05);
  // contact normals support the full weight
  const FrameCache fk = forward_kinematics(m, q);
  double fz = 0;
  std::vector<ExternalWrench> wrenches;
  int ci = 0;
  for (const ContactConstraint& c : wbc.contacts()) {
    const Vec3 f = sol.x.segment(p.nv + p.na + 3 * ci, 3);
    fz += f.z();
    ExternalWrench w;
    w.link = c.link;
    w.world_point = fk.link_pose[c.link] * c.local_point;
    w.force = f;
    wrenches.push_back(w);
    ++ci;
  }
  CHECK(fz == doctest::Approx(m.total_mass() * 9.81).epsilon(2e-3));
  // torques agree with inverse dynamics under the solved contact forces
  const VecX ddq = sol.x.head(p.nv);
  const VecX tau_id =
      inverse_dynamics(m, fk, q, dq, ddq, default_gravity(), wrenches);
  for (int i = 0; i < p.na; ++i) {
    const double tau_qp = sol.x[p.nv + i];
    CHECK(std::abs(tau_qp - tau_id[m.base_nv() + m.actuated[i]]) < 1e-4);
  }
}

TEST_CASE("tick at the setpoint commands almost no motion") {
  const RobotModel m = humanoid();
  WholeBodyController wbc = standing_controller(m);
  const VecX q = standing_q(m);
  const VecX dq = VecX::Zero(m.nv());
  const VecX q_des = wbc.tick(q, dq);
  REQUIRE(wbc.last_ok());
  for (int i = 0; i < m.n_actuated(); ++i)
    CHECK(std::abs(q_des[i] - q[m.base_nq() + m.actuated[i]]) < 1e-6);
}

TEST_CASE("closed loop: standing for five seconds, support equals weight") {
  const RobotModel m = humanoid();
  World world;
  const SpdGains gains = JointGroupGains{}.expand(m);
  Simulator sim(m, world, gains, 1e-3);
  WholeBodyController wbc = standing_controller(m);
  wbc.set_tracker_gains(gains.kp, gains.kd);
  SimState s;
  s.q = standing_q(m);
  s.dq = VecX::Zero(m.nv());
  double force_accum = 0;
  int force_samples = 0;
  for (int step = 0; step < 5000; ++step) {
    const VecX q_des = wbc.tick(s.q, s.dq);
    sim.step(s, q_des);
    REQUIRE(!sim.diverged());
    if (step >= 1000) {
      double fz = 0;
      for (const ContactForce& f : sim.last_forces()) fz += f.wrench.force.z();
      force_accum += fz;
      ++force_samples;
    }
  }
  // still upright
  CHECK(s.q[2] > 0.9);
  CHECK(s.dq.cwiseAbs().maxCoeff() < 0.05);
  const double mean_fz = force_accum / force_samples;
  CHECK(mean_fz == doctest::Approx(m.total_mass() * 9.81).epsilon(0.01));
}

TEST_CASE("closed loop: com tracks a 5 cm forward target inside two seconds") {
  const RobotModel m = humanoid();
  World world;
  const SpdGains gains = JointGroupGains{}.expand(m);
  Simulator sim(m, world, gains, 1e-3);
  WholeBodyController wbc = standing_controller(m);
  wbc.set_tracker_gains(gains.kp, gains.kd);
  SimState s;
  s.q = standing_q(m);
  s.dq = VecX::Zero(m.nv());
  const Vec3 target = com(m, s.q) + Vec3(0.05, 0, 0);
  wbc.find_task("com")->target_point = target;
  double err_half = 0, err_one = 0;
  for (int step = 0; step < 2000; ++step) {
    const VecX q_des = wbc.tick(s.q, s.dq);
    sim.step(s, q_des);
    REQUIRE(!sim.diverged());
    const double err = (com(m, s.q) - target).head<2>().norm();
    if (step == 499) err_half = err;
    if (step == 999) err_one = err;
  }
  const double err_final = (com(m, s.q) - target).head<2>().norm();
  CHECK(err_half < 0.05);
  CHECK(err_one < err_half);
  CHECK(err_final < 0.01);
}

TEST_CASE("urgent mode keeps only com and posture tasks, untouched com target") {
  const RobotModel m = humanoid();
  WholeBodyController wbc = standing_controller(m);
  REQUIRE(wbc.tasks().size() == 6);
  const Vec3 com_before = wbc.find_task("com")->target_point;
  const size_t contacts_before = wbc.contacts().size();
  wbc.enter_urgent_mode();
  CHECK(wbc.tasks().size() == 2);
  CHECK(wbc.find_task("com") != nullptr);
  CHECK(wbc.find_task("posture") != nullptr);
  CHECK(wbc.find_task("com")->target_point == com_before);
  CHECK(wbc.contacts().size() == contacts_before);
  wbc.enter_urgent_mode();  // idempotent
  CHECK(wbc.tasks().size() == 2);

  // hand target added afterwards survives re-entry
  wbc.set_hand_contact_target(test_wall(), 0.1, 0.2, m.link_index("left_forearm"));
  CHECK(wbc.find_task("hand") != nullptr);
  wbc.enter_urgent_mode();
  CHECK(wbc.tasks().size() == 3);
  CHECK(wbc.find_task("hand") != nullptr);
}

TEST_CASE("hand target maps the wall grid frame to world") {
  const RobotModel m = humanoid();
  WholeBodyController wbc = standing_controller(m);
  const WallPlane wall = test_wall();
  wbc.enter_urgent_mode();
  wbc.set_hand_contact_target(wall, 0.0, 0.0, m.link_index("left_forearm"));
  CHECK((wbc.find_task("hand")->target_point - wall.point).norm() < 1e-12);
  wbc.set_hand_contact_target(wall, 0.25, -0.1, m.link_index("left_forearm"));
  const Vec3 expected = wall.point + 0.25 * wall.horizontal + Vec3(0, 0, -0.1);
  CHECK((wbc.find_task("hand")->target_point - expected).norm() < 1e-12);
}

TEST_CASE("contact anchor freezes at the measured point, not the commanded one") {
  const RobotModel m = humanoid();
  WholeBodyController wbc = standing_controller(m);
  wbc.enter_urgent_mode();
  wbc.set_hand_contact_target(test_wall(), 0.0, 0.0, m.link_index("left_forearm"));
  const size_t contacts_before = wbc.contacts().size();

  // below threshold: nothing happens
  wbc.update_contact_anchor(Vec3(0.6, 0.04, 1.26), 2.0);
  CHECK(!wbc.hand_anchored());
  CHECK(wbc.contacts().size() == contacts_before);

  // above threshold: anchored at the measured point, 4 cm off the command
  const Vec3 measured(0.6, 0.04, 1.3);
  wbc.update_contact_anchor(measured, 20.0);
  CHECK(wbc.hand_anchored());
  CHECK(wbc.contacts().size() == contacts_before + 1);
  CHECK((wbc.find_task("hand")->target_point - measured).norm() < 1e-12);
  CHECK(wbc.find_task("hand")->frozen);

  // command stays constant afterwards: retargeting is a no-op
  wbc.set_hand_contact_target(test_wall(), -0.3, 0.5, m.link_index("left_forearm"));
  CHECK((wbc.find_task("hand")->target_point - measured).norm() < 1e-12);
  wbc.update_contact_anchor(Vec3(0.6, -0.2, 1.1), 50.0);
  CHECK(wbc.contacts().size() == contacts_before + 1);
}

TEST_CASE("intact internal model tolerates a damaged plant") {
  const RobotModel m = humanoid();
  DamageSpec spec;
  spec.leg = Side::Left;
  spec.joints["left_knee_pitch"] = DamageCondition::Passive;
  VecX q0 = standing_q(m);
  const DamagedRobot damaged = apply_damage(m, spec, q0);

  World world;
  const SpdGains gains = JointGroupGains{}.expand(damaged.model);
  Simulator sim(damaged.model, world, gains, 1e-3);
  WholeBodyController wbc = standing_controller(m);  // intact internal model
  SpdGains intact_gains = JointGroupGains{}.expand(m);
  wbc.set_tracker_gains(intact_gains.kp, intact_gains.kd);
  SimState s;
  s.q = damaged.map_q(q0);
  s.dq = VecX::Zero(damaged.model.nv());
  for (int step = 0; step < 300; ++step) {
    const VecX q_intact = damaged.lift_q(s.q);
    const VecX dq_intact = damaged.lift_dq(s.dq);
    const VecX qdes_intact = wbc.tick(q_intact, dq_intact);
    REQUIRE(qdes_intact.allFinite());
    // map intact actuated commands onto the damaged robot's actuated joints
    VecX q_des(damaged.model.n_actuated());
    for (int i = 0; i < damaged.model.n_actuated(); ++i) {
      const int dj = damaged.model.actuated[i];
      const int ij = damaged.damaged_to_intact_joint[dj];
      for (int k = 0; k < m.n_actuated(); ++k)
        if (m.actuated[k] == ij) q_des[i] = qdes_intact[k];
    }
    sim.step(s, q_des, damaged.passive);
    REQUIRE(!sim.diverged());
  }
}

TEST_CASE("wbc solutions are deterministic") {
  const RobotModel m = humanoid();
  const VecX q = standing_q(m);
  const VecX dq = VecX::Zero(m.nv());
  WholeBodyController a = standing_controller(m);
  WholeBodyController b = standing_controller(m);
  const VecX qa = a.tick(q, dq);
  const VecX qb = b.tick(q, dq);
  for (int i = 0; i < qa.size(); ++i) CHECK(qa[i] == qb[i]);
}
