#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dreflex/dynamics.hpp"
#include "dreflex/kinematics.hpp"
#include "dreflex/model.hpp"
#include "test_scenes.hpp"

#include <Eigen/Eigenvalues>

using namespace dreflex;
using namespace dreflex::testing;

namespace {

VecX random_config(const RobotModel& model, SplitMix64& rng) {
  VecX q = model.neutral_q();
  if (model.floating) {
    for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-1, 1);
    Quat quat(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
    quat.normalize();
    q[3] = quat.w();
    q[4] = quat.x();
    q[5] = quat.y();
    q[6] = quat.z();
  }
  const int off = model.base_nq();
  for (int j = 0; j < model.n_joints(); ++j) {
    q[off + j] = rng.uniform(model.joints[j].pos_lower, model.joints[j].pos_upper);
  }
  return q;
}

VecX random_velocity(const RobotModel& model, SplitMix64& rng, double scale = 1.0) {
  VecX dq(model.nv());
  for (int i = 0; i < model.nv(); ++i) dq[i] = scale * rng.uniform(-1, 1);
  return dq;
}

}  // namespace

TEST_CASE("model: minimal pendulum document loads") {
  RobotModel m = parse_robot_model(kPendulumDoc);
  CHECK(m.n_joints() == 1);
  CHECK(m.n_links() == 2);
  CHECK(!m.floating);
  CHECK(m.nv() == 1);
}

TEST_CASE("model: reduced humanoid document") {
  RobotModel m = load_robot_model(humanoid_path());
  CHECK(m.nv() == 21);
  CHECK(m.n_actuated() == 15);
  CHECK(m.total_mass() == doctest::Approx(100.0).epsilon(1e-9));
  // standing height: top of the head sphere
  FrameCache fk = forward_kinematics(m, [&] {
    VecX q = m.neutral_q();
    q[2] = 0.95;
    return q;
  }());
  int torso = m.link_index("torso");
  double head_top = (fk.link_pose[torso] * Vec3(0, 0, 0.54)).z() + 0.11;
  CHECK(head_top == doctest::Approx(1.75).epsilon(0.01));
}

TEST_CASE("model: negative mass rejected") {
  std::string doc = kPendulumDoc;
  auto pos = doc.find("mass = 2.0");
  doc.replace(pos, 10, "mass = -2.");
  CHECK_THROWS_AS(parse_robot_model(doc), ModelError);
}

TEST_CASE("model: non-SPD inertia rejected") {
  std::string doc = kPendulumDoc;
  auto pos = doc.find("inertia = [1e-6, 1e-6, 1e-6]");
  doc.replace(pos, 28, "inertia = [-1e-6, 1e-6, 1e-")
      .replace(doc.find("1e-\n"), 4, "6]\n");
  CHECK_THROWS_AS(parse_robot_model(doc), ModelError);
}

TEST_CASE("model: non-tree joint ordering rejected") {
  std::string doc = kTwoLinkDoc;
  // make q2 drive link1 again -> link2 unreachable
  auto pos = doc.rfind("child = \"link2\"");
  std::string bad = doc.substr(0, pos) + "child = \"link1\"" + doc.substr(pos + 15);
  CHECK_THROWS_AS(parse_robot_model(bad), ModelError);
}

TEST_CASE("fk: zero configuration gives reference poses") {
  RobotModel m = parse_robot_model(kTwoLinkDoc);
  FrameCache fk = forward_kinematics(m, VecX::Zero(2));
  CHECK((fk.link_pose[1].translation() - Vec3(0, 0, 0)).norm() == doctest::Approx(0));
  CHECK((fk.link_pose[2].translation() - Vec3(1, 0, 0)).norm() == doctest::Approx(0));
  CHECK((fk.link_pose[2].linear() - Mat3::Identity()).norm() == doctest::Approx(0));
}

TEST_CASE("fk: planar 2-link analytic position") {
  RobotModel m = parse_robot_model(kTwoLinkDoc);
  VecX q(2);
  q << M_PI / 2, 0.0;
  FrameCache fk = forward_kinematics(m, q);
  // rotation about +y by pi/2 maps +x to -z
  Vec3 tip = fk.link_pose[2] * Vec3(1, 0, 0);
  CHECK(tip.x() == doctest::Approx(0).epsilon(1e-12));
  CHECK(tip.z() == doctest::Approx(-2).epsilon(1e-12));

  q << M_PI / 4, M_PI / 4;
  fk = forward_kinematics(m, q);
  tip = fk.link_pose[2] * Vec3(1, 0, 0);
  CHECK(tip.x() == doctest::Approx(std::cos(M_PI / 4)).epsilon(1e-12));
  CHECK(tip.z() == doctest::Approx(-std::sin(M_PI / 4) - 1).epsilon(1e-12));
}

TEST_CASE("fk: child pose composes parent and joint transform") {
  RobotModel m = load_robot_model(humanoid_path());
  SplitMix64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    VecX q = random_config(m, rng);
    FrameCache fk = forward_kinematics(m, q);
    for (int j = 0; j < m.n_joints(); ++j) {
      const Joint& joint = m.joints[j];
      Iso3 x = Iso3::Identity();
      x.translation() = joint.origin;
      x.linear() = joint.frame *
                   Eigen::AngleAxisd(q[m.base_nq() + j], joint.axis).toRotationMatrix();
      Iso3 expect = fk.link_pose[joint.parent_link] * x;
      CHECK((fk.link_pose[joint.child_link].matrix() - expect.matrix()).norm() < 1e-12);
      // rigid transforms stay orthonormal
      const Mat3 R = fk.link_pose[joint.child_link].linear();
      CHECK((R * R.transpose() - Mat3::Identity()).norm() < 1e-12);
    }
  }
}

TEST_CASE("com: single link and symmetric pair") {
  RobotModel m = parse_robot_model(kPendulumDoc);
  VecX q(1);
  q << 0.3;
  FrameCache fk = forward_kinematics(m, q);
  // two links: base com at origin, bob com mass-weighted
  Vec3 c = com(m, fk);
  Vec3 expect = (1.0 * Vec3::Zero() + 2.0 * fk.link_com[1]) / 3.0;
  CHECK((c - expect).norm() < 1e-14);
}

TEST_CASE("com: humanoid matches per-link brute-force summation") {
  RobotModel m = load_robot_model(humanoid_path());
  SplitMix64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    VecX q = random_config(m, rng);
    FrameCache fk = forward_kinematics(m, q);
    Vec3 weighted = Vec3::Zero();
    for (int i = 0; i < m.n_links(); ++i)
      weighted += m.links[i].mass * (fk.link_pose[i] * m.links[i].com);
    CHECK((com(m, q) - weighted / m.total_mass()).norm() < 1e-12);
  }
}

TEST_CASE("mass matrix: point-mass pendulum is m l^2") {
  RobotModel m = parse_robot_model(kPendulumDoc);
  VecX q(1);
  q << 0.7;
  MatX M = mass_matrix(m, q);
  const double expected = kPendulumMass * kPendulumLength * kPendulumLength;
  CHECK(M(0, 0) == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("mass matrix: symmetric positive definite over random samples") {
  RobotModel m = load_robot_model(humanoid_path());
  SplitMix64 rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    VecX q = random_config(m, rng);
    MatX M = mass_matrix(m, q);
    CHECK((M - M.transpose()).norm() <= 1e-10 * M.norm());
    Eigen::SelfAdjointEigenSolver<MatX> es(M);
    CHECK(es.eigenvalues().minCoeff() > 0);
  }
}

TEST_CASE("nonlinear effects: pendulum gravity torque") {
  RobotModel m = parse_robot_model(kPendulumDoc);
  VecX q(1), dq = VecX::Zero(1);
  q << M_PI / 2;  // horizontal
  VecX F = nonlinear_effects(m, q, dq, default_gravity());
  CHECK(F[0] == doctest::Approx(kPendulumMass * 9.81 * kPendulumLength).epsilon(1e-6));

  // zero gravity, zero velocity -> zero vector
  F = nonlinear_effects(m, q, dq, Vec3::Zero());
  CHECK(F.norm() < 1e-14);
}

TEST_CASE("dynamics: forward/inverse round trip") {
  RobotModel m = load_robot_model(humanoid_path());
  SplitMix64 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    VecX q = random_config(m, rng);
    VecX dq = random_velocity(m, rng);
    VecX ddq = random_velocity(m, rng, 3.0);
    FrameCache fk = forward_kinematics(m, q);
    VecX tau = inverse_dynamics(m, fk, q, dq, ddq, default_gravity());
    VecX back = forward_dynamics(m, fk, q, dq, tau, default_gravity());
    CHECK((back - ddq).norm() <= 1e-8 * (1.0 + ddq.norm()));
  }
}

TEST_CASE("dynamics: nonlinear effects equal inverse dynamics at zero acceleration") {
  RobotModel m = load_robot_model(humanoid_path());
  SplitMix64 rng(19);
  VecX q = random_config(m, rng);
  VecX dq = random_velocity(m, rng);
  FrameCache fk = forward_kinematics(m, q);
  VecX a = nonlinear_effects(m, fk, q, dq, default_gravity());
  VecX b = inverse_dynamics(m, fk, q, dq, VecX::Zero(m.nv()), default_gravity());
  CHECK((a - b).norm() < 1e-12);
}

TEST_CASE("dynamics: zero torque, zero velocity, zero gravity is rest") {
  RobotModel m = load_robot_model(humanoid_path());
  VecX q = m.neutral_q();
  VecX qdd = forward_dynamics(m, q, VecX::Zero(m.nv()), VecX::Zero(m.nv()), Vec3::Zero());
  CHECK(qdd.norm() < 1e-10);
}

TEST_CASE("dynamics: pendulum free swing matches dt=1e-5 reference") {
  RobotModel m = parse_robot_model(kPendulumDoc);
  auto accel = [&](const VecX& q, const VecX& dq) {
    return forward_dynamics(m, q, dq, VecX::Zero(1), default_gravity());
  };
  // reference: tiny-step semi-implicit integration
  VecX qr(1), vr(1);
  qr << 0.9;
  vr << 0.0;
  const double href = 1e-5;
  for (int i = 0; i < static_cast<int>(5.0 / href); ++i) {
    vr += href * accel(qr, vr);
    qr += href * vr;
  }
  // candidate: RK4 at dt=1e-3 through the same dynamics
  VecX q(1), v(1);
  q << 0.9;
  v << 0.0;
  for (int i = 0; i < 5000; ++i) rk4_step_fixed_base(m, q, v, 1e-3, accel);
  CHECK(std::abs(q[0] - qr[0]) < 1e-4);

  // cross-check against the closed-form point-pendulum ODE
  double qa = 0.9, va = 0.0;
  for (int i = 0; i < static_cast<int>(5.0 / href); ++i) {
    va += href * (-(9.81 / kPendulumLength) * std::sin(qa));
    qa += href * va;
  }
  CHECK(std::abs(q[0] - qa) < 1e-3);
}

TEST_CASE("dynamics: double pendulum conserves energy") {
  RobotModel m = parse_robot_model(kDoublePendulumDoc);
  auto accel = [&](const VecX& q, const VecX& dq) {
    return forward_dynamics(m, q, dq, VecX::Zero(2), default_gravity());
  };
  VecX q(2), v(2);
  q << 1.2, 0.4;
  v << 0.0, 0.0;
  const double e0 = total_energy(m, q, v, default_gravity());
  for (int i = 0; i < 10000; ++i) rk4_step_fixed_base(m, q, v, 1e-3, accel);
  const double e1 = total_energy(m, q, v, default_gravity());
  CHECK(std::abs(e1 - e0) < 1e-3 * std::abs(e0));
}

TEST_CASE("jacobian: base link has zero joint columns") {
  RobotModel m = load_robot_model(humanoid_path());
  VecX q = m.neutral_q();
  Mat6X J = point_jacobian(m, q, 0, Vec3(0.1, 0.2, 0.3));
  CHECK(J.rightCols(m.n_joints()).norm() == doctest::Approx(0));
}

TEST_CASE("jacobian: planar 2-link analytic") {
  RobotModel m = parse_robot_model(kTwoLinkDoc);
  VecX q(2);
  q << 0.3, 0.5;
  // tip position: x = cos q1 + cos(q1+q2) (in xz, rotation about +y goes x->-z)
  FrameCache fk = forward_kinematics(m, q);
  Vec3 tip = fk.link_pose[2] * Vec3(1, 0, 0);
  CHECK(tip.x() == doctest::Approx(std::cos(q[0]) + std::cos(q[0] + q[1])).epsilon(1e-12));
  Mat6X J = point_jacobian_world(m, fk, 2, tip);
  // d tip_x / d q1 = -sin q1 - sin(q1+q2); d tip_z / d q1 = -cos q1 - cos(q1+q2)
  CHECK(J(0, 0) == doctest::Approx(-std::sin(q[0]) - std::sin(q[0] + q[1])).epsilon(1e-10));
  CHECK(J(2, 0) == doctest::Approx(-std::cos(q[0]) - std::cos(q[0] + q[1])).epsilon(1e-10));
  CHECK(J(0, 1) == doctest::Approx(-std::sin(q[0] + q[1])).epsilon(1e-10));
  CHECK(J(2, 1) == doctest::Approx(-std::cos(q[0] + q[1])).epsilon(1e-10));
}

TEST_CASE("jacobian: matches central finite differences") {
  RobotModel m = load_robot_model(humanoid_path());
  SplitMix64 rng(23);
  const double eps = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    VecX q = random_config(m, rng);
    const int link = static_cast<int>(rng.next_below(m.n_links()));
    const Vec3 local(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    FrameCache fk = forward_kinematics(m, q);
    Mat6X J = point_jacobian_world(m, fk, link, fk.link_pose[link] * local);
    for (int i = 0; i < m.nv(); ++i) {
      VecX dir = VecX::Zero(m.nv());
      dir[i] = 1.0;
      VecX qp = integrate_q(m, q, dir, eps);
      VecX qm = integrate_q(m, q, -dir, eps);
      Vec3 pp = forward_kinematics(m, qp).link_pose[link] * local;
      Vec3 pm = forward_kinematics(m, qm).link_pose[link] * local;
      Vec3 fd = (pp - pm) / (2 * eps);
      CHECK((J.col(i).head<3>() - fd).norm() < 1e-6);
    }
  }
}

TEST_CASE("jacobian: J dq equals point velocity") {
  RobotModel m = load_robot_model(humanoid_path());
  SplitMix64 rng(29);
  VecX q = random_config(m, rng);
  VecX dq = random_velocity(m, rng);
  FrameCache fk = forward_kinematics(m, q);
  const int link = m.link_index("right_forearm");
  const Vec3 p = fk.link_pose[link] * Vec3(0, 0, -0.34);
  Mat6X J = point_jacobian_world(m, fk, link, p);
  Vec3 v = point_velocity(m, fk, link, p, dq);
  CHECK(((J * dq).head<3>() - v).norm() < 1e-12);
}

TEST_CASE("energy: humanoid free fall in vacuum conserves energy") {
  RobotModel m = load_robot_model(humanoid_path());
  SplitMix64 rng(31);
  VecX q = random_config(m, rng);
  q.head<3>() << 0, 0, 50.0;  // far above the floor, no contacts
  VecX dq = random_velocity(m, rng, 0.5);
  const double e0 = total_energy(m, q, dq, default_gravity());
  const double dt = 2e-4;
  for (int i = 0; i < 5000; ++i) {  // 1 s
    VecX qdd = forward_dynamics(m, q, dq, VecX::Zero(m.nv()), default_gravity());
    dq += dt * qdd;
    q = integrate_q(m, q, dq, dt);
  }
  const double e1 = total_energy(m, q, dq, default_gravity());
  CHECK(std::abs(e1 - e0) < 1e-2 * std::abs(e0));
}
