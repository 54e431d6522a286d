#include "dreflex/wbc.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dreflex {

namespace {

// Orthonormal tangent basis around a unit normal.
void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
  const Vec3 a = std::abs(n.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  t1 = n.cross(a).normalized();
  t2 = n.cross(t1);
}

Vec3 rotation_error(const Mat3& target, const Mat3& current) {
  const Eigen::AngleAxisd aa(target * current.transpose());
  return aa.angle() * aa.axis();
}

MatX jdot_from_history(JacobianHistory* history, const std::string& key, const MatX& J,
                       double dt) {
  if (!history) return MatX::Zero(J.rows(), J.cols());
  MatX jdot = MatX::Zero(J.rows(), J.cols());
  auto it = history->by_key.find(key);
  if (it != history->by_key.end() && it->second.rows() == J.rows() &&
      it->second.cols() == J.cols()) {
    jdot = (J - it->second) / dt;
  }
  history->by_key[key] = J;
  return jdot;
}

}  // namespace

void task_rows(const RobotModel& model, const FrameCache& fk, const VecX& q, const VecX& dq,
               const TaskSpec& task, double dt, const MatX* prev_J, MatX& A, VecX& b,
               MatX& J_out) {
  const int nv = model.nv();
  switch (task.kind) {
    case TaskKind::Posture: {
      const int na = model.n_actuated();
      A = MatX::Zero(na, nv);
      b = VecX::Zero(na);
      for (int i = 0; i < na; ++i) {
        const int j = model.actuated[i];
        A(i, model.base_nv() + j) = 1.0;
        const double qi = q[model.base_nq() + j];
        const double dqi = dq[model.base_nv() + j];
        b[i] = task.kp * (task.target_posture[i] - qi) - task.kd * dqi;
      }
      J_out = A;
      return;
    }
    case TaskKind::ComPosition: {
      const MatX J = com_jacobian(model, fk);
      const Vec3 c = com(model, fk);
      const Vec3 v = J * dq;
      MatX jdot = MatX::Zero(3, nv);
      if (prev_J && prev_J->rows() == 3 && prev_J->cols() == nv) jdot = (J - *prev_J) / dt;
      A = J;
      b = task.kp * (task.target_point - c) - task.kd * v - jdot * dq;
      J_out = J;
      return;
    }
    case TaskKind::CartesianPosition: {
      const Vec3 p = fk.link_pose[task.link] * task.local_point;
      const Mat6X J6 = point_jacobian_world(model, fk, task.link, p);
      const MatX J = J6.topRows(3);
      const Vec3 v = J * dq;
      MatX jdot = MatX::Zero(3, nv);
      if (prev_J && prev_J->rows() == 3 && prev_J->cols() == nv) jdot = (J - *prev_J) / dt;
      A = J;
      b = task.kp * (task.target_point - p) - task.kd * v - jdot * dq;
      J_out = J;
      return;
    }
    case TaskKind::CartesianOrientation: {
      const Vec3 p = fk.link_pose[task.link].translation();
      const Mat6X J6 = point_jacobian_world(model, fk, task.link, p);
      const MatX J = J6.bottomRows(3);
      const Vec3 w = J * dq;
      MatX jdot = MatX::Zero(3, nv);
      if (prev_J && prev_J->rows() == 3 && prev_J->cols() == nv) jdot = (J - *prev_J) / dt;
      A = J;
      b = task.kp * rotation_error(task.target_rot, fk.link_pose[task.link].rotation()) -
          task.kd * w - jdot * dq;
      J_out = J;
      return;
    }
  }
  throw std::logic_error("task_rows: unknown task kind");
}

WbcProblem assemble_qp(const RobotModel& model, const FrameCache& fk, const VecX& q,
                       const VecX& dq, const MatX& M, const VecX& nonlinear,
                       const std::vector<TaskSpec>& tasks,
                       const std::vector<ContactConstraint>& contacts,
                       const ControllerConfig& cfg, JacobianHistory* history) {
  bool has_posture = false;
  for (const TaskSpec& t : tasks)
    if (t.kind == TaskKind::Posture) {
      if (has_posture) throw std::invalid_argument("assemble_qp: duplicate posture task");
      has_posture = true;
    }
  if (!has_posture) throw std::invalid_argument("assemble_qp: posture task required");

  WbcProblem p;
  p.nv = model.nv();
  p.na = model.n_actuated();
  p.nc = static_cast<int>(contacts.size());
  const int nv = p.nv, na = p.na, nc = p.nc;
  const int n = nv + na + 3 * nc;

  QPProblem& qp = p.qp;
  qp.H = MatX::Zero(n, n);
  qp.g = VecX::Zero(n);
  qp.H.diagonal().head(nv).array() += cfg.reg_ddq;
  qp.H.diagonal().segment(nv, na).array() += cfg.reg_tau;
  qp.H.diagonal().tail(3 * nc).array() += cfg.reg_lambda;

  MatX A_t;
  VecX b_t;
  MatX J_store;
  for (const TaskSpec& t : tasks) {
    MatX* prev = nullptr;
    const std::string key = "t:" + t.name;
    if (history) {
      auto it = history->by_key.find(key);
      if (it != history->by_key.end()) prev = &it->second;
    }
    task_rows(model, fk, q, dq, t, cfg.dt, prev, A_t, b_t, J_store);
    if (history) history->by_key[key] = J_store;
    qp.H.topLeftCorner(nv, nv).noalias() += t.weight * A_t.transpose() * A_t;
    qp.g.head(nv).noalias() -= t.weight * A_t.transpose() * b_t;
  }

  // zero-acceleration condition per contacted body, added to the cost with a
  // dominant weight rather than as a hard equality: a hard version becomes
  // infeasible together with the friction cone whenever holding a contact
  // would need a pulling force (tipping foot), exactly when the controller
  // must keep producing commands. A single contact point pins its point
  // acceleration (3 rows); a body with several points (a foot sole) pins its
  // frame acceleration instead (6 rows) -- per-point constraints on one rigid
  // body are inconsistent once the body has angular velocity. The Jdot*dq
  // terms are exact bias accelerations for the same reason.
  std::vector<int> group_link;       // contacted links, first-occurrence order
  std::vector<int> group_size;
  std::vector<int> group_first;      // index of the link's first contact
  for (int k = 0; k < nc; ++k) {
    bool found = false;
    for (size_t gi = 0; gi < group_link.size(); ++gi)
      if (group_link[gi] == contacts[k].link) {
        ++group_size[gi];
        found = true;
      }
    if (!found) {
      group_link.push_back(contacts[k].link);
      group_size.push_back(1);
      group_first.push_back(k);
    }
  }
  for (size_t gi = 0; gi < group_link.size(); ++gi) {
    const ContactConstraint& c = contacts[group_first[gi]];
    const Vec3 wp = fk.link_pose[c.link] * c.local_point;
    const Mat6X J6 = point_jacobian_world(model, fk, c.link, wp);
    const Vec6 bias = spatial_acceleration_bias(model, fk, c.link, wp, dq);
    const int rows = group_size[gi] > 1 ? 6 : 3;
    const auto Jc = J6.topRows(rows);
    qp.H.topLeftCorner(nv, nv).noalias() += cfg.w_contact * Jc.transpose() * Jc;
    qp.g.head(nv).noalias() += cfg.w_contact * Jc.transpose() * bias.head(rows);
  }

  // equalities: the nv dynamics rows only (always consistent -- the base
  // acceleration is unconstrained, so any lambda admits a solution)
  const int m_eq = nv;
  qp.A_eq = MatX::Zero(m_eq, n);
  qp.b_eq = VecX::Zero(m_eq);
  qp.A_eq.topLeftCorner(nv, nv) = M;
  for (int i = 0; i < na; ++i) qp.A_eq(model.base_nv() + model.actuated[i], nv + i) = -1.0;
  qp.b_eq.head(nv) = -nonlinear;
  for (int k = 0; k < nc; ++k) {
    const ContactConstraint& c = contacts[k];
    const Vec3 wp = fk.link_pose[c.link] * c.local_point;
    const Mat6X J6 = point_jacobian_world(model, fk, c.link, wp);
    qp.A_eq.block(0, nv + na + 3 * k, nv, 3) = -J6.topRows(3).transpose();
  }

  // inequalities: 5 pyramid rows per contact, then per actuated joint a
  // torque pair and one acceleration box folding in the acceleration cap and
  // the velocity/position preview bounds
  const int m_in = 5 * nc + 4 * na;
  qp.A_in = MatX::Zero(m_in, n);
  qp.b_in = VecX::Zero(m_in);
  int r = 0;
  for (int k = 0; k < nc; ++k) {
    const ContactConstraint& c = contacts[k];
    Vec3 t1, t2;
    tangent_basis(c.normal, t1, t2);
    const int col = nv + na + 3 * k;
    auto facet = [&](const Vec3& dir) {
      qp.A_in.row(r).segment(col, 3) = (dir - c.mu * c.normal).transpose();
      qp.b_in[r++] = 0.0;
    };
    facet(t1);
    facet(-t1);
    facet(t2);
    facet(-t2);
    qp.A_in.row(r).segment(col, 3) = (-c.normal).transpose();
    qp.b_in[r++] = 0.0;
  }
  const double h = cfg.bounds_dt;
  for (int i = 0; i < na; ++i) {
    const int j = model.actuated[i];
    const Joint& joint = model.joints[j];
    const int vcol = model.base_nv() + j;
    const double qi = q[model.base_nq() + j];
    const double dqi = dq[vcol];
    auto pair = [&](int col, double hi, double lo) {
      qp.A_in(r, col) = 1.0;
      qp.b_in[r++] = hi;
      qp.A_in(r, col) = -1.0;
      qp.b_in[r++] = -lo;
    };
    pair(nv + i, joint.torque_limit, -joint.torque_limit);
    // acceleration box: position preview clipped into the cap, then the
    // velocity preview clipped into that (and skipped outright if the two
    // conflict, e.g. after a velocity overshoot near a stop) -- the box is
    // nonempty by construction, which keeps the QP feasible when the plant
    // strays outside its limits
    double lo = std::clamp(2.0 * (joint.pos_lower - qi - dqi * h) / (h * h), -cfg.ddq_max,
                           cfg.ddq_max);
    double hi = std::clamp(2.0 * (joint.pos_upper - qi - dqi * h) / (h * h), lo, cfg.ddq_max);
    const double vlo = std::clamp((-joint.vel_limit - dqi) / h, lo, hi);
    const double vhi = std::clamp((joint.vel_limit - dqi) / h, lo, hi);
    if (vlo <= vhi) {
      lo = vlo;
      hi = vhi;
    }
    pair(vcol, hi, lo);
  }
  return p;
}

std::vector<Vec3> foot_sole_points(const RobotModel& model, int foot_link) {
  const Link& link = model.links[foot_link];
  if (link.boxes.empty()) throw std::invalid_argument("foot_sole_points: link has no box");
  const BoxPrimitive& box = link.boxes[0];
  std::vector<Vec3> pts;
  for (double sx : {-1.0, 1.0})
    for (double sy : {-1.0, 1.0}) {
      const Vec3 local(sx * box.half_extents.x(), sy * box.half_extents.y(),
                       -box.half_extents.z());
      pts.push_back(box.center + box.rot * local);
    }
  return pts;
}

WholeBodyController::WholeBodyController(RobotModel model, ControllerConfig cfg)
    : model_(std::move(model)), config_(cfg) {}

TaskSpec* WholeBodyController::find_task(const std::string& name) {
  for (TaskSpec& t : tasks_)
    if (t.name == name) return &t;
  return nullptr;
}

void WholeBodyController::set_standing_tasks(const VecX& q, double floor_mu) {
  const FrameCache fk = forward_kinematics(model_, q);
  tasks_.clear();
  contacts_.clear();
  urgent_ = false;
  hand_anchored_ = false;

  TaskSpec posture;
  posture.kind = TaskKind::Posture;
  posture.name = "posture";
  posture.weight = config_.w_posture;
  posture.kp = config_.posture_kp;
  posture.kd = config_.posture_kd;
  posture.target_posture.resize(model_.n_actuated());
  for (int i = 0; i < model_.n_actuated(); ++i)
    posture.target_posture[i] = q[model_.base_nq() + model_.actuated[i]];
  tasks_.push_back(posture);

  TaskSpec com_task;
  com_task.kind = TaskKind::ComPosition;
  com_task.name = "com";
  com_task.weight = config_.w_com;
  com_task.kp = config_.com_kp;
  com_task.kd = config_.com_kd;
  com_task.target_point = com(model_, fk);
  tasks_.push_back(com_task);

  const auto maybe_link = [this](const std::string& name) {
    for (int i = 0; i < model_.n_links(); ++i)
      if (model_.links[i].name == name) return i;
    return -1;  // amputated
  };
  for (const char* side : {"left", "right"}) {
    const int hand = maybe_link(std::string(side) + "_forearm");
    if (hand < 0) continue;
    TaskSpec t;
    t.kind = TaskKind::CartesianPosition;
    t.name = std::string(side) + "_hand";
    t.link = hand;
    t.local_point = model_.links[hand].spheres.at(0).center;
    t.target_point = fk.link_pose[hand] * t.local_point;
    t.weight = config_.w_hand;
    t.kp = config_.task_kp;
    t.kd = config_.task_kd;
    tasks_.push_back(t);

    const int foot = maybe_link(std::string(side) + "_foot");
    if (foot < 0) continue;
    TaskSpec o;
    o.kind = TaskKind::CartesianOrientation;
    o.name = std::string(side) + "_foot_orientation";
    o.link = foot;
    o.target_rot = fk.link_pose[foot].rotation();
    o.weight = config_.w_foot_orientation;
    o.kp = config_.task_kp;
    o.kd = config_.task_kd;
    tasks_.push_back(o);

    for (const Vec3& pt : foot_sole_points(model_, foot)) {
      ContactConstraint c;
      c.link = foot;
      c.local_point = pt;
      c.normal = Vec3::UnitZ();
      c.mu = floor_mu;
      contacts_.push_back(c);
    }
  }
  history_.by_key.clear();
  warm_active_.clear();
  prev_qdes_.resize(0);
}

void WholeBodyController::enter_urgent_mode() {
  std::vector<TaskSpec> kept;
  for (TaskSpec& t : tasks_) {
    if (t.name == "com" || t.name == "posture" || t.name == "hand") kept.push_back(std::move(t));
  }
  tasks_ = std::move(kept);
  urgent_ = true;
}

void WholeBodyController::set_hand_contact_target(const WallPlane& wall, double x, double y,
                                                  int hand_link) {
  hand_link_ = hand_link;
  hand_local_ = model_.links[hand_link].spheres.at(0).center;
  pending_normal_ = wall.normal;
  pending_mu_ = wall.friction;
  const Vec3 target = wall.grid_to_world(x, y);
  TaskSpec* t = find_task("hand");
  if (!t) {
    TaskSpec hand;
    hand.kind = TaskKind::CartesianPosition;
    hand.name = "hand";
    tasks_.push_back(hand);
    t = &tasks_.back();
  }
  if (t->frozen) return;  // anchored: command stays where contact happened
  t->kind = TaskKind::CartesianPosition;
  t->link = hand_link;
  t->local_point = hand_local_;
  t->target_point = target;
  t->weight = config_.w_hand_urgent;
  t->kp = config_.task_kp;
  t->kd = config_.task_kd;
}

void WholeBodyController::update_contact_anchor(const Vec3& measured_hand_point,
                                                double normal_force) {
  if (hand_anchored_ || hand_link_ < 0) return;
  if (normal_force <= config_.contact_force_threshold) return;
  ContactConstraint c;
  c.link = hand_link_;
  c.local_point = hand_local_;
  c.normal = pending_normal_;
  c.mu = pending_mu_;
  contacts_.push_back(c);
  if (TaskSpec* t = find_task("hand")) {
    t->target_point = measured_hand_point;
    t->frozen = true;
  }
  hand_anchored_ = true;
  warm_active_.clear();  // inequality layout shifted by the new pyramid rows
}

VecX WholeBodyController::tick(const VecX& q, const VecX& dq) {
  const FrameCache fk = forward_kinematics(model_, q);
  const MatX M = mass_matrix(model_, fk);
  const VecX F = nonlinear_effects(model_, fk, q, dq, default_gravity());
  last_problem_ = assemble_qp(model_, fk, q, dq, M, F, tasks_, contacts_, config_, &history_);
  last_solution_ = solve_qp(last_problem_.qp, config_.qp_tol, config_.qp_max_iterations,
                            warm_active_.empty() ? nullptr : &warm_active_);
  last_ok_ = last_solution_.status != QPStatus::Infeasible && last_solution_.x.size() > 0 &&
             last_solution_.x.allFinite();
  const int na = model_.n_actuated();
  if (!last_ok_) {
    if (prev_qdes_.size() != na) {
      prev_qdes_.resize(na);
      for (int i = 0; i < na; ++i) prev_qdes_[i] = q[model_.base_nq() + model_.actuated[i]];
    }
    return prev_qdes_;
  }
  warm_active_ = last_solution_.active;
  const double dt = config_.dt;
  const bool torque_consistent = tracker_kp_.size() == na;
  VecX qdes(na);
  for (int i = 0; i < na; ++i) {
    const int j = model_.actuated[i];
    const Joint& joint = model_.joints[j];
    const double ddq = last_solution_.x[model_.base_nv() + j];
    const double qi = q[model_.base_nq() + j];
    const double dqi = dq[model_.base_nv() + j];
    if (torque_consistent) {
      // Invert the Stable-PD law so the tracker delivers the QP torque:
      //   tau = -kp (q + dt dq - q_des) - kd dq - dt kd qdd_hat
      // solved for q_des with tau = tau* and qdd_hat = the QP's own ddq*.
      // The offset (tau*/kp at rest) is what holds gravity: a target built
      // from the kinematic prediction alone commands zero torque at
      // equilibrium and can never keep the robot upright.
      const double tau = last_solution_.x[model_.nv() + i];
      qdes[i] = qi + dt * dqi +
                (tau + tracker_kd_[i] * dqi + dt * tracker_kd_[i] * ddq) / tracker_kp_[i];
    } else {
      qdes[i] = qi + dt * dqi + 0.5 * ddq * dt * dt;
    }
    qdes[i] = std::clamp(qdes[i], joint.pos_lower, joint.pos_upper);
  }
  prev_qdes_ = qdes;
  return qdes;
}

}  // namespace dreflex
