#include "dreflex/episode.hpp"

#include <cmath>

namespace dreflex {

namespace {

int link_index_or(const RobotModel& model, const std::string& name) {
  for (int i = 0; i < model.n_links(); ++i)
    if (model.links[i].name == name) return i;
  return -1;
}

std::vector<int> foot_links_of(const RobotModel& model) {
  std::vector<int> out;
  for (const char* n : {"left_foot", "right_foot"}) {
    const int i = link_index_or(model, n);
    if (i >= 0) out.push_back(i);
  }
  return out;
}

double base_yaw(const VecX& q) {
  // wxyz quaternion
  const double w = q[3], x = q[4], y = q[5], z = q[6];
  return std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
}

}  // namespace

VecX standing_pose(const RobotModel& model) {
  VecX q = model.neutral_q();
  // drop the base until the lowest collision point sits on the floor
  const FrameCache fk = forward_kinematics(model, q);
  double lowest = 0.0;
  for (int i = 0; i < model.n_links(); ++i) {
    for (const SpherePrimitive& s : model.links[i].spheres)
      lowest = std::min(lowest, (fk.link_pose[i] * s.center).z() - s.radius);
    for (const BoxPrimitive& b : model.links[i].boxes)
      for (int c = 0; c < 8; ++c) {
        const Vec3 local((c & 1) ? b.half_extents.x() : -b.half_extents.x(),
                         (c & 2) ? b.half_extents.y() : -b.half_extents.y(),
                         (c & 4) ? b.half_extents.z() : -b.half_extents.z());
        lowest = std::min(lowest, (fk.link_pose[i] * (b.center + b.rot * local)).z());
      }
  }
  q[2] -= lowest;
  return q;
}

Vec3 hand_point(const RobotModel& model, const FrameCache& fk, int hand_link) {
  return fk.link_pose[hand_link] * model.links[hand_link].spheres.at(0).center;
}

WallPlane episode_wall(const RobotModel& model, const WallConfig& cfg, const VecX& q_trigger,
                       Side damaged_side) {
  (void)model;
  // wall on the damaged side (+x forward, +y left in the base frame); grid
  // origin anchored at the trigger-time base height
  const double side_yaw =
      base_yaw(q_trigger) + (damaged_side == Side::Right ? -1.0 : 1.0) * M_PI / 2.0;
  return place_wall(cfg, q_trigger.head<3>(), side_yaw, q_trigger[2]);
}

PosturePhase run_posture_phase(const RobotModel& model, const World& world,
                               const PostureTargets& targets, const EpisodeConfig& cfg) {
  World w = world;
  w.wall.reset();  // wall is sampled against this trajectory afterwards

  const SpdGains gains = cfg.gains.expand(model);
  Simulator sim(model, w, gains, cfg.dt);
  WholeBodyController wbc(model, cfg.controller);
  const VecX q0 = standing_pose(model);
  wbc.set_standing_tasks(q0);
  wbc.set_tracker_gains(gains.kp, gains.kd);
  wbc.find_task("left_hand")->target_point = targets.left;
  wbc.find_task("right_hand")->target_point = targets.right;

  const std::vector<int> feet = foot_links_of(model);
  const int n_steps = static_cast<int>(std::lround(cfg.posture_duration / cfg.dt));
  const int snap_every = std::max(1, static_cast<int>(std::lround(cfg.snapshot_period / cfg.dt)));

  PosturePhase out;
  SimState s;
  s.q = q0;
  s.dq = VecX::Zero(model.nv());
  out.snapshots.push_back(s.q);
  VecX qdes;
  for (int step = 0; step < n_steps; ++step) {
    if (step % cfg.control_decimation == 0) qdes = wbc.tick(s.q, s.dq);
    sim.step(s, qdes);
    if (sim.diverged() || detect_fall(model, sim.last_contacts(), feet, -1)) {
      out.fell = true;
      break;
    }
    if ((step + 1) % snap_every == 0) out.snapshots.push_back(s.q);
  }
  if (out.snapshots.empty() || out.snapshots.back() != s.q) out.snapshots.push_back(s.q);
  out.state = s;
  return out;
}

EpisodeResult run_damage_phase(const RobotModel& model, const World& world,
                               const PosturePhase& start, const DamageSpec& damage,
                               const WallConfig& wall_cfg, const std::optional<Vec2>& cell,
                               const EpisodeConfig& cfg) {
  EpisodeResult res;
  const DamagedRobot damaged = apply_damage(model, damage, start.state.q);

  World w = world;
  w.wall = episode_wall(model, wall_cfg, start.state.q, damage.leg);

  const SpdGains plant_gains = cfg.gains.expand(damaged.model);
  Simulator sim(damaged.model, w, plant_gains, cfg.dt);

  ControllerConfig ctrl_cfg = cfg.controller;
  ctrl_cfg.contact_force_threshold = cfg.contact_force_threshold;

  SimState s;
  s.q = damaged.map_q(start.state.q);
  s.dq = damaged.map_dq(start.state.dq);  // momentum at the trigger is kept
  s.time = start.state.time;

  // Controller model. Updated: the damaged topology with passive joints
  // stripped of torque authority, so the QP never budgets force it cannot
  // deliver. Not updated: the intact model, with commands for missing joints
  // dropped on the way to the plant.
  RobotModel ctrl_model = cfg.updated_model ? damaged.model : model;
  if (cfg.updated_model) {
    for (int j = 0; j < ctrl_model.n_joints(); ++j)
      if (damaged.passive[j]) ctrl_model.joints[j].torque_limit = 0.0;
  }
  const SpdGains ctrl_gains = cfg.gains.expand(ctrl_model);
  WholeBodyController wbc(ctrl_model, ctrl_cfg);
  wbc.set_standing_tasks(cfg.updated_model ? s.q : start.state.q, w.contact.mu_floor);
  wbc.set_tracker_gains(ctrl_gains.kp, ctrl_gains.kd);

  const std::string side = damage.leg == Side::Left ? "left" : "right";
  if (cfg.updated_model) {
    // The damaged leg cannot bear load through its compromised joints: keep
    // planning support through its foot and the controller quasi-statically
    // sags onto the buckling knee. Drop that foot from the planned contact
    // set (and its orientation task) so support is budgeted on the sound leg
    // and, once anchored, the hand.
    const int dmg_foot = link_index_or(ctrl_model, side + "_foot");
    std::erase_if(wbc.contacts(),
                  [&](const ContactConstraint& c) { return c.link == dmg_foot; });
    std::erase_if(wbc.tasks(),
                  [&](const TaskSpec& t) { return t.name == side + "_foot_orientation"; });
  }

  // damaged actuated index -> intact actuated index (non-updated path)
  std::vector<int> cmd_map(damaged.model.n_actuated(), -1);
  for (int i = 0; i < damaged.model.n_actuated(); ++i) {
    const int ij = damaged.damaged_to_intact_joint[damaged.model.actuated[i]];
    for (int k = 0; k < model.n_actuated(); ++k)
      if (model.actuated[k] == ij) cmd_map[i] = k;
  }

  const int hand_ctrl = wbc.model().link_index(side + "_forearm");
  const int hand_damaged = link_index_or(damaged.model, side + "_forearm");
  const std::vector<int> feet = foot_links_of(damaged.model);

  const int n_steps = static_cast<int>(
      std::lround((cfg.total_duration - cfg.posture_duration) / cfg.dt));
  const int reflex_step = static_cast<int>(std::lround(cfg.reflex_delay / cfg.dt));
  const int snap_every = std::max(1, static_cast<int>(std::lround(cfg.snapshot_period / cfg.dt)));

  VecX qdes_damaged(damaged.model.n_actuated());
  bool have_cmd = false;
  bool fell = false;
  for (int step = 0; step < n_steps; ++step) {
    if (cell && step == reflex_step) {
      wbc.enter_urgent_mode();
      wbc.set_hand_contact_target(*w.wall, cell->x(), cell->y(), hand_ctrl);
      have_cmd = false;  // re-tick immediately with the new task set
    }
    if (!have_cmd || step % cfg.control_decimation == 0) {
      if (cfg.updated_model) {
        qdes_damaged = wbc.tick(s.q, s.dq);
      } else {
        const VecX qdes_intact = wbc.tick(damaged.lift_q(s.q), damaged.lift_dq(s.dq));
        for (int i = 0; i < damaged.model.n_actuated(); ++i)
          qdes_damaged[i] = cmd_map[i] >= 0 ? qdes_intact[cmd_map[i]] : 0.0;
      }
      have_cmd = true;
    }
    sim.step(s, qdes_damaged, damaged.passive);
    if (sim.diverged()) {
      res.diverged = true;
      fell = true;
      res.fall_time = s.time;
      break;
    }
    if (cell && !wbc.hand_anchored()) {
      const double f = wall_normal_force_on(sim.last_forces(), hand_damaged);
      if (f > cfg.contact_force_threshold) {
        const FrameCache fk = forward_kinematics(damaged.model, s.q);
        const Vec3 p = hand_point(damaged.model, fk, hand_damaged);
        wbc.update_contact_anchor(p, f);
        res.hand_contact = true;
        res.hand_contact_point = p;
      }
    }
    if (detect_fall(damaged.model, sim.last_contacts(), feet, hand_damaged)) {
      fell = true;
      res.fall_time = s.time;
      break;
    }
    if ((step + 1) % snap_every == 0)
      res.com_trajectory.push_back(com(damaged.model, s.q));
  }
  res.success = !fell;
  return res;
}

EpisodeResult run_episode(const RobotModel& model, const World& world,
                          const PostureTargets& targets, const DamageSpec& damage,
                          const WallConfig& wall_cfg, const std::optional<Vec2>& cell,
                          const EpisodeConfig& cfg) {
  const PosturePhase phase1 = run_posture_phase(model, world, targets, cfg);
  if (phase1.fell) {
    EpisodeResult res;
    res.success = false;
    res.fall_time = phase1.state.time;
    return res;
  }
  return run_damage_phase(model, world, phase1, damage, wall_cfg, cell, cfg);
}

}  // namespace dreflex
