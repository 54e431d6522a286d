#pragma once

// Full episode timeline: 4 s of posture reaching on the intact robot, damage
// injected with momentum kept, optional reflex toward a wall-grid cell after a
// configurable delay, and fall monitoring until the 15 s horizon.
//
// The posture phase is split out so a contact map (hundreds of cells over the
// same scenario) replays it once and branches the damaged phase per cell.

#include "dreflex/damage.hpp"
#include "dreflex/sim.hpp"
#include "dreflex/wbc.hpp"
#include "dreflex/world.hpp"

#include <optional>
#include <vector>

namespace dreflex {

struct EpisodeConfig {
  double dt = 1e-3;
  double posture_duration = 4.0;
  double total_duration = 15.0;
  double reflex_delay = 0.0;
  double contact_force_threshold = 5.0;  // N, wrist sensor analog
  int control_decimation = 10;           // controller tick every N sim steps
  double snapshot_period = 0.05;         // s, posture-phase pose recording
  // true: after damage the controller plans on the damaged model (welded
  // locked joints, zero torque authority on passive ones). false: it keeps
  // the intact model and its commands for missing joints are dropped.
  bool updated_model = true;
  JointGroupGains gains;
  ControllerConfig controller;
};

struct EpisodeResult {
  bool success = false;
  std::optional<double> fall_time;  // s, absolute episode time
  bool hand_contact = false;
  Vec3 hand_contact_point = Vec3::Zero();
  bool diverged = false;  // NaN state, counted as a fall
  std::vector<Vec3> com_trajectory;  // sampled at snapshot_period
};

// World-frame hand reach targets driving the posture phase.
struct PostureTargets {
  Vec3 left = Vec3::Zero();
  Vec3 right = Vec3::Zero();
};

struct PosturePhase {
  SimState state;              // at t = posture_duration (the trigger state)
  std::vector<VecX> snapshots; // q at snapshot_period intervals (incl. ends)
  bool fell = false;
};

// Default standing pose of the model (soles on the floor).
VecX standing_pose(const RobotModel& model);

// Hand sphere center in world at configuration q.
Vec3 hand_point(const RobotModel& model, const FrameCache& fk, int hand_link);

// Runs the intact robot toward the hand targets for posture_duration seconds
// (no wall in the world). Stops early on a fall.
PosturePhase run_posture_phase(const RobotModel& model, const World& world,
                               const PostureTargets& targets, const EpisodeConfig& cfg);

// Continues from the trigger state: applies the damage, places the wall
// relative to the trigger-time base pose, optionally triggers the reflex
// toward grid cell (x, y) after cfg.reflex_delay, and simulates to the
// horizon. `cell` empty = no reflex (the controller keeps balancing).
EpisodeResult run_damage_phase(const RobotModel& model, const World& world,
                               const PosturePhase& start, const DamageSpec& damage,
                               const WallConfig& wall_cfg, const std::optional<Vec2>& cell,
                               const EpisodeConfig& cfg);

// Convenience wrapper: both phases back to back. A fall during the posture
// phase is returned as a failed episode with the posture-phase fall time.
EpisodeResult run_episode(const RobotModel& model, const World& world,
                          const PostureTargets& targets, const DamageSpec& damage,
                          const WallConfig& wall_cfg, const std::optional<Vec2>& cell,
                          const EpisodeConfig& cfg);

// Wall plane as the damage phase will place it for this trigger state: the
// wall stands on the damaged side of the robot (the side it falls toward).
WallPlane episode_wall(const RobotModel& model, const WallConfig& cfg, const VecX& q_trigger,
                       Side damaged_side);

}  // namespace dreflex
