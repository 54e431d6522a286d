#pragma once

// Scenario sampling and contact-map generation. A scenario is one sampled
// combination of reach posture, wall configuration, and damage spec; its
// contact map records, per wall-grid cell, whether an immediate hand reflex
// toward that cell prevents the fall.

#include "dreflex/episode.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dreflex {

// Wall-frame grid the contact map lives on. Cell (ix, iy) maps to in-plane
// coordinates (x_at(ix), y_at(iy)); storage is row-major by iy then ix.
struct GridSpec {
  double x_min = -0.75, x_max = 0.75;  // m, horizontal in-plane
  double y_min = -0.5, y_max = 0.75;   // m, vertical relative to anchor height
  int nx = 21, ny = 21;

  int cells() const { return nx * ny; }
  double x_at(int ix) const { return x_min + (x_max - x_min) * ix / (nx - 1); }
  double y_at(int iy) const { return y_min + (y_max - y_min) * iy / (ny - 1); }
  int index(int ix, int iy) const { return iy * nx + ix; }
  void validate() const;  // throws std::invalid_argument
  bool operator==(const GridSpec& o) const;
};

struct Scenario {
  uint64_t id = 0;
  uint64_t seed = 0;          // derived sampling seed, recorded for audit
  Vec3 left_target = Vec3::Zero();   // world-frame reach targets
  Vec3 right_target = Vec3::Zero();
  VecX q_trigger, dq_trigger;        // realized state at the damage trigger
  WallConfig wall;
  DamageSpec damage;
  bool discarded = false;            // sampling failed (posture or wall)
  std::string discard_reason;
};

struct ContactMap {
  GridSpec grid;
  std::vector<uint8_t> cells;  // 1 = reflex toward this cell prevents the fall

  bool at(int ix, int iy) const { return cells[grid.index(ix, iy)] != 0; }
  int count_true() const;
};

// Per-cell episode metadata kept alongside the boolean map.
struct CellResult {
  double fall_time = -1.0;  // s, absolute; -1 when the episode survived
  bool hand_contact = false;
  bool diverged = false;
};

struct DatasetRecord {
  Scenario scenario;
  ContactMap map;
  std::vector<CellResult> cell_results;  // same layout as map.cells
  double no_reflex_fall_time = -1.0;     // baseline episode without a reflex
};

struct ScenarioConfig {
  // Hand-target cuboid relative to the default hand position:
  // x sagittal (forward), y frontal (lateral), z longitudinal (vertical).
  Vec3 cuboid_lo = Vec3(-0.1, -0.4, -0.5);
  Vec3 cuboid_hi = Vec3(0.2, 0.4, 0.4);
  double wall_distance_min = 0.4, wall_distance_max = 1.0;  // m
  double alpha_min = -1.0, alpha_max = 1.0;                 // rad
  int max_posture_tries = 20;
  int max_wall_rejections = 1000;
  Side damage_side = Side::Right;  // classifier side; the other side mirrors
};

// Samples both hand targets uniformly in the cuboid and realizes the posture
// by running the posture phase; resamples (consuming more of `rng`) if the
// robot falls while reaching. Returns the realized phase for reuse. Empty on
// exhausting max_posture_tries.
struct PostureSample {
  Vec3 left_target, right_target;
  PosturePhase phase;
};
std::optional<PostureSample> sample_posture(const RobotModel& model, const World& world,
                                            const ScenarioConfig& scfg, const EpisodeConfig& ecfg,
                                            SplitMix64& rng);

// Uniform nonempty damage subset on the configured leg: size uniform over
// {1..n_leg_joints}, joints without replacement, condition uniform; an
// amputation propagates to all distal leg joints.
DamageSpec sample_damage(const RobotModel& model, const ScenarioConfig& scfg, SplitMix64& rng);

// Wall distance/orientation rejection-sampled so the wall (placed for the
// trigger state and damage side) never intersects the recorded posture-phase
// poses. Empty after max_wall_rejections rejections.
std::optional<WallConfig> sample_wall(const RobotModel& model, const ScenarioConfig& scfg,
                                      const PosturePhase& phase, Side damage_side,
                                      SplitMix64& rng);

// Full scenario draw with seed = derive_seed(master, id, 0). Failed draws are
// returned with `discarded` set (never silently skipped, so ids stay dense).
Scenario sample_scenario(const RobotModel& model, const World& world,
                         const ScenarioConfig& scfg, const EpisodeConfig& ecfg,
                         uint64_t master_seed, uint64_t id);

// One episode per grid cell from a shared posture phase; cell true iff the
// episode survives the horizon. A NaN-diverged episode counts false and is
// flagged. Also runs the no-reflex baseline once.
DatasetRecord build_contact_map(const RobotModel& model, const World& world,
                                const Scenario& scenario, const GridSpec& grid,
                                const ScenarioConfig& scfg, const EpisodeConfig& ecfg);

struct Dataset {
  GridSpec grid;
  uint64_t master_seed = 0;
  uint64_t model_hash = 0;
  std::vector<DatasetRecord> records;
};

// n scenarios, ids 0..n-1, scenario-level parallelism across `workers`
// threads. Output is a pure function of (model, configs, master_seed):
// identical for any worker count. A scenario that throws is retried once,
// then recorded as discarded.
Dataset generate_dataset(const RobotModel& model, const World& world,
                         const ScenarioConfig& scfg, const EpisodeConfig& ecfg,
                         const GridSpec& grid, int n_scenarios, uint64_t master_seed,
                         int workers);

// Replays a stored scenario as one episode: posture phase from the recorded
// targets, then the damage phase toward `cell` (or the no-reflex baseline).
EpisodeResult run_scenario_episode(const RobotModel& model, const World& world,
                                   const Scenario& scenario, const std::optional<Vec2>& cell,
                                   const EpisodeConfig& ecfg);

// Multi-hot mask over actuated joints: 1 where the joint appears in the spec.
VecX damage_mask(const RobotModel& model, const DamageSpec& damage);

// Sagittal-plane mirror: left/right joints swapped, roll/yaw angles negated,
// base y / roll / yaw negated, wall alpha negated, grid columns flipped,
// damage side flipped. Involution.
DatasetRecord mirror_record(const RobotModel& model, const DatasetRecord& rec);
VecX mirror_q(const RobotModel& model, const VecX& q);
VecX mirror_dq(const RobotModel& model, const VecX& dq);

}  // namespace dreflex
