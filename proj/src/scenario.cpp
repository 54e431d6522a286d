#include "dreflex/scenario.hpp"

#include "dreflex/kinematics.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>

namespace dreflex {

void GridSpec::validate() const {
  if (!(x_min < x_max) || !(y_min < y_max))
    throw std::invalid_argument("GridSpec: ranges must be ordered");
  if (nx < 3 || ny < 3)
    throw std::invalid_argument("GridSpec: resolution must be >= 3 per axis");
}

bool GridSpec::operator==(const GridSpec& o) const {
  return x_min == o.x_min && x_max == o.x_max && y_min == o.y_min && y_max == o.y_max &&
         nx == o.nx && ny == o.ny;
}

int ContactMap::count_true() const {
  int n = 0;
  for (uint8_t c : cells) n += c != 0;
  return n;
}

std::optional<PostureSample> sample_posture(const RobotModel& model, const World& world,
                                            const ScenarioConfig& scfg, const EpisodeConfig& ecfg,
                                            SplitMix64& rng) {
  const VecX q0 = standing_pose(model);
  const FrameCache fk0 = forward_kinematics(model, q0);
  const Vec3 left0 = hand_point(model, fk0, model.link_index("left_forearm"));
  const Vec3 right0 = hand_point(model, fk0, model.link_index("right_forearm"));

  for (int attempt = 0; attempt < scfg.max_posture_tries; ++attempt) {
    Vec3 off_l, off_r;
    for (int a = 0; a < 3; ++a) off_l[a] = rng.uniform(scfg.cuboid_lo[a], scfg.cuboid_hi[a]);
    for (int a = 0; a < 3; ++a) off_r[a] = rng.uniform(scfg.cuboid_lo[a], scfg.cuboid_hi[a]);
    PostureTargets targets;
    targets.left = left0 + off_l;
    targets.right = right0 + off_r;
    PosturePhase phase = run_posture_phase(model, world, targets, ecfg);
    if (phase.fell) continue;  // fell while reaching: resample
    return PostureSample{targets.left, targets.right, std::move(phase)};
  }
  return std::nullopt;
}

DamageSpec sample_damage(const RobotModel& model, const ScenarioConfig& scfg, SplitMix64& rng) {
  const std::vector<std::string> names = leg_joint_names(model, scfg.damage_side);
  const int n = static_cast<int>(names.size());
  // uniform subset size, joints without replacement (partial Fisher-Yates)
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  const int k = 1 + static_cast<int>(rng.next_below(static_cast<uint64_t>(n)));
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.next_below(static_cast<uint64_t>(n - i)));
    std::swap(order[i], order[j]);
  }
  DamageSpec spec;
  spec.leg = scfg.damage_side;
  for (int i = 0; i < k; ++i) {
    static const DamageCondition conditions[] = {DamageCondition::Amputation,
                                                 DamageCondition::Passive,
                                                 DamageCondition::Locked};
    spec.joints[names[order[i]]] = conditions[rng.next_below(3)];
  }
  // amputation removes everything distal: propagate down the root-to-tip chain
  bool amputated = false;
  for (const std::string& name : names) {
    auto it = spec.joints.find(name);
    if (amputated) {
      spec.joints[name] = DamageCondition::Amputation;
    } else if (it != spec.joints.end() && it->second == DamageCondition::Amputation) {
      amputated = true;
    }
  }
  return spec;
}

std::optional<WallConfig> sample_wall(const RobotModel& model, const ScenarioConfig& scfg,
                                      const PosturePhase& phase, Side damage_side,
                                      SplitMix64& rng) {
  for (int rejections = 0; rejections <= scfg.max_wall_rejections;) {
    WallConfig wc;
    wc.distance = rng.uniform(scfg.wall_distance_min, scfg.wall_distance_max);
    wc.alpha = rng.uniform(scfg.alpha_min, scfg.alpha_max);
    const WallPlane plane = episode_wall(model, wc, phase.state.q, damage_side);
    bool collides = false;
    for (const VecX& q : phase.snapshots) {
      const FrameCache fk = forward_kinematics(model, q);
      if (penetrates_wall(model, fk, plane)) {
        collides = true;
        break;
      }
    }
    if (!collides) return wc;
    ++rejections;
  }
  return std::nullopt;
}

Scenario sample_scenario(const RobotModel& model, const World& world,
                         const ScenarioConfig& scfg, const EpisodeConfig& ecfg,
                         uint64_t master_seed, uint64_t id) {
  Scenario sc;
  sc.id = id;
  sc.seed = derive_seed(master_seed, id, 0);
  SplitMix64 rng(sc.seed);

  sc.damage = sample_damage(model, scfg, rng);

  std::optional<PostureSample> posture = sample_posture(model, world, scfg, ecfg, rng);
  if (!posture) {
    sc.discarded = true;
    sc.discard_reason = "posture sampling exhausted (robot fell while reaching)";
    return sc;
  }
  sc.left_target = posture->left_target;
  sc.right_target = posture->right_target;
  sc.q_trigger = posture->phase.state.q;
  sc.dq_trigger = posture->phase.state.dq;

  std::optional<WallConfig> wall =
      sample_wall(model, scfg, posture->phase, sc.damage.leg, rng);
  if (!wall) {
    sc.discarded = true;
    sc.discard_reason = "wall sampling exhausted (all candidates collide)";
    return sc;
  }
  sc.wall = *wall;
  return sc;
}

DatasetRecord build_contact_map(const RobotModel& model, const World& world,
                                const Scenario& scenario, const GridSpec& grid,
                                const ScenarioConfig& scfg, const EpisodeConfig& ecfg) {
  (void)scfg;
  grid.validate();
  DatasetRecord rec;
  rec.scenario = scenario;
  rec.map.grid = grid;
  rec.map.cells.assign(grid.cells(), 0);
  rec.cell_results.assign(grid.cells(), CellResult{});
  if (scenario.discarded) return rec;

  // replay the recorded posture phase once; every cell branches from it
  PostureTargets targets;
  targets.left = scenario.left_target;
  targets.right = scenario.right_target;
  const PosturePhase phase = run_posture_phase(model, world, targets, ecfg);
  if (phase.fell) {
    rec.scenario.discarded = true;
    rec.scenario.discard_reason = "posture replay fell (config mismatch)";
    return rec;
  }

  const EpisodeResult baseline =
      run_damage_phase(model, world, phase, scenario.damage, scenario.wall, std::nullopt, ecfg);
  rec.no_reflex_fall_time = baseline.fall_time.value_or(-1.0);

  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const Vec2 cell(grid.x_at(ix), grid.y_at(iy));
      const EpisodeResult r =
          run_damage_phase(model, world, phase, scenario.damage, scenario.wall, cell, ecfg);
      const int idx = grid.index(ix, iy);
      rec.map.cells[idx] = r.success && !r.diverged ? 1 : 0;
      rec.cell_results[idx].fall_time = r.fall_time.value_or(-1.0);
      rec.cell_results[idx].hand_contact = r.hand_contact;
      rec.cell_results[idx].diverged = r.diverged;
    }
  }
  return rec;
}

Dataset generate_dataset(const RobotModel& model, const World& world,
                         const ScenarioConfig& scfg, const EpisodeConfig& ecfg,
                         const GridSpec& grid, int n_scenarios, uint64_t master_seed,
                         int workers) {
  grid.validate();
  Dataset ds;
  ds.grid = grid;
  ds.master_seed = master_seed;
  ds.model_hash = model.source_hash;
  ds.records.resize(n_scenarios);

  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int id = next.fetch_add(1);
      if (id >= n_scenarios) return;
      auto attempt = [&]() {
        const Scenario sc =
            sample_scenario(model, world, scfg, ecfg, master_seed, static_cast<uint64_t>(id));
        ds.records[id] = build_contact_map(model, world, sc, grid, scfg, ecfg);
      };
      try {
        attempt();
      } catch (const std::exception& first) {
        try {
          attempt();  // retried once
        } catch (const std::exception& second) {
          DatasetRecord rec;
          rec.scenario.id = static_cast<uint64_t>(id);
          rec.scenario.seed = derive_seed(master_seed, static_cast<uint64_t>(id), 0);
          rec.scenario.discarded = true;
          rec.scenario.discard_reason = std::string("exception: ") + second.what();
          rec.map.grid = grid;
          rec.map.cells.assign(grid.cells(), 0);
          rec.cell_results.assign(grid.cells(), CellResult{});
          ds.records[id] = std::move(rec);
        }
      }
    }
  };

  const int n_threads = std::max(1, workers);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  return ds;
}

EpisodeResult run_scenario_episode(const RobotModel& model, const World& world,
                                   const Scenario& scenario, const std::optional<Vec2>& cell,
                                   const EpisodeConfig& ecfg) {
  PostureTargets targets;
  targets.left = scenario.left_target;
  targets.right = scenario.right_target;
  const PosturePhase phase = run_posture_phase(model, world, targets, ecfg);
  if (phase.fell) {
    EpisodeResult res;
    res.success = false;
    res.fall_time = phase.state.time;
    return res;
  }
  return run_damage_phase(model, world, phase, scenario.damage, scenario.wall, cell, ecfg);
}

VecX damage_mask(const RobotModel& model, const DamageSpec& damage) {
  VecX mask = VecX::Zero(model.n_actuated());
  for (int i = 0; i < model.n_actuated(); ++i) {
    const std::string& name = model.joints[model.actuated[i]].name;
    if (damage.joints.count(name)) mask[i] = 1.0;
  }
  return mask;
}

namespace {

std::string mirror_name(const std::string& name) {
  if (name.rfind("left_", 0) == 0) return "right_" + name.substr(5);
  if (name.rfind("right_", 0) == 0) return "left_" + name.substr(6);
  return name;
}

// roll and yaw angles flip sign across the sagittal plane; pitch does not
double mirror_sign(const std::string& joint_name) {
  if (joint_name.find("_roll") != std::string::npos) return -1.0;
  if (joint_name.find("_yaw") != std::string::npos) return -1.0;
  return 1.0;
}

Vec3 mirror_point(const Vec3& p) { return Vec3(p.x(), -p.y(), p.z()); }

}  // namespace

VecX mirror_q(const RobotModel& model, const VecX& q) {
  VecX out = q;
  if (model.floating) {
    out[1] = -q[1];  // base y
    // reflection conjugation S R S with S = diag(1,-1,1): (w,x,y,z)->(w,-x,y,-z)
    out[4] = -q[4];
    out[6] = -q[6];
  }
  const int b = model.base_nq();
  for (int j = 0; j < model.n_joints(); ++j) {
    const int mj = model.joint_index(mirror_name(model.joints[j].name));
    out[b + mj] = mirror_sign(model.joints[j].name) * q[b + j];
  }
  return out;
}

VecX mirror_dq(const RobotModel& model, const VecX& dq) {
  VecX out = dq;
  if (model.floating) {
    out[1] = -dq[1];                  // linear y
    out[3] = -dq[3];                  // angular: pseudovector, -S w
    out[5] = -dq[5];
  }
  const int b = model.base_nv();
  for (int j = 0; j < model.n_joints(); ++j) {
    const int mj = model.joint_index(mirror_name(model.joints[j].name));
    out[b + mj] = mirror_sign(model.joints[j].name) * dq[b + j];
  }
  return out;
}

DatasetRecord mirror_record(const RobotModel& model, const DatasetRecord& rec) {
  DatasetRecord out = rec;
  Scenario& sc = out.scenario;
  sc.left_target = mirror_point(rec.scenario.right_target);
  sc.right_target = mirror_point(rec.scenario.left_target);
  if (sc.q_trigger.size() > 0) sc.q_trigger = mirror_q(model, rec.scenario.q_trigger);
  if (sc.dq_trigger.size() > 0) sc.dq_trigger = mirror_dq(model, rec.scenario.dq_trigger);
  sc.wall.alpha = -rec.scenario.wall.alpha;
  sc.damage.leg = rec.scenario.damage.leg == Side::Left ? Side::Right : Side::Left;
  sc.damage.joints.clear();
  for (const auto& [name, cond] : rec.scenario.damage.joints)
    sc.damage.joints[mirror_name(name)] = cond;

  const GridSpec& g = rec.map.grid;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      const int src = g.index(g.nx - 1 - ix, iy);
      const int dst = g.index(ix, iy);
      out.map.cells[dst] = rec.map.cells[src];
      if (!rec.cell_results.empty()) out.cell_results[dst] = rec.cell_results[src];
    }
  return out;
}

}  // namespace dreflex
