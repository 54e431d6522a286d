#include "dreflex/reflex.hpp"

#include "dreflex/train.hpp"

namespace dreflex {

ConfidenceMap predict_map(const MLPWeights& net, const FeatureSpec& spec, const VecX& q_act,
                          const VecX& dq_act, const VecX& mask, double d, double alpha,
                          const GridSpec& grid) {
  grid.validate();
  ConfidenceMap out;
  out.grid = grid;
  MatX X(spec.dim(), grid.cells());
  for (int iy = 0; iy < grid.ny; ++iy)
    for (int ix = 0; ix < grid.nx; ++ix)
      X.col(grid.index(ix, iy)) =
          build_features(spec, q_act, dq_act, mask, d, alpha, grid.x_at(ix), grid.y_at(iy));
  out.values = mlp_forward(net, X);
  return out;
}

std::pair<int, int> select_contact(const ConfidenceMap& map) {
  int best = 0;
  for (int i = 1; i < map.values.size(); ++i)
    if (map.values[i] > map.values[best]) best = i;  // strict: ties keep lowest index
  return {best % map.grid.nx, best / map.grid.nx};
}

Vec2 choose_reflex_cell(const RobotModel& model, const MLPWeights& net, const FeatureSpec& spec,
                        const Scenario& scenario, const GridSpec& grid) {
  const bool mirrored = scenario.damage.leg == Side::Left;
  VecX q = scenario.q_trigger;
  VecX dq = scenario.dq_trigger;
  DamageSpec damage = scenario.damage;
  double alpha = scenario.wall.alpha;
  if (mirrored) {
    q = mirror_q(model, q);
    dq = mirror_dq(model, dq);
    DatasetRecord tmp;  // reuse the record mirror for the joint-name flip
    tmp.scenario.damage = scenario.damage;
    tmp.map.grid = grid;
    tmp.map.cells.assign(grid.cells(), 0);
    tmp.cell_results.assign(grid.cells(), CellResult{});
    damage = mirror_record(model, tmp).scenario.damage;
    alpha = -alpha;
  }
  const ConfidenceMap map =
      predict_map(net, spec, actuated_angles(model, q), actuated_rates(model, dq),
                  damage_mask(model, damage), scenario.wall.distance, alpha, grid);
  const auto [ix, iy] = select_contact(map);
  double x = grid.x_at(ix);
  const double y = grid.y_at(iy);
  if (mirrored) x = -x;  // flip the selected cell back into the real wall frame
  return Vec2(x, y);
}

void trigger_reflex(WholeBodyController& wbc, const WallPlane& wall, const Vec2& cell,
                    int hand_link) {
  wbc.enter_urgent_mode();
  wbc.set_hand_contact_target(wall, cell.x(), cell.y(), hand_link);
}

}  // namespace dreflex
