#include "dreflex/world.hpp"

namespace dreflex {

WallPlane place_wall(const WallConfig& cfg, const Vec3& base_position, double base_yaw,
                     double anchor_height) {
  WallPlane wall;
  const double yaw = base_yaw + cfg.alpha;
  // robot facing is +x in the base frame; the wall normal points back at it
  Vec3 facing(std::cos(yaw), std::sin(yaw), 0);
  wall.normal = -facing;
  Vec3 foot = base_position;
  foot.z() = 0;
  Vec3 on_plane = foot + cfg.distance * facing;
  wall.point = Vec3(on_plane.x(), on_plane.y(), anchor_height);
  wall.horizontal = Vec3::UnitZ().cross(wall.normal);
  wall.friction = cfg.friction;
  return wall;
}

namespace {

// signed distance to surface; floor normal is +z
inline double floor_distance(const Vec3& p) { return p.z(); }

template <typename F>
void for_each_primitive_point(const RobotModel& model, const FrameCache& fk, F&& visit) {
  for (int i = 0; i < model.n_links(); ++i) {
    const Iso3& pose = fk.link_pose[i];
    for (const SpherePrimitive& s : model.links[i].spheres) {
      visit(i, pose * s.center, s.radius);
    }
    for (const BoxPrimitive& b : model.links[i].boxes) {
      for (int corner = 0; corner < 8; ++corner) {
        Vec3 local((corner & 1) ? b.half_extents.x() : -b.half_extents.x(),
                   (corner & 2) ? b.half_extents.y() : -b.half_extents.y(),
                   (corner & 4) ? b.half_extents.z() : -b.half_extents.z());
        visit(i, pose * (b.center + b.rot * local), 0.0);
      }
    }
  }
}

}  // namespace

std::vector<Contact> detect_contacts(const RobotModel& model, const FrameCache& fk,
                                     const World& world) {
  std::vector<Contact> out;
  for_each_primitive_point(model, fk, [&](int link, const Vec3& p, double radius) {
    const double df = floor_distance(p) - radius;
    if (df < 0) {
      Contact c;
      c.link = link;
      c.normal = Vec3::UnitZ();
      c.depth = -df;
      c.world_point = p - radius * c.normal;
      c.surface = Surface::Floor;
      out.push_back(c);
    }
    if (world.wall) {
      const double dw = world.wall->signed_distance(p) - radius;
      if (dw < 0) {
        Contact c;
        c.link = link;
        c.normal = world.wall->normal;
        c.depth = -dw;
        c.world_point = p - radius * c.normal;
        c.surface = Surface::Wall;
        out.push_back(c);
      }
    }
  });
  return out;
}

std::vector<ContactOperator> contact_operators(const std::vector<Contact>& contacts,
                                               const RobotModel& model, const FrameCache& fk,
                                               const VecX& dq, const World& world, double dt) {
  const ContactParams& params = world.contact;
  std::vector<ContactOperator> out;
  out.reserve(contacts.size());
  for (const Contact& c : contacts) {
    ContactOperator op;
    op.link = c.link;
    op.world_point = c.world_point;
    op.normal = c.normal;
    op.surface = c.surface;
    op.mu = (c.surface == Surface::Floor) ? params.mu_floor
                                          : (world.wall ? world.wall->friction : 1.0);
    op.f_spring = params.kp * c.depth * c.normal;

    const Vec3 v = point_velocity(model, fk, c.link, c.world_point, dq);
    const double vn = c.normal.dot(v);  // separating velocity > 0
    const Vec3 vt = v - vn * c.normal;
    // normal damper only while approaching, so separation is never resisted;
    // kp*dt makes the spring implicit (see ContactOperator)
    const double kd_eff = (vn < 0 ? params.kd : 0.0) + params.kp * dt;
    const double n_est = params.kp * c.depth + kd_eff * std::max(0.0, -vn);
    const double kt_eff =
        std::min(params.kt, op.mu * n_est / std::max(vt.norm(), 1e-2));
    const Mat3 nn = c.normal * c.normal.transpose();
    op.damping = kd_eff * nn + kt_eff * (Mat3::Identity() - nn);
    out.push_back(op);
  }
  return out;
}

std::vector<ContactForce> contact_forces(const std::vector<Contact>& contacts,
                                         const RobotModel& model, const FrameCache& fk,
                                         const VecX& dq, const World& world) {
  std::vector<ContactForce> out;
  out.reserve(contacts.size());
  for (const ContactOperator& op : contact_operators(contacts, model, fk, dq, world, 0.0)) {
    const Vec3 v = point_velocity(model, fk, op.link, op.world_point, dq);
    const Vec3 force = op.f_spring - op.damping * v;
    ContactForce f;
    f.wrench.link = op.link;
    f.wrench.world_point = op.world_point;
    f.wrench.force = force;
    f.normal_force = op.normal.dot(force);
    f.surface = op.surface;
    f.link = op.link;
    out.push_back(f);
  }
  return out;
}

bool penetrates_wall(const RobotModel& model, const FrameCache& fk, const WallPlane& wall) {
  bool hit = false;
  for_each_primitive_point(model, fk, [&](int, const Vec3& p, double radius) {
    if (wall.signed_distance(p) - radius < 0) hit = true;
  });
  return hit;
}

}  // namespace dreflex
