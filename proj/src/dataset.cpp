#include "dreflex/dataset.hpp"

#include <json.hpp>
#include <zlib.h>

#include <stdexcept>
#include <vector>

namespace dreflex {

namespace {

using nlohmann::json;

json vec_to_json(const VecX& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VecX vec_from_json(const json& a) {
  VecX v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
  return v;
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& a) {
  return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

json scenario_to_json(const Scenario& sc) {
  json j;
  j["id"] = sc.id;
  j["seed"] = sc.seed;
  j["left_target"] = vec3_to_json(sc.left_target);
  j["right_target"] = vec3_to_json(sc.right_target);
  j["q_trigger"] = vec_to_json(sc.q_trigger);
  j["dq_trigger"] = vec_to_json(sc.dq_trigger);
  j["wall"] = {{"distance", sc.wall.distance},
               {"alpha", sc.wall.alpha},
               {"friction", sc.wall.friction},
               {"restitution", sc.wall.restitution}};
  json dmg;
  dmg["leg"] = to_string(sc.damage.leg);
  json joints = json::object();
  for (const auto& [name, cond] : sc.damage.joints) joints[name] = to_string(cond);
  dmg["joints"] = joints;
  j["damage"] = dmg;
  j["discarded"] = sc.discarded;
  if (sc.discarded) j["discard_reason"] = sc.discard_reason;
  return j;
}

Scenario scenario_from_json(const json& j) {
  Scenario sc;
  sc.id = j.at("id").get<uint64_t>();
  sc.seed = j.at("seed").get<uint64_t>();
  sc.left_target = vec3_from_json(j.at("left_target"));
  sc.right_target = vec3_from_json(j.at("right_target"));
  sc.q_trigger = vec_from_json(j.at("q_trigger"));
  sc.dq_trigger = vec_from_json(j.at("dq_trigger"));
  const json& w = j.at("wall");
  sc.wall.distance = w.at("distance").get<double>();
  sc.wall.alpha = w.at("alpha").get<double>();
  sc.wall.friction = w.at("friction").get<double>();
  sc.wall.restitution = w.at("restitution").get<double>();
  const json& d = j.at("damage");
  sc.damage.leg = side_from_string(d.at("leg").get<std::string>());
  for (const auto& [name, cond] : d.at("joints").items())
    sc.damage.joints[name] = damage_condition_from_string(cond.get<std::string>());
  sc.discarded = j.at("discarded").get<bool>();
  if (sc.discarded) sc.discard_reason = j.value("discard_reason", "");
  return sc;
}

json grid_to_json(const GridSpec& g) {
  return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min},
          {"y_max", g.y_max}, {"nx", g.nx},       {"ny", g.ny}};
}

GridSpec grid_from_json(const json& j) {
  GridSpec g;
  g.x_min = j.at("x_min").get<double>();
  g.x_max = j.at("x_max").get<double>();
  g.y_min = j.at("y_min").get<double>();
  g.y_max = j.at("y_max").get<double>();
  g.nx = j.at("nx").get<int>();
  g.ny = j.at("ny").get<int>();
  return g;
}

json record_to_json_obj(const DatasetRecord& rec) {
  json j;
  j["scenario"] = scenario_to_json(rec.scenario);
  j["grid"] = grid_to_json(rec.map.grid);
  std::string cells(rec.map.cells.size(), '0');
  for (size_t i = 0; i < rec.map.cells.size(); ++i)
    if (rec.map.cells[i]) cells[i] = '1';
  j["cells"] = cells;
  json fall = json::array(), contact = json::array(), diverged = json::array();
  for (const CellResult& c : rec.cell_results) {
    fall.push_back(c.fall_time);
    contact.push_back(c.hand_contact ? 1 : 0);
    diverged.push_back(c.diverged ? 1 : 0);
  }
  j["fall_times"] = fall;
  j["hand_contacts"] = contact;
  j["diverged"] = diverged;
  j["no_reflex_fall_time"] = rec.no_reflex_fall_time;
  return j;
}

DatasetRecord record_from_json_obj(const json& j) {
  DatasetRecord rec;
  rec.scenario = scenario_from_json(j.at("scenario"));
  rec.map.grid = grid_from_json(j.at("grid"));
  const std::string cells = j.at("cells").get<std::string>();
  rec.map.cells.resize(cells.size());
  for (size_t i = 0; i < cells.size(); ++i) rec.map.cells[i] = cells[i] == '1' ? 1 : 0;
  const json& fall = j.at("fall_times");
  const json& contact = j.at("hand_contacts");
  const json& div = j.at("diverged");
  rec.cell_results.resize(fall.size());
  for (size_t i = 0; i < fall.size(); ++i) {
    rec.cell_results[i].fall_time = fall[i].get<double>();
    rec.cell_results[i].hand_contact = contact[i].get<int>() != 0;
    rec.cell_results[i].diverged = div[i].get<int>() != 0;
  }
  rec.no_reflex_fall_time = j.at("no_reflex_fall_time").get<double>();
  return rec;
}

}  // namespace

std::string record_to_json(const DatasetRecord& rec) { return record_to_json_obj(rec).dump(); }

DatasetRecord record_from_json(const std::string& line) {
  return record_from_json_obj(json::parse(line));
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  gzFile f = gzopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  auto write_line = [&](const std::string& s) {
    if (gzwrite(f, s.data(), static_cast<unsigned>(s.size())) !=
            static_cast<int>(s.size()) ||
        gzwrite(f, "\n", 1) != 1) {
      gzclose(f);
      throw std::runtime_error("write failed: " + path);
    }
  };
  json header;
  header["schema"] = kDatasetSchema;
  header["model_hash"] = dataset.model_hash;
  header["master_seed"] = dataset.master_seed;
  header["grid"] = grid_to_json(dataset.grid);
  header["n_records"] = dataset.records.size();
  write_line(header.dump());
  for (const DatasetRecord& rec : dataset.records) write_line(record_to_json(rec));
  if (gzclose(f) != Z_OK) throw std::runtime_error("close failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open: " + path);
  auto read_line = [&](std::string& out) -> bool {
    out.clear();
    char buf[1 << 16];
    for (;;) {
      if (gzgets(f, buf, sizeof(buf)) == nullptr) return !out.empty();
      out += buf;
      if (!out.empty() && out.back() == '\n') {
        out.pop_back();
        return true;
      }
    }
  };
  std::string line;
  if (!read_line(line)) {
    gzclose(f);
    throw std::runtime_error("empty dataset file: " + path);
  }
  json header = json::parse(line);
  if (header.at("schema").get<std::string>() != kDatasetSchema) {
    gzclose(f);
    throw std::runtime_error("unknown dataset schema in " + path);
  }
  Dataset ds;
  ds.model_hash = header.at("model_hash").get<uint64_t>();
  ds.master_seed = header.at("master_seed").get<uint64_t>();
  ds.grid = grid_from_json(header.at("grid"));
  const size_t n = header.at("n_records").get<size_t>();
  ds.records.reserve(n);
  while (read_line(line)) ds.records.push_back(record_from_json(line));
  gzclose(f);
  if (ds.records.size() != n)
    throw std::runtime_error("truncated dataset file: " + path);
  return ds;
}

}  // namespace dreflex
