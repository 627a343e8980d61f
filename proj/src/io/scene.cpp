#include "radmesh/io/scene.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "radmesh/error.hpp"
#include "radmesh/io/ply.hpp"
#include "radmesh/render/image.hpp"
#include "radmesh/synthetic/scenes.hpp"

namespace radmesh::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::Format, "scene: " + what); }

double number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) bad(where + " lacks '" + key + "'");
  if (!j[key].is_number()) bad(where + "." + key + " must be a number");
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) bad(where + "." + key + " must be finite");
  return v;
}

Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) bad(where + " must be an array of three numbers");
  for (const auto& v : j) {
    if (!v.is_number()) bad(where + " must be an array of three numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) bad(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) bad("unknown key '" + key + "' in " + where);
  }
}

}  // namespace

std::string Scene::resolve(const std::string& relative) const {
  const fs::path p(relative);
  if (p.is_absolute() || directory.empty()) return p.string();
  return (fs::path(directory) / p).string();
}

render::Camera camera_from_json(const json& j) {
  const std::string where = "camera";
  check_keys(j, {"name", "model", "width", "height", "fx", "fy", "cx", "cy", "f", "fov_degrees",
                 "pose", "image"},
             where);
  const std::string model = j.value("model", std::string("pinhole"));
  if (!j.contains("width") || !j["width"].is_number_integer() || !j.contains("height") ||
      !j["height"].is_number_integer()) {
    bad("camera width and height must be integers");
  }
  const int w = j["width"].get<int>();
  const int h = j["height"].get<int>();
  render::Camera cam;
  if (model == "pinhole") {
    cam = render::Camera::pinhole(w, h, number(j, "fx", where), number(j, "fy", where),
                                  number(j, "cx", where), number(j, "cy", where));
  } else if (model == "fisheye") {
    cam = render::Camera::fisheye(w, h, number(j, "f", where), number(j, "cx", where),
                                  number(j, "cy", where),
                                  number(j, "fov_degrees", where) * std::numbers::pi / 180.0);
  } else {
    bad("unknown camera model '" + model + "'");
  }
  if (!j.contains("pose")) bad("camera lacks 'pose'");
  const json& pose = j["pose"];
  if (!pose.is_array() || pose.size() != 4) bad("pose must be a 4x4 array");
  for (int r = 0; r < 4; ++r) {
    if (!pose[r].is_array() || pose[r].size() != 4) bad("pose must be a 4x4 array");
    for (int c = 0; c < 4; ++c) {
      if (!pose[r][c].is_number()) bad("pose entries must be numbers");
    }
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) cam.rotation(r, c) = pose[r][c].get<double>();
  }
  cam.position = {pose[0][3].get<double>(), pose[1][3].get<double>(), pose[2][3].get<double>()};
  const double bottom[4] = {0, 0, 0, 1};
  for (int c = 0; c < 4; ++c) {
    if (std::abs(pose[3][c].get<double>() - bottom[c]) > 1e-9) bad("pose last row must be 0 0 0 1");
  }
  cam.validate();
  return cam;
}

json camera_to_json(const render::Camera& cam) {
  json j;
  if (cam.model == render::CameraModel::Pinhole) {
    j["model"] = "pinhole";
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
  } else {
    j["model"] = "fisheye";
    j["f"] = cam.fx;
    j["fov_degrees"] = cam.fov * 180.0 / std::numbers::pi;
  }
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  json pose = json::array();
  for (int r = 0; r < 3; ++r) {
    const double t = r == 0 ? cam.position.x : (r == 1 ? cam.position.y : cam.position.z);
    pose.push_back({cam.rotation(r, 0), cam.rotation(r, 1), cam.rotation(r, 2), t});
  }
  pose.push_back({0.0, 0.0, 0.0, 1.0});
  j["pose"] = pose;
  return j;
}

Scene scene_from_json(const json& doc, const std::string& directory, bool check_files) {
  check_keys(doc, {"cameras", "points", "bounds", "background"}, "scene");
  Scene s;
  s.directory = directory;
  if (!doc.contains("cameras") || !doc["cameras"].is_array() || doc["cameras"].empty()) {
    throw Error(ErrorCode::InsufficientViews, "scene: 'cameras' must be a non-empty array");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc["cameras"].size(); ++i) {
    const json& j = doc["cameras"][i];
    SceneCamera sc;
    sc.camera = camera_from_json(j);
    sc.name = j.value("name", "view" + std::to_string(i));
    if (!names.insert(sc.name).second) bad("duplicate camera name '" + sc.name + "'");
    if (!j.contains("image") || !j["image"].is_string()) bad("camera '" + sc.name + "' lacks 'image'");
    sc.image = j["image"].get<std::string>();
    s.cameras.push_back(std::move(sc));
  }
  if (doc.contains("points")) {
    if (!doc["points"].is_string()) bad("'points' must be a path");
    s.points = doc["points"].get<std::string>();
  }
  if (doc.contains("bounds")) {
    const json& b = doc["bounds"];
    check_keys(b, {"min", "max"}, "bounds");
    if (!b.contains("min") || !b.contains("max")) bad("bounds need 'min' and 'max'");
    Bounds bounds{vec3(b["min"], "bounds.min"), vec3(b["max"], "bounds.max")};
    if (!(bounds.min.x < bounds.max.x && bounds.min.y < bounds.max.y && bounds.min.z < bounds.max.z)) {
      bad("bounds min must be below max on every axis");
    }
    s.bounds = bounds;
  }
  if (doc.contains("background")) s.background = vec3(doc["background"], "background");
  if (!s.points && !s.bounds) bad("either 'points' or 'bounds' is required");

  if (check_files) {
    for (const SceneCamera& c : s.cameras) {
      if (!fs::is_regular_file(s.resolve(c.image))) {
        throw Error(ErrorCode::Io, "missing image " + s.resolve(c.image));
      }
    }
    if (s.points && !fs::is_regular_file(s.resolve(*s.points))) {
      throw Error(ErrorCode::Io, "missing point cloud " + s.resolve(*s.points));
    }
  }
  return s;
}

json scene_to_json(const Scene& s) {
  json doc;
  doc["cameras"] = json::array();
  for (const SceneCamera& c : s.cameras) {
    json j = camera_to_json(c.camera);
    j["name"] = c.name;
    j["image"] = c.image;
    doc["cameras"].push_back(j);
  }
  if (s.points) doc["points"] = *s.points;
  if (s.bounds) {
    doc["bounds"] = {{"min", {s.bounds->min.x, s.bounds->min.y, s.bounds->min.z}},
                     {"max", {s.bounds->max.x, s.bounds->max.y, s.bounds->max.z}}};
  }
  doc["background"] = {s.background.x, s.background.y, s.background.z};
  return doc;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open scene " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, path + ": " + e.what());
  }
  return scene_from_json(doc, fs::absolute(path).parent_path().string());
}

void save_scene(const std::string& path, const Scene& scene) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  out << scene_to_json(scene).dump(2) << "\n";
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path);
}

std::vector<optim::View> load_views(const Scene& scene) {
  std::vector<optim::View> views;
  views.reserve(scene.cameras.size());
  for (const SceneCamera& c : scene.cameras) {
    optim::View v;
    v.camera = c.camera;
    v.name = c.name;
    v.image = render::read_image(scene.resolve(c.image)).cast<double>();
    if (v.image.width != c.camera.width || v.image.height != c.camera.height) {
      throw Error(ErrorCode::DimensionMismatch, "image of view " + c.name + " is " +
                                                    std::to_string(v.image.width) + "x" +
                                                    std::to_string(v.image.height) +
                                                    ", camera expects " +
                                                    std::to_string(c.camera.width) + "x" +
                                                    std::to_string(c.camera.height));
    }
    views.push_back(std::move(v));
  }
  return views;
}

std::vector<Point3> initial_points(const Scene& scene, int cells) {
  if (scene.points) return read_points_ply(scene.resolve(*scene.points));
  const Bounds& b = *scene.bounds;
  std::vector<Point3> unit = synthetic::lattice_points(cells, 1.0);
  for (Point3& p : unit) {
    p = {b.min.x + (p.x + 1.0) * 0.5 * (b.max.x - b.min.x),
         b.min.y + (p.y + 1.0) * 0.5 * (b.max.y - b.min.y),
         b.min.z + (p.z + 1.0) * 0.5 * (b.max.z - b.min.z)};
  }
  return unit;
}

}  // namespace radmesh::io
