#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "radmesh/optim/train.hpp"
#include "radmesh/render/camera.hpp"

namespace radmesh::io {

struct SceneCamera {
  std::string name;
  render::Camera camera;
  /// Absolute or scene-relative path as written in the file.
  std::string image;
};

struct Bounds {
  Point3 min;
  Point3 max;
};

/// Posed images, an optional initial point cloud, bounds and background.
/// Paths are resolved against the directory of the scene file.
struct Scene {
  std::string directory;
  std::vector<SceneCamera> cameras;
  std::optional<std::string> points;
  std::optional<Bounds> bounds;
  Vec3 background{0.0, 0.0, 0.0};

  std::string resolve(const std::string& relative) const;
};

/// Parses and validates a scene document. Referenced files are checked for
/// existence when `check_files` is set (Error(Io) otherwise).
Scene scene_from_json(const nlohmann::json& doc, const std::string& directory,
                      bool check_files = true);
nlohmann::json scene_to_json(const Scene& scene);

Scene load_scene(const std::string& path);
void save_scene(const std::string& path, const Scene& scene);

/// Camera as stored in the scene file: intrinsics plus a 4x4 world-from-camera
/// pose (OpenCV axes).
render::Camera camera_from_json(const nlohmann::json& j);
nlohmann::json camera_to_json(const render::Camera& camera);

/// Loads every image; sizes must match the cameras.
std::vector<optim::View> load_views(const Scene& scene);

/// Initial points: the point cloud when present, otherwise a lattice with
/// `cells` cubes per axis over the bounds.
std::vector<Point3> initial_points(const Scene& scene, int cells = 4);

}  // namespace radmesh::io
