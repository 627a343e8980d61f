#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "radmesh/field/field.hpp"
#include "radmesh/geometry/tet_mesh.hpp"
#include "radmesh/optim/train.hpp"
#include "radmesh/render/camera.hpp"

namespace radmesh::synthetic {

using field::Rgb;

/// Radiance mesh with fixed, view-independent per-tet attributes, used as
/// ground truth.
struct TeacherScene {
  std::string name;
  geometry::TetMesh mesh;
  std::vector<field::TetAttributes> attrs;
  Rgb background{0.0, 0.0, 0.0};
};

enum class SceneKind { Teapot, Boxes, ThinRods };

SceneKind parse_scene_kind(const std::string& name);
std::string scene_kind_name(SceneKind kind);

/// Line segment with a radius; the thin structures of the rods scene.
struct Rod {
  Point3 a;
  Point3 b;
  double radius = 0.0;
};

/// Axis-aligned box [lo, hi].
struct Box {
  Point3 lo;
  Point3 hi;
};

/// Procedural density and color sampled at tet centroids.
struct VolumeFunction {
  std::function<double(const Point3&)> density;
  std::function<Rgb(const Point3&)> color;
};

/// Teacher mesh from a point set and a volume function evaluated at each
/// tet centroid (zero color slope).
TeacherScene teacher_from_function(std::string name, std::vector<Point3> points,
                                   const VolumeFunction& volume);

/// Regular lattice with `cells` cubes per axis spanning [-extent, extent]^3.
std::vector<Point3> lattice_points(int cells, double extent);

/// Teapot-like blob: body ellipsoid, spout and handle, on a jittered lattice.
TeacherScene teapot_scene(std::uint64_t seed);
/// Two separated boxes aligned with the lattice cells, so every tet lies in
/// or out of a box.
TeacherScene boxes_scene(std::uint64_t seed);
/// The two boxes of boxes_scene().
std::vector<Box> boxes_scene_boxes();
/// Two thin dense rods in empty space, densely sampled around the rods.
TeacherScene thin_rods_scene(std::uint64_t seed);
/// The rods of thin_rods_scene().
std::vector<Rod> thin_rods_scene_rods();

TeacherScene make_scene(SceneKind kind, std::uint64_t seed);

/// Random points in the ball of radius `radius`, increased until the
/// triangulation has at least `min_tets` tets. Attributes are random: density
/// in [density_min, density_max] per unit length, colors in [0.1, 0.9] and a
/// color slope at most `slope_fraction` of the largest slope a field can
/// represent for the tet.
TeacherScene random_teacher(std::size_t min_tets, std::uint64_t seed, double radius = 0.8,
                            double density_min = 0.5, double density_max = 4.0,
                            double slope_fraction = 0.5);

/// Every point displaced uniformly in a cube of half-size fraction * mean edge
/// length of the mesh.
std::vector<Point3> jitter_points(const geometry::TetMesh& mesh, double fraction,
                                  std::uint64_t seed);

/// Cameras on a sphere of radius `distance` around `target` (Fibonacci
/// directions, random roll-free look-at), pinhole with the given horizontal
/// field of view in degrees or equidistant fisheye.
std::vector<render::Camera> orbit_cameras(std::size_t count, int width, int height,
                                          const Point3& target, double distance,
                                          double fov_degrees,
                                          render::CameraModel model = render::CameraModel::Pinhole);

/// Ground-truth views of a teacher scene.
std::vector<optim::View> render_views(const TeacherScene& scene,
                                      const std::vector<render::Camera>& cameras,
                                      std::size_t threads = 0);

/// Distance from p to the closed tet v.
double point_tet_distance(const Point3& p, const std::array<Point3, 4>& v);
/// True when the tet comes within the rod radius of the rod axis (checked at
/// `samples` points along the axis).
bool tet_touches_rod(const std::array<Point3, 4>& v, const Rod& rod, int samples = 256);

}  // namespace radmesh::synthetic
