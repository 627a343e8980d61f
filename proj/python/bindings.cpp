#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <cstring>
#include <string>

#include "radmesh/check/suite.hpp"
#include "radmesh/error.hpp"
#include "radmesh/extract/extract.hpp"
#include "radmesh/geometry/delaunay.hpp"
#include "radmesh/io/checkpoint.hpp"
#include "radmesh/io/config.hpp"
#include "radmesh/render/renderer.hpp"
#include "radmesh/render/segment.hpp"
#include "radmesh/sorting/power_sort.hpp"
#include "radmesh/synthetic/scenes.hpp"

namespace py = pybind11;
using namespace radmesh;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Vec3 vec3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }
std::array<double, 3> tuple3(const Vec3& v) { return {v.x, v.y, v.z}; }

std::vector<Point3> to_points(const Array& a, const char* what) {
  if (a.ndim() != 2 || a.shape(1) != 3) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must have shape (n, 3)");
  }
  std::vector<Point3> out(a.shape(0));
  const auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = {r(i, 0), r(i, 1), r(i, 2)};
  return out;
}

Array from_points(const std::vector<Point3>& pts) {
  Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    w(i, 0) = pts[i].x;
    w(i, 1) = pts[i].y;
    w(i, 2) = pts[i].z;
  }
  return out;
}

template <class T>
Array from_image(const render::BasicImage<T>& img) {
  Array out({py::ssize_t{img.height}, py::ssize_t{img.width}, py::ssize_t{3}});
  double* d = out.mutable_data();
  for (std::size_t i = 0; i < img.rgb.size(); ++i) d[i] = img.rgb[i];
  return out;
}

render::ImageD to_image(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) {
    throw Error(ErrorCode::DimensionMismatch, "image must have shape (height, width, 3)");
  }
  render::ImageD img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.rgb.data(), a.data(), img.rgb.size() * sizeof(double));
  return img;
}

io::RunConfig to_config(const py::object& config) {
  if (config.is_none()) return {};
  if (py::isinstance<py::str>(config)) return io::load_config(config.cast<std::string>());
  const auto text = py::module_::import("json").attr("dumps")(config).cast<std::string>();
  io::RunConfig c = io::config_from_json(nlohmann::json::parse(text));
  c.train.validate();
  return c;
}

py::dict step_dict(const optim::StepStats& s) {
  py::dict d;
  d["iteration"] = s.iteration;
  d["view"] = s.view;
  d["loss"] = s.loss.total;
  d["photometric"] = s.loss.photometric;
  d["distortion"] = s.loss.distortion;
  d["psnr"] = s.loss.psnr;
  d["tets"] = s.tets;
  d["points"] = s.points;
  d["rebuilt"] = s.rebuilt;
  d["splits"] = s.splits;
  return d;
}

py::dict surface_dict(const extract::SurfaceMesh& s) {
  py::dict d;
  d["vertices"] = from_points(s.vertices);
  py::array_t<std::uint32_t> tris({static_cast<py::ssize_t>(s.triangles.size()), py::ssize_t{3}});
  auto w = tris.mutable_unchecked<2>();
  for (std::size_t i = 0; i < s.triangles.size(); ++i) {
    for (int j = 0; j < 3; ++j) w(i, j) = s.triangles[i][j];
  }
  d["triangles"] = tris;
  d["component"] = py::array_t<std::uint32_t>(s.triangle_component.size(), s.triangle_component.data());
  d["num_components"] = s.num_components;
  d["kept_tets"] = s.kept_tets;
  std::vector<std::size_t> open;
  for (std::uint32_t c = 0; c < s.num_components; ++c) open.push_back(extract::open_edges(s, c));
  d["open_edges"] = open;
  return d;
}

std::vector<field::TetAttributes> constant_attributes(const geometry::TetMesh& mesh, const Array& sigma,
                                               const Array& color, const py::object& gradient) {
  const std::size_t m = mesh.num_tets();
  if (sigma.ndim() != 1 || static_cast<std::size_t>(sigma.shape(0)) != m) {
    throw Error(ErrorCode::DimensionMismatch, "sigma must have one entry per tet");
  }
  const auto colors = to_points(color, "color");
  if (colors.size() != m) throw Error(ErrorCode::DimensionMismatch, "color must have one row per tet");
  std::vector<Point3> grads(m);
  if (!gradient.is_none()) {
    grads = to_points(gradient.cast<Array>(), "gradient");
    if (grads.size() != m) throw Error(ErrorCode::DimensionMismatch, "gradient must have one row per tet");
  }
  std::vector<field::TetAttributes> attrs(m);
  const auto s = sigma.unchecked<1>();
  for (std::size_t k = 0; k < m; ++k) {
    if (!(s(k) >= 0.0)) throw Error(ErrorCode::Format, "sigma must be non-negative");
    const auto& t = mesh.tets()[k];
    attrs[k].sigma = s(k);
    attrs[k].base_color = colors[k];
    attrs[k].grad = grads[k];
    attrs[k].center = t.circumcenter;
    attrs[k].radius = std::sqrt(t.circumradius_sq);
  }
  return attrs;
}

render::RenderOptions options(const std::array<double, 3>& background, std::size_t threads) {
  render::RenderOptions o;
  o.background = vec3(background);
  o.threads = threads;
  return o;
}

struct PyTrainer {
  io::RunConfig config;
  optim::Trainer trainer;

  Array render(const render::Camera& camera) const {
    const auto attrs = field::evaluate_field(trainer.field(), trainer.mesh(), camera.position,
                                             trainer.config().threads);
    render::RenderOptions o = trainer.config().render;
    o.threads = trainer.config().threads;
    return from_image(render::FrameRenderer(trainer.mesh(), attrs, camera, o).render());
  }
};

struct PyCheckpoint {
  io::Checkpoint checkpoint;
  field::Field field;
  geometry::TetMesh mesh;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Radiance meshes: triangulation, rendering, training and surface extraction";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<render::Camera>(m, "Camera")
      .def_static("pinhole", &render::Camera::pinhole, py::arg("width"), py::arg("height"),
                  py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"))
      .def_static("fisheye", &render::Camera::fisheye, py::arg("width"), py::arg("height"),
                  py::arg("f"), py::arg("cx"), py::arg("cy"), py::arg("fov"),
                  "Equidistant fisheye; fov is the full field of view in radians.")
      .def(
          "look_at",
          [](render::Camera& c, std::array<double, 3> eye, std::array<double, 3> target,
             std::array<double, 3> up) -> render::Camera& {
            c.look_at(vec3(eye), vec3(target), vec3(up));
            c.validate();
            return c;
          },
          py::arg("eye"), py::arg("target"), py::arg("up") = std::array<double, 3>{0, 0, 1},
          py::return_value_policy::reference_internal)
      .def_readonly("width", &render::Camera::width)
      .def_readonly("height", &render::Camera::height)
      .def_property_readonly("position", [](const render::Camera& c) { return tuple3(c.position); })
      .def_property_readonly("rotation", [](const render::Camera& c) {
        Array r({3, 3});
        auto w = r.mutable_unchecked<2>();
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) w(i, j) = c.rotation(i, j);
        return r;
      });

  m.def(
      "orbit_cameras",
      [](std::size_t count, int width, int height, std::array<double, 3> center, double distance,
         double fov_degrees) {
        return synthetic::orbit_cameras(count, width, height, vec3(center), distance, fov_degrees);
      },
      py::arg("count"), py::arg("width"), py::arg("height"),
      py::arg("center") = std::array<double, 3>{0, 0, 0}, py::arg("distance") = 3.0,
      py::arg("fov_degrees") = 50.0, "Pinhole cameras on a ring around center, looking at it.");

  py::class_<geometry::TetMesh>(m, "Mesh")
      .def(py::init([](const Array& points) { return geometry::delaunay(to_points(points, "points")); }),
           py::arg("points"))
      .def_property_readonly("points", [](const geometry::TetMesh& t) { return from_points(t.points()); })
      .def_property_readonly("tets",
                             [](const geometry::TetMesh& t) {
                               py::array_t<std::uint32_t> out(
                                   {static_cast<py::ssize_t>(t.num_tets()), py::ssize_t{4}});
                               auto w = out.mutable_unchecked<2>();
                               for (std::size_t k = 0; k < t.num_tets(); ++k)
                                 for (int j = 0; j < 4; ++j) w(k, j) = t.tets()[k].verts[j];
                               return out;
                             })
      .def_property_readonly("circumcenters",
                             [](const geometry::TetMesh& t) {
                               std::vector<Point3> c;
                               for (const auto& x : t.tets()) c.push_back(x.circumcenter);
                               return from_points(c);
                             })
      .def_property_readonly("num_tets", &geometry::TetMesh::num_tets)
      .def_property_readonly("num_points", &geometry::TetMesh::num_points)
      .def(
          "audit",
          [](const geometry::TetMesh& t, std::size_t samples, std::uint64_t seed) {
            const auto a = geometry::audit_mesh(t, samples, seed);
            py::dict d;
            d["ok"] = a.ok();
            d["non_positive_tets"] = a.non_positive_tets;
            d["empty_sphere_violations"] = a.empty_sphere_violations;
            d["adjacency_errors"] = a.adjacency_errors;
            d["summary"] = a.summary();
            return d;
          },
          py::arg("coverage_samples") = 200, py::arg("seed") = 1)
      .def(
          "visibility_order",
          [](const geometry::TetMesh& t, std::array<double, 3> origin) {
            const auto order = sorting::sort_keys(sorting::power_keys(t, vec3(origin), 0));
            return py::array_t<std::uint32_t>(order.size(), order.data());
          },
          py::arg("origin"), "Tet indices front to back as seen from origin.");

  m.def(
      "triangulate",
      [](const Array& points) { return geometry::delaunay(to_points(points, "points")); },
      py::arg("points"));

  m.def(
      "integrate_segment",
      [](double sigma, double t_in, double t_out, std::array<double, 3> c_in,
         std::array<double, 3> c_out) {
        const auto s = render::integrate_segment(sigma, t_in, t_out, vec3(c_in), vec3(c_out));
        return py::make_tuple(tuple3(s.delta), s.alpha);
      },
      py::arg("sigma"), py::arg("t_in"), py::arg("t_out"), py::arg("c_in"), py::arg("c_out"),
      "Premultiplied color and opacity of one cell crossing.");

  m.def(
      "render",
      [](const geometry::TetMesh& mesh, const Array& sigma, const Array& color,
         const render::Camera& camera, const py::object& gradient,
         std::array<double, 3> background, std::size_t threads) {
        const auto attrs = constant_attributes(mesh, sigma, color, gradient);
        py::gil_scoped_release release;
        auto img = render::FrameRenderer(mesh, attrs, camera, options(background, threads)).render();
        py::gil_scoped_acquire acquire;
        return from_image(img);
      },
      py::arg("mesh"), py::arg("sigma"), py::arg("color"), py::arg("camera"),
      py::arg("gradient") = py::none(), py::arg("background") = std::array<double, 3>{0, 0, 0},
      py::arg("threads") = 0,
      "Renders per-tet densities and colors; colors are anchored at circumcenters and vary "
      "along the optional per-tet gradient.");

  py::class_<synthetic::TeacherScene>(m, "SyntheticScene")
      .def_readonly("name", &synthetic::TeacherScene::name)
      .def_readonly("mesh", &synthetic::TeacherScene::mesh)
      .def_property_readonly("background",
                             [](const synthetic::TeacherScene& s) { return tuple3(s.background); })
      .def(
          "render",
          [](const synthetic::TeacherScene& s, const render::Camera& camera, std::size_t threads) {
            return from_image(render::FrameRenderer(s.mesh, s.attrs, camera,
                                                    options(tuple3(s.background), threads))
                                  .render());
          },
          py::arg("camera"), py::arg("threads") = 0);

  m.def(
      "synthetic_scene",
      [](const std::string& kind, std::uint64_t seed) {
        return synthetic::make_scene(synthetic::parse_scene_kind(kind), seed);
      },
      py::arg("kind"), py::arg("seed") = 1, "One of teapot, boxes, thin-rods.");
  m.def(
      "random_teacher",
      [](std::size_t min_tets, std::uint64_t seed) { return synthetic::random_teacher(min_tets, seed); },
      py::arg("min_tets"), py::arg("seed") = 1);

  py::class_<PyTrainer>(m, "Trainer")
      .def(py::init([](const Array& points, const std::vector<py::tuple>& views,
                       const py::object& config) {
             io::RunConfig c = to_config(config);
             std::vector<optim::View> v;
             for (const auto& t : views) {
               if (t.size() != 2) throw Error(ErrorCode::Format, "views are (camera, image) pairs");
               v.push_back({t[0].cast<render::Camera>(), to_image(t[1].cast<Array>()),
                            "view_" + std::to_string(v.size())});
             }
             return new PyTrainer{c, optim::Trainer(to_points(points, "points"), std::move(v),
                                                    c.field, c.train)};
           }),
           py::arg("points"), py::arg("views"), py::arg("config") = py::none(),
           "config is a dict in the configuration schema or a path to a .toml/.json file.")
      .def("step", [](PyTrainer& t) { return step_dict(t.trainer.step()); })
      .def(
          "run",
          [](PyTrainer& t, const py::object& callback) {
            while (t.trainer.iteration() < t.trainer.config().iterations) {
              const auto s = t.trainer.step();
              if (!callback.is_none()) callback(step_dict(s));
            }
          },
          py::arg("callback") = py::none())
      .def("densify", [](PyTrainer& t) { return t.trainer.densify_now().size(); },
           "Runs one densification pass now; returns the number of new points.")
      .def("evaluate",
           [](const PyTrainer& t) {
             const auto l = t.trainer.evaluate_all();
             py::dict d;
             d["loss"] = l.total;
             d["photometric"] = l.photometric;
             d["psnr"] = l.psnr;
             return d;
           })
      .def("render", &PyTrainer::render, py::arg("camera"))
      .def("save", [](const PyTrainer& t, const std::string& dir) {
             io::save_checkpoint(dir, io::snapshot(t.trainer, t.config));
           }, py::arg("directory"))
      .def_property_readonly("iteration", [](const PyTrainer& t) { return t.trainer.iteration(); })
      .def_property_readonly("points", [](const PyTrainer& t) { return from_points(t.trainer.points()); })
      .def_property_readonly("mesh", [](const PyTrainer& t) { return t.trainer.mesh(); });

  py::class_<PyCheckpoint>(m, "Checkpoint")
      .def_property_readonly("iteration", [](const PyCheckpoint& c) { return c.checkpoint.iteration; })
      .def_property_readonly("points", [](const PyCheckpoint& c) { return from_points(c.checkpoint.points); })
      .def_readonly("mesh", &PyCheckpoint::mesh)
      .def(
          "render",
          [](const PyCheckpoint& c, const render::Camera& camera, std::size_t threads) {
            const auto attrs = field::evaluate_field(c.field, c.mesh, camera.position, threads);
            render::RenderOptions o = c.checkpoint.config.train.render;
            o.threads = threads;
            return from_image(render::FrameRenderer(c.mesh, attrs, camera, o).render());
          },
          py::arg("camera"), py::arg("threads") = 0)
      .def(
          "extract",
          [](const PyCheckpoint& c, const std::vector<render::Camera>& cameras, double threshold,
             std::size_t threads) {
            const auto map = extract::peak_contribution(c.field, c.mesh, cameras, threads);
            return surface_dict(extract::extract_surface(map, c.mesh, threshold));
          },
          py::arg("cameras"), py::arg("threshold") = 0.1, py::arg("threads") = 0,
          "Thresholds peak color contributions over the cameras and returns the boundary "
          "triangles of each kept component.");

  m.def(
      "load_checkpoint",
      [](const std::string& dir) {
        io::Checkpoint ck = io::load_checkpoint(dir);
        field::Field f = ck.make_field();
        geometry::TetMesh mesh = geometry::delaunay(ck.points);
        return PyCheckpoint{std::move(ck), std::move(f), std::move(mesh)};
      },
      py::arg("directory"));

  m.def(
      "selftest",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& r : check::selftest(seed)) {
          py::dict d;
          d["name"] = r.name;
          d["passed"] = r.passed;
          d["value"] = r.value;
          d["limit"] = r.limit;
          d["detail"] = r.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 1);
}
