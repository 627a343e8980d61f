#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <string>

#include "radmesh/check/oracles.hpp"
#include "radmesh/check/suite.hpp"
#include "radmesh/densify/densify.hpp"
#include "radmesh/error.hpp"
#include "radmesh/extract/extract.hpp"
#include "radmesh/geometry/delaunay.hpp"
#include "radmesh/io/checkpoint.hpp"
#include "radmesh/io/config.hpp"
#include "radmesh/io/ply.hpp"
#include "radmesh/io/scene.hpp"
#include "radmesh/parallel.hpp"
#include "radmesh/render/image.hpp"
#include "radmesh/render/renderer.hpp"
#include "radmesh/sorting/power_sort.hpp"
#include "radmesh/synthetic/scenes.hpp"

using namespace radmesh;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::DegenerateTet: return kExitNumerical;
    default: return kExitData;
  }
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

bool has_extension(const std::string& path, const std::string& ext) {
  return fs::path(path).extension() == ext;
}

// ---- triangulate -----------------------------------------------------------

struct TriangulateArgs {
  std::string points;
  std::string out;
  bool skip_audit = false;
};

int cmd_triangulate(const TriangulateArgs& a) {
  const auto pts = io::read_points_ply(a.points);
  const auto t0 = Clock::now();
  const geometry::TetMesh mesh = geometry::delaunay(pts);
  const double secs = seconds_since(t0);
  std::cout << "points " << pts.size() << "\ntets " << mesh.num_tets() << "\ntime " << secs << " s\n";
  int code = kExitOk;
  if (!a.skip_audit) {
    const geometry::MeshAudit audit = geometry::audit_mesh(mesh);
    std::cout << "audit " << (audit.ok() ? "pass" : "FAIL") << " " << audit.summary() << "\n";
    if (!audit.ok()) code = kExitNumerical;
  }
  io::write_mesh_ply(a.out, mesh);
  return code;
}

// ---- render ----------------------------------------------------------------

struct RenderArgs {
  std::string checkpoint;
  std::string out;
  std::string scene;
  std::string view;
  std::vector<double> eye;
  std::vector<double> target{0.0, 0.0, 0.0};
  std::vector<double> up{0.0, 0.0, 1.0};
  double fov = -1.0;
  int width = 256;
  int height = 256;
  bool fisheye = false;
  std::size_t threads = 0;
};

Point3 to_point(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

render::Camera camera_for(const RenderArgs& a) {
  render::Camera cam;
  if (!a.scene.empty()) {
    const io::Scene scene = io::load_scene(a.scene);
    const io::SceneCamera* found = nullptr;
    for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
      if (scene.cameras[i].name == a.view || std::to_string(i) == a.view) found = &scene.cameras[i];
    }
    if (!found) throw Error(ErrorCode::Format, "scene has no view '" + a.view + "'");
    cam = found->camera;
    if (a.fisheye && cam.model != render::CameraModel::Fisheye) {
      const double fov = (a.fov > 0 ? a.fov : 180.0) * std::numbers::pi / 180.0;
      const double f = 0.5 * std::min(cam.width, cam.height) / (0.5 * fov);
      render::Camera fe = render::Camera::fisheye(cam.width, cam.height, f, cam.cx, cam.cy, fov);
      fe.rotation = cam.rotation;
      fe.position = cam.position;
      cam = fe;
    }
    return cam;
  }
  if (a.fisheye) {
    const double fov = (a.fov > 0 ? a.fov : 180.0) * std::numbers::pi / 180.0;
    const double f = 0.5 * std::min(a.width, a.height) / (0.5 * fov);
    cam = render::Camera::fisheye(a.width, a.height, f, 0.5 * a.width, 0.5 * a.height, fov);
  } else {
    const double fov = (a.fov > 0 ? a.fov : 50.0) * std::numbers::pi / 180.0;
    const double f = 0.5 * a.width / std::tan(0.5 * fov);
    cam = render::Camera::pinhole(a.width, a.height, f, f, 0.5 * a.width, 0.5 * a.height);
  }
  cam.look_at(to_point(a.eye), to_point(a.target), to_point(a.up));
  cam.validate();
  return cam;
}

int cmd_render(const RenderArgs& a) {
  const io::Checkpoint ck = io::load_checkpoint(a.checkpoint);
  const render::Camera cam = camera_for(a);
  const field::Field f = ck.make_field();
  const geometry::TetMesh mesh = geometry::delaunay(ck.points);
  const auto t0 = Clock::now();
  const auto attrs = field::evaluate_field(f, mesh, cam.position, a.threads);
  render::RenderOptions opts = ck.config.train.render;
  opts.threads = a.threads;
  const render::ImageBuffer img = render::render_image(mesh, attrs, cam, opts);
  std::cout << "tets " << mesh.num_tets() << "\nrender " << seconds_since(t0) << " s\n";
  render::write_image(a.out, img);
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string scene;
  std::string synthetic;
  std::string config;
  std::string out_dir;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> iterations;
  std::size_t views = 24;
  int resolution = 64;
  std::uint64_t log_every = 100;
  bool quiet = false;
};

// Renders the teacher to PFM ground truth and writes scene.json, points.ply
// and teacher.ply (teacher vertices) into dir. Returns the scene path.
std::string write_synthetic(const TrainArgs& a, std::uint64_t seed, std::size_t threads) {
  const synthetic::SceneKind kind = synthetic::parse_scene_kind(a.synthetic);
  const synthetic::TeacherScene teacher = synthetic::make_scene(kind, seed);
  const auto cams = synthetic::orbit_cameras(a.views, a.resolution, a.resolution, {0, 0, 0}, 3.0, 50.0);
  const auto views = synthetic::render_views(teacher, cams, threads);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir / "images");
  io::Scene scene;
  for (std::size_t i = 0; i < views.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03zu", i);
    const std::string rel = std::string("images/") + name + ".pfm";
    render::write_pfm((dir / rel).string(), views[i].image.cast<float>());
    scene.cameras.push_back({name, views[i].camera, rel});
  }
  io::write_points_ply((dir / "points.ply").string(), synthetic::lattice_points(4, 1.0));
  io::write_points_ply((dir / "teacher.ply").string(), teacher.mesh.points());
  scene.points = "points.ply";
  scene.bounds = io::Bounds{{-1, -1, -1}, {1, 1, 1}};
  scene.background = teacher.background;
  const std::string path = (dir / "scene.json").string();
  io::save_scene(path, scene);
  return path;
}

std::string checkpoint_name(std::uint64_t iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "iter_%06llu", static_cast<unsigned long long>(iteration));
  return buf;
}

int cmd_train(const TrainArgs& a) {
  if (a.scene.empty() == a.synthetic.empty()) {
    std::cerr << "train: give either a scene file or --synthetic\n";
    return kExitUsage;
  }
  fs::create_directories(a.out_dir);
  io::RunConfig config = a.config.empty() ? io::RunConfig{} : io::load_config(a.config);
  std::optional<io::Checkpoint> ck;
  if (!a.resume.empty()) {
    ck = io::load_checkpoint(a.resume);
    config = ck->config;
  }
  if (a.seed) config.train.seed = *a.seed;
  if (a.threads) config.train.threads = *a.threads;
  if (a.iterations) config.train.iterations = *a.iterations;
  config.train.validate();

  const std::string scene_path =
      a.synthetic.empty() ? a.scene : write_synthetic(a, config.train.seed, config.train.threads);
  const io::Scene scene = io::load_scene(scene_path);
  config.train.render.background = scene.background;
  std::vector<optim::View> views = io::load_views(scene);

  std::optional<optim::Trainer> trainer;
  if (ck) {
    ck->config = config;
    trainer.emplace(io::resume_trainer(*ck, std::move(views)));
  } else {
    trainer.emplace(io::initial_points(scene), std::move(views), config.field, config.train);
  }
  const fs::path out(a.out_dir);
  std::ofstream(out / "config.json") << io::config_to_json(config).dump(2) << "\n";
  io::MetricsWriter metrics((out / "metrics.csv").string(), ck.has_value());
  if (!a.quiet) {
    std::clog << "training " << trainer->points().size() << " points, " << trainer->mesh().num_tets()
              << " tets, " << trainer->views().size() << " views, " << config.train.iterations
              << " iterations\n";
  }
  const auto t0 = Clock::now();
  trainer->run([&](const optim::StepStats& s) {
    metrics.write(s, trainer->grid_lr(), trainer->heads_lr(), trainer->vertex_lr());
    if (config.checkpoint_every > 0 && s.iteration % config.checkpoint_every == 0) {
      io::save_checkpoint((out / "checkpoints" / checkpoint_name(s.iteration)).string(),
                          io::snapshot(*trainer, config));
    }
    if (!a.quiet && a.log_every > 0 && s.iteration % a.log_every == 0) {
      std::clog << "iter " << s.iteration << " loss " << s.loss.total << " psnr " << s.loss.psnr
                << " tets " << s.tets << (s.splits ? " splits " + std::to_string(s.splits) : "")
                << "\n";
    }
  });
  io::save_checkpoint((out / "checkpoint").string(), io::snapshot(*trainer, config));
  const optim::LossBreakdown eval = trainer->evaluate_all();
  std::cout << "iterations " << trainer->iteration() << "\npoints " << trainer->points().size()
            << "\ntets " << trainer->mesh().num_tets() << "\npsnr " << eval.psnr << "\nloss "
            << eval.total << "\ntime " << seconds_since(t0) << " s\n";
  return kExitOk;
}

// ---- extract ---------------------------------------------------------------

struct ExtractArgs {
  std::string checkpoint;
  std::string scene;
  std::string out;
  double threshold = 0.1;
  std::size_t threads = 0;
};

int cmd_extract(const ExtractArgs& a) {
  if (!has_extension(a.out, ".obj") && !has_extension(a.out, ".ply")) {
    std::cerr << "extract: output must end in .obj or .ply\n";
    return kExitUsage;
  }
  const io::Checkpoint ck = io::load_checkpoint(a.checkpoint);
  const io::Scene scene = io::load_scene(a.scene);
  std::vector<render::Camera> cams;
  for (const auto& c : scene.cameras) cams.push_back(c.camera);
  const field::Field f = ck.make_field();
  const geometry::TetMesh mesh = geometry::delaunay(ck.points);
  const extract::ContributionMap map = extract::peak_contribution(f, mesh, cams, a.threads);
  const extract::SurfaceMesh surface = extract::extract_surface(map, mesh, a.threshold);
  std::cout << "tets " << mesh.num_tets() << "\nkept " << surface.kept_tets << "\ncomponents "
            << surface.num_components << "\ntriangles " << surface.triangles.size() << "\n";
  for (std::uint32_t c = 0; c < surface.num_components; ++c) {
    std::cout << "component " << c << " non_manifold_edges " << extract::open_edges(surface, c)
              << " boundary_edges " << extract::boundary_edges(surface, c) << "\n";
  }
  if (has_extension(a.out, ".obj")) {
    extract::write_obj(a.out, surface);
  } else {
    extract::write_ply(a.out, surface);
  }
  return kExitOk;
}

// ---- densify-report --------------------------------------------------------

struct DensifyArgs {
  std::string checkpoint;
  std::string scene;
  std::string out;
  std::size_t threads = 0;
};

int cmd_densify_report(const DensifyArgs& a) {
  const io::Checkpoint ck = io::load_checkpoint(a.checkpoint);
  const io::Scene scene = io::load_scene(a.scene);
  const auto views = io::load_views(scene);
  std::vector<densify::DensifyView> dviews;
  for (const auto& v : views) dviews.push_back({&v.camera, &v.image});
  const field::Field f = ck.make_field();
  const geometry::TetMesh mesh = geometry::delaunay(ck.points);
  render::RenderOptions opts = ck.config.train.render;
  opts.background = scene.background;
  const densify::SplitStats stats = densify::accumulate(f, mesh, dviews, opts, a.threads);
  const densify::DensifyConfig& dc = ck.config.train.densify;
  std::ofstream out(a.out);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + a.out + " for writing");
  out.precision(17);
  out << "tet,views,mass,ssim_score,variance_score,ssim_split,variance_split\n";
  std::size_t ssim_splits = 0, var_splits = 0;
  for (std::size_t k = 0; k < stats.num_tets(); ++k) {
    const double s = stats.ssim_score(k);
    const double t = stats.variance_score(k);
    const bool ss = s > dc.ssim_threshold;
    const bool vs = t > dc.variance_threshold;
    ssim_splits += ss;
    var_splits += vs;
    out << k << ',' << stats.views(k) << ',' << stats.mass(k) << ',' << s << ',' << t << ','
        << ss << ',' << vs << '\n';
  }
  std::cout << "tets " << stats.num_tets() << "\nssim_splits " << ssim_splits
            << "\nvariance_splits " << var_splits << "\n";
  return kExitOk;
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  std::size_t tets = 1000000;
  std::size_t render_tets = 200;
  int resolution = 256;
  std::size_t threads = 0;
  std::uint64_t seed = 1;
};

int cmd_bench(const BenchArgs& a) {
  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  // random points give about 6.7 tets per point
  std::vector<Point3> pts(std::max<std::size_t>(8, a.tets * 10 / 67));
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  auto t0 = Clock::now();
  const geometry::TetMesh mesh = geometry::delaunay(pts);
  const double tri = seconds_since(t0);
  const Point3 origin{2.5, -1.5, 0.7};
  double best = 1e300;
  std::size_t checksum = 0;
  for (int rep = 0; rep < 3; ++rep) {
    t0 = Clock::now();
    const auto keys = sorting::power_keys(mesh, origin, 1);
    const auto order = sorting::sort_keys(keys);
    best = std::min(best, seconds_since(t0));
    checksum += order.front();
  }
  std::cout << "points " << pts.size() << "\ntets " << mesh.num_tets() << "\ndelaunay_s " << tri
            << "\nsort_s " << best << " (power keys + radix sort, 1 thread, best of 3)\n"
            << "sort_tets_per_s " << mesh.num_tets() / best << "\n";

  std::size_t n = 8;
  geometry::TetMesh small = check::random_mesh(n, a.seed);
  while (small.num_tets() < a.render_tets) small = check::random_mesh(++n, a.seed);
  const auto attrs = check::random_attributes(small, a.seed + 1);
  const render::Camera cam =
      check::orbit_camera(render::CameraModel::Pinhole, a.resolution, 0.4);
  render::RenderOptions opts;
  opts.threads = a.threads;
  best = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    t0 = Clock::now();
    const render::ImageD img = render::FrameRenderer(small, attrs, cam, opts).render();
    best = std::min(best, seconds_since(t0));
    checksum += img.rgb.size();
  }
  std::cout << "render_tets " << small.num_tets() << "\nrender_resolution " << a.resolution << "x"
            << a.resolution << "\nrender_threads " << resolve_threads(a.threads) << "\nrender_s "
            << best << " (best of 3)\nrender_pixels_per_s "
            << static_cast<double>(a.resolution) * a.resolution / best << "\n";
  return checksum > 0 ? kExitOk : kExitNumerical;
}

// ---- selftest --------------------------------------------------------------

int cmd_selftest(std::uint64_t seed) {
  bool all = true;
  for (const check::CheckResult& r : check::selftest(seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    all = all && r.passed;
  }
  std::cout << (all ? "selftest passed" : "selftest FAILED") << "\n";
  return all ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radmesh: Delaunay radiance meshes"};
  app.require_subcommand(1);

  TriangulateArgs tri;
  auto* c_tri = app.add_subcommand("triangulate", "Delaunay tetrahedralization of a PLY point cloud");
  c_tri->add_option("points", tri.points, "input point cloud (.ply)")->required();
  c_tri->add_option("out", tri.out, "output tet mesh (.ply)")->required();
  c_tri->add_flag("--skip-audit", tri.skip_audit, "skip the brute-force empty-sphere audit");

  RenderArgs ren;
  auto* c_ren = app.add_subcommand("render", "render a checkpoint to .png or .pfm");
  c_ren->add_option("checkpoint", ren.checkpoint, "checkpoint directory")->required();
  c_ren->add_option("out", ren.out, "output image (.png or .pfm)")->required();
  auto* o_scene = c_ren->add_option("--scene", ren.scene, "scene file providing the camera");
  c_ren->add_option("--view", ren.view, "camera name or index in the scene")->needs(o_scene);
  auto* o_eye = c_ren->add_option("--eye", ren.eye, "camera position x y z")->expected(3)->excludes(o_scene);
  c_ren->add_option("--target", ren.target, "look-at point x y z")->expected(3)->needs(o_eye);
  c_ren->add_option("--up", ren.up, "approximate up direction")->expected(3)->needs(o_eye);
  c_ren->add_option("--fov", ren.fov, "field of view in degrees (pinhole horizontal, fisheye full)");
  c_ren->add_option("--width", ren.width)->check(CLI::PositiveNumber);
  c_ren->add_option("--height", ren.height)->check(CLI::PositiveNumber);
  c_ren->add_flag("--fisheye", ren.fisheye, "equidistant fisheye projection");
  c_ren->add_option("--threads", ren.threads, "worker threads (0 = all cores)");

  TrainArgs tr;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::uint64_t iterations = 0;
  auto* c_tr = app.add_subcommand("train", "optimize a radiance mesh");
  c_tr->add_option("scene", tr.scene, "scene file (.json)");
  c_tr->add_option("--synthetic", tr.synthetic, "generate a teacher scene: teapot, boxes or thin-rods")
      ->check(CLI::IsMember({"teapot", "boxes", "thin-rods"}));
  c_tr->add_option("--config", tr.config, "config file (.toml or .json)");
  c_tr->add_option("--out-dir", tr.out_dir, "output directory")->required();
  c_tr->add_option("--resume", tr.resume, "checkpoint directory to continue from");
  auto* o_seed = c_tr->add_option("--seed", seed, "random seed");
  auto* o_threads = c_tr->add_option("--threads", threads, "worker threads (0 = all cores)");
  auto* o_iter = c_tr->add_option("--iterations", iterations, "override the iteration count");
  c_tr->add_option("--views", tr.views, "synthetic camera count")->check(CLI::PositiveNumber);
  c_tr->add_option("--resolution", tr.resolution, "synthetic image size")->check(CLI::PositiveNumber);
  c_tr->add_option("--log-every", tr.log_every, "progress line cadence");
  c_tr->add_flag("--quiet", tr.quiet, "no progress lines");

  ExtractArgs ex;
  auto* c_ex = app.add_subcommand("extract", "surface of the high-contribution tets");
  c_ex->add_option("checkpoint", ex.checkpoint, "checkpoint directory")->required();
  c_ex->add_option("scene", ex.scene, "scene file with the training cameras")->required();
  c_ex->add_option("out", ex.out, "output mesh (.obj or .ply)")->required();
  c_ex->add_option("--threshold", ex.threshold, "peak contribution threshold")
      ->check(CLI::NonNegativeNumber);
  c_ex->add_option("--threads", ex.threads);

  DensifyArgs de;
  auto* c_de = app.add_subcommand("densify-report", "per-tet split scores as CSV");
  c_de->add_option("checkpoint", de.checkpoint)->required();
  c_de->add_option("scene", de.scene)->required();
  c_de->add_option("out", de.out, "output CSV")->required();
  c_de->add_option("--threads", de.threads);

  BenchArgs be;
  auto* c_be = app.add_subcommand("bench", "sorting and rendering throughput");
  c_be->add_option("--tets", be.tets, "approximate tet count for the sort benchmark")
      ->check(CLI::PositiveNumber);
  c_be->add_option("--render-tets", be.render_tets)->check(CLI::PositiveNumber);
  c_be->add_option("--resolution", be.resolution)->check(CLI::PositiveNumber);
  c_be->add_option("--threads", be.threads);
  c_be->add_option("--seed", be.seed);

  std::uint64_t st_seed = 1;
  auto* c_st = app.add_subcommand("selftest", "brute-force oracle suite");
  c_st->add_option("--seed", st_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_tri) return cmd_triangulate(tri);
    if (*c_ren) {
      if (ren.scene.empty() && ren.eye.empty()) {
        std::cerr << "render: give --scene/--view or --eye\n";
        return kExitUsage;
      }
      if (!ren.scene.empty() && ren.view.empty()) ren.view = "0";
      return cmd_render(ren);
    }
    if (*c_tr) {
      if (*o_seed) tr.seed = seed;
      if (*o_threads) tr.threads = threads;
      if (*o_iter) tr.iterations = iterations;
      return cmd_train(tr);
    }
    if (*c_ex) return cmd_extract(ex);
    if (*c_de) return cmd_densify_report(de);
    if (*c_be) return cmd_bench(be);
    if (*c_st) return cmd_selftest(st_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
