// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "radmesh/check/densify_oracle.hpp"
#include "radmesh/check/oracles.hpp"
#include "radmesh/check/suite.hpp"
#include "radmesh/densify/densify.hpp"
#include "radmesh/extract/extract.hpp"
#include "radmesh/geometry/delaunay.hpp"
#include "radmesh/optim/train.hpp"
#include "radmesh/render/renderer.hpp"
#include "radmesh/sorting/power_sort.hpp"
#include "radmesh/synthetic/scenes.hpp"

using namespace radmesh;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kSeed = 20240611;

double since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

struct Outcome {
  bool passed = true;
  std::string detail;

  void add(const check::CheckResult& r) {
    passed = passed && r.passed;
    note((r.passed ? "" : "FAILED ") + r.name + ": " + r.detail);
  }
  void require(bool ok, const std::string& what) {
    passed = passed && ok;
    note((ok ? "" : "FAILED ") + what);
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

Outcome delaunay() {
  Outcome o;
  o.add(check::delaunay_audit({10, 50, 200, 500}, 100, kSeed, 60.0));
  return o;
}

Outcome visibility() {
  Outcome o;
  o.add(check::visibility_order(20, 200, 1000, kSeed + 1));
  return o;
}

Outcome integration() {
  Outcome o;
  o.add(check::segment_quadrature(10000, 100000, kSeed + 2, 1e-5));
  return o;
}

Outcome image_oracle() {
  Outcome o;
  o.add(check::image_oracle(render::CameraModel::Pinhole, 200, 64, kSeed + 3, 1e-5));
  o.add(check::image_oracle(render::CameraModel::Fisheye, 200, 64, kSeed + 4, 1e-5));
  return o;
}

Outcome energy() {
  Outcome o;
  o.add(check::energy_conservation(10000, kSeed + 5, 1e-6));
  return o;
}

Outcome gradients() {
  Outcome o;
  for (const auto& r : check::gradient_checks(kSeed + 6, 1e-4, 1e-2)) o.add(r);
  return o;
}

Outcome flips() {
  Outcome o;
  o.add(check::flip_continuity(1e-3));
  o.add(check::flip_continuity(1e-5));
  return o;
}

Outcome teacher_student() {
  Outcome o;
  const auto start = Clock::now();
  const auto teacher = synthetic::random_teacher(50, 7);
  const auto cams = synthetic::orbit_cameras(30, 128, 128, {0, 0, 0}, 2.5, 45.0);
  const auto views = synthetic::render_views(teacher, cams, 1);
  optim::TrainConfig tc;
  tc.iterations = 5000;
  tc.densify_every = tc.iterations;  // vertices are frozen to the teacher's plus jitter
  tc.threads = 1;
  optim::Trainer trainer(synthetic::jitter_points(teacher.mesh, 0.05, 11), views, {}, tc);
  double best = 0.0;
  std::uint64_t reached = 0;
  trainer.run([&](const optim::StepStats& s) {
    if (s.iteration % 500 != 0) return;
    const double psnr = trainer.evaluate_all().psnr;
    best = std::max(best, psnr);
    if (psnr > 30.0 && reached == 0) reached = s.iteration;
  });
  const double seconds = since(start);
  o.require(teacher.mesh.num_tets() >= 50,
            "teacher " + std::to_string(teacher.mesh.num_tets()) + " tets");
  o.require(best > 30.0, "best PSNR " + fmt(best) + " dB over 30 views (> 30), first reached at " +
                             std::to_string(reached) + " of 5000 iterations");
  o.require(seconds < 1800.0, fmt(seconds) + " s on 1 thread (< 1800)");
  return o;
}

bool touches_any(const std::array<Point3, 4>& tet, const std::vector<synthetic::Rod>& rods) {
  for (const auto& r : rods) {
    if (synthetic::tet_touches_rod(tet, r)) return true;
  }
  return false;
}

double worst_stat_gap(const densify::SplitStats& streamed,
                      const std::vector<std::vector<densify::CameraTetStats>>& naive,
                      std::size_t& compared) {
  double worst = 0.0;
  for (std::size_t k = 0; k < streamed.num_tets(); ++k) {
    const auto ref = check::naive_scores(naive, k);
    worst = std::max({worst, std::abs(streamed.ssim_score(k) - ref.ssim),
                      std::abs(streamed.variance_score(k) - ref.variance)});
    compared += ref.cameras >= 2;
  }
  return worst;
}

Outcome densification() {
  Outcome o;

  // streaming vs double loop on a random scene with random targets
  {
    geometry::TetMesh mesh = check::random_mesh(40, kSeed + 7, 0.8);
    for (std::size_t n = 41; mesh.num_tets() < 200; ++n) mesh = check::random_mesh(n, kSeed + 7, 0.8);
    const auto attrs = check::random_attributes(mesh, kSeed + 8, 2.0);
    const auto cams = synthetic::orbit_cameras(8, 48, 48, {0, 0, 0}, 2.6, 50.0);
    render::RenderOptions opts;
    opts.early_out = 0.0;
    opts.threads = 1;
    std::mt19937_64 rng(kSeed + 9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    densify::SplitStats streamed(mesh.num_tets());
    std::vector<std::vector<densify::CameraTetStats>> naive;
    std::vector<densify::CameraTetStats> per;
    for (std::size_t c = 0; c < cams.size(); ++c) {
      render::ImageD gt(48, 48);
      for (double& x : gt.rgb) x = u(rng);
      densify::accumulate_camera(mesh, attrs, cams[c], gt, opts, per);
      streamed.add_camera(static_cast<int>(c), per);
      naive.push_back(check::naive_camera_stats(mesh, attrs, cams[c], gt));
    }
    std::size_t compared = 0;
    const double gap = worst_stat_gap(streamed, naive, compared);
    o.require(gap < 1e-10, "random scene: max |S,T streamed - brute| " + fmt(gap) + " over " +
                               std::to_string(mesh.num_tets()) + " tets (< 1e-10)");
  }

  // thresholds and cadence
  const densify::DensifyConfig dc;
  const optim::TrainConfig defaults;
  o.require(dc.ssim_threshold == 0.5 && dc.variance_threshold == 2.0 &&
                defaults.densify_every == 500,
            "defaults S>" + fmt(dc.ssim_threshold) + " T>" + fmt(dc.variance_threshold) +
                " every " + std::to_string(defaults.densify_every));
  {
    // one tet, two cameras: S exactly at and just above the threshold
    const geometry::TetMesh mesh = geometry::delaunay(synthetic::lattice_points(1, 1.0));
    const auto at_score = [&](double s, double var) {
      densify::SplitStats stats(mesh.num_tets());
      std::vector<densify::CameraTetStats> per(mesh.num_tets());
      for (auto& p : per) {
        p.hits = 1;
        p.mass = 1.0;
        p.error_mass = s;
      }
      stats.add_camera(0, per);
      stats.add_camera(1, per);
      // zero mean residual with unit mass: T equals the squared residual sum
      if (var > 0.0) {
        densify::SplitStats v(mesh.num_tets());
        for (auto& p : per) {
          p.error_mass = 0.0;
          p.residual = {0, 0, 0};
          p.residual_sq = {var, 0, 0};
        }
        v.add_camera(0, per);
        stats = v;
      }
      std::mt19937_64 rng(1);
      return densify::select_splits(stats, mesh, dc, rng).size();
    };
    const double above = std::nextafter(0.5, 1.0);
    const double var_above = std::nextafter(2.0, 3.0);
    const bool exact = at_score(0.5, 0.0) == 0 && at_score(above, 0.0) == mesh.num_tets() &&
                       at_score(0.0, 2.0) == 0 && at_score(0.0, var_above) == mesh.num_tets();
    o.require(exact, "strict thresholds at S=0.5 and T=2.0");
  }
  {
    const auto teacher = synthetic::random_teacher(20, 3);
    const auto views = synthetic::render_views(
        teacher, synthetic::orbit_cameras(4, 12, 12, {0, 0, 0}, 2.5, 45.0), 1);
    optim::TrainConfig tc;
    tc.iterations = 1600;
    tc.threads = 1;
    field::FieldConfig fc;
    fc.grid.levels = 2;
    fc.grid.log2_table_size = 8;
    fc.heads.hidden = 4;
    optim::Trainer t(synthetic::lattice_points(1, 0.8), views, fc, tc);
    std::vector<std::uint64_t> passes;
    t.run([&](const optim::StepStats& s) {
      if (!t.spikes().empty() && t.spikes().back() == s.iteration &&
          (passes.empty() || passes.back() != s.iteration)) {
        passes.push_back(s.iteration);
      }
    });
    std::string at;
    for (const auto p : passes) at += (at.empty() ? "" : "/") + std::to_string(p);
    o.require(passes == std::vector<std::uint64_t>{500, 1000, 1500},
              "passes at iterations " + at + " of 1600 (expected 500/1000/1500)");
  }

  // thin rods: where do variance-triggered splits land
  {
    const auto scene = synthetic::thin_rods_scene(1);
    const auto rods = synthetic::thin_rods_scene_rods();
    const auto cams = synthetic::orbit_cameras(24, 64, 64, {0, 0, 0}, 3.0, 50.0);
    const auto views = synthetic::render_views(scene, cams, 1);
    optim::TrainConfig tc;
    tc.iterations = 2000;
    tc.densify_every = tc.iterations;
    tc.threads = 1;
    optim::Trainer t(synthetic::lattice_points(4, 1.0), views, {}, tc);
    t.run();
    const geometry::TetMesh mesh = t.mesh();

    // the same streamed statistics on the trained field, against brute force
    {
      std::vector<densify::DensifyView> dv;
      std::vector<std::vector<densify::CameraTetStats>> naive;
      render::RenderOptions opts = tc.render;
      opts.early_out = 0.0;
      for (std::size_t i = 0; i < views.size(); i += 6) {
        dv.push_back({&views[i].camera, &views[i].image});
        const auto attrs = field::evaluate_field(t.field(), mesh, views[i].camera.position, 1);
        naive.push_back(check::naive_camera_stats(mesh, attrs, views[i].camera, views[i].image));
      }
      const auto streamed = densify::accumulate(t.field(), mesh, dv, opts, 1);
      std::size_t compared = 0;
      const double gap = worst_stat_gap(streamed, naive, compared);
      o.require(gap < 1e-10, "trained field: max gap " + fmt(gap) + " over " + std::to_string(mesh.num_tets()) +
                                 " tets (< 1e-10)");
    }

    const auto decisions = t.densify_now();
    std::size_t variance = 0, on_rod = 0;
    for (const auto& d : decisions) {
      if (!d.variance_triggered) continue;
      ++variance;
      on_rod += touches_any(mesh.tet_points(d.tet), rods);
    }
    const double share = variance ? static_cast<double>(on_rod) / variance : 0.0;
    o.require(variance > 0 && share >= 0.8,
              "thin rods: " + std::to_string(on_rod) + "/" + std::to_string(variance) +
                  " variance splits touch a rod (>= 80%), " + std::to_string(decisions.size()) +
                  " splits total");
  }
  return o;
}

Outcome extraction() {
  Outcome o;
  const auto scene = synthetic::boxes_scene(1);
  const auto cams = synthetic::orbit_cameras(30, 64, 64, {0, 0, 0}, 3.0, 50.0);
  extract::ContributionMap map(scene.mesh.num_tets());
  for (const auto& c : cams) map.add_camera(scene.mesh, scene.attrs, c, scene.background, 1);
  const auto surface = extract::extract_surface(map, scene.mesh);
  std::size_t open = 0;
  for (std::uint32_t c = 0; c < surface.num_components; ++c) open += extract::open_edges(surface, c);
  o.require(surface.num_components == synthetic::boxes_scene_boxes().size(),
            std::to_string(surface.num_components) + " components for " +
                std::to_string(synthetic::boxes_scene_boxes().size()) + " clusters");
  o.require(open == 0, std::to_string(surface.triangles.size()) + " triangles, " +
                           std::to_string(open) + " edges not shared by exactly two triangles");
  // the default threshold is the one a call without an explicit value uses
  const auto explicit_surface = extract::extract_surface(map, scene.mesh, 0.1);
  o.require(explicit_surface.kept_tets == surface.kept_tets, "default threshold 0.1");
  return o;
}

Outcome performance() {
  Outcome o;
  std::mt19937_64 rng(kSeed + 10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point3> pts(150000);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  const geometry::TetMesh mesh = geometry::delaunay(pts);
  double sort_s = 1e300;
  std::size_t check = 0;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = Clock::now();
    const auto keys = sorting::power_keys(mesh, {2.5, -1.5, 0.7}, 1);
    const auto order = sorting::sort_keys(keys);
    sort_s = std::min(sort_s, since(t0));
    check += order.size();
  }
  o.require(mesh.num_tets() >= 1000000 && sort_s < 1.0,
            "keys + radix sort of " + std::to_string(mesh.num_tets()) + " tets in " + fmt(sort_s) +
                " s on 1 thread (< 1)");

  std::size_t n = 40;
  geometry::TetMesh small = check::random_mesh(n, kSeed + 11);
  while (small.num_tets() < 200) small = check::random_mesh(++n, kSeed + 11);
  const auto attrs = check::random_attributes(small, kSeed + 12);
  const auto cam = check::orbit_camera(render::CameraModel::Pinhole, 256, 0.4);
  render::RenderOptions opts;
  double render_s = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = Clock::now();
    const auto img = render::FrameRenderer(small, attrs, cam, opts).render();
    render_s = std::min(render_s, since(t0));
    check += img.rgb.size();
  }
  o.require(render_s < 2.0, std::to_string(small.num_tets()) + " tets at 256x256 in " +
                                fmt(render_s) + " s (< 2)");
  o.require(check > 0, "outputs produced");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "Delaunay correctness", delaunay},
      {2, "power sort visibility", visibility},
      {3, "exact segment integration", integration},
      {4, "whole-image oracle", image_oracle},
      {5, "energy conservation", energy},
      {6, "gradient checks", gradients},
      {7, "flip continuity", flips},
      {8, "teacher-student recovery", teacher_student},
      {9, "densification fidelity", densification},
      {10, "extraction", extraction},
      {11, "performance floor", performance},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.passed = false;
      o.note(std::string("exception: ") + e.what());
    }
    failed += !o.passed;
    std::printf("%s %2d %s (%.1f s): %s\n", o.passed ? "PASS" : "FAIL", c.id, c.name, since(start),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
