#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "radmesh/optim/train.hpp"
#include "radmesh/synthetic/scenes.hpp"
#include "radmesh/check/finite_diff.hpp"
#include "radmesh/check/oracles.hpp"

using namespace radmesh;
using namespace radmesh::optim;

namespace {

ImageD random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageD img(w, h);
  for (double& v : img.rgb) v = u(rng);
  return img;
}

ImageD checkerboard(int w, int h, int cell, bool invert) {
  ImageD img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool on = ((x / cell + y / cell) % 2 == 0) != invert;
      const double v = on ? 1.0 : 0.0;
      img.set(x, y, {v, v, v});
    }
  }
  return img;
}

// Direct 2D-window SSIM with zero padding, one pixel and channel at a time.
double reference_ssim(const ImageD& a, const ImageD& b) {
  const int r = 5;
  const double s = 1.5;
  double kernel[11];
  double ksum = 0.0;
  for (int i = -r; i <= r; ++i) ksum += kernel[i + r] = std::exp(-(i * i) / (2 * s * s));
  for (double& k : kernel) k /= ksum;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y < a.height; ++y) {
      for (int x = 0; x < a.width; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= a.width || yy >= a.height) continue;
            const double w = kernel[dx + r] * kernel[dy + r];
            const double va = a.rgb[a.index(xx, yy) * 3 + ch];
            const double vb = b.rgb[b.index(xx, yy) * 3 + ch];
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        total += (2 * ma * mb + c1) * (2 * cov + c2) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
    }
  }
  return total / (3.0 * a.pixels());
}

double brute_distortion(const std::vector<DistortionSegment>& segs) {
  double loss = 0.0;
  for (const auto& a : segs) {
    const double la = a.s_out - a.s_in, wa = a.sigma * la, ma = 0.5 * (a.s_in + a.s_out);
    for (const auto& b : segs) {
      const double wb = b.sigma * (b.s_out - b.s_in), mb = 0.5 * (b.s_in + b.s_out);
      loss += wa * wb * std::abs(ma - mb);
    }
    loss += wa * wa * la / 3.0;
  }
  return loss;
}

std::vector<DistortionSegment> random_segments(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> cuts(2 * n);
  for (double& c : cuts) c = u(rng);
  std::sort(cuts.begin(), cuts.end());
  std::vector<DistortionSegment> segs(n);
  for (std::size_t i = 0; i < n; ++i) segs[i] = {3.0 * u(rng), cuts[2 * i], cuts[2 * i + 1]};
  return segs;
}

void randomize(std::span<double> p, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& x : p) x = u(rng);
}

field::Field small_field(std::uint64_t seed) {
  field::FieldConfig cfg;
  cfg.grid.levels = 3;
  cfg.grid.n_min = 2;
  cfg.grid.n_max = 8;
  cfg.grid.log2_table_size = 6;
  cfg.heads.hidden = 8;
  cfg.heads.sh_degree = 1;
  cfg.radius_cap = 2.5;
  field::Field f(cfg, seed);
  randomize(f.grid().params(), seed + 1, 0.5);
  randomize(f.heads().params(), seed + 2, 0.5);
  return f;
}

View small_view(int size, std::uint64_t seed) {
  View v;
  v.camera = render::Camera::pinhole(size, size, size * 0.9, size * 0.9, size * 0.5, size * 0.5);
  v.camera.look_at({2.4, -1.7, 1.1}, {0.05, 0.02, -0.03});
  v.image = random_image(size, size, seed);
  return v;
}

struct GradCase {
  field::Field field;
  geometry::TetMesh mesh;
  View view;
  LossWeights weights;
  double scale = 2.0;
};

GradCase grad_case(std::size_t points, std::uint64_t seed) {
  GradCase c{small_field(seed), check::random_mesh(points, seed + 3, 0.8), small_view(16, seed + 4), {}};
  c.weights.ssim = 0.2;
  c.weights.distortion = 0.05;
  c.weights.weight_decay = 0.01;
  return c;
}

double loss_of(const GradCase& c, const field::Field& f, const geometry::TetMesh& m) {
  return evaluate_loss(f, m, c.view, c.weights, {}, c.scale, 1).total;
}

field::FieldGrad gradient_of(const GradCase& c) {
  field::FieldGrad g;
  g.resize_like(c.field, c.mesh.num_points());
  compute_gradients(c.field, c.mesh, c.view, c.weights, {}, c.scale, g, 1);
  return g;
}

}  // namespace

TEST(Photometric, Identical) {
  const ImageD a = random_image(12, 9, 1);
  EXPECT_EQ(photometric_loss(a, a), 0.0);
  EXPECT_DOUBLE_EQ(ssim(a, a), 1.0);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(Photometric, L1Term) {
  const ImageD gt(8, 8, 0.0), render(8, 8, 1.0);
  EXPECT_DOUBLE_EQ(l1_loss(render, gt), 1.0);
  EXPECT_DOUBLE_EQ(photometric_loss(render, gt, 0.0), 1.0);
}

TEST(Photometric, CheckerboardSsimMatchesDirectFormula) {
  const ImageD a = checkerboard(8, 8, 1, false);
  const ImageD b = checkerboard(8, 8, 1, true);
  const double ref = reference_ssim(a, b);
  EXPECT_NEAR(ssim(a, b), ref, 1e-12);
  EXPECT_NEAR(photometric_loss(a, b), 0.8 * 1.0 + 0.2 * (1.0 - ref), 1e-12);

  const ImageD c = random_image(13, 10, 2), d = random_image(13, 10, 3);
  EXPECT_NEAR(ssim(c, d), reference_ssim(c, d), 1e-12);
}

TEST(Photometric, SizeMismatchThrows) {
  try {
    photometric_loss(ImageD(4, 4), ImageD(4, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Photometric, GradientMatchesFiniteDifferences) {
  ImageD a = random_image(14, 11, 4);
  const ImageD b = random_image(14, 11, 5);
  ImageD grad;
  photometric_loss(a, b, 0.2, &grad);
  std::vector<double> fd(a.rgb.size());
  for (std::size_t i = 0; i < fd.size(); ++i) {
    fd[i] = check::central_difference(
        [&](double h) {
          ImageD p = a;
          p.rgb[i] += h;
          return photometric_loss(p, b, 0.2);
        },
        1e-6);
  }
  EXPECT_LT(check::vector_rel_err(grad.rgb, fd), 1e-6);

  ImageD sgrad;
  ssim(a, b, {}, nullptr, &sgrad);
  for (std::size_t i = 0; i < a.rgb.size(); i += 7) {
    const double f = check::central_difference(
        [&](double h) {
          ImageD p = a;
          p.rgb[i] += h;
          return ssim(p, b);
        },
        1e-5);
    EXPECT_LT(check::rel_err(sgrad.rgb[i], f, 1e-9), 1e-5) << i;
  }
}

TEST(Distortion, Examples) {
  EXPECT_EQ(distortion_loss(std::vector<DistortionSegment>{{0.0, 0.1, 0.4}, {0.0, 0.5, 0.9}}), 0.0);
  const DistortionSegment one{2.0, 0.2, 0.7};
  const double w = 2.0 * 0.5;
  EXPECT_DOUBLE_EQ(distortion_loss(std::vector<DistortionSegment>{one}), w * w * 0.5 / 3.0);

  // equal masses centered at 0.25 and 0.75
  const std::vector<DistortionSegment> two{{4.0, 0.125, 0.375}, {4.0, 0.625, 0.875}};
  const double m = 4.0 * 0.25;
  EXPECT_NEAR(distortion_loss(two), 2 * m * m * 0.5 + 2 * m * m * 0.25 / 3.0, 1e-15);
}

TEST(Distortion, MatchesPairwiseSum) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto segs = random_segments(1 + seed * 3, seed);
    const double ref = brute_distortion(segs);
    EXPECT_NEAR(distortion_loss(segs), ref, 1e-12 * std::max(1.0, ref));
    std::shuffle(segs.begin(), segs.end(), std::mt19937_64(seed));
    EXPECT_NEAR(distortion_loss(segs), ref, 1e-12 * std::max(1.0, ref));
  }
}

TEST(Distortion, GradientMatchesFiniteDifferences) {
  const auto segs = random_segments(9, 77);
  std::vector<DistortionGrad> grad(segs.size());
  distortion_loss(segs, grad);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double fd = check::central_difference(
          [&](double h) {
            auto s = segs;
            (c == 0 ? s[i].sigma : c == 1 ? s[i].s_in : s[i].s_out) += h;
            return brute_distortion(s);
          },
          1e-6);
      const double g = c == 0 ? grad[i].sigma : c == 1 ? grad[i].s_in : grad[i].s_out;
      EXPECT_LT(check::rel_err(g, fd), 1e-7) << i << ' ' << c;
    }
  }
}

TEST(WeightDecay, Examples) {
  field::HashGridConfig cfg;
  cfg.levels = 1;
  cfg.n_min = 2;
  cfg.n_max = 2;
  cfg.log2_table_size = 8;
  field::HashGrid grid(cfg, 0);
  std::fill(grid.params().begin(), grid.params().end(), 0.0);
  EXPECT_EQ(field::weight_decay(grid), 0.0);
  std::fill(grid.params().begin(), grid.params().end(), 2.0);
  EXPECT_DOUBLE_EQ(field::weight_decay(grid), 4.0);

  field::HashGridConfig multi;
  multi.levels = 4;
  multi.n_min = 2;
  multi.n_max = 16;
  multi.log2_table_size = 7;
  field::HashGrid g2(multi, 0);
  randomize(g2.params(), 9, 1.0);
  double ref = 0.0;
  for (int l = 0; l < g2.levels(); ++l) {
    const std::size_t count = g2.level_entries(l) * g2.features();
    double sq = 0.0;
    for (std::size_t i = 0; i < count; ++i) sq += std::pow(g2.params()[g2.level_offset(l) + i], 2);
    ref += sq / static_cast<double>(count);
  }
  EXPECT_NEAR(field::weight_decay(g2), ref, 1e-13);
}

TEST(LRSchedule, NoSpikesIsLogLinear) {
  LRSchedule s{1e-2, 1e-4, 1000, 250.0, {}};
  EXPECT_DOUBLE_EQ(s.at(0), 1e-2);
  EXPECT_NEAR(s.at(500), 1e-3, 1e-15);
  EXPECT_NEAR(s.at(1000), 1e-4, 1e-17);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    EXPECT_EQ(s.at(i), s.base(i));
    EXPECT_LE(s.base(i + 1), s.base(i));
  }
}

TEST(LRSchedule, SpikeRestoresAndDecays) {
  const std::uint64_t spike = 400;
  LRSchedule s{1e-2, 1e-4, 1000, 1e6, {spike}};
  EXPECT_EQ(s.at(spike), s.base(spike));
  EXPECT_NEAR(s.at(spike + 1),
              s.base(spike + 1) + (s.initial - s.base(spike)) * std::exp(-6.0 / 1e6), 1e-15);
  EXPECT_NEAR(s.at(spike + 1) / s.initial, 1.0, 1e-3);

  LRSchedule t{1e-2, 1e-4, 1000, 100.0, {spike}};
  const double jump = t.initial - t.base(spike);
  EXPECT_NEAR((t.at(spike + 100) - t.base(spike + 100)) / jump, std::exp(-6.0), 1e-12);
  EXPECT_NEAR(std::exp(-6.0), 0.00248, 1e-5);
  for (std::uint64_t i = 0; i <= 1000; ++i) EXPECT_GE(t.at(i), t.base(i));
}

TEST(Adam, MatchesReferenceUpdates) {
  Adam adam;
  adam.resize(2);
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g1{0.5, -0.25}, g2{0.1, 0.3};
  adam.step(p, g1, 0.1);
  // first step with bias correction moves every coordinate by lr * sign(g)
  EXPECT_NEAR(p[0], 0.9, 1e-12);
  EXPECT_NEAR(p[1], -1.9, 1e-12);
  adam.step(p, g2, 0.1);
  double ref[2] = {0.9, -1.9};
  for (int i = 0; i < 2; ++i) {
    const double m = 0.9 * 0.1 * g1[i] + 0.1 * g2[i];
    const double v = 0.99 * 0.01 * g1[i] * g1[i] + 0.01 * g2[i] * g2[i];
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.99 * 0.99);
    ref[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-15);
    EXPECT_NEAR(p[i], ref[i], 1e-12);
  }
  adam.resize(3);
  EXPECT_EQ(adam.first_moment()[2], 0.0);
  EXPECT_EQ(adam.second_moment()[2], 0.0);
  EXPECT_EQ(adam.steps(), 2u);
}

TEST(Backward, ZeroDensitySceneHasZeroGradients) {
  GradCase c = grad_case(10, 5);
  auto& heads = c.field.heads();
  const auto& sh = heads.sigma_head();
  // density head outputs a large negative pre-activation everywhere
  std::fill(heads.params().begin() + sh.offset, heads.params().begin() + sh.offset + sh.param_count(), 0.0);
  heads.params()[sh.offset + sh.param_count() - 1] = -1e4;
  c.view.image = ImageD(16, 16, 0.0);
  c.weights = {0.2, 0.0, 0.0};
  const field::FieldGrad g = gradient_of(c);
  for (double v : g.grid) EXPECT_EQ(v, 0.0);
  for (double v : g.heads) EXPECT_EQ(v, 0.0);
  for (const Vec3& v : g.vertices) EXPECT_EQ(v, Vec3{});
}

TEST(Backward, SingleTetDensityMatchesFiniteDifference) {
  GradCase c = grad_case(4, 6);
  ASSERT_EQ(c.mesh.num_tets(), 1u);
  const field::FieldGrad g = gradient_of(c);
  const auto& sh = c.field.heads().sigma_head();
  const std::size_t bias = sh.offset + sh.param_count() - 1;
  const double fd = check::central_difference(
      [&](double h) {
        field::Field f = c.field;
        f.heads().params()[bias] += h;
        return loss_of(c, f, c.mesh);
      },
      1e-5);
  EXPECT_LT(check::rel_err(g.heads[bias], fd), 1e-4);
  EXPECT_GT(std::abs(fd), 1e-6);
}

TEST(Backward, FieldParametersMatchFiniteDifferences) {
  const GradCase c = grad_case(10, 7);
  ASSERT_GE(c.mesh.num_tets(), 10u);
  const field::FieldGrad g = gradient_of(c);
  std::vector<double> fd_grid(g.grid.size()), fd_heads(g.heads.size());
  for (std::size_t i = 0; i < fd_grid.size(); ++i) {
    fd_grid[i] = check::central_difference(
        [&](double h) {
          field::Field f = c.field;
          f.grid().params()[i] += h;
          return loss_of(c, f, c.mesh);
        },
        1e-5);
  }
  for (std::size_t i = 0; i < fd_heads.size(); ++i) {
    fd_heads[i] = check::central_difference(
        [&](double h) {
          field::Field f = c.field;
          f.heads().params()[i] += h;
          return loss_of(c, f, c.mesh);
        },
        1e-5);
  }
  EXPECT_LT(check::vector_rel_err(g.grid, fd_grid), 1e-4);
  EXPECT_LT(check::vector_rel_err(g.heads, fd_heads), 1e-4);
}

TEST(Backward, VertexPositionsMatchFiniteDifferences) {
  const GradCase c = grad_case(10, 8);
  // the topology is frozen between rebuilds; stay well inside the flip margin
  const double h = 1e-6;
  const auto pts = c.mesh.points();
  const auto perturbed = geometry::delaunay(pts);
  ASSERT_EQ(perturbed.num_tets(), c.mesh.num_tets());
  const field::FieldGrad g = gradient_of(c);
  std::vector<double> analytic, fd;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      analytic.push_back(g.vertices[i][a]);
      fd.push_back(check::central_difference(
          [&](double d) {
            std::vector<Point3> moved(pts.begin(), pts.end());
            moved[i][a] += d;
            geometry::TetMesh m = c.mesh;
            m.update_positions(moved);
            return loss_of(c, c.field, m);
          },
          h));
    }
  }
  EXPECT_LT(check::vector_rel_err(analytic, fd), 1e-2);
}

TEST(Backward, ThreadCountOnlyChangesReductionOrder) {
  const GradCase c = grad_case(12, 9);
  field::FieldGrad a, b;
  a.resize_like(c.field, c.mesh.num_points());
  b.resize_like(c.field, c.mesh.num_points());
  compute_gradients(c.field, c.mesh, c.view, c.weights, {}, c.scale, a, 1);
  compute_gradients(c.field, c.mesh, c.view, c.weights, {}, c.scale, b, 3);
  EXPECT_LT(check::vector_rel_err(a.grid, b.grid), 1e-12);
  EXPECT_LT(check::vector_rel_err(a.heads, b.heads), 1e-12);
}

namespace {

struct SmallTeacher {
  synthetic::TeacherScene scene;
  std::vector<View> views;
  std::vector<Point3> init;
};

SmallTeacher small_teacher(int size, std::size_t cameras) {
  SmallTeacher t{synthetic::random_teacher(50, 7), {}, {}};
  const auto cams = synthetic::orbit_cameras(cameras, size, size, {0, 0, 0}, 2.5, 45.0);
  t.views = synthetic::render_views(t.scene, cams, 1);
  t.init = synthetic::jitter_points(t.scene.mesh, 0.05, 11);
  return t;
}

}  // namespace

TEST(Trainer, ConfigValidation) {
  TrainConfig cfg;
  EXPECT_EQ(cfg.rebuild_every, 10u);
  EXPECT_EQ(cfg.densify_every, 500u);
  cfg.rebuild_every = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.weights.distortion = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Trainer, DeterministicWithFrozenVertices) {
  const SmallTeacher t = small_teacher(24, 6);
  TrainConfig cfg;
  cfg.iterations = 30;
  cfg.optimize_vertices = false;
  cfg.densify_every = 1000;
  cfg.threads = 2;
  cfg.seed = 3;
  auto losses = [&] {
    Trainer tr(t.init, t.views, {}, cfg);
    std::vector<double> out;
    tr.run([&](const StepStats& s) { out.push_back(s.loss.total); });
    return out;
  };
  const auto a = losses(), b = losses();
  ASSERT_EQ(a.size(), 30u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]) << i;
}

TEST(Trainer, CadenceAndSpikes) {
  const SmallTeacher t = small_teacher(24, 6);
  TrainConfig cfg;
  cfg.iterations = 45;
  cfg.rebuild_every = 10;
  cfg.densify_every = 20;
  cfg.densify.sample_size = 4;
  cfg.threads = 1;
  Trainer tr(t.init, t.views, {}, cfg);
  std::vector<geometry::Tetra> prev = tr.mesh().tets();
  while (tr.iteration() < cfg.iterations) {
    const StepStats s = tr.step();
    const bool due = s.iteration % 10 == 0;
    EXPECT_EQ(s.rebuilt, due) << s.iteration;
    if (!due) {
      ASSERT_EQ(tr.mesh().tets().size(), prev.size());
      for (std::size_t k = 0; k < prev.size(); ++k) {
        EXPECT_EQ(tr.mesh().tets()[k].verts, prev[k].verts);
      }
    }
    prev = tr.mesh().tets();
  }
  EXPECT_EQ(tr.spikes(), (std::vector<std::uint64_t>{20, 40}));
  EXPECT_GE(tr.points().size(), t.init.size());
}

TEST(Trainer, LossDecreasesOverWindows) {
  const SmallTeacher t = small_teacher(48, 12);
  TrainConfig cfg;
  cfg.iterations = 300;
  cfg.densify_every = 1000;
  cfg.threads = 1;
  Trainer tr(t.init, t.views, {}, cfg);
  std::vector<double> windows(3, 0.0);
  tr.run([&](const StepStats& s) {
    EXPECT_TRUE(std::isfinite(s.loss.total));
    windows[(s.iteration - 1) / 100] += s.loss.photometric;
  });
  EXPECT_LT(windows[1], windows[0]);
  EXPECT_LT(windows[2], windows[1]);
}

TEST(Trainer, RejectsMismatchedImages) {
  SmallTeacher t = small_teacher(16, 2);
  t.views[1].image = ImageD(8, 8);
  try {
    Trainer tr(t.init, t.views, {}, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}
