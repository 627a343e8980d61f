#include "radmesh/optim/train.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "radmesh/geometry/delaunay.hpp"
#include "radmesh/parallel.hpp"

namespace radmesh::optim {

void TrainConfig::validate() const {
  if (rebuild_every == 0 || densify_every == 0) {
    throw Error(ErrorCode::Format, "training cadences must be at least 1");
  }
  if (weights.ssim < 0.0 || weights.ssim > 1.0 || weights.distortion < 0.0 ||
      weights.weight_decay < 0.0) {
    throw Error(ErrorCode::Format, "loss weights must be non-negative (ssim weight at most 1)");
  }
  if (!(spike_duration > 0.0)) throw Error(ErrorCode::Format, "spike duration must be positive");
  if (densify.sample_size == 0) throw Error(ErrorCode::Format, "densify sample size must be positive");
}

namespace {

using render::AttributeGrad;

struct ChunkGrad {
  std::vector<AttributeGrad> attrs;
  std::vector<Vec3> vertices;
  double distortion = 0.0;
};

}  // namespace

LossBreakdown compute_gradients(const field::Field& field, const geometry::TetMesh& mesh,
                                const View& view, const LossWeights& weights,
                                const render::RenderOptions& options, double scene_scale,
                                field::FieldGrad& grad, std::size_t threads, ImageD* rendered) {
  const Point3 eye = view.camera.origin();
  const auto attrs = field::evaluate_field(field, mesh, eye, threads);
  render::RenderOptions opts = options;
  opts.threads = threads;
  const render::FrameRenderer renderer(mesh, attrs, view.camera, opts);
  const ImageD image = renderer.render();

  LossBreakdown loss;
  ImageD g_image;
  loss.photometric = photometric_loss(image, view.image, weights.ssim, &g_image);
  loss.psnr = psnr(image, view.image);

  const int width = view.camera.width;
  const std::size_t pixels = static_cast<std::size_t>(width) * view.camera.height;
  const double distortion_scale = weights.distortion / static_cast<double>(pixels);
  const std::size_t chunks = resolve_threads(threads);
  std::vector<ChunkGrad> shards(chunks);
  parallel_chunks(pixels, chunks, chunks, [&](std::size_t b, std::size_t e, std::size_t c) {
    ChunkGrad& shard = shards[c];
    shard.attrs.assign(mesh.num_tets(), {});
    shard.vertices.assign(mesh.num_points(), {});
    render::RayRecord record;
    std::vector<DistortionSegment> dsegs;
    std::vector<DistortionGrad> dgrads;
    std::vector<render::SegmentGrad> seg_grads;
    for (std::size_t p = b; p < e; ++p) {
      const int x = static_cast<int>(p % width);
      const int y = static_cast<int>(p / width);
      renderer.trace_pixel(x, y, record);
      if (!record.valid) continue;
      seg_grads.clear();
      if (weights.distortion > 0.0 && !record.segments.empty()) {
        const double to_unit = norm(record.ray.dir) / scene_scale;
        dsegs.resize(record.segments.size());
        dgrads.resize(record.segments.size());
        for (std::size_t k = 0; k < record.segments.size(); ++k) {
          const auto& s = record.segments[k];
          dsegs[k] = {s.sigma * scene_scale, s.t_in * to_unit, s.t_out * to_unit};
        }
        shard.distortion += distortion_loss(dsegs, dgrads);
        seg_grads.resize(record.segments.size());
        for (std::size_t k = 0; k < record.segments.size(); ++k) {
          seg_grads[k] = {dgrads[k].sigma * scene_scale * distortion_scale,
                          dgrads[k].s_in * to_unit * distortion_scale,
                          dgrads[k].s_out * to_unit * distortion_scale};
        }
      }
      render::backward_ray(mesh, attrs, record, g_image.at(x, y), opts.background, seg_grads,
                           shard.attrs, shard.vertices);
    }
  });

  std::vector<AttributeGrad> g_attrs(mesh.num_tets());
  std::vector<Vec3> g_vertices(mesh.num_points());
  for (const ChunkGrad& shard : shards) {
    if (shard.attrs.empty()) continue;
    for (std::size_t t = 0; t < g_attrs.size(); ++t) {
      const AttributeGrad& s = shard.attrs[t];
      AttributeGrad& d = g_attrs[t];
      d.sigma += s.sigma;
      d.base_color += s.base_color;
      d.grad += s.grad;
      d.center += s.center;
    }
    for (std::size_t i = 0; i < g_vertices.size(); ++i) g_vertices[i] += shard.vertices[i];
    loss.distortion += shard.distortion;
  }
  loss.distortion *= distortion_scale;

  field::backward_field(field, mesh, eye, g_attrs, grad, threads);
  for (std::size_t i = 0; i < g_vertices.size(); ++i) grad.vertices[i] += g_vertices[i];
  if (weights.weight_decay > 0.0) {
    loss.weight_decay = weights.weight_decay * field::weight_decay(field.grid());
    field::weight_decay_backward(field.grid(), weights.weight_decay, grad.grid);
  }
  loss.total = loss.photometric + loss.distortion + loss.weight_decay;
  if (rendered) *rendered = image;
  return loss;
}

LossBreakdown evaluate_loss(const field::Field& field, const geometry::TetMesh& mesh,
                            const View& view, const LossWeights& weights,
                            const render::RenderOptions& options, double scene_scale,
                            std::size_t threads, ImageD* rendered) {
  const auto attrs = field::evaluate_field(field, mesh, view.camera.origin(), threads);
  render::RenderOptions opts = options;
  opts.threads = threads;
  const render::FrameRenderer renderer(mesh, attrs, view.camera, opts);
  const ImageD image = renderer.render();
  LossBreakdown loss;
  loss.photometric = photometric_loss(image, view.image, weights.ssim);
  loss.psnr = psnr(image, view.image);
  if (weights.distortion > 0.0) {
    render::RayRecord record;
    std::vector<DistortionSegment> dsegs;
    for (int y = 0; y < view.camera.height; ++y) {
      for (int x = 0; x < view.camera.width; ++x) {
        renderer.trace_pixel(x, y, record);
        if (!record.valid) continue;
        const double to_unit = norm(record.ray.dir) / scene_scale;
        dsegs.clear();
        for (const auto& s : record.segments) {
          dsegs.push_back({s.sigma * scene_scale, s.t_in * to_unit, s.t_out * to_unit});
        }
        loss.distortion += distortion_loss(dsegs);
      }
    }
    loss.distortion *= weights.distortion / static_cast<double>(image.pixels());
  }
  if (weights.weight_decay > 0.0) {
    loss.weight_decay = weights.weight_decay * field::weight_decay(field.grid());
  }
  loss.total = loss.photometric + loss.distortion + loss.weight_decay;
  if (rendered) *rendered = image;
  return loss;
}

Trainer::Trainer(std::vector<Point3> points, std::vector<View> views,
                 const field::FieldConfig& field_config, const TrainConfig& config)
    : config_(config),
      views_(std::move(views)),
      field_(field_config, config.seed),
      points_(std::move(points)),
      optimizer_{Adam(config.adam), Adam(config.adam), Adam(config.adam)},
      rng_(config.seed ^ 0x5851f42d4c957f2dull) {
  config_.validate();
  if (views_.empty()) throw Error(ErrorCode::InsufficientViews, "training needs at least one view");
  for (const View& v : views_) {
    v.camera.validate();
    if (v.image.width != v.camera.width || v.image.height != v.camera.height) {
      throw Error(ErrorCode::DimensionMismatch, "image size differs from camera size for view " + v.name);
    }
  }
  rebuild();
  scene_scale_ = config_.scene_scale > 0.0 ? config_.scene_scale : mesh_.bounding_diameter();
  if (!(scene_scale_ > 0.0)) scene_scale_ = 1.0;
  optimizer_.grid.resize(field_.grid().params().size());
  optimizer_.heads.resize(field_.heads().params().size());
  optimizer_.vertices.resize(points_.size() * 3);
}

void Trainer::rebuild() { mesh_ = geometry::delaunay(points_); }

LRSchedule Trainer::schedule(const LrRange& range, bool spiked) const {
  LRSchedule s;
  s.initial = range.initial;
  s.final = range.final;
  s.iterations = config_.iterations;
  s.spike_duration = config_.spike_duration;
  if (spiked) s.spikes = spikes_;
  return s;
}

double Trainer::grid_lr() const { return schedule(config_.grid_lr, true).at(iteration_); }
double Trainer::heads_lr() const { return schedule(config_.heads_lr, false).at(iteration_); }
double Trainer::vertex_lr() const {
  return schedule(config_.vertex_lr, true).at(iteration_) * scene_scale_;
}

namespace {

bool all_finite(std::span<const double> v) {
  for (const double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

StepStats Trainer::step() {
  StepStats stats;
  stats.view = static_cast<std::size_t>(rng_() % views_.size());
  grad_.resize_like(field_, points_.size());
  grad_.zero();
  stats.loss = compute_gradients(field_, mesh_, views_[stats.view], config_.weights, config_.render,
                                 scene_scale_, grad_, config_.threads);
  const std::span<const double> vgrad(reinterpret_cast<const double*>(grad_.vertices.data()),
                                      grad_.vertices.size() * 3);
  if (!std::isfinite(stats.loss.total) || !all_finite(grad_.grid) || !all_finite(grad_.heads) ||
      !all_finite(vgrad)) {
    throw Error(ErrorCode::NonFiniteGradient,
                "non-finite loss or gradient at iteration " + std::to_string(iteration_));
  }

  optimizer_.grid.step(field_.grid().params(), grad_.grid, grid_lr());
  optimizer_.heads.step(field_.heads().params(), grad_.heads, heads_lr());
  if (config_.optimize_vertices) {
    std::span<double> params(reinterpret_cast<double*>(points_.data()), points_.size() * 3);
    optimizer_.vertices.step(params, vgrad, vertex_lr());
  }
  ++iteration_;

  if (config_.optimize_vertices) {
    if (iteration_ % config_.rebuild_every == 0) {
      rebuild();
      stats.rebuilt = true;
    } else {
      mesh_.update_positions(points_);
    }
  }
  const bool densify_due = iteration_ % config_.densify_every == 0 &&
                           iteration_ < config_.iterations &&
                           (config_.densify_until == 0 || iteration_ <= config_.densify_until);
  if (densify_due) {
    stats.splits = densify_now().size();
    stats.rebuilt = true;
  }
  stats.iteration = iteration_;
  stats.tets = mesh_.num_tets();
  stats.points = points_.size();
  return stats;
}

void Trainer::run(const std::function<void(const StepStats&)>& on_step) {
  while (iteration_ < config_.iterations) {
    const StepStats s = step();
    if (on_step) on_step(s);
  }
}

std::vector<densify::SplitDecision> Trainer::densify_now() {
  const auto picked = densify::sample_views(views_.size(), config_.densify.sample_size, rng_);
  std::vector<densify::DensifyView> dviews;
  for (const std::size_t i : picked) dviews.push_back({&views_[i].camera, &views_[i].image});
  const auto stats = densify::accumulate(field_, mesh_, dviews, config_.render, config_.threads);
  auto decisions = densify::select_splits(stats, mesh_, config_.densify, rng_);
  for (const auto& d : decisions) points_.push_back(d.point);
  optimizer_.vertices.resize(points_.size() * 3);
  rebuild();
  spikes_.push_back(iteration_);
  return decisions;
}

void Trainer::restore(std::vector<Point3> points, std::uint64_t iteration,
                      std::vector<std::uint64_t> spikes, OptimizerState optimizer,
                      const std::string& rng_state) {
  if (optimizer.vertices.size() != points.size() * 3 ||
      optimizer.grid.size() != field_.grid().params().size() ||
      optimizer.heads.size() != field_.heads().params().size()) {
    throw Error(ErrorCode::Format, "optimizer state does not match the parameters");
  }
  points_ = std::move(points);
  iteration_ = iteration;
  spikes_ = std::move(spikes);
  optimizer_ = std::move(optimizer);
  std::istringstream in(rng_state);
  in >> rng_;
  if (!in) throw Error(ErrorCode::Format, "invalid random generator state");
  rebuild();
}

std::string Trainer::rng_state() const {
  std::ostringstream out;
  out << rng_;
  return out.str();
}

LossBreakdown Trainer::evaluate_all(std::vector<ImageD>* renders) const {
  LossBreakdown sum;
  double mse = 0.0;
  if (renders) renders->resize(views_.size());
  for (std::size_t i = 0; i < views_.size(); ++i) {
    ImageD img;
    const LossBreakdown l = evaluate_loss(field_, mesh_, views_[i], config_.weights, config_.render,
                                          scene_scale_, config_.threads, &img);
    sum.total += l.total;
    sum.photometric += l.photometric;
    sum.distortion += l.distortion;
    sum.weight_decay += l.weight_decay;
    mse += std::pow(10.0, -l.psnr / 10.0);
    if (renders) (*renders)[i] = std::move(img);
  }
  const double n = static_cast<double>(views_.size());
  sum.total /= n;
  sum.photometric /= n;
  sum.distortion /= n;
  sum.weight_decay /= n;
  sum.psnr = mse > 0.0 ? -10.0 * std::log10(mse / n) : std::numeric_limits<double>::infinity();
  return sum;
}

}  // namespace radmesh::optim
