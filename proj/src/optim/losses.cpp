#include "radmesh/optim/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace radmesh::optim {

using render::require_same_size;

double l1_loss(const ImageD& render, const ImageD& gt, ImageD* grad) {
  require_same_size(render, gt);
  const std::size_t n = render.rgb.size();
  if (grad) *grad = ImageD(render.width, render.height);
  if (n == 0) return 0.0;
  double sum = 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = render.rgb[i] - gt.rgb[i];
    sum += std::abs(d);
    if (grad) grad->rgb[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  return sum * inv;
}

namespace {

std::vector<double> gaussian_kernel(int window, double sigma) {
  std::vector<double> k(window);
  const int r = window / 2;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    k[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable zero-padded filtering of one channel plane (w x h).
void blur(const std::vector<double>& in, int w, int h, const std::vector<double>& k,
          std::vector<double>& tmp, std::vector<double>& out) {
  const int r = static_cast<int>(k.size()) / 2;
  tmp.assign(in.size(), 0.0);
  out.assign(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) s += k[i + r] * in[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) s += k[i + r] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
}

}  // namespace

double ssim(const ImageD& a, const ImageD& b, const SsimOptions& options, ImageD* map,
            ImageD* grad) {
  require_same_size(a, b);
  const int w = a.width;
  const int h = a.height;
  const std::size_t n = a.pixels();
  if (map) *map = ImageD(w, h);
  if (grad) *grad = ImageD(w, h);
  if (n == 0) return 1.0;
  const auto k = gaussian_kernel(options.window, options.sigma);
  const double c1 = options.c1;
  const double c2 = options.c2;
  const double inv = 1.0 / static_cast<double>(n * 3);

  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n), tmp;
  std::vector<double> mx, my, sxx, syy, sxy;
  std::vector<double> da, db, dc, ga, gb, gc;
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.rgb[i * 3 + ch];
      y[i] = b.rgb[i * 3 + ch];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    blur(x, w, h, k, tmp, mx);
    blur(y, w, h, k, tmp, my);
    blur(xx, w, h, k, tmp, sxx);
    blur(yy, w, h, k, tmp, syy);
    blur(xy, w, h, k, tmp, sxy);
    if (grad) {
      da.assign(n, 0.0);
      db.assign(n, 0.0);
      dc.assign(n, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double mux = mx[i], muy = my[i];
      const double vx = sxx[i] - mux * mux;
      const double vy = syy[i] - muy * muy;
      const double cxy = sxy[i] - mux * muy;
      const double A = 2.0 * mux * muy + c1;
      const double B = 2.0 * cxy + c2;
      const double C = mux * mux + muy * muy + c1;
      const double D = vx + vy + c2;
      const double s = A * B / (C * D);
      total += s;
      if (map) map->rgb[i * 3 + ch] = s;
      if (grad) {
        const double d_mux = 2.0 * muy * B / (C * D) - s * 2.0 * mux / C;
        const double d_vx = -s / D;
        const double d_cxy = 2.0 * A / (C * D);
        // vx = E[x^2] - mux^2, cxy = E[xy] - mux muy
        da[i] = (d_mux - 2.0 * mux * d_vx - muy * d_cxy) * inv;
        db[i] = d_vx * inv;
        dc[i] = d_cxy * inv;
      }
    }
    if (grad) {
      // the zero-padded symmetric blur is self-adjoint
      blur(da, w, h, k, tmp, ga);
      blur(db, w, h, k, tmp, gb);
      blur(dc, w, h, k, tmp, gc);
      for (std::size_t i = 0; i < n; ++i) {
        grad->rgb[i * 3 + ch] = ga[i] + 2.0 * x[i] * gb[i] + y[i] * gc[i];
      }
    }
  }
  return total * inv;
}

double photometric_loss(const ImageD& render, const ImageD& gt, double lambda_ssim, ImageD* grad,
                        const SsimOptions& options) {
  require_same_size(render, gt);
  ImageD g_l1, g_ssim;
  const double l1 = l1_loss(render, gt, grad ? &g_l1 : nullptr);
  double s = 1.0;
  if (lambda_ssim != 0.0) s = ssim(render, gt, options, nullptr, grad ? &g_ssim : nullptr);
  if (grad) {
    *grad = ImageD(render.width, render.height);
    for (std::size_t i = 0; i < grad->rgb.size(); ++i) {
      grad->rgb[i] = (1.0 - lambda_ssim) * g_l1.rgb[i];
      if (lambda_ssim != 0.0) grad->rgb[i] -= lambda_ssim * g_ssim.rgb[i];
    }
  }
  return (1.0 - lambda_ssim) * l1 + lambda_ssim * (1.0 - s);
}

double psnr(const ImageD& a, const ImageD& b) {
  require_same_size(a, b);
  double se = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = a.rgb[i] - b.rgb[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(se / static_cast<double>(a.rgb.size()));
}

double distortion_loss(std::span<const DistortionSegment> segments,
                       std::span<DistortionGrad> grad) {
  const std::size_t n = segments.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  auto mid = [&](std::size_t i) { return 0.5 * (segments[i].s_in + segments[i].s_out); };
  if (!std::is_sorted(idx.begin(), idx.end(),
                      [&](std::size_t p, std::size_t q) { return mid(p) < mid(q); })) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t p, std::size_t q) { return mid(p) < mid(q); });
  }
  double total_w = 0.0, total_wm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = segments[i];
    const double w = s.sigma * (s.s_out - s.s_in);
    total_w += w;
    total_wm += w * mid(i);
  }
  double loss = 0.0;
  double w_before = 0.0, wm_before = 0.0;
  for (const std::size_t i : idx) {
    const auto& s = segments[i];
    const double len = s.s_out - s.s_in;
    const double w = s.sigma * len;
    const double m = mid(i);
    const double w_after = total_w - w_before - w;
    const double wm_after = total_wm - wm_before - w * m;
    // sum_k w_k |m - m_k|, counted once per ordered pair below
    const double spread = m * w_before - wm_before + wm_after - m * w_after;
    loss += w * spread + w * w * len / 3.0;
    if (!grad.empty()) {
      const double g_w = 2.0 * spread + 2.0 / 3.0 * w * len;
      const double g_m = 2.0 * w * (w_before - w_after);
      const double g_len = w * w / 3.0 + g_w * s.sigma;
      grad[i].sigma = g_w * len;
      grad[i].s_in = 0.5 * g_m - g_len;
      grad[i].s_out = 0.5 * g_m + g_len;
    }
    w_before += w;
    wm_before += w * m;
  }
  return loss;
}

}  // namespace radmesh::optim
