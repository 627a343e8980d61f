#pragma once

#include <span>

#include "radmesh/render/image.hpp"

namespace radmesh::optim {

using render::ImageD;

/// Mean absolute difference over all pixels and channels. When grad is given
/// it receives d loss / d render.
double l1_loss(const ImageD& render, const ImageD& gt, ImageD* grad = nullptr);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

/// Mean SSIM over pixels and channels with a separable Gaussian window and
/// zero padding (output has the input size). `map` receives the per-pixel
/// SSIM (one value per channel); `grad` receives d mean / d a.
double ssim(const ImageD& a, const ImageD& b, const SsimOptions& options = {},
            ImageD* map = nullptr, ImageD* grad = nullptr);

/// (1 - lambda_ssim) L1 + lambda_ssim (1 - SSIM). Throws DimensionMismatch.
double photometric_loss(const ImageD& render, const ImageD& gt, double lambda_ssim = 0.2,
                        ImageD* grad = nullptr, const SsimOptions& options = {});

/// Peak signal-to-noise ratio for a unit peak; infinite for identical images.
double psnr(const ImageD& a, const ImageD& b);

/// Segment of a ray in normalized units: density scaled to the same length
/// unit and entry/exit distances along the ray.
struct DistortionSegment {
  double sigma = 0.0;
  double s_in = 0.0;
  double s_out = 0.0;
};

struct DistortionGrad {
  double sigma = 0.0;
  double s_in = 0.0;
  double s_out = 0.0;
};

/// sum_{j,k} w_j w_k |m_j - m_k| + 1/3 sum_j w_j^2 len_j with w_j = sigma_j len_j,
/// len_j = s_out - s_in and m_j the midpoint. Linear time via prefix sums;
/// segments must not overlap. grad (same size as segments) is overwritten
/// when non-empty.
double distortion_loss(std::span<const DistortionSegment> segments,
                       std::span<DistortionGrad> grad = {});

}  // namespace radmesh::optim
