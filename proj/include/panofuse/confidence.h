#pragma once

#include "panofuse/attention.h"
#include "panofuse/image.h"
#include "panofuse/planner.h"

namespace panofuse {

struct ConfidenceConfig {
  double band_width = 0.05;  // m
  double floor = 1e-4;       // applied after the validity product
  int patch_size = 14;
  // Component toggles. A disabled gradient prior contributes 1, a disabled
  // edge band contributes 0, a disabled validity term treats every pixel as
  // valid. All three off yields a constant map of 1 (no bias).
  bool use_gradient = true;
  bool use_edge_band = true;
  bool use_validity = true;
  TauConfig tau;

  bool enabled() const { return use_gradient || use_edge_band || use_validity; }
  void Validate() const;
};

// sigmoid(+Z), the complement of the uncertainty map.
ImageD GradientPrior(const ImageD& view, const Mask& mask, const TauConfig& tau);

// 1 where max(|x|, |y|) >= 1 - m for pixel-center coordinates in [-1, 1].
Mask EdgeBand(int resolution, double band_width);

struct ConfidenceMap {
  ImageD pixel;  // view resolution, values in [floor, 1]
  ImageD patch;  // token grid, mean over each patch
  int patch_size = 0;
};

// Mean over patch_size x patch_size blocks; border blocks average the pixels
// they actually cover.
ImageD PoolPatches(const ImageD& pixel, int patch_size);

ConfidenceMap ComputeConfidence(const ImageD& view, const Mask& mask,
                                const ConfidenceConfig& cfg);

}  // namespace panofuse
