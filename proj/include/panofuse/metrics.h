#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "panofuse/image.h"

namespace panofuse {

enum class Alignment {
  kNone,
  kMedian,        // pred * median(gt) / median(pred)
  kLeastSquares,  // pred * sum(p g) / sum(p^2)
};

Alignment ParseAlignment(const std::string& text);
std::string ToString(Alignment alignment);

struct DepthMetrics {
  double abs_rel = 0.0;
  double rmse = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  size_t valid = 0;
  double scale = 1.0;  // alignment scale applied to the prediction
};

// Pixels that are finite and positive in gt, finite in pred, set in the mask
// (when given) and not above depth_cap (when > 0).
Mask JointValid(const ImageD& pred, const ImageD& gt, const Mask* mask,
                double depth_cap = 0.0);

// Pairwise (cascade) summation; fixed order for a given length.
double PairwiseSum(std::span<const double> values);

// Scale that maps the prediction onto the ground truth.
double AlignmentScale(const ImageD& pred, const ImageD& gt, const Mask& valid,
                      Alignment alignment);

ImageD Scaled(const ImageD& image, double scale);

// Abs Rel, RMSE and threshold accuracy (strict max(p/g, g/p) < 1.25^i) over
// the joint valid region. `scale` is recorded, not applied.
DepthMetrics ComputeMetrics(const ImageD& pred, const ImageD& gt,
                            const Mask* mask, double depth_cap = 0.0,
                            double scale = 1.0);

// Alignment followed by ComputeMetrics.
DepthMetrics Evaluate(const ImageD& pred, const ImageD& gt, const Mask* mask,
                      double depth_cap, Alignment alignment);

// Tab-separated, column order: abs_rel rmse delta1 delta2 delta3 scale valid.
std::string MetricsHeader();
std::string MetricsRow(const DepthMetrics& m);

}  // namespace panofuse
