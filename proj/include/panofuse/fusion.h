#pragma once

#include <optional>
#include <span>
#include <vector>

#include "panofuse/geometry.h"
#include "panofuse/image.h"
#include "panofuse/parallel.h"

namespace panofuse {

// Dense point map of one view in the shared panorama-center frame.
struct PointMapObservation {
  int view_index = 0;
  ImageD points;    // S x S x 3; NaN where invalid
  ImageD distance;  // |P - origin|; NaN where invalid
  Mask valid;

  // Derives distance and validity. Pixels with a non-finite point, or masked
  // out by `mask` when given, are invalid and their point is set to NaN.
  static PointMapObservation FromPoints(int view_index, ImageD points,
                                        const Mask* mask = nullptr,
                                        const Vec3& origin = {});
};

struct FusedErpDepth {
  ImageD depth;          // NaN where no view contributed
  ImageD weight;         // sum of weights
  Image<int> count;      // contributing views

  size_t valid_count() const;
};

struct DepthSample {
  double depth = 0.0;
  double weight = 0.0;
};

// Bilinear depth/weight sample of one observation along a world direction.
// Invalid taps are dropped and the remaining bilinear weights renormalized;
// nullopt when the direction is outside the frustum or no tap is valid.
std::optional<DepthSample> SampleObservation(const PointMapObservation& obs,
                                             const ImageD& weight,
                                             const PerspectiveCamera& camera,
                                             const Vec3& dir);

// Gather fusion: every ERP pixel averages the depth of all covering views,
// weighted by their per-pixel weight. Summation runs in view-index order, so
// the result does not depend on the order of `observations`.
FusedErpDepth FuseToErp(std::span<const PointMapObservation> observations,
                        std::span<const ImageD> weights,
                        std::span<const ViewSpec> views, const ErpDims& dims,
                        const Exec& exec = {});

}  // namespace panofuse
