#include "panofuse/fusion.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace panofuse {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

PointMapObservation PointMapObservation::FromPoints(int view_index,
                                                    ImageD points,
                                                    const Mask* mask,
                                                    const Vec3& origin) {
  if (points.channels() != 3) {
    throw InvalidInput("point maps need 3 channels");
  }
  if (mask && !points.same_extent(*mask)) {
    throw InvalidInput("point map and mask differ in shape");
  }
  PointMapObservation obs;
  obs.view_index = view_index;
  obs.distance = ImageD(points.width(), points.height(), 1, kNaN);
  obs.valid = Mask(points.width(), points.height());
  for (int y = 0; y < points.height(); ++y) {
    for (int x = 0; x < points.width(); ++x) {
      Vec3 p{points.at(x, y, 0), points.at(x, y, 1), points.at(x, y, 2)};
      const bool finite =
          std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
      if (!finite || (mask && !mask->at(x, y))) {
        for (int c = 0; c < 3; ++c) points.at(x, y, c) = kNaN;
        continue;
      }
      p = p - origin;
      points.at(x, y, 0) = p.x;
      points.at(x, y, 1) = p.y;
      points.at(x, y, 2) = p.z;
      obs.distance.at(x, y) = p.norm();
      obs.valid.at(x, y) = 1;
    }
  }
  obs.points = std::move(points);
  return obs;
}

size_t FusedErpDepth::valid_count() const {
  size_t n = 0;
  for (int c : count.data()) n += c > 0;
  return n;
}

std::optional<DepthSample> SampleObservation(const PointMapObservation& obs,
                                             const ImageD& weight,
                                             const PerspectiveCamera& camera,
                                             const Vec3& dir) {
  const auto pixel = camera.DirToPixel(dir);
  if (!pixel) return std::nullopt;
  const int s = obs.distance.width();
  const double u = std::clamp(pixel->u, 0.0, s - 1.0);
  const double v = std::clamp(pixel->v, 0.0, s - 1.0);
  const int x0 = std::min(static_cast<int>(u), s - 1);
  const int y0 = std::min(static_cast<int>(v), s - 1);
  const int x1 = std::min(x0 + 1, s - 1), y1 = std::min(y0 + 1, s - 1);
  const double fu = u - x0, fv = v - y0;
  const int xs[4] = {x0, x1, x0, x1};
  const int ys[4] = {y0, y0, y1, y1};
  const double ws[4] = {(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv,
                        fu * fv};
  double wsum = 0.0, dsum = 0.0, csum = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (ws[i] <= 0.0 || !obs.valid.at(xs[i], ys[i])) continue;
    wsum += ws[i];
    dsum += ws[i] * obs.distance.at(xs[i], ys[i]);
    csum += ws[i] * weight.at(xs[i], ys[i]);
  }
  if (!(wsum > 0.0)) return std::nullopt;
  return DepthSample{dsum / wsum, csum / wsum};
}

FusedErpDepth FuseToErp(std::span<const PointMapObservation> observations,
                        std::span<const ImageD> weights,
                        std::span<const ViewSpec> views, const ErpDims& dims,
                        const Exec& exec) {
  dims.Validate(false);
  if (observations.empty()) throw InvalidInput("fusion needs at least one observation");
  if (weights.size() != observations.size()) {
    throw InvalidInput("fusion needs exactly one weight raster per observation");
  }

  std::vector<size_t> order(observations.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return observations[a].view_index < observations[b].view_index;
  });
  std::vector<PerspectiveCamera> cameras;
  cameras.reserve(order.size());
  for (size_t n = 0; n < order.size(); ++n) {
    const auto& obs = observations[order[n]];
    const std::string tag = "observation for view " + std::to_string(obs.view_index);
    if (n > 0 && observations[order[n - 1]].view_index == obs.view_index) {
      throw InvalidInput("duplicate " + tag);
    }
    if (obs.view_index < 0 || obs.view_index >= static_cast<int>(views.size())) {
      throw InvalidInput(tag + " has no view spec");
    }
    const int s = views[obs.view_index].resolution;
    if (obs.distance.width() != s || obs.distance.height() != s ||
        !obs.distance.same_extent(obs.valid)) {
      throw InvalidInput(tag + " does not match the view resolution");
    }
    const ImageD& w = weights[order[n]];
    if (!w.same_extent(obs.distance) || w.channels() != 1) {
      throw InvalidInput("weight raster shape mismatch for view " +
                         std::to_string(obs.view_index));
    }
    cameras.emplace_back(views[obs.view_index]);
  }

  FusedErpDepth out{ImageD(dims.width, dims.height, 1, kNaN),
                    ImageD(dims.width, dims.height),
                    Image<int>(dims.width, dims.height)};
  ParallelFor(dims.height, exec, [&](int y) {
    for (int x = 0; x < dims.width; ++x) {
      const Vec3 dir = ErpPixelToDir(dims, x, y);
      double num = 0.0, den = 0.0;
      int count = 0;
      for (size_t n = 0; n < order.size(); ++n) {
        const auto sample = SampleObservation(observations[order[n]],
                                              weights[order[n]], cameras[n], dir);
        if (!sample) continue;
        num += sample->weight * sample->depth;
        den += sample->weight;
        ++count;
      }
      if (!(den > 0.0)) count = 0;  // all-zero weights cannot define a depth
      out.count.at(x, y) = count;
      out.weight.at(x, y) = den;
      if (count > 0) out.depth.at(x, y) = num / den;
    }
  });
  return out;
}

}  // namespace panofuse
