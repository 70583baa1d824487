#include "panofuse/scene.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace panofuse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

double Pattern(double a, double b) {
  const double smooth = 0.18 * std::sin(2.0 * kPi * a / 0.37) *
                        std::sin(2.0 * kPi * b / 0.29);
  const bool checker =
      (static_cast<long>(std::floor(a / 0.5)) + static_cast<long>(std::floor(b / 0.5))) % 2 != 0;
  return 0.5 + smooth + (checker ? 0.15 : -0.15);
}

}  // namespace

SyntheticScene SyntheticScene::Sphere(double radius) {
  SyntheticScene s;
  s.kind = Kind::kSphere;
  s.radius = radius;
  return s;
}

SyntheticScene SyntheticScene::Box(const std::array<double, 6>& distances) {
  SyntheticScene s;
  s.kind = Kind::kBox;
  s.box = distances;
  return s;
}

SyntheticScene SyntheticScene::Room(double width, double height, double depth,
                                    double cx, double cy, double cz) {
  return Box({cx, width - cx, cy, height - cy, cz, depth - cz});
}

SyntheticScene SyntheticScene::Corner(double x, double z, double far) {
  SyntheticScene s;
  s.kind = Kind::kCorner;
  s.corner_x = x;
  s.corner_z = z;
  s.corner_far = far;
  return s;
}

void SyntheticScene::Validate() const {
  switch (kind) {
    case Kind::kSphere:
      if (!(radius > 0.0)) throw ConfigError("sphere radius must be positive");
      break;
    case Kind::kBox:
      for (double d : box) {
        if (!(d > 0.0) || !std::isfinite(d)) {
          throw ConfigError("box plane distances must be positive and finite");
        }
      }
      break;
    case Kind::kCorner:
      if (!(corner_x > 0.0 && corner_z > 0.0 && corner_far > 0.0)) {
        throw ConfigError("corner distances must be positive");
      }
      break;
  }
}

std::string SyntheticScene::Describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::kSphere:
      os << "sphere r=" << radius;
      break;
    case Kind::kBox:
      os << "box";
      for (double d : box) os << " " << d;
      break;
    case Kind::kCorner:
      os << "corner x=" << corner_x << " z=" << corner_z << " far=" << corner_far;
      break;
  }
  return os.str();
}

int SyntheticScene::surface_count() const {
  switch (kind) {
    case Kind::kSphere:
      return 1;
    case Kind::kBox:
      return 6;
    case Kind::kCorner:
      return 3;
  }
  return 0;
}

SyntheticScene::Hit SyntheticScene::Intersect(const Vec3& d) const {
  switch (kind) {
    case Kind::kSphere:
      return {radius, 0};
    case Kind::kBox: {
      Hit best{kInf, -1};
      const double comps[3] = {d.x, d.y, d.z};
      for (int axis = 0; axis < 3; ++axis) {
        const double c = comps[axis];
        if (c == 0.0) continue;
        const int surface = 2 * axis + (c > 0.0 ? 1 : 0);
        const double t = box[surface] / std::abs(c);
        if (t < best.distance) best = {t, surface};
      }
      if (best.surface < 0) throw InternalError("ray missed the box scene");
      return best;
    }
    case Kind::kCorner: {
      Hit best{corner_far, 2};
      if (d.x > 0.0 && corner_x / d.x < best.distance) best = {corner_x / d.x, 0};
      if (d.z > 0.0 && corner_z / d.z < best.distance) best = {corner_z / d.z, 1};
      return best;
    }
  }
  throw InternalError("unknown scene kind");
}

ImageD RenderErpDepth(const SyntheticScene& scene, const ErpDims& dims,
                      const Exec& exec) {
  scene.Validate();
  dims.Validate(false);
  ImageD depth(dims.width, dims.height);
  ParallelFor(dims.height, exec, [&](int y) {
    for (int x = 0; x < dims.width; ++x) {
      depth.at(x, y) = scene.Intersect(ErpPixelToDir(dims, x, y)).distance;
    }
  });
  return depth;
}

ImageD RenderErpTexture(const SyntheticScene& scene, const ErpDims& dims,
                        const TextureOptions& options, const Exec& exec) {
  scene.Validate();
  dims.Validate(false);
  static constexpr double kTint[6][3] = {{1.00, 0.85, 0.80}, {0.80, 1.00, 0.85},
                                         {0.85, 0.80, 1.00}, {1.00, 1.00, 0.80},
                                         {0.80, 1.00, 1.00}, {1.00, 0.80, 1.00}};
  ImageD rgb(dims.width, dims.height, 3);
  ParallelFor(dims.height, exec, [&](int y) {
    for (int x = 0; x < dims.width; ++x) {
      const Vec3 d = ErpPixelToDir(dims, x, y);
      const SyntheticScene::Hit hit = scene.Intersect(d);
      double value = 0.55;
      if (hit.surface != options.blank_surface) {
        const Vec3 p = d * hit.distance;
        double a = 0.0, b = 0.0;
        if (scene.kind == SyntheticScene::Kind::kSphere ||
            (scene.kind == SyntheticScene::Kind::kCorner && hit.surface == 2)) {
          a = std::atan2(d.x, d.z) * hit.distance;
          b = std::asin(std::clamp(d.y, -1.0, 1.0)) * hit.distance;
        } else {
          // In-plane coordinates: drop the axis the surface is normal to.
          const int axis = scene.kind == SyntheticScene::Kind::kBox
                               ? hit.surface / 2
                               : (hit.surface == 0 ? 0 : 2);
          a = axis == 0 ? p.z : p.x;
          b = axis == 1 ? p.z : p.y;
        }
        value = Pattern(a, b);
      }
      const double* tint = kTint[hit.surface % 6];
      for (int c = 0; c < 3; ++c) {
        rgb.at(x, y, c) = std::clamp(value * tint[c], 0.0, 1.0);
      }
    }
  });
  return rgb;
}

}  // namespace panofuse
