#pragma once

// Sphere convention used everywhere in panofuse:
//   x right, y up, z forward; longitude (lambda) about +y measured from +z
//   toward +x, latitude (phi) positive toward +y.
//   dir(lambda, phi) = (cos phi sin lambda, sin phi, cos phi cos lambda)
// ERP pixel (u, v) addresses its center at (u + 0.5, v + 0.5):
//   lambda = ((u + 0.5) / W) * 2pi - pi,  phi = pi/2 - ((v + 0.5) / H) * pi

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "panofuse/image.h"
#include "panofuse/parallel.h"

namespace panofuse {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  bool operator==(const Vec3&) const = default;
};

// Angle between two directions, stable for tiny angles.
double AngleBetween(const Vec3& a, const Vec3& b);

Vec3 DirFromLonLat(double lon, double lat);

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

struct ErpDims {
  int width = 0;
  int height = 0;

  // H >= 2, W >= 4; W = 2H unless require_2to1 is false.
  void Validate(bool require_2to1 = true) const;
  bool operator==(const ErpDims&) const = default;
};

template <typename T>
ErpDims DimsOf(const Image<T>& image) {
  return {image.width(), image.height()};
}

// Continuous pixel coordinates over the raster footprint
// [-0.5, W - 0.5] x [-0.5, H - 0.5]; throws kBounds outside it.
Vec3 ErpPixelToDir(const ErpDims& dims, double u, double v);

// Inverse of ErpPixelToDir. Longitude in (-pi, pi] maps to u in
// (-0.5, W - 0.5]; at the poles u is the center column W/2 - 0.5.
PixelCoord DirToErpPixel(const ErpDims& dims, const Vec3& d);

// Square pinhole view. Yaw rotates about +y, pitch about +x (applied first,
// positive looks up); roll is always zero.
struct ViewSpec {
  double yaw = 0.0;
  double pitch = 0.0;
  double fov = std::numbers::pi / 2;
  int resolution = 518;

  void Validate() const;
  bool operator==(const ViewSpec&) const = default;
};

// Precomputed rotation for one ViewSpec.
class PerspectiveCamera {
 public:
  explicit PerspectiveCamera(const ViewSpec& spec);

  const ViewSpec& spec() const { return spec_; }
  double tan_half_fov() const { return tan_half_; }

  Vec3 PixelToDir(double u, double v) const;
  // Normalized plane coordinates (x right, y up) in [-1, 1] inside the frustum.
  std::optional<PixelCoord> DirToPlane(const Vec3& d) const;
  // Continuous pixel in [-0.5, S - 0.5]^2, or nullopt outside the frustum.
  std::optional<PixelCoord> DirToPixel(const Vec3& d) const;
  Vec3 CenterDir() const { return ToWorld({0.0, 0.0, 1.0}); }

  Vec3 ToWorld(const Vec3& cam) const;
  Vec3 ToCamera(const Vec3& world) const;

 private:
  ViewSpec spec_;
  double tan_half_;
  double m_[3][3];  // camera -> world
};

Vec3 ViewPixelToDir(const ViewSpec& spec, double u, double v);

// Bilinear sample of channel c with longitude wrap and latitude clamp.
double SampleErp(const ImageD& erp, double u, double v, int c = 0);
// Bilinear sample with edge clamp.
double SampleClamped(const ImageD& image, double u, double v, int c = 0);

struct ExtractedView {
  ImageD raster;
  Mask mask;
};

ExtractedView ExtractView(const ImageD& erp, const ViewSpec& spec,
                          const Exec& exec = {});

std::vector<ExtractedView> ExtractViews(const ImageD& erp,
                                        std::span<const ViewSpec> specs,
                                        const Exec& exec = {});

// Monte-Carlo fraction of uniformly random sphere directions that fall inside
// at least one view frustum. Deterministic for a given seed.
double CoverageFraction(std::span<const ViewSpec> views, int samples,
                        std::uint64_t seed = 0x5eed);

// Wraps an angle into (-pi, pi].
double WrapAngle(double a);

constexpr double DegToRad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double RadToDeg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace panofuse
