#pragma once

#include <array>
#include <string>

#include "panofuse/geometry.h"
#include "panofuse/image.h"
#include "panofuse/parallel.h"

namespace panofuse {

// Closed analytic scenes around the panorama center (the origin).
struct SyntheticScene {
  enum class Kind { kSphere, kBox, kCorner };

  Kind kind = Kind::kSphere;
  double radius = 1.0;
  // Distances from the origin to the planes x=-a, x=+a, y=-b, y=+b, z=-c, z=+c.
  std::array<double, 6> box = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  // Corner: walls at x = +corner_x and z = +corner_z; every other direction
  // ends on a background sphere of radius corner_far.
  double corner_x = 1.0;
  double corner_z = 1.0;
  double corner_far = 10.0;

  static SyntheticScene Sphere(double radius = 1.0);
  static SyntheticScene Box(const std::array<double, 6>& distances);
  // Room of the given size with the panorama center at (cx, cy, cz) measured
  // from the x-, y- (floor) and z- walls.
  static SyntheticScene Room(double width, double height, double depth,
                             double cx, double cy, double cz);
  static SyntheticScene Corner(double x, double z, double far);

  void Validate() const;
  std::string Describe() const;

  struct Hit {
    double distance = 0.0;
    int surface = 0;
  };
  // Ray from the origin along a unit direction.
  Hit Intersect(const Vec3& dir) const;
  int surface_count() const;
};

// Ground-truth ray length per ERP pixel.
ImageD RenderErpDepth(const SyntheticScene& scene, const ErpDims& dims,
                      const Exec& exec = {});

struct TextureOptions {
  int blank_surface = -1;  // surface rendered as a flat color, -1 for none
};

// Procedural RGB panorama of the scene: a smooth two-frequency pattern plus a
// checker on each surface, tinted per surface.
ImageD RenderErpTexture(const SyntheticScene& scene, const ErpDims& dims,
                        const TextureOptions& options = {},
                        const Exec& exec = {});

}  // namespace panofuse
