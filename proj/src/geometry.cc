#include "panofuse/geometry.h"

#include <algorithm>
#include <random>
#include <string>

namespace panofuse {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 Cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z,
          a.x * b.y - a.y * b.x};
}

int WrapIndex(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

double UnitDouble(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

double AngleBetween(const Vec3& a, const Vec3& b) {
  return std::atan2(Cross(a, b).norm(), a.dot(b));
}

Vec3 DirFromLonLat(double lon, double lat) {
  const double c = std::cos(lat);
  return {c * std::sin(lon), std::sin(lat), c * std::cos(lon)};
}

double WrapAngle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

void ErpDims::Validate(bool require_2to1) const {
  if (height < 2 || width < 4) {
    throw InvalidInput("ERP must be at least 4x2, got " +
                       std::to_string(width) + "x" + std::to_string(height));
  }
  if (require_2to1 && width != 2 * height) {
    throw InvalidInput("ERP width must be twice its height, got " +
                       std::to_string(width) + "x" + std::to_string(height));
  }
}

Vec3 ErpPixelToDir(const ErpDims& dims, double u, double v) {
  // Continuous coordinates span the raster footprint [-0.5, W-0.5].
  if (!(u >= -0.5 && u <= dims.width - 0.5 && v >= -0.5 &&
        v <= dims.height - 0.5)) {
    throw BoundsError("ERP pixel (" + std::to_string(u) + ", " +
                      std::to_string(v) + ") outside " +
                      std::to_string(dims.width) + "x" +
                      std::to_string(dims.height));
  }
  const double lon = ((u + 0.5) / dims.width) * 2.0 * kPi - kPi;
  const double lat = kPi / 2 - ((v + 0.5) / dims.height) * kPi;
  return DirFromLonLat(lon, lat);
}

PixelCoord DirToErpPixel(const ErpDims& dims, const Vec3& d) {
  const double n = d.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw InvalidInput("direction must be a finite non-zero vector");
  }
  const double horizontal = std::hypot(d.x, d.z);
  const double lat = std::atan2(d.y, horizontal);
  double lon = 0.0;
  if (horizontal > 0.0) {
    lon = std::atan2(d.x, d.z);
    if (lon <= -kPi) lon = kPi;
  }
  return {(lon + kPi) / (2.0 * kPi) * dims.width - 0.5,
          (kPi / 2 - lat) / kPi * dims.height - 0.5};
}

void ViewSpec::Validate() const {
  if (!(fov > 0.0 && fov < kPi)) {
    throw InvalidInput("view fov must lie in (0, pi), got " +
                       std::to_string(fov));
  }
  if (resolution < 8) {
    throw InvalidInput("view resolution must be >= 8, got " +
                       std::to_string(resolution));
  }
  if (!std::isfinite(yaw) || !std::isfinite(pitch)) {
    throw InvalidInput("view yaw/pitch must be finite");
  }
}

PerspectiveCamera::PerspectiveCamera(const ViewSpec& spec)
    : spec_(spec), tan_half_(std::tan(spec.fov / 2)) {
  spec.Validate();
  const double cy = std::cos(spec.yaw), sy = std::sin(spec.yaw);
  const double cp = std::cos(spec.pitch), sp = std::sin(spec.pitch);
  // yaw(about y) * pitch(about x)
  m_[0][0] = cy;
  m_[0][1] = -sy * sp;
  m_[0][2] = sy * cp;
  m_[1][0] = 0.0;
  m_[1][1] = cp;
  m_[1][2] = sp;
  m_[2][0] = -sy;
  m_[2][1] = -cy * sp;
  m_[2][2] = cy * cp;
}

Vec3 PerspectiveCamera::ToWorld(const Vec3& c) const {
  return {m_[0][0] * c.x + m_[0][1] * c.y + m_[0][2] * c.z,
          m_[1][0] * c.x + m_[1][1] * c.y + m_[1][2] * c.z,
          m_[2][0] * c.x + m_[2][1] * c.y + m_[2][2] * c.z};
}

Vec3 PerspectiveCamera::ToCamera(const Vec3& w) const {
  return {m_[0][0] * w.x + m_[1][0] * w.y + m_[2][0] * w.z,
          m_[0][1] * w.x + m_[1][1] * w.y + m_[2][1] * w.z,
          m_[0][2] * w.x + m_[1][2] * w.y + m_[2][2] * w.z};
}

Vec3 PerspectiveCamera::PixelToDir(double u, double v) const {
  const double s = spec_.resolution;
  const Vec3 ray{((u + 0.5) / s * 2.0 - 1.0) * tan_half_,
                 (1.0 - (v + 0.5) / s * 2.0) * tan_half_, 1.0};
  return ToWorld(ray * (1.0 / ray.norm()));
}

std::optional<PixelCoord> PerspectiveCamera::DirToPlane(const Vec3& d) const {
  const Vec3 c = ToCamera(d);
  if (!(c.z > 0.0)) return std::nullopt;
  const double x = c.x / (c.z * tan_half_);
  const double y = c.y / (c.z * tan_half_);
  if (std::abs(x) > 1.0 || std::abs(y) > 1.0) return std::nullopt;
  return PixelCoord{x, y};
}

std::optional<PixelCoord> PerspectiveCamera::DirToPixel(const Vec3& d) const {
  const auto plane = DirToPlane(d);
  if (!plane) return std::nullopt;
  const double s = spec_.resolution;
  return PixelCoord{(plane->u + 1.0) / 2.0 * s - 0.5,
                    (1.0 - plane->v) / 2.0 * s - 0.5};
}

Vec3 ViewPixelToDir(const ViewSpec& spec, double u, double v) {
  return PerspectiveCamera(spec).PixelToDir(u, v);
}

double SampleErp(const ImageD& erp, double u, double v, int c) {
  const int w = erp.width(), h = erp.height();
  const double fu0 = std::floor(u), fv0 = std::floor(v);
  const double fu = u - fu0, fv = v - fv0;
  const int u0 = static_cast<int>(fu0), v0 = static_cast<int>(fv0);
  const int x0 = WrapIndex(u0, w), x1 = WrapIndex(u0 + 1, w);
  const int y0 = std::clamp(v0, 0, h - 1), y1 = std::clamp(v0 + 1, 0, h - 1);
  const double top = erp.at(x0, y0, c) * (1.0 - fu) + erp.at(x1, y0, c) * fu;
  const double bottom = erp.at(x0, y1, c) * (1.0 - fu) + erp.at(x1, y1, c) * fu;
  return top * (1.0 - fv) + bottom * fv;
}

double SampleClamped(const ImageD& image, double u, double v, int c) {
  const int w = image.width(), h = image.height();
  u = std::clamp(u, 0.0, static_cast<double>(w - 1));
  v = std::clamp(v, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(u), w - 1);
  const int y0 = std::min(static_cast<int>(v), h - 1);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fu = u - x0, fv = v - y0;
  const double top = image.at(x0, y0, c) * (1.0 - fu) + image.at(x1, y0, c) * fu;
  const double bottom =
      image.at(x0, y1, c) * (1.0 - fu) + image.at(x1, y1, c) * fu;
  return top * (1.0 - fv) + bottom * fv;
}

ExtractedView ExtractView(const ImageD& erp, const ViewSpec& spec,
                          const Exec& exec) {
  DimsOf(erp).Validate(false);
  const PerspectiveCamera camera(spec);
  const ErpDims dims = DimsOf(erp);
  const int s = spec.resolution;
  const int channels = erp.channels();
  ExtractedView out{ImageD(s, s, channels), FullMask(s, s)};
  ParallelFor(s, exec, [&](int y) {
    for (int x = 0; x < s; ++x) {
      const PixelCoord p = DirToErpPixel(dims, camera.PixelToDir(x, y));
      for (int c = 0; c < channels; ++c) {
        out.raster.at(x, y, c) = SampleErp(erp, p.u, p.v, c);
      }
    }
  });
  return out;
}

std::vector<ExtractedView> ExtractViews(const ImageD& erp,
                                        std::span<const ViewSpec> specs,
                                        const Exec& exec) {
  std::vector<ExtractedView> views;
  views.reserve(specs.size());
  for (const auto& spec : specs) views.push_back(ExtractView(erp, spec, exec));
  return views;
}

double CoverageFraction(std::span<const ViewSpec> views, int samples,
                        std::uint64_t seed) {
  if (samples < 10000) {
    throw InvalidInput("coverage needs at least 1e4 samples, got " +
                       std::to_string(samples));
  }
  if (views.empty()) return 0.0;
  std::vector<PerspectiveCamera> cameras;
  cameras.reserve(views.size());
  for (const auto& v : views) cameras.emplace_back(v);

  std::mt19937_64 rng(seed);
  long covered = 0;
  for (int i = 0; i < samples; ++i) {
    const double y = 2.0 * UnitDouble(rng) - 1.0;
    const double theta = 2.0 * kPi * UnitDouble(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const Vec3 d{r * std::cos(theta), y, r * std::sin(theta)};
    for (const auto& cam : cameras) {
      if (cam.DirToPlane(d)) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / samples;
}

}  // namespace panofuse
