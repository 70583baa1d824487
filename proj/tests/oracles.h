#pragma once

// Independent scalar reference implementations used by the tests. They are
// written directly from the definitions, without calling library kernels, so
// an agreement check is meaningful.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracle {

constexpr double kPi = std::numbers::pi;

using Vec = std::array<double, 3>;

inline Vec Dir(double lon, double lat) {
  return {std::cos(lat) * std::sin(lon), std::sin(lat), std::cos(lat) * std::cos(lon)};
}

inline double Angle(const Vec& a, const Vec& b) {
  const Vec c = {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                 a[0] * b[1] - a[1] * b[0]};
  const double cross = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
  const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return std::atan2(cross, dot);
}

// Uniform random unit vector.
inline Vec RandomDir(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Vec v = {n(rng), n(rng), n(rng)};
    const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (len > 1e-6) return {v[0] / len, v[1] / len, v[2] / len};
  }
}

// Camera axes of a yaw/pitch view: right, up, forward in world coordinates.
struct Axes {
  Vec right, up, forward;
};

inline Axes ViewAxes(double yaw, double pitch) {
  Axes a;
  a.forward = Dir(yaw, pitch);
  a.right = {std::cos(yaw), 0.0, -std::sin(yaw)};
  a.up = {-std::sin(pitch) * std::sin(yaw), std::cos(pitch),
          -std::sin(pitch) * std::cos(yaw)};
  return a;
}

// Ray through a continuous view pixel.
inline Vec ViewRay(double yaw, double pitch, double fov, int s, double u, double v) {
  const double t = std::tan(fov / 2);
  const double x = ((u + 0.5) / s * 2.0 - 1.0) * t;
  const double y = (1.0 - (v + 0.5) / s * 2.0) * t;
  const Axes a = ViewAxes(yaw, pitch);
  Vec d;
  for (int i = 0; i < 3; ++i) d[i] = a.forward[i] + x * a.right[i] + y * a.up[i];
  const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  return {d[0] / len, d[1] / len, d[2] / len};
}

// Continuous view pixel hit by a direction, or false when outside the frustum.
inline bool ProjectToView(double yaw, double pitch, double fov, int s, const Vec& d,
                          double& u, double& v) {
  const Axes a = ViewAxes(yaw, pitch);
  const auto dot = [](const Vec& p, const Vec& q) {
    return p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
  };
  const double z = dot(d, a.forward);
  if (z <= 0.0) return false;
  const double t = std::tan(fov / 2);
  const double x = dot(d, a.right) / z / t, y = dot(d, a.up) / z / t;
  if (std::abs(x) > 1.0 || std::abs(y) > 1.0) return false;
  u = (x + 1.0) / 2.0 * s - 0.5;
  v = (1.0 - y) / 2.0 * s - 0.5;
  return true;
}

inline double Gray(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

// Raster stored row-major, single channel.
struct Grid {
  int w = 0, h = 0;
  std::vector<double> v;
  double at(int x, int y) const { return v[static_cast<size_t>(y) * w + x]; }
};

// Direct correlation with the two Sobel kernels and replicate padding.
inline Grid Sobel(const Grid& g) {
  static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  Grid out{g.w, g.h, std::vector<double>(g.v.size())};
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      double sx = 0.0, sy = 0.0;
      for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
          const double p = g.at(std::clamp(x + i - 1, 0, g.w - 1),
                                std::clamp(y + j - 1, 0, g.h - 1));
          sx += kx[j][i] * p;
          sy += ky[j][i] * p;
        }
      }
      out.v[static_cast<size_t>(y) * g.w + x] = std::sqrt(sx * sx + sy * sy);
    }
  }
  return out;
}

inline double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double LogisticOf(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Uncertainty {
  std::vector<double> z, u;
  double median = 0.0, tau = 0.0;
};

// Z = (G - median) / tau over the valid pixels, tau from the scaled MAD.
inline Uncertainty UncertaintyOf(const Grid& gray, const std::vector<uint8_t>& mask) {
  const Grid g = Sobel(gray);
  std::vector<double> valid;
  for (size_t i = 0; i < g.v.size(); ++i) {
    if (mask[i]) valid.push_back(g.v[i]);
  }
  Uncertainty out;
  out.median = Median(valid);
  std::vector<double> dev;
  for (double x : valid) dev.push_back(std::abs(x - out.median));
  out.tau = std::max(1.4826 * Median(dev), 1e-6);
  for (double x : g.v) {
    const double z = (x - out.median) / out.tau;
    out.z.push_back(z);
    out.u.push_back(LogisticOf(-z));
  }
  return out;
}

inline double MaskedMean(const std::vector<double>& u, const std::vector<uint8_t>& mask) {
  double s = 0.0;
  int n = 0;
  for (size_t i = 0; i < u.size(); ++i) {
    if (mask[i]) {
      s += u[i];
      ++n;
    }
  }
  return s / n;
}

// softmax(l_ij + log c_j) per row, via the max-shifted exponential.
inline std::vector<double> Softmax(const std::vector<double>& logits, int t,
                                   const std::vector<double>& conf) {
  std::vector<double> out(logits.size());
  for (int i = 0; i < t; ++i) {
    std::vector<double> s(t);
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < t; ++j) {
      s[j] = logits[i * t + j] + (conf.empty() ? 0.0 : std::log(conf[j]));
      m = std::max(m, s[j]);
    }
    double z = 0.0;
    for (int j = 0; j < t; ++j) z += std::exp(s[j] - m);
    for (int j = 0; j < t; ++j) out[i * t + j] = std::exp(s[j] - m) / z;
  }
  return out;
}

inline double Sharpness(const std::vector<double>& a, int t, int k) {
  double h = 0.0;
  for (int p = 0; p < t; ++p) {
    const double x = a[k * t + p];
    if (x > 0.0) h += -x * std::log(x);
  }
  return 1.0 - h / std::log(static_cast<double>(t));
}

inline double Locality(const std::vector<double>& a, int rows, int cols, int k,
                       double sigma) {
  const int t = rows * cols;
  double s = 0.0;
  for (int p = 0; p < t; ++p) {
    const double dx = (p % cols) - (k % cols), dy = (p / cols) - (k / cols);
    s += a[k * t + p] * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
  }
  return s;
}

// Bhattacharyya coefficient between row k of A and row k of the transpose
// with rows renormalized (uniform for an all-zero row).
inline double Symmetry(const std::vector<double>& a, int t, int k) {
  std::vector<double> tr(t);
  double sum = 0.0;
  for (int p = 0; p < t; ++p) {
    tr[p] = a[p * t + k];
    sum += tr[p];
  }
  for (int p = 0; p < t; ++p) tr[p] = sum > 0.0 ? tr[p] / sum : 1.0 / t;
  double bc = 0.0;
  for (int p = 0; p < t; ++p) bc += std::sqrt(a[k * t + p] * tr[p]);
  return bc;
}

inline std::vector<double> MinMax(const std::vector<double>& v) {
  double lo = v[0], hi = v[0];
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  std::vector<double> out(v.size(), 0.5);
  if (hi > lo) {
    for (size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
  }
  return out;
}

inline std::vector<double> Combine(const std::vector<const std::vector<double>*>& metrics,
                                   double floor) {
  const size_t n = metrics.front()->size();
  std::vector<double> sum(n, 0.0);
  for (const auto* m : metrics) {
    const auto norm = MinMax(*m);
    for (size_t i = 0; i < n; ++i) sum[i] += norm[i];
  }
  auto c = MinMax(sum);
  for (double& x : c) x = std::max(x, floor);
  return c;
}

struct Metrics {
  double abs_rel = 0, rmse = 0, d1 = 0, d2 = 0, d3 = 0;
  size_t n = 0;
};

inline Metrics DepthMetrics(const std::vector<double>& pred, const std::vector<double>& gt) {
  Metrics m;
  double ar = 0.0, se = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i], g = gt[i];
    if (!(std::isfinite(g) && g > 0.0 && std::isfinite(p))) continue;
    ++m.n;
    ar += std::abs(p - g) / g;
    se += (p - g) * (p - g);
    const double r = std::max(p / g, g / p);
    m.d1 += r < 1.25;
    m.d2 += r < 1.25 * 1.25;
    m.d3 += r < 1.25 * 1.25 * 1.25;
  }
  m.abs_rel = ar / m.n;
  m.rmse = std::sqrt(se / m.n);
  m.d1 /= m.n;
  m.d2 /= m.n;
  m.d3 /= m.n;
  return m;
}

// Distance from the origin along a horizontal direction (lon) to the walls of
// a box with half-extents -x0..x1 and -z0..z1 (2D cross-section).
inline double BoxEquatorDistance(double lon, double x0, double x1, double z0, double z1) {
  const double dx = std::sin(lon), dz = std::cos(lon);
  double t = std::numeric_limits<double>::infinity();
  if (dx > 0) t = std::min(t, x1 / dx);
  if (dx < 0) t = std::min(t, -x0 / dx);
  if (dz > 0) t = std::min(t, z1 / dz);
  if (dz < 0) t = std::min(t, -z0 / dz);
  return t;
}

// Scratch directory for a test, emptied on creation.
inline std::filesystem::path TempDir(const std::string& name) {
  const char* root = std::getenv("PANOFUSE_TEST_TMP");
  std::filesystem::path dir =
      (root && *root ? std::filesystem::path(root)
                     : std::filesystem::temp_directory_path() / "panofuse_tests") /
      name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
