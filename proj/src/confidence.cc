#include "panofuse/confidence.h"

#include <algorithm>
#include <cmath>

namespace panofuse {

void ConfidenceConfig::Validate() const {
  if (!(band_width > 0.0 && band_width < 1.0)) {
    throw ConfigError("edge band width m must lie in (0, 1)");
  }
  if (!(floor > 0.0 && floor < 1.0)) {
    throw ConfigError("confidence floor must lie in (0, 1)");
  }
  if (patch_size < 1) throw ConfigError("patch size must be >= 1");
  if (tau.mode == TauMode::kFixed && !(tau.fixed > 0.0)) {
    throw ConfigError("fixed tau must be positive");
  }
}

ImageD GradientPrior(const ImageD& view, const Mask& mask, const TauConfig& tau) {
  UncertaintyMap u = ComputeUncertainty(view, mask, tau);
  ImageD prior(u.z.width(), u.z.height());
  for (size_t i = 0; i < prior.pixel_count(); ++i) prior[i] = Sigmoid(u.z[i]);
  return prior;
}

Mask EdgeBand(int resolution, double band_width) {
  if (!(band_width > 0.0 && band_width < 1.0)) {
    throw InvalidInput("edge band width must lie in (0, 1)");
  }
  Mask band(resolution, resolution);
  const double s = resolution;
  for (int y = 0; y < resolution; ++y) {
    const double ny = (y + 0.5) / s * 2.0 - 1.0;
    for (int x = 0; x < resolution; ++x) {
      const double nx = (x + 0.5) / s * 2.0 - 1.0;
      band.at(x, y) = std::max(std::abs(nx), std::abs(ny)) >= 1.0 - band_width;
    }
  }
  return band;
}

ImageD PoolPatches(const ImageD& pixel, int patch_size) {
  if (patch_size < 1) throw InvalidInput("patch size must be >= 1");
  const int cols = (pixel.width() + patch_size - 1) / patch_size;
  const int rows = (pixel.height() + patch_size - 1) / patch_size;
  ImageD pooled(cols, rows);
  for (int py = 0; py < rows; ++py) {
    for (int px = 0; px < cols; ++px) {
      const int x1 = std::min(pixel.width(), (px + 1) * patch_size);
      const int y1 = std::min(pixel.height(), (py + 1) * patch_size);
      double sum = 0.0;
      int n = 0;
      for (int y = py * patch_size; y < y1; ++y) {
        for (int x = px * patch_size; x < x1; ++x) {
          sum += pixel.at(x, y);
          ++n;
        }
      }
      pooled.at(px, py) = sum / n;
    }
  }
  return pooled;
}

ConfidenceMap ComputeConfidence(const ImageD& view, const Mask& mask,
                                const ConfidenceConfig& cfg) {
  cfg.Validate();
  if (view.width() != view.height()) {
    throw InvalidInput("confidence maps are defined for square views");
  }
  if (!view.same_extent(mask)) {
    throw InvalidInput("mask shape does not match its view");
  }
  const int s = view.width();
  ImageD gradient(s, s, 1, 1.0);
  if (cfg.use_gradient) gradient = GradientPrior(view, mask, cfg.tau);
  const Mask band = cfg.use_edge_band ? EdgeBand(s, cfg.band_width) : Mask(s, s);

  ConfidenceMap out;
  out.patch_size = cfg.patch_size;
  out.pixel = ImageD(s, s);
  for (size_t i = 0; i < out.pixel.pixel_count(); ++i) {
    const bool valid = !cfg.use_validity || mask[i] != 0;
    const double m = valid ? (band[i] ? 1.0 : gradient[i]) : 0.0;
    out.pixel[i] = std::clamp(m, cfg.floor, 1.0);
  }
  out.patch = PoolPatches(out.pixel, cfg.patch_size);
  return out;
}

}  // namespace panofuse
