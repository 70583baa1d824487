#include "panofuse/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "panofuse/planner.h"

namespace panofuse {

Alignment ParseAlignment(const std::string& text) {
  if (text == "none") return Alignment::kNone;
  if (text == "median") return Alignment::kMedian;
  if (text == "lsq") return Alignment::kLeastSquares;
  throw ConfigError("unknown alignment '" + text + "' (expected none, median or lsq)");
}

std::string ToString(Alignment alignment) {
  switch (alignment) {
    case Alignment::kNone:
      return "none";
    case Alignment::kMedian:
      return "median";
    case Alignment::kLeastSquares:
      return "lsq";
  }
  return "median";
}

Mask JointValid(const ImageD& pred, const ImageD& gt, const Mask* mask,
                double depth_cap) {
  if (!pred.same_shape(gt) || pred.channels() != 1) {
    throw InvalidInput("prediction and ground truth must be single-channel rasters of one size");
  }
  if (mask && !pred.same_extent(*mask)) {
    throw InvalidInput("evaluation mask has the wrong size");
  }
  Mask valid(pred.width(), pred.height());
  for (size_t i = 0; i < pred.pixel_count(); ++i) {
    const double g = gt[i], p = pred[i];
    valid[i] = std::isfinite(g) && g > 0.0 && std::isfinite(p) &&
               (!mask || (*mask)[i]) && (depth_cap <= 0.0 || g <= depth_cap);
  }
  return valid;
}

double PairwiseSum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const size_t half = values.size() / 2;
  return PairwiseSum(values.first(half)) + PairwiseSum(values.subspan(half));
}

double AlignmentScale(const ImageD& pred, const ImageD& gt, const Mask& valid,
                      Alignment alignment) {
  if (CountValid(valid) == 0) {
    throw DegenerateInput("no jointly valid pixels to align");
  }
  switch (alignment) {
    case Alignment::kNone:
      return 1.0;
    case Alignment::kMedian: {
      const double mp = MaskedMedian(pred, valid);
      const double mg = MaskedMedian(gt, valid);
      if (!(mp > 0.0)) {
        throw DegenerateInput("median of the prediction is not positive");
      }
      return mp == mg ? 1.0 : mg / mp;
    }
    case Alignment::kLeastSquares: {
      std::vector<double> pg, pp;
      for (size_t i = 0; i < pred.pixel_count(); ++i) {
        if (!valid[i]) continue;
        pg.push_back(pred[i] * gt[i]);
        pp.push_back(pred[i] * pred[i]);
      }
      const double den = PairwiseSum(pp);
      if (!(den > 0.0)) throw DegenerateInput("prediction is identically zero");
      return PairwiseSum(pg) / den;
    }
  }
  return 1.0;
}

ImageD Scaled(const ImageD& image, double scale) {
  ImageD out = image;
  if (scale == 1.0) return out;
  for (double& v : out.data()) v *= scale;
  return out;
}

DepthMetrics ComputeMetrics(const ImageD& pred, const ImageD& gt,
                            const Mask* mask, double depth_cap, double scale) {
  const Mask valid = JointValid(pred, gt, mask, depth_cap);
  std::vector<double> rel, sq;
  size_t d1 = 0, d2 = 0, d3 = 0;
  for (size_t i = 0; i < pred.pixel_count(); ++i) {
    if (!valid[i]) continue;
    const double p = pred[i], g = gt[i];
    rel.push_back(std::abs(p - g) / g);
    sq.push_back((p - g) * (p - g));
    // max(p/g, g/p) < t, evaluated without the division.
    const auto within = [&](double t) { return p < t * g && g < t * p; };
    d1 += within(1.25);
    d2 += within(1.25 * 1.25);
    d3 += within(1.25 * 1.25 * 1.25);
  }
  if (rel.empty()) throw DegenerateInput("no valid pixels to evaluate");
  const double n = static_cast<double>(rel.size());
  DepthMetrics m;
  m.valid = rel.size();
  m.abs_rel = PairwiseSum(rel) / n;
  m.rmse = std::sqrt(PairwiseSum(sq) / n);
  m.delta1 = d1 / n;
  m.delta2 = d2 / n;
  m.delta3 = d3 / n;
  m.scale = scale;
  return m;
}

DepthMetrics Evaluate(const ImageD& pred, const ImageD& gt, const Mask* mask,
                      double depth_cap, Alignment alignment) {
  const Mask valid = JointValid(pred, gt, mask, depth_cap);
  const double scale = AlignmentScale(pred, gt, valid, alignment);
  return ComputeMetrics(Scaled(pred, scale), gt, &valid, 0.0, scale);
}

std::string MetricsHeader() {
  return "abs_rel\trmse\tdelta1\tdelta2\tdelta3\tscale\tvalid";
}

std::string MetricsRow(const DepthMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.9g\t%zu",
                m.abs_rel, m.rmse, m.delta1, m.delta2, m.delta3, m.scale, m.valid);
  return buf;
}

}  // namespace panofuse
