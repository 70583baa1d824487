#include "panofuse/correlation.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "panofuse/error.h"
#include "panofuse/geometry.h"

namespace panofuse {

namespace {

void CheckToken(const AttentionTensor& attn, int k) {
  if (k < 0 || k >= attn.tokens()) {
    throw BoundsError("token " + std::to_string(k) + " out of range");
  }
}

double Clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::vector<double> SumEnabled(const std::vector<double>* parts[3],
                               size_t n) {
  std::vector<double> sum(n, 0.0);
  for (int m = 0; m < 3; ++m) {
    if (!parts[m]) continue;
    for (size_t i = 0; i < n; ++i) sum[i] += (*parts[m])[i];
  }
  return sum;
}

}  // namespace

double CorrelationConfig::LocalitySigma(const TokenGrid& grid) const {
  return sigma_fraction * std::hypot(grid.rows, grid.cols);
}

void CorrelationConfig::Validate() const {
  if (!(sigma_fraction > 0.0)) {
    throw ConfigError("locality sigma fraction must be positive");
  }
  if (!(weight_floor > 0.0 && weight_floor < 1.0)) {
    throw ConfigError("weight floor must lie in (0, 1)");
  }
}

double Sharpness(const AttentionTensor& attn, int k) {
  CheckToken(attn, k);
  const int t = attn.tokens();
  if (t < 2) throw DegenerateInput("sharpness needs at least two tokens");
  double entropy = 0.0;
  for (double a : attn.row(k)) {
    if (a > 0.0) entropy -= a * std::log(a);
  }
  return Clamp01(1.0 - entropy / std::log(static_cast<double>(t)));
}

double Locality(const AttentionTensor& attn, int k, const TokenGrid& grid,
                double sigma) {
  CheckToken(attn, k);
  if (grid.tokens() != attn.tokens()) {
    throw InvalidInput("token grid does not match the attention size");
  }
  if (!(sigma > 0.0)) throw InvalidInput("locality sigma must be positive");
  const int kx = k % grid.cols, ky = k / grid.cols;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const auto row = attn.row(k);
  double s = 0.0;
  for (int p = 0; p < attn.tokens(); ++p) {
    const double dx = p % grid.cols - kx, dy = p / grid.cols - ky;
    s += row[p] * std::exp(-(dx * dx + dy * dy) * inv);
  }
  return Clamp01(s);
}

std::vector<double> ColumnSums(const AttentionTensor& attn) {
  std::vector<double> sums(attn.tokens(), 0.0);
  for (int r = 0; r < attn.tokens(); ++r) {
    const auto row = attn.row(r);
    for (int c = 0; c < attn.tokens(); ++c) sums[c] += row[c];
  }
  return sums;
}

double Symmetry(const AttentionTensor& attn, int k,
                std::span<const double> column_sums) {
  CheckToken(attn, k);
  const int t = attn.tokens();
  if (column_sums.size() != static_cast<size_t>(t)) {
    throw InvalidInput("column sums do not match the attention size");
  }
  const auto row = attn.row(k);
  const double col_sum = column_sums[k];
  double s = 0.0;
  for (int p = 0; p < t; ++p) {
    const double transposed =
        col_sum > 0.0 ? attn.at(p, k) / col_sum : 1.0 / t;
    s += std::sqrt(row[p] * transposed);
  }
  return Clamp01(s);
}

double Symmetry(const AttentionTensor& attn, int k) {
  return Symmetry(attn, k, ColumnSums(attn));
}

CorrelationScores ComputeScores(const AttentionTensor& attn,
                                const TokenGrid& grid, double sigma,
                                const Exec& exec) {
  const int t = attn.tokens();
  if (grid.tokens() != t) {
    throw InvalidInput("token grid " + std::to_string(grid.rows) + "x" +
                       std::to_string(grid.cols) +
                       " does not match attention with " + std::to_string(t) +
                       " tokens");
  }
  if (t < 2) throw DegenerateInput("correlation scores need >= 2 tokens");
  if (!(sigma > 0.0)) throw InvalidInput("locality sigma must be positive");

  // Gaussian kernel tabulated by grid offset.
  const int kw = 2 * grid.cols - 1, kh = 2 * grid.rows - 1;
  std::vector<double> kernel(static_cast<size_t>(kw) * kh);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int dy = -(grid.rows - 1); dy < grid.rows; ++dy) {
    for (int dx = -(grid.cols - 1); dx < grid.cols; ++dx) {
      kernel[static_cast<size_t>(dy + grid.rows - 1) * kw + dx + grid.cols - 1] =
          std::exp(-static_cast<double>(dx * dx + dy * dy) * inv);
    }
  }
  const std::vector<double> col_sums = ColumnSums(attn);
  const double log_t = std::log(static_cast<double>(t));

  CorrelationScores out;
  out.sharpness.resize(t);
  out.locality.resize(t);
  out.symmetry.resize(t);
  ParallelFor(t, exec, [&](int k) {
    const auto row = attn.row(k);
    const int kx = k % grid.cols, ky = k / grid.cols;
    const double col_sum = col_sums[k];
    double entropy = 0.0, loc = 0.0, sym = 0.0;
    for (int p = 0; p < t; ++p) {
      const double a = row[p];
      if (a > 0.0) entropy -= a * std::log(a);
      const int dx = p % grid.cols - kx, dy = p / grid.cols - ky;
      loc += a * kernel[static_cast<size_t>(dy + grid.rows - 1) * kw + dx +
                        grid.cols - 1];
      const double transposed = col_sum > 0.0 ? attn.at(p, k) / col_sum : 1.0 / t;
      sym += std::sqrt(a * transposed);
    }
    out.sharpness[k] = Clamp01(1.0 - entropy / log_t);
    out.locality[k] = Clamp01(loc);
    out.symmetry[k] = Clamp01(sym);
  });
  return out;
}

std::vector<double> MinMaxNormalize(std::span<const double> values) {
  std::vector<double> out(values.size(), 0.5);
  if (values.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return out;
  for (size_t i = 0; i < values.size(); ++i) {
    out[i] = (values[i] - lo) / (hi - lo);
  }
  return out;
}

std::vector<double> CombineScores(const CorrelationScores& scores,
                                  const MetricToggles& toggles,
                                  double weight_floor) {
  const size_t n = scores.sharpness.size();
  if (scores.locality.size() != n || scores.symmetry.size() != n) {
    throw InvalidInput("correlation metric vectors differ in length");
  }
  if (!toggles.any()) return std::vector<double>(n, 1.0);
  const std::vector<double> sharp = MinMaxNormalize(scores.sharpness);
  const std::vector<double> loc = MinMaxNormalize(scores.locality);
  const std::vector<double> sym = MinMaxNormalize(scores.symmetry);
  const std::vector<double>* parts[3] = {toggles.sharpness ? &sharp : nullptr,
                                         toggles.locality ? &loc : nullptr,
                                         toggles.symmetry ? &sym : nullptr};
  std::vector<double> combined = MinMaxNormalize(SumEnabled(parts, n));
  for (double& c : combined) c = std::max(c, weight_floor);
  return combined;
}

std::vector<std::vector<double>> CombineScoresGlobal(
    std::span<const CorrelationScores> scores, const MetricToggles& toggles,
    double weight_floor) {
  std::vector<size_t> sizes;
  CorrelationScores all;
  for (const auto& s : scores) {
    const size_t n = s.sharpness.size();
    if (s.locality.size() != n || s.symmetry.size() != n) {
      throw InvalidInput("correlation metric vectors differ in length");
    }
    sizes.push_back(n);
    all.sharpness.insert(all.sharpness.end(), s.sharpness.begin(), s.sharpness.end());
    all.locality.insert(all.locality.end(), s.locality.begin(), s.locality.end());
    all.symmetry.insert(all.symmetry.end(), s.symmetry.begin(), s.symmetry.end());
  }
  const std::vector<double> flat = CombineScores(all, toggles, weight_floor);
  std::vector<std::vector<double>> out;
  size_t offset = 0;
  for (size_t n : sizes) {
    out.emplace_back(flat.begin() + offset, flat.begin() + offset + n);
    offset += n;
  }
  return out;
}

ImageD UpsampleTokens(std::span<const double> values, const TokenGrid& grid,
                      int resolution) {
  if (values.size() != static_cast<size_t>(grid.tokens())) {
    throw InvalidInput("token values do not match the token grid");
  }
  ImageD tokens(grid.cols, grid.rows);
  std::copy(values.begin(), values.end(), tokens.data().begin());
  ImageD out(resolution, resolution);
  const double sx = static_cast<double>(grid.cols) / resolution;
  const double sy = static_cast<double>(grid.rows) / resolution;
  for (int y = 0; y < resolution; ++y) {
    const double gy = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < resolution; ++x) {
      out.at(x, y) = SampleClamped(tokens, (x + 0.5) * sx - 0.5, gy);
    }
  }
  return out;
}

std::vector<CorrelationWeights> ComputeCorrelationWeights(
    std::span<const AttentionTensor> attention, const TokenGrid& grid,
    int resolution, const CorrelationConfig& cfg, const Exec& exec) {
  cfg.Validate();
  const double sigma = cfg.LocalitySigma(grid);
  std::vector<CorrelationWeights> out(attention.size());
  for (size_t v = 0; v < attention.size(); ++v) {
    out[v].scores = ComputeScores(attention[v], grid, sigma, exec);
  }
  if (cfg.scope == NormalizationScope::kGlobal && cfg.metrics.any()) {
    std::vector<CorrelationScores> scores;
    for (const auto& w : out) scores.push_back(w.scores);
    auto combined = CombineScoresGlobal(scores, cfg.metrics, cfg.weight_floor);
    for (size_t v = 0; v < out.size(); ++v) out[v].combined = std::move(combined[v]);
  } else {
    for (auto& w : out) {
      w.combined = CombineScores(w.scores, cfg.metrics, cfg.weight_floor);
    }
  }
  for (auto& w : out) {
    w.pixel = cfg.metrics.any() ? UpsampleTokens(w.combined, grid, resolution)
                                : ImageD(resolution, resolution, 1, 1.0);
  }
  return out;
}

}  // namespace panofuse
