#pragma once

#include <span>
#include <vector>

#include "panofuse/attention.h"
#include "panofuse/image.h"
#include "panofuse/parallel.h"

namespace panofuse {

enum class NormalizationScope {
  kPerView,  // min-max over the tokens of one view
  kGlobal,   // min-max over the tokens of all views together
};

struct MetricToggles {
  bool sharpness = true;
  bool locality = true;
  bool symmetry = true;

  bool any() const { return sharpness || locality || symmetry; }
};

struct CorrelationConfig {
  // Locality kernel bandwidth as a fraction of the token-grid diagonal.
  double sigma_fraction = 0.15;
  double weight_floor = 1e-6;
  NormalizationScope scope = NormalizationScope::kPerView;
  MetricToggles metrics;

  double LocalitySigma(const TokenGrid& grid) const;
  void Validate() const;
};

// 1 - H(row_k) / log T with 0 log 0 = 0.
double Sharpness(const AttentionTensor& attn, int k);

// sum_p attn(k, p) * exp(-|x_p - x_k|^2 / (2 sigma^2)), coordinates in patch
// units on a row-major grid.
double Locality(const AttentionTensor& attn, int k, const TokenGrid& grid,
                double sigma);

std::vector<double> ColumnSums(const AttentionTensor& attn);

// Bhattacharyya coefficient between row k and row k of the row-normalized
// transpose. A zero column falls back to the uniform distribution.
double Symmetry(const AttentionTensor& attn, int k,
                std::span<const double> column_sums);
double Symmetry(const AttentionTensor& attn, int k);

struct CorrelationScores {
  std::vector<double> sharpness;
  std::vector<double> locality;
  std::vector<double> symmetry;
};

CorrelationScores ComputeScores(const AttentionTensor& attn,
                                const TokenGrid& grid, double sigma,
                                const Exec& exec = {});

// Min-max to [0, 1]; a constant vector maps to 0.5 everywhere.
std::vector<double> MinMaxNormalize(std::span<const double> values);

// Per-view combination: normalize each enabled metric, sum, normalize the sum,
// floor at weight_floor. With no metric enabled every weight is 1.
std::vector<double> CombineScores(const CorrelationScores& scores,
                                  const MetricToggles& toggles,
                                  double weight_floor);

// Same combination with every min-max taken over all views at once.
std::vector<std::vector<double>> CombineScoresGlobal(
    std::span<const CorrelationScores> scores, const MetricToggles& toggles,
    double weight_floor);

// Bilinear upsampling of a token grid to a resolution x resolution raster,
// matching pixel centers to token centers.
ImageD UpsampleTokens(std::span<const double> values, const TokenGrid& grid,
                      int resolution);

struct CorrelationWeights {
  CorrelationScores scores;
  std::vector<double> combined;
  ImageD pixel;
};

std::vector<CorrelationWeights> ComputeCorrelationWeights(
    std::span<const AttentionTensor> attention, const TokenGrid& grid,
    int resolution, const CorrelationConfig& cfg, const Exec& exec = {});

}  // namespace panofuse
