#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "panofuse/geometry.h"
#include "panofuse/image.h"
#include "panofuse/parallel.h"

namespace panofuse {

enum class TauMode {
  kRobustMad,  // tau = max(1.4826 * MAD(G), 1e-6)
  kFixed,      // tau = TauConfig::fixed
};

struct TauConfig {
  TauMode mode = TauMode::kRobustMad;
  double fixed = 1.0;
};

struct NeighborOffset {
  double yaw = 0.0;
  double pitch = 0.0;
};

struct PlannerConfig {
  int base_views = 8;
  int top_k = 2;
  double fov = DegToRad(120.0);
  int resolution = 518;
  // Unset means the upper-right / lower-left pair (+fov/4, +fov/4) and
  // (-fov/4, -fov/4).
  std::optional<std::array<NeighborOffset, 2>> offsets;
  TauConfig tau;

  std::array<NeighborOffset, 2> ResolvedOffsets() const;
  void Validate() const;
};

// Fixed rig: base_views - 2 equatorial views at yaw = 2*pi*i/(base_views - 2),
// then the zenith (+pi/2) and nadir (-pi/2) views.
std::vector<ViewSpec> BaseRig(const PlannerConfig& cfg);

// 3x3 Sobel magnitude with replicate border padding.
ImageD SobelMagnitude(const ImageD& gray);

struct UncertaintyMap {
  ImageD z;  // (G - median) / tau
  ImageD u;  // sigmoid(-z)
  double median = 0.0;
  double tau = 0.0;
};

double Sigmoid(double x);

// Median over the valid pixels of a single-channel raster; the mean of the two
// middle values for an even count.
double MaskedMedian(const ImageD& values, const Mask& mask);

// Normalized gradient Z for a view (RGB views are converted to gray first).
// Shared by the uncertainty map and the gradient prior.
UncertaintyMap ComputeUncertainty(const ImageD& view, const Mask& mask,
                                  const TauConfig& tau);

struct ViewScore {
  int view = 0;
  double score = 0.0;
};

// Mean of U over valid pixels.
double ScoreView(const UncertaintyMap& umap, const Mask& mask);

// Indices of the k highest scores; ties go to the lower index.
std::vector<int> TopK(std::span<const double> scores, int k);

// Neighbor views of a parent. Offsets are (right, up) angles in the parent's
// own camera frame, so neighbors of a pole view stay off the pole.
std::array<ViewSpec, 2> NeighborViews(const ViewSpec& parent,
                                      const std::array<NeighborOffset, 2>& offsets);

struct PlannedView {
  ViewSpec spec;
  std::optional<int> parent;
};

struct ViewPlan {
  std::vector<PlannedView> views;  // base rig first, then neighbors by rank
  std::vector<ViewScore> base_scores;
  std::vector<int> selected;  // parent indices in rank order

  std::vector<ViewSpec> specs() const;
};

ViewPlan PlanViews(const ImageD& erp, const PlannerConfig& cfg,
                   const Exec& exec = {});

}  // namespace panofuse
