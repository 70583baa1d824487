#include "panofuse/planner.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace panofuse {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMadScale = 1.4826;
constexpr double kMinTau = 1e-6;

void CheckMask(const ImageD& values, const Mask& mask) {
  if (!values.same_extent(mask)) {
    throw InvalidInput("mask shape does not match its view");
  }
}

double NormalizeYaw(double yaw) {
  double r = std::fmod(yaw, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  return r;
}

}  // namespace

std::array<NeighborOffset, 2> PlannerConfig::ResolvedOffsets() const {
  if (offsets) return *offsets;
  const double q = fov / 4;
  return {NeighborOffset{q, q}, NeighborOffset{-q, -q}};
}

void PlannerConfig::Validate() const {
  if (base_views < 6) {
    throw ConfigError("base view count must be >= 6, got " +
                      std::to_string(base_views));
  }
  if (top_k < 0 || top_k > base_views) {
    throw ConfigError("top-k must lie in [0, " + std::to_string(base_views) +
                      "], got " + std::to_string(top_k));
  }
  if (!(fov > 0.0 && fov < kPi)) {
    throw ConfigError("planner fov must lie in (0, 180) degrees");
  }
  if (resolution < 8) {
    throw ConfigError("view resolution must be >= 8");
  }
  if (tau.mode == TauMode::kFixed && !(tau.fixed > 0.0)) {
    throw ConfigError("fixed tau must be positive");
  }
  for (const auto& o : ResolvedOffsets()) {
    if (!(std::abs(o.pitch) < kPi / 2)) {
      throw ConfigError("neighbor pitch offset must satisfy |pitch| < 90 deg");
    }
    const double dist = std::acos(std::cos(o.pitch) * std::cos(o.yaw));
    if (!(dist <= fov / 2)) {
      throw ConfigError(
          "neighbor offset must stay within half the fov of its parent");
    }
  }
}

std::vector<ViewSpec> BaseRig(const PlannerConfig& cfg) {
  cfg.Validate();
  const int ring = cfg.base_views - 2;
  std::vector<ViewSpec> rig;
  rig.reserve(cfg.base_views);
  for (int i = 0; i < ring; ++i) {
    rig.push_back({2.0 * kPi * i / ring, 0.0, cfg.fov, cfg.resolution});
  }
  rig.push_back({0.0, kPi / 2, cfg.fov, cfg.resolution});
  rig.push_back({0.0, -kPi / 2, cfg.fov, cfg.resolution});
  return rig;
}

ImageD SobelMagnitude(const ImageD& gray) {
  if (gray.channels() != 1) {
    throw InvalidInput("Sobel expects a single-channel raster");
  }
  const int w = gray.width(), h = gray.height();
  if (w < 3 || h < 3) throw InvalidInput("Sobel needs at least 3x3 pixels");
  ImageD out(w, h);
  const auto px = [&](int x, int y) {
    return gray.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
      out.at(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double MaskedMedian(const ImageD& values, const Mask& mask) {
  CheckMask(values, mask);
  std::vector<double> v;
  v.reserve(values.pixel_count());
  for (size_t i = 0; i < values.pixel_count(); ++i) {
    if (mask[i]) v.push_back(values[i]);
  }
  if (v.empty()) throw DegenerateInput("median over an empty valid region");
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

UncertaintyMap ComputeUncertainty(const ImageD& view, const Mask& mask,
                                  const TauConfig& tau) {
  CheckMask(view, mask);
  if (CountValid(mask) == 0) {
    throw DegenerateInput("view has no valid pixels");
  }
  const ImageD grad = SobelMagnitude(ToGray(view));
  UncertaintyMap out;
  out.median = MaskedMedian(grad, mask);
  if (tau.mode == TauMode::kFixed) {
    out.tau = tau.fixed;
  } else {
    ImageD deviation(grad.width(), grad.height());
    for (size_t i = 0; i < grad.pixel_count(); ++i) {
      deviation[i] = std::abs(grad[i] - out.median);
    }
    out.tau = std::max(kMadScale * MaskedMedian(deviation, mask), kMinTau);
  }
  out.z = ImageD(grad.width(), grad.height());
  out.u = ImageD(grad.width(), grad.height());
  for (size_t i = 0; i < grad.pixel_count(); ++i) {
    out.z[i] = (grad[i] - out.median) / out.tau;
    out.u[i] = Sigmoid(-out.z[i]);
  }
  return out;
}

double ScoreView(const UncertaintyMap& umap, const Mask& mask) {
  CheckMask(umap.u, mask);
  double sum = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < umap.u.pixel_count(); ++i) {
    if (mask[i]) {
      sum += umap.u[i];
      ++n;
    }
  }
  if (n == 0) throw DegenerateInput("cannot score a view with no valid pixels");
  return sum / static_cast<double>(n);
}

std::vector<int> TopK(std::span<const double> scores, int k) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  order.resize(std::min<size_t>(std::max(k, 0), order.size()));
  return order;
}

std::array<ViewSpec, 2> NeighborViews(
    const ViewSpec& parent, const std::array<NeighborOffset, 2>& offsets) {
  const PerspectiveCamera camera(parent);
  std::array<ViewSpec, 2> out;
  for (size_t i = 0; i < 2; ++i) {
    // Offsets are angles in the parent's own image frame (right, up).
    const Vec3 d = camera.ToWorld(DirFromLonLat(offsets[i].yaw, offsets[i].pitch));
    const double horizontal = std::hypot(d.x, d.z);
    ViewSpec spec = parent;
    spec.pitch = std::atan2(d.y, horizontal);
    spec.yaw = horizontal > 0.0 ? NormalizeYaw(std::atan2(d.x, d.z)) : 0.0;
    out[i] = spec;
  }
  return out;
}

std::vector<ViewSpec> ViewPlan::specs() const {
  std::vector<ViewSpec> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(v.spec);
  return out;
}

ViewPlan PlanViews(const ImageD& erp, const PlannerConfig& cfg,
                   const Exec& exec) {
  cfg.Validate();
  DimsOf(erp).Validate(false);
  const std::vector<ViewSpec> rig = BaseRig(cfg);
  std::vector<double> scores(rig.size(), 0.0);
  ParallelFor(static_cast<int>(rig.size()), exec, [&](int i) {
    try {
      const ExtractedView view = ExtractView(erp, rig[i]);
      scores[i] = ScoreView(ComputeUncertainty(view.raster, view.mask, cfg.tau),
                            view.mask);
    } catch (const Error& e) {
      throw Error(e.kind(), "planner: view " + std::to_string(i) + ": " + e.what());
    }
  });

  ViewPlan plan;
  for (size_t i = 0; i < rig.size(); ++i) {
    plan.views.push_back({rig[i], std::nullopt});
    plan.base_scores.push_back({static_cast<int>(i), scores[i]});
  }
  plan.selected = TopK(scores, cfg.top_k);
  const auto offsets = cfg.ResolvedOffsets();
  for (int parent : plan.selected) {
    for (const auto& spec : NeighborViews(rig[parent], offsets)) {
      plan.views.push_back({spec, parent});
    }
  }
  return plan;
}

}  // namespace panofuse
