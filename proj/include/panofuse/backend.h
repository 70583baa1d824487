#pragma once

// Multi-view reconstructor contract. A reconstructor receives perspective
// views (with optional patch-level key confidence for the attention bias) and
// returns one point map plus one final-layer attention tensor per view.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "panofuse/attention.h"
#include "panofuse/fusion.h"
#include "panofuse/geometry.h"
#include "panofuse/image.h"
#include "panofuse/parallel.h"
#include "panofuse/scene.h"

namespace panofuse {

struct ReconstructorRequest {
  std::vector<ViewSpec> specs;
  std::vector<ImageD> images;            // may be empty for the oracle
  std::vector<Mask> masks;               // may be empty: all valid
  std::vector<ImageD> patch_confidence;  // token grid per view, or empty
  int patch_size = 14;

  int resolution() const;
  TokenGrid grid() const;
  void Validate() const;
};

struct ReconstructorResponse {
  std::vector<ViewSpec> specs;
  std::vector<std::optional<int>> parents;  // provenance, may be empty
  std::vector<PointMapObservation> observations;
  std::vector<AttentionTensor> attention;
  std::vector<std::optional<Vec3>> camera_centers;
  int patch_size = 14;
  TokenGrid grid;
  bool attention_renormalized = false;

  void Validate() const;
};

class Reconstructor {
 public:
  virtual ~Reconstructor() = default;
  virtual ReconstructorResponse Reconstruct(const ReconstructorRequest& request,
                                            const Exec& exec) = 0;
};

enum class AttentionMode {
  kUniform,          // constant logits
  kSelfPeaked,       // one-hot on the query token (bias not applicable)
  kDistanceDecayed,  // Gaussian logits over the patch grid
};

// Relative depth-noise scale at normalized plane coordinates (x, y):
//   3 (1 + 2 (x^2 + y^2)) / 7
// which averages to 1 over the view and grows toward the corners. The oracle's
// distance-decayed attention widens with the same profile, so tokens with noisy
// depth attend less locally.
double NoiseProfile(double x, double y);

struct OracleOptions {
  SyntheticScene scene;
  double noise = 0.0;  // relative depth noise std (times NoiseProfile)
  std::uint64_t seed = 0;
  AttentionMode attention = AttentionMode::kDistanceDecayed;
  double attention_sigma = 1.5;  // patches, at NoiseProfile == 1

  void Validate() const;
};

// Analytic reconstructor: exact ray/scene intersections, seeded depth noise,
// synthetic attention. Views share the panorama center.
class OracleReconstructor final : public Reconstructor {
 public:
  explicit OracleReconstructor(OracleOptions options);
  ReconstructorResponse Reconstruct(const ReconstructorRequest& request,
                                    const Exec& exec) override;

 private:
  OracleOptions options_;
};

ReconstructorResponse OracleReconstruct(const ReconstructorRequest& request,
                                        const OracleOptions& options,
                                        const Exec& exec = {});

// Bundle layout (a directory):
//   manifest.json
//   view_%03d.points.f32r   S x S x 3 point map, NaN for invalid pixels
//   view_%03d.attn.f32r     T x T attention, rows are queries
//   view_%03d.depth.f32r    optional S x S distance map (inspection only)
struct BundleMetadata {
  std::string source = "oracle";
  std::string head_reduction = "mean";
  std::string attention_layer = "final intra-frame";
  std::string frame_convention =
      "x-right y-up z-forward, origin at panorama center, meters";
  bool recenter = false;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string scene;
  std::string attention_mode;
  bool confidence_bias = false;
};

inline constexpr int kBundleVersion = 1;

// Attention rows within this distance of 1 are kept verbatim on import; rows
// beyond it but within kAttentionRowTolerance are renormalized and flagged;
// anything further is rejected.
inline constexpr double kAttentionRowExact = 1e-5;
inline constexpr double kAttentionRowTolerance = 1e-3;

void ExportBundle(const std::filesystem::path& dir,
                  const ReconstructorResponse& response,
                  const BundleMetadata& metadata);

struct ImportedBundle {
  ReconstructorResponse response;
  BundleMetadata metadata;
};

ImportedBundle ImportBundle(const std::filesystem::path& dir);

class BundleReconstructor final : public Reconstructor {
 public:
  explicit BundleReconstructor(std::filesystem::path dir);
  ReconstructorResponse Reconstruct(const ReconstructorRequest& request,
                                    const Exec& exec) override;

 private:
  std::filesystem::path dir_;
};

std::string ToString(AttentionMode mode);
AttentionMode ParseAttentionMode(const std::string& text);

}  // namespace panofuse
