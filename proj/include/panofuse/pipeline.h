#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panofuse/backend.h"
#include "panofuse/confidence.h"
#include "panofuse/correlation.h"
#include "panofuse/fusion.h"
#include "panofuse/metrics.h"
#include "panofuse/planner.h"

namespace panofuse {

// Flat key/value configuration. Every key has a default; the resolved map
// (defaults materialized) is echoed into each run's manifest.
class ConfigMap {
 public:
  ConfigMap();  // all defaults

  struct Key {
    std::string name;
    std::string default_value;
    std::string help;
  };
  static const std::vector<Key>& Keys();

  // Throws kConfig for an unknown key.
  void Set(const std::string& key, const std::string& value);
  const std::string& Get(const std::string& key) const;
  bool IsDefault(const std::string& key) const;

  // Parses "key = value" lines; '#' starts a comment.
  void MergeText(const std::string& text, const std::string& origin = "<text>");
  void MergeFile(const std::filesystem::path& path);

  const std::map<std::string, std::string>& values() const { return values_; }
  std::string ToText() const;

 private:
  std::map<std::string, std::string> values_;
};

struct PipelineConfig {
  std::string input;
  std::string gt;
  ErpDims erp{1024, 512};
  bool require_2to1 = true;
  PlannerConfig planner;
  ConfidenceConfig confidence;
  CorrelationConfig fusion;
  std::string backend = "oracle";
  std::string bundle;
  OracleOptions oracle;
  int blank_surface = -1;
  Alignment alignment = Alignment::kMedian;
  double depth_cap = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;

  // Parses and validates every key; throws kConfig on the first problem.
  static PipelineConfig FromMap(const ConfigMap& map);
};

// Parses "sphere:r", "box:a,b,c,d,e,f", "room:w,h,d,cx,cy,cz" or
// "corner:x,z,far".
SyntheticScene ParseScene(const std::string& text);

// Output directory when none is configured: $PANOFUSE_OUTPUT_DIR, else
// "panofuse_out".
std::filesystem::path DefaultOutputDir();

std::uint64_t Fnv1a(const std::string& text, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string HexHash(std::uint64_t h);

// Synthetic texture for an empty input, otherwise the decoded PNG. The
// panorama shape is validated against cfg.require_2to1.
ImageD LoadPanorama(const PipelineConfig& cfg, const Exec& exec = {});

struct FusionOutput {
  std::vector<CorrelationWeights> weights;
  FusedErpDepth fused;
};

FusionOutput FuseReconstruction(const ReconstructorResponse& response,
                                const ErpDims& dims, const CorrelationConfig& cfg,
                                const Exec& exec = {});

// depth.f32r, depth.pfm, depth.png (Turbo), weight.f32r and count.f32r.
void WriteFusedDepth(const std::filesystem::path& dir, const FusedErpDepth& fused);
FusedErpDepth ReadFusedDepth(const std::filesystem::path& dir);

struct PipelineResult {
  ViewPlan plan;
  std::vector<ViewSpec> fused_views;
  FusedErpDepth fused;
  std::optional<DepthMetrics> metrics;
  std::vector<std::string> executed;  // stages that ran
  std::vector<std::string> skipped;   // stages served from the cache
  std::map<std::string, std::string> stage_hashes;
};

using LogFn = std::function<void(const std::string&)>;

// plan -> views (extract + confidence) -> reconstruct -> fuse -> eval.
// Every stage reads its inputs from the output directory and is skipped when
// its content hash (config subset + upstream hashes) is unchanged and its
// outputs exist.
PipelineResult RunPipeline(const ConfigMap& config, const Exec& exec,
                           const LogFn& log = {});

struct AblationRow {
  std::string group;
  std::string name;
  DepthMetrics metrics;
  size_t fused_pixels = 0;
  double seconds = 0.0;
};

struct AblationCell {
  std::string group;
  std::string name;
  std::string slug;
  ConfigMap config;
};

// Toggle matrix: attention-bias rows (correlation weighting off), correlation
// rows (attention bias off) and projection rows (K = 0 vs configured K).
std::vector<AblationCell> AblationMatrix(const ConfigMap& base);

std::vector<AblationRow> RunAblation(const ConfigMap& base, const Exec& exec,
                                     const LogFn& log = {});

std::string AblationTsv(const std::vector<AblationRow>& rows);

}  // namespace panofuse
