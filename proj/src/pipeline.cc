#include "panofuse/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "panofuse/raster_io.h"
#include "panofuse/serialization.h"

namespace panofuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<ConfigMap::Key> kKeys = {
    {"input", "", "ERP panorama (PNG); empty renders the synthetic scene"},
    {"gt", "", "ground-truth ERP depth (.pfm or .f32r); empty uses the synthetic scene when no input is given"},
    {"out", "", "output directory; empty uses $PANOFUSE_OUTPUT_DIR or ./panofuse_out"},
    {"seed", "0", "oracle noise seed"},
    {"erp.width", "1024", "ERP width for synthetic input"},
    {"erp.height", "512", "ERP height for synthetic input"},
    {"erp.require_2to1", "true", "reject panoramas whose width is not twice the height"},
    {"planner.base_views", "8", "base rig size (>= 6)"},
    {"planner.top_k", "2", "parents that receive neighbor views"},
    {"planner.fov_deg", "120", "view field of view in degrees"},
    {"planner.resolution", "518", "view resolution in pixels"},
    {"planner.offsets_deg", "", "neighbor offsets 'yaw1,pitch1,yaw2,pitch2' in degrees; empty is +-fov/4"},
    {"planner.tau", "mad", "gradient normalizer: 'mad' or a positive number"},
    {"confidence.band_width", "0.05", "edge band width m"},
    {"confidence.floor", "1e-4", "confidence floor"},
    {"confidence.patch_size", "14", "patch size for token pooling"},
    {"confidence.gradient", "true", "gradient prior term"},
    {"confidence.edge_band", "true", "edge band term"},
    {"confidence.validity", "true", "validity mask term"},
    {"fusion.sigma_fraction", "0.15", "locality bandwidth as a fraction of the token-grid diagonal"},
    {"fusion.weight_floor", "1e-6", "weight floor"},
    {"fusion.normalization", "view", "min-max scope: 'view' or 'global'"},
    {"fusion.sharpness", "true", "sharpness metric"},
    {"fusion.locality", "true", "locality metric"},
    {"fusion.symmetry", "true", "symmetry metric"},
    {"backend", "oracle", "reconstructor: 'oracle' or 'bundle'"},
    {"backend.bundle", "", "bundle directory for the bundle backend"},
    {"oracle.scene", "room:2,2.5,3,0.9,1.4,1.3", "sphere:r | box:a,b,c,d,e,f | room:w,h,d,cx,cy,cz | corner:x,z,far"},
    {"oracle.noise", "0", "relative depth noise"},
    {"oracle.attention", "decay", "attention mode: uniform | self | decay"},
    {"oracle.attention_sigma", "1.5", "decay attention bandwidth in patches"},
    {"oracle.blank_surface", "-1", "scene surface rendered without texture, -1 for none"},
    {"eval.alignment", "median", "scale alignment: none | median | lsq"},
    {"eval.depth_cap", "0", "ignore ground truth beyond this depth, 0 for no cap"},
};

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitList(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(Trim(item));
  return out;
}

double ParseNumber(const std::string& key, const std::string& value) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return v;
}

int ParseInt(const std::string& key, const std::string& value) {
  const double v = ParseNumber(key, value);
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  return static_cast<int>(v);
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::vector<double> ParseNumbers(const std::string& key, const std::string& value,
                                 size_t count) {
  const auto parts = SplitList(value, ',');
  if (parts.size() != count) {
    throw ConfigError(key + ": expected " + std::to_string(count) +
                      " comma-separated numbers, got '" + value + "'");
  }
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(ParseNumber(key, p));
  return out;
}

std::string ReadBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string ViewFile(const std::string& stem, int i, const std::string& ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d%s", stem.c_str(), i, ext.c_str());
  return buf;
}

std::string ConfigSubset(const ConfigMap& map,
                         std::initializer_list<const char*> prefixes) {
  std::string out;
  for (const auto& [k, v] : map.values()) {
    for (const char* p : prefixes) {
      if (k.rfind(p, 0) == 0) {
        out += k + "=" + v + "\n";
        break;
      }
    }
  }
  return out;
}

json MetricsToJson(const DepthMetrics& m) {
  return {{"abs_rel", m.abs_rel}, {"rmse", m.rmse},     {"delta1", m.delta1},
          {"delta2", m.delta2},   {"delta3", m.delta3}, {"valid", m.valid},
          {"scale", m.scale}};
}

DepthMetrics MetricsFromJson(const json& j) {
  DepthMetrics m;
  m.abs_rel = j.at("abs_rel").get<double>();
  m.rmse = j.at("rmse").get<double>();
  m.delta1 = j.at("delta1").get<double>();
  m.delta2 = j.at("delta2").get<double>();
  m.delta3 = j.at("delta3").get<double>();
  m.valid = j.at("valid").get<size_t>();
  m.scale = j.at("scale").get<double>();
  return m;
}

// Stage runner: a stage is skipped when its recorded hash matches and every
// declared output exists. Failures are re-raised with the stage name.
class Stages {
 public:
  Stages(fs::path out, const LogFn& log, PipelineResult& result)
      : out_(std::move(out)), log_(log), result_(result) {}

  template <typename Fn>
  void Run(const std::string& name, std::uint64_t hash,
           const std::vector<fs::path>& outputs, Fn&& fn) {
    const std::string hex = HexHash(hash);
    result_.stage_hashes[name] = hex;
    const fs::path marker = out_ / ".stages" / (name + ".hash");
    bool fresh = fs::exists(marker);
    if (fresh) {
      std::ifstream in(marker);
      std::string recorded;
      in >> recorded;
      fresh = recorded == hex;
    }
    for (const auto& o : outputs) fresh = fresh && fs::exists(o);
    if (fresh) {
      result_.skipped.push_back(name);
      Log("stage " + name + ": cached (" + hex + ")");
      return;
    }
    std::error_code ec;
    fs::remove(marker, ec);
    const auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const Error& e) {
      throw Error(e.kind(), "stage " + name + ": " + e.what());
    } catch (const fs::filesystem_error& e) {
      throw IoError("stage " + name + ": " + e.what());
    } catch (const json::exception& e) {
      throw InvalidInput("stage " + name + ": " + e.what());
    } catch (const std::exception& e) {
      throw InternalError("stage " + name + ": " + e.what());
    }
    fs::create_directories(marker.parent_path());
    WriteTextFile(marker, hex + "\n");
    result_.executed.push_back(name);
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f s", secs);
    Log("stage " + name + ": ran in " + buf + " (" + hex + ")");
  }

  void Log(const std::string& msg) const {
    if (log_) log_(msg);
  }

 private:
  fs::path out_;
  const LogFn& log_;
  PipelineResult& result_;
};

void ResetDir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

}  // namespace

ConfigMap::ConfigMap() {
  for (const auto& k : kKeys) values_[k.name] = k.default_value;
}

const std::vector<ConfigMap::Key>& ConfigMap::Keys() { return kKeys; }

void ConfigMap::Set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = Trim(value);
}

const std::string& ConfigMap::Get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

bool ConfigMap::IsDefault(const std::string& key) const {
  for (const auto& k : kKeys) {
    if (k.name == key) return Get(key) == k.default_value;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void ConfigMap::MergeText(const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) +
                        ": expected 'key = value'");
    }
    try {
      Set(Trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void ConfigMap::MergeFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  MergeText(ss.str(), path.string());
}

std::string ConfigMap::ToText() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

SyntheticScene ParseScene(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = Trim(text.substr(0, colon));
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  const std::string key = "oracle.scene";
  SyntheticScene scene;
  if (kind == "sphere") {
    scene = SyntheticScene::Sphere(ParseNumbers(key, args, 1)[0]);
  } else if (kind == "box") {
    const auto v = ParseNumbers(key, args, 6);
    scene = SyntheticScene::Box({v[0], v[1], v[2], v[3], v[4], v[5]});
  } else if (kind == "room") {
    const auto v = ParseNumbers(key, args, 6);
    scene = SyntheticScene::Room(v[0], v[1], v[2], v[3], v[4], v[5]);
  } else if (kind == "corner") {
    const auto v = ParseNumbers(key, args, 3);
    scene = SyntheticScene::Corner(v[0], v[1], v[2]);
  } else {
    throw ConfigError(key + ": unknown scene kind '" + kind + "'");
  }
  try {
    scene.Validate();
  } catch (const Error& e) {
    throw ConfigError(key + ": " + e.what());
  }
  return scene;
}

PipelineConfig PipelineConfig::FromMap(const ConfigMap& map) {
  const auto get = [&](const char* k) -> const std::string& { return map.Get(k); };
  const auto num = [&](const char* k) { return ParseNumber(k, get(k)); };
  const auto integer = [&](const char* k) { return ParseInt(k, get(k)); };
  const auto flag = [&](const char* k) { return ParseBool(k, get(k)); };

  PipelineConfig c;
  c.input = get("input");
  c.gt = get("gt");
  c.out_dir = get("out").empty() ? DefaultOutputDir() : fs::path(get("out"));
  const double seed = num("seed");
  if (seed < 0 || seed != std::floor(seed) || seed > 9.007199254740992e15) {
    throw ConfigError("seed: expected a non-negative integer");
  }
  c.seed = static_cast<std::uint64_t>(seed);
  c.erp = {integer("erp.width"), integer("erp.height")};
  c.require_2to1 = flag("erp.require_2to1");

  c.planner.base_views = integer("planner.base_views");
  c.planner.top_k = integer("planner.top_k");
  c.planner.fov = DegToRad(num("planner.fov_deg"));
  c.planner.resolution = integer("planner.resolution");
  if (!get("planner.offsets_deg").empty()) {
    const auto v = ParseNumbers("planner.offsets_deg", get("planner.offsets_deg"), 4);
    c.planner.offsets = std::array<NeighborOffset, 2>{
        NeighborOffset{DegToRad(v[0]), DegToRad(v[1])},
        NeighborOffset{DegToRad(v[2]), DegToRad(v[3])}};
  }
  if (get("planner.tau") == "mad") {
    c.planner.tau = {TauMode::kRobustMad, 1.0};
  } else {
    c.planner.tau = {TauMode::kFixed, num("planner.tau")};
  }

  c.confidence.band_width = num("confidence.band_width");
  c.confidence.floor = num("confidence.floor");
  c.confidence.patch_size = integer("confidence.patch_size");
  c.confidence.use_gradient = flag("confidence.gradient");
  c.confidence.use_edge_band = flag("confidence.edge_band");
  c.confidence.use_validity = flag("confidence.validity");
  c.confidence.tau = c.planner.tau;

  c.fusion.sigma_fraction = num("fusion.sigma_fraction");
  c.fusion.weight_floor = num("fusion.weight_floor");
  const std::string& scope = get("fusion.normalization");
  if (scope == "view") {
    c.fusion.scope = NormalizationScope::kPerView;
  } else if (scope == "global") {
    c.fusion.scope = NormalizationScope::kGlobal;
  } else {
    throw ConfigError("fusion.normalization: expected 'view' or 'global', got '" +
                      scope + "'");
  }
  c.fusion.metrics = {flag("fusion.sharpness"), flag("fusion.locality"),
                      flag("fusion.symmetry")};

  c.backend = get("backend");
  c.bundle = get("backend.bundle");
  if (c.backend != "oracle" && c.backend != "bundle") {
    throw ConfigError("backend: expected 'oracle' or 'bundle', got '" + c.backend + "'");
  }
  if (c.backend == "bundle" && c.bundle.empty()) {
    throw ConfigError("backend.bundle: required when backend = bundle");
  }

  c.oracle.scene = ParseScene(get("oracle.scene"));
  c.oracle.noise = num("oracle.noise");
  c.oracle.seed = c.seed;
  try {
    c.oracle.attention = ParseAttentionMode(get("oracle.attention"));
  } catch (const Error& e) {
    throw ConfigError(std::string("oracle.attention: ") + e.what());
  }
  c.oracle.attention_sigma = num("oracle.attention_sigma");
  c.blank_surface = integer("oracle.blank_surface");
  if (c.blank_surface < -1 || c.blank_surface >= c.oracle.scene.surface_count()) {
    throw ConfigError("oracle.blank_surface: expected -1 or a surface index below " +
                      std::to_string(c.oracle.scene.surface_count()));
  }

  try {
    c.alignment = ParseAlignment(get("eval.alignment"));
  } catch (const Error& e) {
    throw ConfigError(std::string("eval.alignment: ") + e.what());
  }
  c.depth_cap = num("eval.depth_cap");
  if (c.depth_cap < 0.0) throw ConfigError("eval.depth_cap: must be >= 0");

  // Semantic validation; every failure is a configuration error.
  try {
    if (c.input.empty()) c.erp.Validate(c.require_2to1);
    c.planner.Validate();
    c.confidence.Validate();
    c.fusion.Validate();
    c.oracle.Validate();
    ViewSpec{0.0, 0.0, c.planner.fov, c.planner.resolution}.Validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    throw ConfigError(e.what());
  }
  return c;
}

fs::path DefaultOutputDir() {
  if (const char* env = std::getenv("PANOFUSE_OUTPUT_DIR"); env && *env) {
    return fs::path(env);
  }
  return fs::path("panofuse_out");
}

std::uint64_t Fnv1a(const std::string& text, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string HexHash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ImageD LoadPanorama(const PipelineConfig& cfg, const Exec& exec) {
  if (cfg.input.empty()) {
    return RenderErpTexture(cfg.oracle.scene, cfg.erp,
                            TextureOptions{cfg.blank_surface}, exec);
  }
  ImageD erp = ReadPng(cfg.input);
  try {
    DimsOf(erp).Validate(cfg.require_2to1);
  } catch (const Error& e) {
    throw Error(e.kind(), "input " + cfg.input + ": " + e.what());
  }
  return erp;
}

FusionOutput FuseReconstruction(const ReconstructorResponse& response,
                                const ErpDims& dims, const CorrelationConfig& cfg,
                                const Exec& exec) {
  response.Validate();
  FusionOutput out;
  out.weights = ComputeCorrelationWeights(response.attention, response.grid,
                                          response.specs.front().resolution, cfg, exec);
  std::vector<ImageD> pixel;
  pixel.reserve(out.weights.size());
  for (const auto& w : out.weights) pixel.push_back(w.pixel);
  out.fused = FuseToErp(response.observations, pixel, response.specs, dims, exec);
  return out;
}

void WriteFusedDepth(const fs::path& dir, const FusedErpDepth& fused) {
  fs::create_directories(dir);
  WriteF32R(dir / "depth.f32r", fused.depth);
  WritePfm(dir / "depth.pfm", fused.depth);
  WriteF32R(dir / "weight.f32r", fused.weight);
  ImageD count(fused.count.width(), fused.count.height());
  for (size_t i = 0; i < count.pixel_count(); ++i) count[i] = fused.count[i];
  WriteF32R(dir / "count.f32r", count);
  double lo = INFINITY, hi = -INFINITY;
  for (size_t i = 0; i < fused.depth.pixel_count(); ++i) {
    if (std::isfinite(fused.depth[i])) {
      lo = std::min(lo, fused.depth[i]);
      hi = std::max(hi, fused.depth[i]);
    }
  }
  if (!(lo < hi)) {
    lo = std::isfinite(lo) ? lo - 0.5 : 0.0;
    hi = lo + 1.0;
  }
  WritePng(dir / "depth.png", TurboColorize(fused.depth, lo, hi));
}

FusedErpDepth ReadFusedDepth(const fs::path& dir) {
  FusedErpDepth fused;
  fused.depth = ReadRaster(dir / "depth.f32r");
  fused.weight = ReadRaster(dir / "weight.f32r");
  const ImageD count = ReadRaster(dir / "count.f32r");
  fused.count = Image<int>(count.width(), count.height());
  for (size_t i = 0; i < count.pixel_count(); ++i) {
    fused.count[i] = static_cast<int>(count[i]);
  }
  return fused;
}

PipelineResult RunPipeline(const ConfigMap& config, const Exec& exec,
                           const LogFn& log) {
  const PipelineConfig cfg = PipelineConfig::FromMap(config);
  const fs::path out = cfg.out_dir;
  try {
    fs::create_directories(out);
  } catch (const fs::filesystem_error& e) {
    throw IoError("cannot create output directory " + out.string() + ": " + e.what());
  }

  PipelineResult result;
  Stages stages(out, log, result);
  const bool synthetic = cfg.input.empty();
  const bool use_oracle = cfg.backend == "oracle";
  const bool has_images = !synthetic || use_oracle;

  // Panorama source and its hash. Decoding is deferred until a stage needs it.
  std::uint64_t input_hash = 0;
  ErpDims dims = cfg.erp;
  if (synthetic) {
    input_hash = Fnv1a("synthetic\n" + config.Get("oracle.scene") + "\n" +
                       config.Get("oracle.blank_surface") + "\n" +
                       std::to_string(dims.width) + "x" + std::to_string(dims.height));
  } else {
    input_hash = Fnv1a(ReadBytes(cfg.input));
  }
  std::optional<ImageD> panorama;
  const auto erp = [&]() -> const ImageD& {
    if (!panorama) panorama = LoadPanorama(cfg, exec);
    return *panorama;
  };
  if (!synthetic) dims = DimsOf(erp());

  // plan
  std::uint64_t plan_hash = 0, views_hash = 0;
  const fs::path views_json = out / "views.json";
  if (has_images) {
    plan_hash = Fnv1a("plan/1\n" + ConfigSubset(config, {"planner."}), input_hash);
    stages.Run("plan", plan_hash, {views_json}, [&] {
      WriteJsonFile(views_json, ViewPlanToJson(PlanViews(erp(), cfg.planner, exec)));
    });
    result.plan = ViewPlanFromJson(ReadJsonFile(views_json));
  }

  // views: extraction and confidence
  const int view_count = static_cast<int>(result.plan.views.size());
  const fs::path views_dir = out / "views";
  const fs::path conf_dir = out / "confidence";
  if (has_images) {
    views_hash = Fnv1a("views/1\n" + ConfigSubset(config, {"confidence."}), plan_hash);
    std::vector<fs::path> outputs;
    for (int i = 0; i < view_count; ++i) {
      outputs.push_back(views_dir / ViewFile("view", i, ".png"));
      outputs.push_back(conf_dir / ViewFile("view", i, ".pixel.f32r"));
      outputs.push_back(conf_dir / ViewFile("view", i, ".patch.f32r"));
    }
    stages.Run("views", views_hash, outputs, [&] {
      ResetDir(views_dir);
      ResetDir(conf_dir);
      const auto specs = result.plan.specs();
      ParallelFor(view_count, exec, [&](int i) {
        try {
          const ExtractedView view = ExtractView(erp(), specs[i]);
          WritePng(views_dir / ViewFile("view", i, ".png"), Quantize8(view.raster));
          const ConfidenceMap conf = ComputeConfidence(view.raster, view.mask, cfg.confidence);
          WriteF32R(conf_dir / ViewFile("view", i, ".pixel.f32r"), conf.pixel);
          WriteF32R(conf_dir / ViewFile("view", i, ".patch.f32r"), conf.patch);
        } catch (const Error& e) {
          throw Error(e.kind(), "view " + std::to_string(i) + ": " + e.what());
        }
      });
    });
  }

  // reconstruct: always leaves a bundle in out/bundle for the fuse stage.
  const fs::path bundle_dir = out / "bundle";
  std::uint64_t recon_hash = 0;
  if (use_oracle) {
    recon_hash = Fnv1a("reconstruct/oracle/1\n" + ConfigSubset(config, {"oracle.", "seed"}),
                       views_hash);
    std::vector<fs::path> outputs = {bundle_dir / "manifest.json"};
    for (int i = 0; i < view_count; ++i) {
      outputs.push_back(bundle_dir / ViewFile("view", i, ".points.f32r"));
      outputs.push_back(bundle_dir / ViewFile("view", i, ".attn.f32r"));
    }
    stages.Run("reconstruct", recon_hash, outputs, [&] {
      ReconstructorRequest request;
      request.specs = result.plan.specs();
      request.patch_size = cfg.confidence.patch_size;
      if (cfg.confidence.enabled()) {
        for (int i = 0; i < view_count; ++i) {
          request.patch_confidence.push_back(
              ReadRaster(conf_dir / ViewFile("view", i, ".patch.f32r")));
        }
      }
      ReconstructorResponse response = OracleReconstruct(request, cfg.oracle, exec);
      for (const auto& v : result.plan.views) response.parents.push_back(v.parent);
      BundleMetadata meta;
      meta.source = "oracle";
      meta.noise = cfg.oracle.noise;
      meta.seed = cfg.oracle.seed;
      meta.scene = cfg.oracle.scene.Describe();
      meta.attention_mode = ToString(cfg.oracle.attention);
      meta.confidence_bias = cfg.confidence.enabled();
      fs::remove_all(bundle_dir);
      ExportBundle(bundle_dir, response, meta);
    });
  } else {
    std::string bytes;
    std::vector<fs::path> files;
    if (fs::is_directory(cfg.bundle)) {
      for (const auto& e : fs::directory_iterator(cfg.bundle)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
    }
    if (files.empty()) throw IoError("bundle directory " + cfg.bundle + " is missing or empty");
    std::sort(files.begin(), files.end());
    recon_hash = Fnv1a("reconstruct/bundle/1\n");
    for (const auto& f : files) {
      recon_hash = Fnv1a(f.filename().string() + "\n" + ReadBytes(f), recon_hash);
    }
    stages.Run("reconstruct", recon_hash, {bundle_dir / "manifest.json"}, [&] {
      const ImportedBundle imported = ImportBundle(cfg.bundle);
      if (imported.response.attention_renormalized) {
        stages.Log("bundle attention rows were renormalized on import");
      }
      fs::remove_all(bundle_dir);
      ExportBundle(bundle_dir, imported.response, imported.metadata);
    });
  }

  // fuse: consumes the bundle as written to disk.
  const fs::path weights_dir = out / "weights";
  const std::uint64_t fuse_hash =
      Fnv1a("fuse/1\n" + ConfigSubset(config, {"fusion."}) + std::to_string(dims.width) +
                "x" + std::to_string(dims.height),
            recon_hash);
  const fs::path depth_f32r = out / "depth.f32r";
  const fs::path weight_f32r = out / "weight.f32r";
  const fs::path count_f32r = out / "count.f32r";
  stages.Run("fuse", fuse_hash,
             {depth_f32r, weight_f32r, count_f32r, out / "depth.pfm", out / "depth.png"},
             [&] {
               const ImportedBundle bundle = ImportBundle(bundle_dir);
               const FusionOutput fo =
                   FuseReconstruction(bundle.response, dims, cfg.fusion, exec);
               ResetDir(weights_dir);
               for (size_t i = 0; i < fo.weights.size(); ++i) {
                 WriteF32R(weights_dir / ViewFile("view", static_cast<int>(i), ".f32r"),
                           fo.weights[i].pixel);
               }
               WriteFusedDepth(out, fo.fused);
             });

  result.fused = ReadFusedDepth(out);
  if (use_oracle) {
    result.fused_views = result.plan.specs();
  } else {
    result.fused_views = ImportBundle(bundle_dir).response.specs;
  }

  // eval
  const bool gt_from_scene = cfg.gt.empty() && synthetic && use_oracle;
  if (!cfg.gt.empty() || gt_from_scene) {
    const std::string gt_id =
        gt_from_scene ? "scene\n" + config.Get("oracle.scene")
                      : "file\n" + HexHash(Fnv1a(ReadBytes(cfg.gt)));
    const std::uint64_t eval_hash =
        Fnv1a("eval/1\n" + ConfigSubset(config, {"eval."}) + gt_id, fuse_hash);
    const fs::path metrics_json = out / "metrics.json";
    stages.Run("eval", eval_hash, {metrics_json, out / "metrics.tsv"}, [&] {
      const ImageD gt = gt_from_scene ? RenderErpDepth(cfg.oracle.scene, dims, exec)
                                      : ReadRaster(cfg.gt);
      if (DimsOf(gt) != dims || gt.channels() != 1) {
        throw InvalidInput("ground truth is " + std::to_string(gt.width()) + "x" +
                           std::to_string(gt.height()) + "x" +
                           std::to_string(gt.channels()) + ", expected " +
                           std::to_string(dims.width) + "x" +
                           std::to_string(dims.height) + "x1");
      }
      const DepthMetrics m =
          Evaluate(result.fused.depth, gt, nullptr, cfg.depth_cap, cfg.alignment);
      WriteJsonFile(metrics_json, MetricsToJson(m));
      WriteTextFile(out / "metrics.tsv", MetricsHeader() + "\n" + MetricsRow(m) + "\n");
    });
    result.metrics = MetricsFromJson(ReadJsonFile(metrics_json));
  } else {
    stages.Log("stage eval: no ground truth, skipped");
  }

  json manifest;
  manifest["tool"] = "panofuse";
  manifest["config"] = config.values();
  manifest["stages"] = result.stage_hashes;
  manifest["erp"] = {{"width", dims.width}, {"height", dims.height}};
  manifest["view_count"] = result.fused_views.size();
  WriteJsonFile(out / "manifest.json", manifest);
  return result;
}

std::vector<AblationCell> AblationMatrix(const ConfigMap& base) {
  const PipelineConfig cfg = PipelineConfig::FromMap(base);
  const fs::path root = cfg.out_dir / "ablation";
  std::vector<AblationCell> cells;
  using Settings = std::vector<std::pair<std::string, std::string>>;
  const auto add = [&](const std::string& group, const std::string& name,
                       const std::string& slug, const Settings& sets) {
    ConfigMap c = base;
    for (const auto& [k, v] : sets) c.Set(k, v);
    c.Set("out", (root / slug).string());
    cells.push_back({group, name, slug, std::move(c)});
  };
  // Confidence terms (gradient, edge band, validity) and correlation metrics
  // (sharpness, locality, symmetry).
  const auto toggles = [](bool g, bool e, bool v, bool sh, bool lo, bool sy) {
    const auto b = [](bool x) { return std::string(x ? "true" : "false"); };
    return Settings{{"confidence.gradient", b(g)}, {"confidence.edge_band", b(e)},
                    {"confidence.validity", b(v)}, {"fusion.sharpness", b(sh)},
                    {"fusion.locality", b(lo)},    {"fusion.symmetry", b(sy)}};
  };

  add("attention", "baseline", "baseline", toggles(0, 0, 0, 0, 0, 0));
  add("attention", "+M_g", "attn_g", toggles(1, 0, 0, 0, 0, 0));
  add("attention", "+M_g+E", "attn_ge", toggles(1, 1, 0, 0, 0, 0));
  add("attention", "+M_g+E+valid", "attn_gev", toggles(1, 1, 1, 0, 0, 0));
  add("correlation", "baseline", "baseline", toggles(0, 0, 0, 0, 0, 0));
  add("correlation", "+S_sharp", "corr_sharp", toggles(0, 0, 0, 1, 0, 0));
  add("correlation", "+S_loc", "corr_loc", toggles(0, 0, 0, 0, 1, 0));
  add("correlation", "+S_sym", "corr_sym", toggles(0, 0, 0, 0, 0, 1));
  add("correlation", "+all", "corr_all", toggles(0, 0, 0, 1, 1, 1));

  const std::string k = std::to_string(cfg.planner.top_k);
  add("projection", "K=0", "proj_k0", {{"planner.top_k", "0"}});
  if (cfg.planner.top_k != 0) add("projection", "K=" + k, "proj_k" + k, {});
  return cells;
}

std::vector<AblationRow> RunAblation(const ConfigMap& base, const Exec& exec,
                                     const LogFn& log) {
  const PipelineConfig cfg = PipelineConfig::FromMap(base);
  std::vector<AblationRow> rows;
  for (const auto& cell : AblationMatrix(base)) {
    if (log) log("ablation " + cell.group + " " + cell.name);
    const auto start = std::chrono::steady_clock::now();
    const PipelineResult r = RunPipeline(cell.config, exec, log);
    if (!r.metrics) {
      throw ConfigError("ablation needs ground truth: set gt or use the synthetic input");
    }
    AblationRow row;
    row.group = cell.group;
    row.name = cell.name;
    row.metrics = *r.metrics;
    row.fused_pixels = r.fused.valid_count();
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                      .count();
    rows.push_back(row);
  }
  WriteTextFile(cfg.out_dir / "ablation.tsv", AblationTsv(rows));
  return rows;
}

std::string AblationTsv(const std::vector<AblationRow>& rows) {
  std::string out = "group\tname\t" + MetricsHeader() + "\tfused_pixels\tseconds\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "\t%zu\t%.3f\n", r.fused_pixels, r.seconds);
    out += r.group + "\t" + r.name + "\t" + MetricsRow(r.metrics) + buf;
  }
  return out;
}

}  // namespace panofuse
