#include "panofuse/backend.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "panofuse/raster_io.h"
#include "panofuse/serialization.h"

namespace panofuse {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kPi = std::numbers::pi;

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Box-Muller on a 64-bit engine so the stream is the same on every platform.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double Next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::string ViewFile(const fs::path& dir, int view, const char* suffix) {
  std::array<char, 64> name{};
  std::snprintf(name.data(), name.size(), "view_%03d.%s.f32r", view, suffix);
  return (dir / name.data()).string();
}

ImageF AttentionToImage(const AttentionTensor& attn) {
  ImageF image(attn.tokens(), attn.tokens());
  const auto values = attn.values();
  for (size_t i = 0; i < values.size(); ++i) image[i] = static_cast<float>(values[i]);
  return image;
}

AttentionTensor LoadAttention(const std::string& path, int tokens,
                              bool& renormalized) {
  if (!fs::exists(path)) throw IoError("missing bundle file " + path);
  const ImageF image = ReadF32R(path);
  if (image.width() != tokens || image.height() != tokens || image.channels() != 1) {
    throw InvalidInput(path + ": attention must be " + std::to_string(tokens) +
                       "x" + std::to_string(tokens));
  }
  AttentionTensor attn(tokens);
  for (size_t i = 0; i < image.data().size(); ++i) attn.values()[i] = image[i];
  for (int r = 0; r < tokens; ++r) {
    auto row = attn.row(r);
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw InvalidInput(path + ": attention row " + std::to_string(r) +
                           " has a negative or non-finite entry");
      }
      sum += v;
    }
    const double dev = std::abs(sum - 1.0);
    if (dev <= kAttentionRowExact) continue;
    if (dev > kAttentionRowTolerance) {
      throw InvalidInput(path + ": attention row " + std::to_string(r) +
                         " sums to " + std::to_string(sum));
    }
    for (double& v : row) v /= sum;
    renormalized = true;
  }
  return attn;
}

}  // namespace

int ReconstructorRequest::resolution() const {
  if (specs.empty()) throw InvalidInput("reconstructor request has no views");
  return specs.front().resolution;
}

TokenGrid ReconstructorRequest::grid() const {
  return TokenGridFor(resolution(), patch_size);
}

void ReconstructorRequest::Validate() const {
  const int s = resolution();
  const TokenGrid g = grid();
  for (size_t i = 0; i < specs.size(); ++i) {
    specs[i].Validate();
    if (specs[i].resolution != s) {
      throw InvalidInput("view " + std::to_string(i) +
                         " resolution differs from the rest of the request");
    }
  }
  if (!images.empty() && images.size() != specs.size()) {
    throw InvalidInput("request image count does not match view count");
  }
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i].width() != s || images[i].height() != s) {
      throw InvalidInput("view " + std::to_string(i) + " image has wrong size");
    }
  }
  if (!masks.empty() && masks.size() != specs.size()) {
    throw InvalidInput("request mask count does not match view count");
  }
  for (size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].width() != s || masks[i].height() != s) {
      throw InvalidInput("view " + std::to_string(i) + " mask has wrong size");
    }
  }
  if (!patch_confidence.empty() && patch_confidence.size() != specs.size()) {
    throw InvalidInput("request confidence count does not match view count");
  }
  for (size_t i = 0; i < patch_confidence.size(); ++i) {
    if (patch_confidence[i].width() != g.cols || patch_confidence[i].height() != g.rows) {
      throw InvalidInput("view " + std::to_string(i) +
                         " confidence does not match the token grid");
    }
  }
}

void ReconstructorResponse::Validate() const {
  const size_t n = specs.size();
  if (n == 0) throw InvalidInput("reconstruction has no views");
  if (observations.size() != n || attention.size() != n) {
    throw InvalidInput("reconstruction must carry a point map and attention per view");
  }
  if (!camera_centers.empty() && camera_centers.size() != n) {
    throw InvalidInput("camera center count does not match view count");
  }
  if (!parents.empty() && parents.size() != n) {
    throw InvalidInput("parent count does not match view count");
  }
  for (size_t i = 0; i < n; ++i) {
    const int s = specs[i].resolution;
    if (observations[i].view_index != static_cast<int>(i)) {
      throw InvalidInput("observation " + std::to_string(i) + " has view index " +
                         std::to_string(observations[i].view_index));
    }
    if (observations[i].points.width() != s || observations[i].points.height() != s) {
      throw InvalidInput("view " + std::to_string(i) + " point map has wrong size");
    }
    if (attention[i].tokens() != grid.tokens()) {
      throw InvalidInput("view " + std::to_string(i) +
                         " attention does not match the token grid");
    }
  }
}

double NoiseProfile(double x, double y) {
  return 3.0 * (1.0 + 2.0 * (x * x + y * y)) / 7.0;
}

void OracleOptions::Validate() const {
  scene.Validate();
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw ConfigError("oracle noise must be finite and >= 0");
  }
  if (!(attention_sigma > 0.0)) {
    throw ConfigError("oracle attention sigma must be positive");
  }
}

OracleReconstructor::OracleReconstructor(OracleOptions options)
    : options_(std::move(options)) {
  options_.Validate();
}

ReconstructorResponse OracleReconstructor::Reconstruct(
    const ReconstructorRequest& request, const Exec& exec) {
  return OracleReconstruct(request, options_, exec);
}

ReconstructorResponse OracleReconstruct(const ReconstructorRequest& request,
                                        const OracleOptions& options,
                                        const Exec& exec) {
  request.Validate();
  options.Validate();
  const int s = request.resolution();
  const TokenGrid grid = request.grid();
  const int tokens = grid.tokens();
  const size_t n = request.specs.size();

  ReconstructorResponse out;
  out.specs = request.specs;
  out.patch_size = request.patch_size;
  out.grid = grid;
  out.observations.resize(n);
  out.attention.resize(n);
  out.camera_centers.assign(n, Vec3{});

  ParallelFor(static_cast<int>(n), exec, [&](int v) {
    const PerspectiveCamera camera(request.specs[v]);
    GaussianStream noise(SplitMix64(options.seed ^ SplitMix64(static_cast<std::uint64_t>(v))));
    ImageD points(s, s, 3);
    for (int y = 0; y < s; ++y) {
      const double ny = 1.0 - (y + 0.5) / s * 2.0;
      for (int x = 0; x < s; ++x) {
        const Vec3 d = camera.PixelToDir(x, y);
        double dist = options.scene.Intersect(d).distance;
        if (options.noise > 0.0) {
          const double nx = (x + 0.5) / s * 2.0 - 1.0;
          const double factor =
              1.0 + options.noise * NoiseProfile(nx, ny) * noise.Next();
          dist *= std::max(factor, 1e-3);
        }
        const Vec3 p = d * dist;
        points.at(x, y, 0) = p.x;
        points.at(x, y, 1) = p.y;
        points.at(x, y, 2) = p.z;
      }
    }
    const Mask* mask = request.masks.empty() ? nullptr : &request.masks[v];
    out.observations[v] = PointMapObservation::FromPoints(v, std::move(points), mask);

    if (options.attention == AttentionMode::kSelfPeaked) {
      AttentionTensor attn(tokens);
      for (int k = 0; k < tokens; ++k) attn.at(k, k) = 1.0;
      out.attention[v] = std::move(attn);
      return;
    }
    std::vector<double> logits(static_cast<size_t>(tokens) * tokens, 0.0);
    if (options.attention == AttentionMode::kDistanceDecayed) {
      for (int k = 0; k < tokens; ++k) {
        const int kx = k % grid.cols, ky = k / grid.cols;
        const double sigma =
            options.attention_sigma *
            NoiseProfile((kx + 0.5) / grid.cols * 2.0 - 1.0,
                         1.0 - (ky + 0.5) / grid.rows * 2.0);
        const double inv = 1.0 / (2.0 * sigma * sigma);
        for (int p = 0; p < tokens; ++p) {
          const double dx = p % grid.cols - kx, dy = p / grid.cols - ky;
          logits[static_cast<size_t>(k) * tokens + p] = -(dx * dx + dy * dy) * inv;
        }
      }
    }
    std::span<const double> conf;
    if (!request.patch_confidence.empty()) conf = request.patch_confidence[v].data();
    out.attention[v] = BiasedSoftmax(logits, tokens, conf);
  });
  return out;
}

void ExportBundle(const fs::path& dir, const ReconstructorResponse& response,
                  const BundleMetadata& metadata) {
  response.Validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create bundle directory " + dir.string());

  json views = json::array();
  for (size_t i = 0; i < response.specs.size(); ++i) {
    json v = ViewSpecToJson(response.specs[i]);
    v["index"] = i;
    v["parent"] = nullptr;
    if (!response.parents.empty() && response.parents[i]) v["parent"] = *response.parents[i];
    if (!response.camera_centers.empty() && response.camera_centers[i]) {
      const Vec3& c = *response.camera_centers[i];
      v["camera_center"] = {c.x, c.y, c.z};
    }
    v["has_depth"] = true;
    views.push_back(std::move(v));

    const int index = static_cast<int>(i);
    WriteF32R(ViewFile(dir, index, "points"), response.observations[i].points);
    WriteF32R(ViewFile(dir, index, "attn"), AttentionToImage(response.attention[i]));
    WriteF32R(ViewFile(dir, index, "depth"), response.observations[i].distance);
  }
  const json manifest = {
      {"format", "panofuse-bundle"},
      {"version", kBundleVersion},
      {"view_count", response.specs.size()},
      {"resolution", response.specs.front().resolution},
      {"patch_size", response.patch_size},
      {"patch_grid", {response.grid.rows, response.grid.cols}},
      {"source", metadata.source},
      {"head_reduction", metadata.head_reduction},
      {"attention_layer", metadata.attention_layer},
      {"frame_convention", metadata.frame_convention},
      {"recenter", metadata.recenter},
      {"noise", {{"sigma", metadata.noise}, {"seed", metadata.seed}}},
      {"scene", metadata.scene},
      {"attention_mode", metadata.attention_mode},
      {"confidence_bias", metadata.confidence_bias},
      {"views", views},
  };
  WriteJsonFile(dir / "manifest.json", manifest);
}

ImportedBundle ImportBundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw IoError("missing bundle file " + manifest_path.string());
  }
  const json manifest = ReadJsonFile(manifest_path);
  ImportedBundle bundle;
  auto& r = bundle.response;
  auto& meta = bundle.metadata;
  try {
    if (manifest.at("format").get<std::string>() != "panofuse-bundle") {
      throw InvalidInput("not a panofuse bundle: " + dir.string());
    }
    if (manifest.at("version").get<int>() != kBundleVersion) {
      throw InvalidInput("unsupported bundle version in " + dir.string());
    }
    const int count = manifest.at("view_count").get<int>();
    const int s = manifest.at("resolution").get<int>();
    r.patch_size = manifest.at("patch_size").get<int>();
    const auto grid = manifest.at("patch_grid").get<std::vector<int>>();
    if (grid.size() != 2) throw InvalidInput("patch_grid must be [rows, cols]");
    r.grid = {grid[0], grid[1]};
    if (r.grid.rows <= 0 || r.grid.cols <= 0) {
      throw InvalidInput("patch_grid must be positive");
    }
    meta.source = manifest.value("source", "unknown");
    meta.head_reduction = manifest.value("head_reduction", "unspecified");
    meta.attention_layer = manifest.value("attention_layer", "unspecified");
    meta.frame_convention = manifest.value("frame_convention", "unspecified");
    meta.recenter = manifest.value("recenter", false);
    if (manifest.contains("noise")) {
      meta.noise = manifest["noise"].value("sigma", 0.0);
      meta.seed = manifest["noise"].value("seed", std::uint64_t{0});
    }
    meta.scene = manifest.value("scene", "");
    meta.attention_mode = manifest.value("attention_mode", "");
    meta.confidence_bias = manifest.value("confidence_bias", false);

    const auto& views = manifest.at("views");
    if (static_cast<int>(views.size()) != count) {
      throw InvalidInput("manifest lists " + std::to_string(views.size()) +
                         " views but view_count is " + std::to_string(count));
    }
    for (int i = 0; i < count; ++i) {
      const auto& v = views[i];
      if (v.at("index").get<int>() != i) {
        throw InvalidInput("manifest views must be listed in index order");
      }
      ViewSpec spec = ViewSpecFromJson(v);
      if (spec.resolution != s) {
        throw InvalidInput("view " + std::to_string(i) + " resolution differs from the bundle's");
      }
      r.specs.push_back(spec);
      r.parents.push_back(v.contains("parent") && !v["parent"].is_null()
                              ? std::optional<int>(v["parent"].get<int>())
                              : std::nullopt);
      if (v.contains("camera_center")) {
        const auto c = v["camera_center"].get<std::vector<double>>();
        if (c.size() != 3) throw InvalidInput("camera_center needs 3 values");
        r.camera_centers.push_back(Vec3{c[0], c[1], c[2]});
      } else {
        r.camera_centers.push_back(std::nullopt);
      }
    }
  } catch (const json::exception& e) {
    throw InvalidInput("malformed bundle manifest " + manifest_path.string() +
                       ": " + e.what());
  }

  Vec3 origin;
  if (meta.recenter) {
    int n = 0;
    for (const auto& c : r.camera_centers) {
      if (!c) continue;
      origin = origin + *c;
      ++n;
    }
    if (n > 0) origin = origin * (1.0 / n);
  }
  const int s = r.specs.front().resolution;
  for (size_t i = 0; i < r.specs.size(); ++i) {
    const int index = static_cast<int>(i);
    const std::string points_path = ViewFile(dir, index, "points");
    if (!fs::exists(points_path)) throw IoError("missing bundle file " + points_path);
    const ImageF points = ReadF32R(points_path);
    if (points.width() != s || points.height() != s || points.channels() != 3) {
      throw InvalidInput(points_path + ": point map must be " + std::to_string(s) +
                         "x" + std::to_string(s) + "x3");
    }
    r.observations.push_back(
        PointMapObservation::FromPoints(index, ToDouble(points), nullptr, origin));
    r.attention.push_back(
        LoadAttention(ViewFile(dir, index, "attn"), r.grid.tokens(),
                      r.attention_renormalized));
    const std::string depth_path = ViewFile(dir, index, "depth");
    if (fs::exists(depth_path)) {
      const ImageF depth = ReadF32R(depth_path);
      if (depth.width() != s || depth.height() != s || depth.channels() != 1) {
        throw InvalidInput(depth_path + ": depth map has the wrong shape");
      }
    }
  }
  r.Validate();
  return bundle;
}

BundleReconstructor::BundleReconstructor(fs::path dir) : dir_(std::move(dir)) {}

ReconstructorResponse BundleReconstructor::Reconstruct(
    const ReconstructorRequest& request, const Exec&) {
  ImportedBundle bundle = ImportBundle(dir_);
  if (!request.specs.empty()) {
    if (request.specs.size() != bundle.response.specs.size()) {
      throw InvalidInput("bundle holds " + std::to_string(bundle.response.specs.size()) +
                         " views but the request has " +
                         std::to_string(request.specs.size()));
    }
    for (size_t i = 0; i < request.specs.size(); ++i) {
      const ViewSpec& a = request.specs[i];
      const ViewSpec& b = bundle.response.specs[i];
      if (AngleBetween(PerspectiveCamera(a).CenterDir(),
                       PerspectiveCamera(b).CenterDir()) > 1e-9 ||
          std::abs(a.fov - b.fov) > 1e-12 || a.resolution != b.resolution) {
        throw InvalidInput("bundle view " + std::to_string(i) +
                           " does not match the requested view");
      }
    }
  }
  return std::move(bundle.response);
}

std::string ToString(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::kUniform:
      return "uniform";
    case AttentionMode::kSelfPeaked:
      return "self";
    case AttentionMode::kDistanceDecayed:
      return "decay";
  }
  return "decay";
}

AttentionMode ParseAttentionMode(const std::string& text) {
  if (text == "uniform") return AttentionMode::kUniform;
  if (text == "self") return AttentionMode::kSelfPeaked;
  if (text == "decay") return AttentionMode::kDistanceDecayed;
  throw ConfigError("unknown attention mode '" + text +
                    "' (expected uniform, self or decay)");
}

}  // namespace panofuse
