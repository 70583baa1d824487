// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
// Usage: acceptance [output_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.h"
#include "panofuse/attention.h"
#include "panofuse/backend.h"
#include "panofuse/confidence.h"
#include "panofuse/correlation.h"
#include "panofuse/fusion.h"
#include "panofuse/geometry.h"
#include "panofuse/pipeline.h"
#include "panofuse/planner.h"
#include "panofuse/raster_io.h"
#include "panofuse/scene.h"

namespace fs = std::filesystem;
using namespace panofuse;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

oracle::Vec ToArray(const Vec3& v) { return {v.x, v.y, v.z}; }

Outcome Geometry() {
  const auto t0 = std::chrono::steady_clock::now();
  const ErpDims dims{1024, 512};
  std::mt19937_64 rng(1);
  double worst_dir = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const oracle::Vec d = oracle::RandomDir(rng);
    const PixelCoord p = DirToErpPixel(dims, {d[0], d[1], d[2]});
    worst_dir = std::max(worst_dir, oracle::Angle(ToArray(ErpPixelToDir(dims, p.u, p.v)), d));
  }
  std::uniform_real_distribution<double> yaw(-kPi, kPi), pitch(-kPi / 2, kPi / 2),
      fov(0.3, 2.8), pix(-0.5, 517.5);
  double worst_px = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const PerspectiveCamera cam({yaw(rng), pitch(rng), fov(rng), 518});
    const double u = pix(rng), v = pix(rng);
    const auto back = cam.DirToPixel(cam.PixelToDir(u, v));
    if (!back) return {false, "inverse projection left the frustum"};
    worst_px = std::max({worst_px, std::abs(back->u - u), std::abs(back->v - v)});
  }
  const double s = Seconds(t0);
  return {worst_dir <= 1e-9 && worst_px <= 1e-6 && s < 2.0,
          "dir " + Fmt("%.2e rad", worst_dir) + ", pixel " + Fmt("%.2e px", worst_px) + ", " +
              Fmt("%.2f s", s)};
}

Outcome Coverage() {
  PlannerConfig def;
  PlannerConfig six;
  six.base_views = 6;
  six.fov = DegToRad(95.0);
  const double a = CoverageFraction(BaseRig(def), 1000000, 42);
  const double b = CoverageFraction(BaseRig(six), 1000000, 43);
  return {a == 1.0 && b == 1.0, "8x120: " + Fmt("%.7f", a) + ", 6x95: " + Fmt("%.7f", b)};
}

Outcome PlannerOracle() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = 0.0;
  bool sobel_exact = true;
  for (int trial = 0; trial < 100; ++trial) {
    ImageD view(32, 32);
    for (double& x : view.data()) x = u01(rng);
    Mask mask = FullMask(32, 32);
    if (trial % 2) {
      for (auto& m : mask.data()) m = u01(rng) > 0.2;
    }
    oracle::Grid gray{32, 32, std::vector<double>(view.data().begin(), view.data().end())};
    std::vector<uint8_t> m(mask.data().begin(), mask.data().end());
    const oracle::Uncertainty want = oracle::UncertaintyOf(gray, m);
    const UncertaintyMap got = ComputeUncertainty(view, mask, {});
    for (size_t i = 0; i < want.u.size(); ++i) {
      worst = std::max(worst, std::abs(got.u[i] - want.u[i]));
    }
    worst = std::max(worst, std::abs(ScoreView(got, mask) - oracle::MaskedMean(want.u, m)));

    // Sobel on a 1/256 lattice, where every partial sum is exact.
    ImageD lattice(32, 32);
    for (double& x : lattice.data()) x = static_cast<double>(rng() % 257) / 256.0;
    const ImageD s = SobelMagnitude(lattice);
    const oracle::Grid w =
        oracle::Sobel({32, 32, std::vector<double>(lattice.data().begin(), lattice.data().end())});
    for (size_t i = 0; i < w.v.size(); ++i) sobel_exact &= s[i] == w.v[i];
  }
  return {worst <= 1e-12 && sobel_exact,
          "max |diff| " + Fmt("%.2e", worst) + ", sobel " + (sobel_exact ? "exact" : "differs")};
}

Outcome SoftmaxAndConfidence() {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 3.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double row_dev = 0.0, plain = 0.0, scaled = 0.0;
  size_t band_checked = 0, band_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = 2 + static_cast<int>(rng() % 40);
    std::vector<double> logits(static_cast<size_t>(t) * t), conf(t), ones(t, 1.0), c2(t);
    for (double& x : logits) x = n(rng);
    for (double& x : conf) x = 1e-4 + u(rng);
    const double k = 0.01 + 100.0 * u(rng);
    for (int j = 0; j < t; ++j) c2[j] = k * conf[j];
    const AttentionTensor a = BiasedSoftmax(logits, t, conf);
    row_dev = std::max(row_dev, MaxRowSumDeviation(a));
    const AttentionTensor p1 = BiasedSoftmax(logits, t, ones);
    const AttentionTensor p0 = BiasedSoftmax(logits, t, {});
    const AttentionTensor as = BiasedSoftmax(logits, t, c2);
    for (size_t i = 0; i < a.values().size(); ++i) {
      plain = std::max(plain, std::abs(p1.values()[i] - p0.values()[i]));
      scaled = std::max(scaled, std::abs(as.values()[i] - a.values()[i]));
    }

    const int s = 8 + static_cast<int>(rng() % 40);
    ImageD view(s, s);
    for (double& x : view.data()) x = u(rng);
    Mask mask = FullMask(s, s);
    for (auto& m : mask.data()) m = u(rng) > 0.15;
    ConfidenceConfig cc;
    cc.band_width = 0.02 + 0.2 * u(rng);
    const ConfidenceMap cm = ComputeConfidence(view, mask, cc);
    const Mask band = EdgeBand(s, cc.band_width);
    for (size_t i = 0; i < cm.pixel.pixel_count(); ++i) {
      if (band[i] && mask[i]) {
        ++band_checked;
        band_bad += cm.pixel[i] != 1.0;
      }
    }
  }
  return {row_dev <= 1e-6 && plain <= 1e-9 && scaled <= 1e-9 && band_checked > 0 &&
              band_bad == 0,
          "row dev " + Fmt("%.2e", row_dev) + ", conf=1 " + Fmt("%.2e", plain) + ", scale " +
              Fmt("%.2e", scaled) + ", band pixels " + std::to_string(band_checked) +
              " bad " + std::to_string(band_bad)};
}

Outcome CorrelationAnchors() {
  const TokenGrid grid{4, 4};
  const int t = grid.tokens();
  double worst = 0.0;
  const auto track = [&](double got, double want) {
    worst = std::max(worst, std::abs(got - want));
  };
  const AttentionTensor uniform(t, 1.0 / t);
  AttentionTensor self(t), onehot(t);
  for (int k = 0; k < t; ++k) {
    self.at(k, k) = 1.0;
    onehot.at(k, (k + 5) % t) = 1.0;
  }
  for (int k = 0; k < t; ++k) {
    track(Sharpness(uniform, k), 0.0);
    track(Sharpness(onehot, k), 1.0);
    track(Locality(self, k, grid, 1.3), 1.0);
    track(Symmetry(uniform, k), 1.0);
    // Row k sits on k+5, column k on k-5: disjoint supports.
    track(Symmetry(onehot, k), 0.0);
  }
  return {worst <= 1e-12, "max |diff| " + Fmt("%.2e", worst)};
}

template <typename Fn>
PointMapObservation Observation(int index, const ViewSpec& spec, Fn depth) {
  const int s = spec.resolution;
  ImageD points(s, s, 3);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const Vec3 p = ViewPixelToDir(spec, x, y) * depth(x, y);
      points.at(x, y, 0) = p.x;
      points.at(x, y, 1) = p.y;
      points.at(x, y, 2) = p.z;
    }
  }
  return PointMapObservation::FromPoints(index, std::move(points));
}

struct FusionCase {
  std::vector<ViewSpec> views;
  std::vector<PointMapObservation> obs;
  std::vector<ImageD> weights;
};

FusionCase MakeFusionCase(std::uint64_t seed, double depth_scale, double weight_scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FusionCase fc;
  const int n = 2 + static_cast<int>(rng() % 3);
  for (int i = 0; i < n; ++i) {
    fc.views.push_back({(u(rng) * 2 - 1) * 3.1, (u(rng) - 0.5) * 2.4,
                        DegToRad(60 + 60 * u(rng)), 10 + static_cast<int>(rng() % 7)});
  }
  for (int i = 0; i < n; ++i) {
    const int s = fc.views[i].resolution;
    ImageD depth(s, s), weight(s, s);
    for (double& d : depth.data()) d = (0.5 + 4.5 * u(rng)) * depth_scale;
    for (double& x : weight.data()) x = (1e-3 + u(rng)) * weight_scale;
    fc.obs.push_back(Observation(i, fc.views[i], [&](int x, int y) { return depth.at(x, y); }));
    fc.weights.push_back(std::move(weight));
  }
  return fc;
}

Outcome FusionLaws() {
  const ErpDims dims{24, 12};
  double worst = 0.0;
  size_t bound_violations = 0, order_mismatch = 0, pixels = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::uint64_t seed = 5000 + trial;
    const FusionCase base = MakeFusionCase(seed, 1.0, 1.0);
    const FusionCase fd_case = MakeFusionCase(seed, 2.5, 1.0);
    const FusionCase fw_case = MakeFusionCase(seed, 1.0, 7.0);
    const FusedErpDepth f = FuseToErp(base.obs, base.weights, base.views, dims);
    const FusedErpDepth fd = FuseToErp(fd_case.obs, fd_case.weights, fd_case.views, dims);
    const FusedErpDepth fw = FuseToErp(fw_case.obs, fw_case.weights, fw_case.views, dims);
    std::vector<PointMapObservation> robs(base.obs.rbegin(), base.obs.rend());
    std::vector<ImageD> rw(base.weights.rbegin(), base.weights.rend());
    const FusedErpDepth fr = FuseToErp(robs, rw, base.views, dims);
    std::vector<PerspectiveCamera> cams(base.views.begin(), base.views.end());
    for (int y = 0; y < dims.height; ++y) {
      for (int x = 0; x < dims.width; ++x) {
        const double d = f.depth.at(x, y), r = fr.depth.at(x, y);
        order_mismatch += !((std::isnan(d) && std::isnan(r)) || d == r);
        if (std::isnan(d)) continue;
        ++pixels;
        const Vec3 dir = ErpPixelToDir(dims, x, y);
        double lo = 1e300, hi = -1e300;
        for (size_t i = 0; i < base.obs.size(); ++i) {
          const auto s = SampleObservation(base.obs[i], base.weights[i], cams[i], dir);
          if (!s) continue;
          lo = std::min(lo, s->depth);
          hi = std::max(hi, s->depth);
        }
        bound_violations += d < lo - 1e-12 || d > hi + 1e-12;
        worst = std::max({worst, std::abs(fd.depth.at(x, y) - 2.5 * d) / d,
                          std::abs(fw.depth.at(x, y) - d) / d});
      }
    }
  }
  // Weights 1 and 3 on depths 2 and 4.
  const ViewSpec spec{0.0, 0.0, DegToRad(90), 8};
  std::vector<PointMapObservation> obs = {Observation(0, spec, [](int, int) { return 2.0; }),
                                          Observation(1, spec, [](int, int) { return 4.0; })};
  std::vector<ImageD> w = {ImageD(8, 8, 1, 1.0), ImageD(8, 8, 1, 3.0)};
  const ErpDims small{32, 16};
  const FusedErpDepth ex = FuseToErp(obs, w, std::vector<ViewSpec>{spec, spec}, small);
  const PixelCoord c = DirToErpPixel(small, {0, 0, 1});
  const double worked =
      ex.depth.at(static_cast<int>(std::lround(c.u)), static_cast<int>(std::lround(c.v)));
  const bool pass = pixels > 0 && bound_violations == 0 && order_mismatch == 0 &&
                    worst <= 1e-12 && std::abs(worked - 3.5) <= 1e-12;
  return {pass, std::to_string(pixels) + " pixels, bound violations " +
                    std::to_string(bound_violations) + ", order mismatches " +
                    std::to_string(order_mismatch) + ", scale err " + Fmt("%.2e", worst) +
                    ", worked example " + Fmt("%.15g", worked)};
}

struct EndToEnd {
  Outcome outcome;
  fs::path dir;
  PipelineResult result;
};

EndToEnd DefaultRun(const fs::path& root) {
  EndToEnd e;
  e.dir = root / "ac7";
  fs::remove_all(e.dir);
  ConfigMap c;
  c.Set("out", e.dir.string());
  const auto t0 = std::chrono::steady_clock::now();
  e.result = RunPipeline(c, Exec{1});
  const double s = Seconds(t0);
  const DepthMetrics& m = *e.result.metrics;
  const size_t invalid = e.result.fused.depth.pixel_count() - e.result.fused.valid_count();
  e.outcome = {m.abs_rel < 0.01 && m.delta1 > 0.999 && invalid == 0 && s < 30.0,
               "abs_rel " + Fmt("%.6f", m.abs_rel) + ", delta1 " + Fmt("%.6f", m.delta1) +
                   ", invalid " + std::to_string(invalid) + ", " + Fmt("%.2f s", s) +
                   " single-threaded"};
  return e;
}

Outcome NoiseTrend(const fs::path& root) {
  int wins = 0;
  std::string detail;
  for (int seed = 1; seed <= 10; ++seed) {
    const fs::path dir = root / "ac8";
    fs::remove_all(dir);
    ConfigMap c;
    c.Set("out", dir.string());
    c.Set("oracle.noise", "0.02");
    c.Set("oracle.attention", "decay");
    c.Set("seed", std::to_string(seed));
    const PipelineResult weighted = RunPipeline(c, Exec{HardwareJobs()});
    c.Set("fusion.sharpness", "false");
    c.Set("fusion.locality", "false");
    c.Set("fusion.symmetry", "false");
    // Same directory: reconstruction is served from the cache, so both
    // fusions read the same bundle.
    const PipelineResult mean = RunPipeline(c, Exec{HardwareJobs()});
    if (std::find(mean.executed.begin(), mean.executed.end(), "reconstruct") !=
        mean.executed.end()) {
      return {false, "unweighted run rebuilt the bundle"};
    }
    const double a = weighted.metrics->abs_rel, b = mean.metrics->abs_rel;
    wins += a <= b;
    if (seed <= 3) detail += Fmt("%.5f", a) + " vs " + Fmt("%.5f", b) + "; ";
  }
  return {wins == 10, std::to_string(wins) + "/10 seeds weighted <= mean (" + detail + "...)"};
}

Outcome BundleSubstitute(const EndToEnd& e, const fs::path& root) {
  if (!e.outcome.pass) return {false, "end-to-end run failed"};
  const fs::path src = e.dir / "bundle";
  const fs::path again = root / "ac9_reexport";
  fs::remove_all(again);
  ExportBundle(again, ImportBundle(src).response, ImportBundle(src).metadata);
  size_t compared = 0, differ = 0;
  for (const auto& entry : fs::directory_iterator(src)) {
    const std::string name = entry.path().filename().string();
    if (name.find(".depth.") != std::string::npos) continue;  // derived from points
    ++compared;
    differ += Slurp(entry.path()) != Slurp(again / name);
  }
  const fs::path gt = root / "ac9_gt.pfm";
  WritePfm(gt, RenderErpDepth(ParseScene(ConfigMap().Get("oracle.scene")), {1024, 512}));
  ConfigMap c;
  c.Set("out", (root / "ac9").string());
  c.Set("backend", "bundle");
  c.Set("backend.bundle", src.string());
  c.Set("gt", gt.string());
  fs::remove_all(root / "ac9");
  const PipelineResult r = RunPipeline(c, Exec{HardwareJobs()});
  const bool same = Slurp(root / "ac9" / "depth.f32r") == Slurp(e.dir / "depth.f32r");
  return {differ == 0 && compared > 0 && same,
          std::to_string(compared) + " bundle files re-exported, " + std::to_string(differ) +
              " differ; imported fused depth " + (same ? "bit-identical" : "differs") +
              ", abs_rel " + Fmt("%.6f", r.metrics->abs_rel)};
}

Outcome Determinism(const EndToEnd& e, const fs::path& root) {
  const std::string ref = Slurp(e.dir / "depth.f32r");
  std::string detail;
  bool pass = !ref.empty();
  for (int jobs : {2, 4}) {
    const fs::path dir = root / ("ac10_j" + std::to_string(jobs));
    fs::remove_all(dir);
    ConfigMap c;
    c.Set("out", dir.string());
    RunPipeline(c, Exec{jobs});
    const bool same = Slurp(dir / "depth.f32r") == ref;
    pass &= same;
    detail += "jobs " + std::to_string(jobs) + (same ? " identical; " : " differs; ");
  }
  return {pass, detail + "reference jobs 1"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::create_directories(root);
  int failures = 0;
  const auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failures += !o.pass;
    std::printf("%s  %2d %-34s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "geometry round trips", Geometry);
  report(2, "rig coverage", Coverage);
  report(3, "uncertainty and score oracles", PlannerOracle);
  report(4, "biased softmax and confidence", SoftmaxAndConfidence);
  report(5, "correlation metric anchors", CorrelationAnchors);
  report(6, "fusion laws", FusionLaws);
  EndToEnd e2e;
  report(7, "end-to-end synthetic room", [&] {
    e2e = DefaultRun(root);
    return e2e.outcome;
  });
  report(8, "noise robustness trend", [&] { return NoiseTrend(root); });
  report(9, "bundle round trip substitute", [&] { return BundleSubstitute(e2e, root); });
  report(10, "determinism across jobs", [&] { return Determinism(e2e, root); });
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
