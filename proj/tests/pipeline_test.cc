#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "oracles.h"
#include "panofuse/error.h"
#include "panofuse/pipeline.h"
#include "panofuse/raster_io.h"

namespace panofuse {
namespace {

namespace fs = std::filesystem;

ConfigMap Small(const fs::path& out) {
  ConfigMap c;
  c.Set("erp.width", "128");
  c.Set("erp.height", "64");
  c.Set("planner.resolution", "56");
  c.Set("out", out.string());
  return c;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind KindOf(const std::function<void()>& fn, std::string* what = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no exception";
  return ErrorKind::kInternal;
}

TEST(Pipeline, UnitSphereEndToEnd) {
  ConfigMap c = Small(oracle::TempDir("pipe_sphere"));
  c.Set("oracle.scene", "sphere:1");
  const PipelineResult r = RunPipeline(c, Exec{2});
  ASSERT_TRUE(r.metrics.has_value());
  EXPECT_EQ(r.fused.valid_count(), r.fused.depth.pixel_count());
  for (double d : r.fused.depth.data()) EXPECT_NEAR(d, 1.0, 1e-3);
  EXPECT_LT(r.metrics->abs_rel, 1e-4);
  EXPECT_EQ(r.metrics->delta1, 1.0);
}

TEST(Pipeline, ViewCountFollowsTopK) {
  ConfigMap c = Small(oracle::TempDir("pipe_k0"));
  c.Set("planner.top_k", "0");
  EXPECT_EQ(RunPipeline(c, Exec{1}).fused_views.size(), 8u);
  ConfigMap d = Small(oracle::TempDir("pipe_k2"));
  const PipelineResult r = RunPipeline(d, Exec{1});
  EXPECT_EQ(r.fused_views.size(), 12u);
  EXPECT_EQ(r.plan.selected.size(), 2u);
  ASSERT_TRUE(r.metrics.has_value());
  EXPECT_LT(r.metrics->abs_rel, 0.01);
}

TEST(Pipeline, CacheSkipsUnchangedStages) {
  const fs::path dir = oracle::TempDir("pipe_cache");
  ConfigMap c = Small(dir);
  const PipelineResult first = RunPipeline(c, Exec{1});
  const std::vector<std::string> all = {"plan", "views", "reconstruct", "fuse", "eval"};
  EXPECT_EQ(first.executed, all);
  EXPECT_TRUE(first.skipped.empty());

  const std::string depth = Slurp(dir / "depth.f32r");
  const PipelineResult again = RunPipeline(c, Exec{1});
  EXPECT_TRUE(again.executed.empty());
  EXPECT_EQ(again.skipped, all);
  EXPECT_EQ(again.stage_hashes, first.stage_hashes);
  EXPECT_EQ(Slurp(dir / "depth.f32r"), depth);
  EXPECT_EQ(again.metrics->abs_rel, first.metrics->abs_rel);

  // A fusion key only invalidates fusion and evaluation.
  c.Set("fusion.symmetry", "false");
  const PipelineResult changed = RunPipeline(c, Exec{1});
  EXPECT_EQ(changed.executed, (std::vector<std::string>{"fuse", "eval"}));
  EXPECT_EQ(changed.skipped, (std::vector<std::string>{"plan", "views", "reconstruct"}));
  EXPECT_NE(changed.stage_hashes.at("fuse"), first.stage_hashes.at("fuse"));

  // Worker count is not part of any hash.
  const PipelineResult parallel = RunPipeline(c, Exec{3});
  EXPECT_TRUE(parallel.executed.empty());

  // A confidence key reruns everything from the views stage on.
  c.Set("confidence.band_width", "0.1");
  const PipelineResult conf = RunPipeline(c, Exec{1});
  EXPECT_EQ(conf.executed, (std::vector<std::string>{"views", "reconstruct", "fuse", "eval"}));

  // A missing output forces its stage to run again; its hash is unchanged, so
  // downstream stages stay cached.
  fs::remove(dir / "depth.pfm");
  const PipelineResult repaired = RunPipeline(c, Exec{1});
  EXPECT_EQ(repaired.executed, (std::vector<std::string>{"fuse"}));
  EXPECT_TRUE(fs::exists(dir / "depth.pfm"));
}

TEST(Pipeline, FreshRunsAreByteIdentical) {
  const fs::path a = oracle::TempDir("pipe_bytes_a");
  const fs::path b = oracle::TempDir("pipe_bytes_b");
  RunPipeline(Small(a), Exec{1});
  RunPipeline(Small(b), Exec{2});
  for (const char* f : {"depth.f32r", "depth.pfm", "depth.png", "weight.f32r", "count.f32r",
                        "views.json", "metrics.json", "bundle/view_005.points.f32r",
                        "bundle/view_011.attn.f32r", "weights/view_003.f32r",
                        "confidence/view_002.patch.f32r", "views/view_007.png"}) {
    EXPECT_TRUE(Slurp(a / f) == Slurp(b / f)) << f;
  }
}

TEST(Pipeline, ManifestEchoesResolvedConfig) {
  const fs::path dir = oracle::TempDir("pipe_manifest");
  ConfigMap c = Small(dir);
  c.Set("fusion.sigma_fraction", "0.2");
  const PipelineResult r = RunPipeline(c, Exec{1});
  const nlohmann::json m = nlohmann::json::parse(Slurp(dir / "manifest.json"));
  EXPECT_EQ(m.at("config").size(), ConfigMap::Keys().size());
  EXPECT_EQ(m.at("config").at("fusion.sigma_fraction"), "0.2");
  EXPECT_EQ(m.at("config").at("planner.top_k"), "2");
  EXPECT_EQ(m.at("view_count"), 12);
  EXPECT_EQ(m.at("erp").at("width"), 128);
  for (const auto& [stage, hash] : r.stage_hashes) EXPECT_EQ(m.at("stages").at(stage), hash);
  const nlohmann::json metrics = nlohmann::json::parse(Slurp(dir / "metrics.json"));
  EXPECT_EQ(metrics.at("abs_rel").get<double>(), r.metrics->abs_rel);
}

TEST(Config, TextParsing) {
  ConfigMap c;
  c.MergeText("# comment\n  planner.top_k = 1  # trailing\n\nfusion.normalization=global\n");
  EXPECT_EQ(c.Get("planner.top_k"), "1");
  EXPECT_EQ(c.Get("fusion.normalization"), "global");
  EXPECT_FALSE(c.IsDefault("planner.top_k"));
  EXPECT_TRUE(c.IsDefault("planner.fov_deg"));
  const PipelineConfig p = PipelineConfig::FromMap(c);
  EXPECT_EQ(p.planner.top_k, 1);
  EXPECT_EQ(p.fusion.scope, NormalizationScope::kGlobal);

  std::string what;
  EXPECT_EQ(KindOf([&] { c.MergeText("planner.bogus = 1", "x.cfg"); }, &what), ErrorKind::kConfig);
  EXPECT_NE(what.find("x.cfg:1"), std::string::npos);
  EXPECT_NE(what.find("planner.bogus"), std::string::npos);
  EXPECT_EQ(KindOf([&] { c.MergeText("no equals sign"); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { c.MergeFile("/nonexistent/panofuse.cfg"); }), ErrorKind::kConfig);

  // Round trip through text.
  ConfigMap d;
  d.MergeText(c.ToText());
  EXPECT_EQ(d.values(), c.values());
}

TEST(Config, Validation) {
  const auto bad = [](const std::string& key, const std::string& value) {
    ConfigMap c;
    c.Set(key, value);
    return KindOf([&] { PipelineConfig::FromMap(c); });
  };
  EXPECT_EQ(bad("planner.top_k", "9"), ErrorKind::kConfig);
  EXPECT_EQ(bad("planner.base_views", "5"), ErrorKind::kConfig);
  EXPECT_EQ(bad("erp.width", "1000"), ErrorKind::kConfig);
  EXPECT_EQ(bad("planner.fov_deg", "180"), ErrorKind::kConfig);
  EXPECT_EQ(bad("confidence.band_width", "1.5"), ErrorKind::kConfig);
  EXPECT_EQ(bad("fusion.normalization", "batch"), ErrorKind::kConfig);
  EXPECT_EQ(bad("fusion.weight_floor", "0"), ErrorKind::kConfig);
  EXPECT_EQ(bad("backend", "torch"), ErrorKind::kConfig);
  EXPECT_EQ(bad("backend", "bundle"), ErrorKind::kConfig);
  EXPECT_EQ(bad("oracle.scene", "cone:1"), ErrorKind::kConfig);
  EXPECT_EQ(bad("oracle.scene", "sphere:-1"), ErrorKind::kConfig);
  EXPECT_EQ(bad("oracle.attention", "cosine"), ErrorKind::kConfig);
  EXPECT_EQ(bad("oracle.blank_surface", "6"), ErrorKind::kConfig);
  EXPECT_EQ(bad("eval.alignment", "mean"), ErrorKind::kConfig);
  EXPECT_EQ(bad("seed", "-3"), ErrorKind::kConfig);
  EXPECT_EQ(bad("seed", "abc"), ErrorKind::kConfig);
  EXPECT_EQ(bad("confidence.gradient", "maybe"), ErrorKind::kConfig);
  EXPECT_EQ(bad("planner.offsets_deg", "1,2,3"), ErrorKind::kConfig);
  ConfigMap ok;
  ok.Set("erp.width", "1000");
  ok.Set("erp.require_2to1", "false");
  EXPECT_NO_THROW(PipelineConfig::FromMap(ok));
  ok.Set("planner.tau", "0.25");
  EXPECT_EQ(PipelineConfig::FromMap(ok).planner.tau.mode, TauMode::kFixed);
}

TEST(Config, SceneParsing) {
  EXPECT_EQ(ParseScene("sphere:2").radius, 2.0);
  const SyntheticScene room = ParseScene("room:2,2.5,3,0.9,1.4,1.3");
  EXPECT_EQ(room.kind, SyntheticScene::Kind::kBox);
  EXPECT_DOUBLE_EQ(room.box[1], 1.1);
  EXPECT_DOUBLE_EQ(room.box[3], 1.1);
  EXPECT_DOUBLE_EQ(room.box[5], 1.7);
  EXPECT_EQ(ParseScene("corner:1,2,10").corner_far, 10.0);
  EXPECT_EQ(ParseScene("box:1,1,1,1,1,1").box[4], 1.0);
  EXPECT_THROW(ParseScene("box:1,1"), Error);
  EXPECT_THROW(ParseScene("room:2,2,2,3,1,1"), Error);
}

TEST(Ablation, RowsAreConsistent) {
  const fs::path dir = oracle::TempDir("pipe_ablation");
  ConfigMap base = Small(dir);
  base.Set("oracle.noise", "0.02");
  const std::vector<AblationRow> rows = RunAblation(base, Exec{1});
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_TRUE(fs::exists(dir / "ablation.tsv"));

  // The attention baseline equals a plain run with every toggle off.
  ConfigMap plain = Small(oracle::TempDir("pipe_ablation_plain"));
  plain.Set("oracle.noise", "0.02");
  for (const char* k : {"confidence.gradient", "confidence.edge_band", "confidence.validity",
                        "fusion.sharpness", "fusion.locality", "fusion.symmetry"}) {
    plain.Set(k, "false");
  }
  const PipelineResult r = RunPipeline(plain, Exec{1});
  EXPECT_EQ(rows[0].metrics.abs_rel, r.metrics->abs_rel);
  EXPECT_EQ(rows[4].metrics.abs_rel, rows[0].metrics.abs_rel);

  // Toggles reweight pixels; they never change which pixels are covered.
  for (size_t i = 0; i + 1 < rows.size(); ++i) {
    if (rows[i].group != "projection") {
      EXPECT_EQ(rows[i].fused_pixels, rows[0].fused_pixels) << rows[i].name;
    }
  }
  EXPECT_EQ(rows[9].name, "K=0");
  EXPECT_EQ(rows[10].name, "K=2");
  const std::string tsv = Slurp(dir / "ablation.tsv");
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 12);
}

TEST(Ablation, SelfPeakedSharpnessWeightsAreHalf) {
  const fs::path dir = oracle::TempDir("pipe_self_sharp");
  ConfigMap c = Small(dir);
  c.Set("oracle.attention", "self");
  c.Set("fusion.locality", "false");
  c.Set("fusion.symmetry", "false");
  RunPipeline(c, Exec{1});
  const ImageF w = ReadF32R(dir / "weights" / "view_000.f32r");
  for (float v : w.data()) EXPECT_EQ(v, 0.5f);
}

TEST(Pipeline, StageErrorsNameTheStage) {
  const fs::path src = oracle::TempDir("pipe_err_src");
  RunPipeline(Small(src), Exec{1});
  const fs::path bundle = oracle::TempDir("pipe_err_bundle");
  fs::copy(src / "bundle", bundle, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  fs::remove(bundle / "view_003.points.f32r");

  ConfigMap c = Small(oracle::TempDir("pipe_err_run"));
  c.Set("backend", "bundle");
  c.Set("backend.bundle", bundle.string());
  std::string what;
  EXPECT_EQ(KindOf([&] { RunPipeline(c, Exec{1}); }, &what), ErrorKind::kIo);
  EXPECT_NE(what.find("stage reconstruct"), std::string::npos) << what;
  EXPECT_NE(what.find("view_003.points.f32r"), std::string::npos) << what;

  // Ground truth of the wrong size fails in the eval stage.
  ConfigMap g = Small(oracle::TempDir("pipe_err_gt"));
  const fs::path gt = oracle::TempDir("pipe_err_gt_file") / "gt.pfm";
  WritePfm(gt, ImageF(64, 32, 1, 1.0f));
  g.Set("gt", gt.string());
  EXPECT_EQ(KindOf([&] { RunPipeline(g, Exec{1}); }, &what), ErrorKind::kInvalidInput);
  EXPECT_NE(what.find("stage eval"), std::string::npos) << what;

  ConfigMap m = Small(oracle::TempDir("pipe_err_input"));
  m.Set("input", "/nonexistent/pano.png");
  EXPECT_EQ(KindOf([&] { RunPipeline(m, Exec{1}); }), ErrorKind::kIo);
}

TEST(Pipeline, BundleBackendReproducesOracleRun) {
  const fs::path src = oracle::TempDir("pipe_bundle_src");
  const PipelineResult a = RunPipeline(Small(src), Exec{1});
  ConfigMap c = Small(oracle::TempDir("pipe_bundle_run"));
  c.Set("backend", "bundle");
  c.Set("backend.bundle", (src / "bundle").string());
  c.Set("gt", "");
  const fs::path gt = oracle::TempDir("pipe_bundle_gt") / "gt.pfm";
  WritePfm(gt, RenderErpDepth(ParseScene(c.Get("oracle.scene")), {128, 64}));
  c.Set("gt", gt.string());
  const PipelineResult b = RunPipeline(c, Exec{1});
  EXPECT_EQ(b.executed, (std::vector<std::string>{"reconstruct", "fuse", "eval"}));
  EXPECT_EQ(b.fused.depth.data().size(), a.fused.depth.data().size());
  for (size_t i = 0; i < a.fused.depth.pixel_count(); ++i) {
    ASSERT_EQ(a.fused.depth[i], b.fused.depth[i]);
  }
  EXPECT_NEAR(b.metrics->abs_rel, a.metrics->abs_rel, 1e-6);
}

}  // namespace
}  // namespace panofuse
