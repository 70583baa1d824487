#include "panofuse/cli.h"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "panofuse/error.h"
#include "panofuse/pipeline.h"
#include "panofuse/raster_io.h"
#include "panofuse/serialization.h"

namespace panofuse::cli {

namespace fs = std::filesystem;

namespace {

std::string ViewFile(int i, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d%s", i, ext.c_str());
  return buf;
}

// Options shared by every subcommand: a config file plus one --<key> option
// per configuration key. Precedence: defaults < file < command line.
struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void Attach(CLI::App* app) {
    app->add_option("--config", file, "key = value configuration file");
    for (const auto& key : ConfigMap::Keys()) {
      options[key.name] = app->add_option("--" + key.name, values[key.name], key.help);
    }
  }

  ConfigMap Resolve() const {
    ConfigMap map;
    if (!file.empty()) map.MergeFile(file);
    for (const auto& [name, opt] : options) {
      if (opt->count() > 0) map.Set(name, values.at(name));
    }
    return map;
  }
};

struct Context {
  int jobs = 1;
  bool quiet = false;

  Exec exec() const { return Exec{jobs}; }
  LogFn log() const {
    if (quiet) return {};
    return [](const std::string& msg) { std::cerr << msg << "\n"; };
  }
};

void PrintPlan(const ViewPlan& plan) {
  std::printf("view\tyaw_deg\tpitch_deg\tparent\tscore\n");
  for (size_t i = 0; i < plan.views.size(); ++i) {
    const auto& v = plan.views[i];
    std::string score = "-";
    if (i < plan.base_scores.size()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", plan.base_scores[i].score);
      score = buf;
    }
    std::printf("%zu\t%.4f\t%.4f\t%s\t%s\n", i, RadToDeg(v.spec.yaw),
                RadToDeg(v.spec.pitch),
                v.parent ? std::to_string(*v.parent).c_str() : "-", score.c_str());
  }
}

void PrintMetrics(const DepthMetrics& m) {
  std::printf("%s\n%s\n", MetricsHeader().c_str(), MetricsRow(m).c_str());
}

}  // namespace

int Main(const std::vector<std::string>& args) {
  CLI::App app{"panorama depth from perspective multi-view reconstruction", "panofuse"};
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  ctx.jobs = HardwareJobs();
  app.add_option("-j,--jobs", ctx.jobs, "worker threads (1 runs the serial path)")
      ->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", ctx.quiet, "suppress progress messages");

  std::vector<std::unique_ptr<ConfigOptions>> option_sets;
  const auto sub = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    option_sets.push_back(std::make_unique<ConfigOptions>());
    option_sets.back()->Attach(s);
    return std::make_pair(s, option_sets.back().get());
  };

  std::string output, views_path, conf_dir, bundle_path, pred_path, mask_path;

  auto [plan_cmd, plan_cfg] = sub("plan", "score the base rig and write the view set");
  plan_cmd->add_option("-o,--output", output, "view set JSON")->default_val("views.json");

  auto [extract_cmd, extract_cfg] = sub("extract", "render the planned perspective views");
  extract_cmd->add_option("--views", views_path, "view set JSON")->required();
  extract_cmd->add_option("-o,--output", output, "output directory")->required();

  auto [conf_cmd, conf_cfg] = sub("confidence", "per-view confidence maps");
  conf_cmd->add_option("--views", views_path, "view set JSON")->required();
  conf_cmd->add_option("-o,--output", output, "output directory")->required();

  CLI::App* recon_cmd = app.add_subcommand("reconstruct", "produce a point-map bundle");
  recon_cmd->require_subcommand(1);
  option_sets.push_back(std::make_unique<ConfigOptions>());
  ConfigOptions* oracle_cfg = option_sets.back().get();
  CLI::App* oracle_cmd = recon_cmd->add_subcommand("oracle", "analytic synthetic reconstructor");
  oracle_cfg->Attach(oracle_cmd);
  oracle_cmd->add_option("--views", views_path, "view set JSON")->required();
  oracle_cmd->add_option("--confidence-dir", conf_dir,
                         "directory with view_NNN.patch.f32r attention bias maps");
  oracle_cmd->add_option("-o,--output", output, "bundle directory")->required();
  CLI::App* import_cmd = recon_cmd->add_subcommand("import", "validate an external bundle");
  import_cmd->add_option("--bundle", bundle_path, "bundle directory")->required();
  import_cmd->add_option("-o,--output", output, "re-export the normalized bundle here");

  auto [fuse_cmd, fuse_cfg] = sub("fuse", "correlation-weighted fusion into ERP depth");
  fuse_cmd->add_option("--bundle", bundle_path, "bundle directory")->required();
  fuse_cmd->add_option("-o,--output", output, "output directory")->required();

  auto [eval_cmd, eval_cfg] = sub("eval", "depth metrics against ground truth");
  eval_cmd->add_option("--pred", pred_path, "predicted depth (.pfm or .f32r)")->required();
  eval_cmd->add_option("--mask", mask_path, "PNG; pixels with gray > 0.5 are evaluated");
  eval_cmd->add_option("-o,--output", output, "also write the metrics TSV here");

  auto [run_cmd, run_cfg] = sub("run", "full pipeline with stage caching");
  auto [ablate_cmd, ablate_cfg] = sub("ablate", "toggle matrix over the pipeline");

  auto [render_cmd, render_cfg] = sub("render", "synthetic panorama and ground-truth depth");
  render_cmd->add_option("-o,--output", output, "output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "panofuse: error: " << e.what() << "\n";
    return ExitCodeFor(ErrorKind::kConfig);
  }

  try {
    const Exec exec = ctx.exec();
    if (plan_cmd->parsed()) {
      const PipelineConfig cfg = PipelineConfig::FromMap(plan_cfg->Resolve());
      const ViewPlan plan = PlanViews(LoadPanorama(cfg, exec), cfg.planner, exec);
      WriteJsonFile(output, ViewPlanToJson(plan));
      PrintPlan(plan);
    } else if (extract_cmd->parsed() || conf_cmd->parsed()) {
      const bool conf = conf_cmd->parsed();
      const PipelineConfig cfg =
          PipelineConfig::FromMap((conf ? conf_cfg : extract_cfg)->Resolve());
      const auto specs = ViewPlanFromJson(ReadJsonFile(views_path)).specs();
      const ImageD erp = LoadPanorama(cfg, exec);
      fs::create_directories(output);
      ParallelFor(static_cast<int>(specs.size()), exec, [&](int i) {
        try {
          const ExtractedView view = ExtractView(erp, specs[i]);
          if (!conf) {
            WritePng(fs::path(output) / ViewFile(i, ".png"), Quantize8(view.raster));
            return;
          }
          const ConfidenceMap m = ComputeConfidence(view.raster, view.mask, cfg.confidence);
          WriteF32R(fs::path(output) / ViewFile(i, ".pixel.f32r"), m.pixel);
          WriteF32R(fs::path(output) / ViewFile(i, ".patch.f32r"), m.patch);
          // Preview: gradient prior | edge band | final map, side by side.
          const int n = m.pixel.width();
          const ImageD prior = GradientPrior(view.raster, view.mask, cfg.confidence.tau);
          const Mask band = EdgeBand(n, cfg.confidence.band_width);
          ImageD strip(3 * n, n);
          for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
              strip.at(x, y) = prior.at(x, y);
              strip.at(n + x, y) = band.at(x, y);
              strip.at(2 * n + x, y) = m.pixel.at(x, y);
            }
          }
          WritePng(fs::path(output) / ViewFile(i, ".png"), LinearGray(strip, 0.0, 1.0));
        } catch (const Error& e) {
          throw Error(e.kind(), "view " + std::to_string(i) + ": " + e.what());
        }
      });
      std::printf("%zu views written to %s\n", specs.size(), output.c_str());
    } else if (oracle_cmd->parsed()) {
      const PipelineConfig cfg = PipelineConfig::FromMap(oracle_cfg->Resolve());
      const ViewPlan plan = ViewPlanFromJson(ReadJsonFile(views_path));
      ReconstructorRequest request;
      request.specs = plan.specs();
      request.patch_size = cfg.confidence.patch_size;
      if (!conf_dir.empty()) {
        for (size_t i = 0; i < request.specs.size(); ++i) {
          request.patch_confidence.push_back(
              ReadRaster(fs::path(conf_dir) / ViewFile(static_cast<int>(i), ".patch.f32r")));
        }
      }
      ReconstructorResponse response = OracleReconstruct(request, cfg.oracle, exec);
      for (const auto& v : plan.views) response.parents.push_back(v.parent);
      BundleMetadata meta;
      meta.noise = cfg.oracle.noise;
      meta.seed = cfg.oracle.seed;
      meta.scene = cfg.oracle.scene.Describe();
      meta.attention_mode = ToString(cfg.oracle.attention);
      meta.confidence_bias = !conf_dir.empty();
      ExportBundle(output, response, meta);
      std::printf("bundle with %zu views written to %s\n", request.specs.size(),
                  output.c_str());
    } else if (import_cmd->parsed()) {
      const ImportedBundle b = ImportBundle(bundle_path);
      std::printf("views\t%zu\nresolution\t%d\npatch_grid\t%dx%d\nsource\t%s\n"
                  "attention_renormalized\t%s\n",
                  b.response.specs.size(), b.response.specs.front().resolution,
                  b.response.grid.rows, b.response.grid.cols, b.metadata.source.c_str(),
                  b.response.attention_renormalized ? "yes" : "no");
      if (!output.empty()) ExportBundle(output, b.response, b.metadata);
    } else if (fuse_cmd->parsed()) {
      const PipelineConfig cfg = PipelineConfig::FromMap(fuse_cfg->Resolve());
      const ImportedBundle b = ImportBundle(bundle_path);
      const FusionOutput fo = FuseReconstruction(b.response, cfg.erp, cfg.fusion, exec);
      WriteFusedDepth(output, fo.fused);
      fs::create_directories(fs::path(output) / "weights");
      for (size_t i = 0; i < fo.weights.size(); ++i) {
        WriteF32R(fs::path(output) / "weights" / ViewFile(static_cast<int>(i), ".f32r"),
                  fo.weights[i].pixel);
      }
      std::printf("fused %zu of %zu ERP pixels into %s\n", fo.fused.valid_count(),
                  fo.fused.depth.pixel_count(), output.c_str());
    } else if (eval_cmd->parsed()) {
      const PipelineConfig cfg = PipelineConfig::FromMap(eval_cfg->Resolve());
      if (cfg.gt.empty()) throw ConfigError("eval needs --gt");
      std::optional<Mask> mask;
      if (!mask_path.empty()) {
        const ImageD gray = ToGray(ReadPng(mask_path));
        mask = Mask(gray.width(), gray.height());
        for (size_t i = 0; i < gray.pixel_count(); ++i) (*mask)[i] = gray[i] > 0.5;
      }
      const DepthMetrics m = Evaluate(ReadRaster(pred_path), ReadRaster(cfg.gt),
                                      mask ? &*mask : nullptr, cfg.depth_cap, cfg.alignment);
      PrintMetrics(m);
      if (!output.empty()) {
        WriteTextFile(output, MetricsHeader() + "\n" + MetricsRow(m) + "\n");
      }
    } else if (run_cmd->parsed()) {
      const PipelineResult r = RunPipeline(run_cfg->Resolve(), exec, ctx.log());
      std::printf("fused %zu of %zu ERP pixels from %zu views\n", r.fused.valid_count(),
                  r.fused.depth.pixel_count(), r.fused_views.size());
      if (r.metrics) PrintMetrics(*r.metrics);
    } else if (ablate_cmd->parsed()) {
      const auto rows = RunAblation(ablate_cfg->Resolve(), exec, ctx.log());
      std::printf("%s", AblationTsv(rows).c_str());
    } else if (render_cmd->parsed()) {
      const PipelineConfig cfg = PipelineConfig::FromMap(render_cfg->Resolve());
      fs::create_directories(output);
      const ImageD tex = RenderErpTexture(cfg.oracle.scene, cfg.erp,
                                          TextureOptions{cfg.blank_surface}, exec);
      WritePng(fs::path(output) / "erp.png", Quantize8(tex));
      WritePfm(fs::path(output) / "gt.pfm", RenderErpDepth(cfg.oracle.scene, cfg.erp, exec));
      std::printf("%s written to %s\n", cfg.oracle.scene.Describe().c_str(),
                  output.c_str());
    }
  } catch (const Error& e) {
    std::cerr << "panofuse: error: " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "panofuse: error: " << e.what() << "\n";
    return ExitCodeFor(ErrorKind::kIo);
  } catch (const std::exception& e) {
    std::cerr << "panofuse: error: " << e.what() << "\n";
    return ExitCodeFor(ErrorKind::kInternal);
  }
  return 0;
}

int Main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return Main(args);
}

}  // namespace panofuse::cli
