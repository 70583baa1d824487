#include "panofuse/serialization.h"

#include <fstream>

namespace panofuse {

namespace fs = std::filesystem;
using nlohmann::json;

json ViewSpecToJson(const ViewSpec& spec) {
  return {{"yaw", spec.yaw},
          {"pitch", spec.pitch},
          {"fov", spec.fov},
          {"resolution", spec.resolution}};
}

ViewSpec ViewSpecFromJson(const json& j) {
  try {
    ViewSpec spec;
    spec.yaw = j.at("yaw").get<double>();
    spec.pitch = j.at("pitch").get<double>();
    spec.fov = j.at("fov").get<double>();
    spec.resolution = j.at("resolution").get<int>();
    spec.Validate();
    return spec;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed view spec: ") + e.what());
  }
}

json ViewPlanToJson(const ViewPlan& plan) {
  json views = json::array();
  for (size_t i = 0; i < plan.views.size(); ++i) {
    json v = ViewSpecToJson(plan.views[i].spec);
    v["index"] = i;
    v["parent"] = plan.views[i].parent ? json(*plan.views[i].parent) : json(nullptr);
    views.push_back(std::move(v));
  }
  json scores = json::array();
  for (const auto& s : plan.base_scores) {
    scores.push_back({{"view", s.view}, {"score", s.score}});
  }
  return {{"schema", kViewSetSchema},
          {"version", kViewSetVersion},
          {"views", views},
          {"base_scores", scores},
          {"selected", plan.selected}};
}

ViewPlan ViewPlanFromJson(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != kViewSetSchema) {
      throw InvalidInput("not a view set document");
    }
    if (j.at("version").get<int>() != kViewSetVersion) {
      throw InvalidInput("unsupported view set version " +
                         std::to_string(j.at("version").get<int>()));
    }
    ViewPlan plan;
    const auto& views = j.at("views");
    for (size_t i = 0; i < views.size(); ++i) {
      const auto& v = views[i];
      if (v.at("index").get<size_t>() != i) {
        throw InvalidInput("view set indices must be 0..N-1 in order");
      }
      PlannedView pv{ViewSpecFromJson(v), std::nullopt};
      if (v.contains("parent") && !v["parent"].is_null()) {
        pv.parent = v["parent"].get<int>();
      }
      plan.views.push_back(pv);
    }
    if (j.contains("base_scores")) {
      for (const auto& s : j["base_scores"]) {
        plan.base_scores.push_back({s.at("view").get<int>(), s.at("score").get<double>()});
      }
    }
    if (j.contains("selected")) plan.selected = j["selected"].get<std::vector<int>>();
    return plan;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed view set: ") + e.what());
  }
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void WriteJsonFile(const fs::path& path, const json& j) {
  WriteTextFile(path, j.dump(2) + "\n");
}

}  // namespace panofuse
