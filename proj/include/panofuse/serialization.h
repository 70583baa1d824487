#pragma once

// JSON documents exchanged with the CLI and bundles.
//
// View set ("panofuse.viewset", version 1):
//   {
//     "schema": "panofuse.viewset", "version": 1,
//     "views": [ {"index": 0, "yaw": <rad>, "pitch": <rad>, "fov": <rad>,
//                 "resolution": <px>, "parent": null | <index>}, ... ],
//     "base_scores": [ {"view": 0, "score": <double>}, ... ],   // optional
//     "selected": [ <parent index>, ... ]                        // optional
//   }
// Angles are radians; doubles are written with round-trip precision.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "panofuse/geometry.h"
#include "panofuse/planner.h"

namespace panofuse {

inline constexpr const char* kViewSetSchema = "panofuse.viewset";
inline constexpr int kViewSetVersion = 1;

nlohmann::json ViewSpecToJson(const ViewSpec& spec);
ViewSpec ViewSpecFromJson(const nlohmann::json& j);

nlohmann::json ViewPlanToJson(const ViewPlan& plan);
ViewPlan ViewPlanFromJson(const nlohmann::json& j);

nlohmann::json ReadJsonFile(const std::filesystem::path& path);
void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace panofuse
