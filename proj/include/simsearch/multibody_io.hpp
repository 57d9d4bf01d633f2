#pragma once

// JSON forms of multi-body inputs and results.
//
//   scenes:      {"scenes":[{"scene_id":0,"objects":[{"object_id":0,"class":"player",
//                  "embedding":[...],"frame_span":[s,e],"centroid":[x,y]}]}]}
//   query:       {"objects":[{"class":"player","embedding":[...]}],"weights":[...]}
//   constraints: [{"type":"class_match","index":0}, {"type":"same_scene"},
//                 {"type":"temporal_overlap"}, {"type":"next_to","i":0,"j":1,"max_dist":40},
//                 {"type":"angle_on_top","i":0,"j":1,"lo_deg":0,"hi_deg":30}]

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "simsearch/multibody.hpp"

namespace simsearch {

// Throw InvalidArgument on malformed input.
std::vector<SceneObject> scenes_from_json(const nlohmann::json& j);
nlohmann::json scenes_to_json(std::span<const SceneObject> objects);
MultiQuery multi_query_from_json(const nlohmann::json& j);
nlohmann::json multi_query_to_json(const MultiQuery& q);
ConstraintSet constraints_from_json(const nlohmann::json& j);
nlohmann::json constraints_to_json(const ConstraintSet& c);
nlohmann::json alignment_to_json(const std::optional<Alignment>& a);

// File helpers; I/O and parse failures raise FormatError.
std::vector<SceneObject> read_scenes(const std::filesystem::path& path);
void write_scenes(std::span<const SceneObject> objects, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace simsearch
