#include "simsearch/multibody_io.hpp"

#include <fstream>
#include <cmath>
#include <map>

namespace simsearch {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key))
    throw InvalidArgument(std::string(what) + " is missing \"" + key + "\"");
  return j.at(key);
}

template <typename T>
T get_as(const json& j, const char* key, const char* what) {
  try {
    return require(j, key, what).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string(what) + " field \"" + key + "\": " + e.what());
  }
}

Embedding embedding_from(const json& j, const char* what) {
  auto e = get_as<Embedding>(j, "embedding", what);
  if (e.empty()) throw InvalidArgument(std::string(what) + " has an empty embedding");
  for (float v : e)
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " has a non-finite embedding value");
  return e;
}

}  // namespace

std::vector<SceneObject> scenes_from_json(const json& j) {
  const auto& scenes = require(j, "scenes", "scenes document");
  if (!scenes.is_array()) throw InvalidArgument("\"scenes\" must be an array");
  std::vector<SceneObject> out;
  for (const auto& s : scenes) {
    const auto scene_id = get_as<std::uint64_t>(s, "scene_id", "scene");
    const auto& objects = require(s, "objects", "scene");
    if (!objects.is_array()) throw InvalidArgument("scene \"objects\" must be an array");
    for (const auto& o : objects) {
      SceneObject obj;
      obj.scene_id = scene_id;
      obj.object_id = get_as<std::uint64_t>(o, "object_id", "object");
      obj.class_label = get_as<std::string>(o, "class", "object");
      obj.embedding = embedding_from(o, "object");
      if (o.contains("frame_span") && !o.at("frame_span").is_null()) {
        const auto span = get_as<std::vector<std::int64_t>>(o, "frame_span", "object");
        if (span.size() != 2) throw InvalidArgument("frame_span must be [start, end]");
        obj.frame_span = FrameSpan{span[0], span[1]};
      }
      if (o.contains("centroid") && !o.at("centroid").is_null()) {
        const auto c = get_as<std::vector<double>>(o, "centroid", "object");
        if (c.size() != 2) throw InvalidArgument("centroid must be [x, y]");
        obj.centroid = Point2{c[0], c[1]};
      }
      out.push_back(std::move(obj));
    }
  }
  return out;
}

json scenes_to_json(std::span<const SceneObject> objects) {
  std::map<std::uint64_t, json> by_scene;
  for (const auto& o : objects) {
    json obj{{"object_id", o.object_id}, {"class", o.class_label}, {"embedding", o.embedding}};
    if (o.frame_span) obj["frame_span"] = {o.frame_span->start, o.frame_span->end};
    if (o.centroid) obj["centroid"] = {o.centroid->x, o.centroid->y};
    auto& scene = by_scene[o.scene_id];
    if (scene.is_null()) scene = json{{"scene_id", o.scene_id}, {"objects", json::array()}};
    scene["objects"].push_back(std::move(obj));
  }
  json scenes = json::array();
  for (auto& [id, s] : by_scene) scenes.push_back(std::move(s));
  return json{{"scenes", std::move(scenes)}};
}

MultiQuery multi_query_from_json(const json& j) {
  MultiQuery q;
  const auto& objects = require(j, "objects", "multi-query");
  if (!objects.is_array()) throw InvalidArgument("multi-query \"objects\" must be an array");
  for (const auto& o : objects) {
    QueryObject qo;
    if (o.contains("class") && !o.at("class").is_null()) qo.class_label = get_as<std::string>(o, "class", "query object");
    qo.embedding = embedding_from(o, "query object");
    q.objects.push_back(std::move(qo));
  }
  if (j.contains("weights") && !j.at("weights").is_null()) q.weights = get_as<std::vector<double>>(j, "weights", "multi-query");
  q.validate();
  return q;
}

json multi_query_to_json(const MultiQuery& q) {
  json objects = json::array();
  for (const auto& o : q.objects) objects.push_back({{"class", o.class_label}, {"embedding", o.embedding}});
  json out{{"objects", std::move(objects)}};
  if (!q.weights.empty()) out["weights"] = q.weights;
  return out;
}

ConstraintSet constraints_from_json(const json& j) {
  if (j.is_null()) return {};
  if (!j.is_array()) throw InvalidArgument("constraints must be an array");
  ConstraintSet out;
  for (const auto& c : j) {
    const auto type = get_as<std::string>(c, "type", "constraint");
    if (type == "class_match") {
      out.push_back(ClassMatch{get_as<std::size_t>(c, "index", "class_match")});
    } else if (type == "same_scene") {
      out.push_back(SameScene{});
    } else if (type == "temporal_overlap") {
      out.push_back(TemporalOverlap{});
    } else if (type == "next_to") {
      out.push_back(NextTo{get_as<std::size_t>(c, "i", "next_to"), get_as<std::size_t>(c, "j", "next_to"),
                           get_as<double>(c, "max_dist", "next_to")});
    } else if (type == "angle_on_top") {
      out.push_back(AngleOnTop{get_as<std::size_t>(c, "i", "angle_on_top"),
                               get_as<std::size_t>(c, "j", "angle_on_top"),
                               get_as<double>(c, "lo_deg", "angle_on_top"),
                               get_as<double>(c, "hi_deg", "angle_on_top")});
    } else {
      throw InvalidArgument("unknown constraint type '" + type + "'");
    }
  }
  return out;
}

json constraints_to_json(const ConstraintSet& constraints) {
  json out = json::array();
  for (const auto& c : constraints) {
    out.push_back(std::visit(
        [](const auto& k) -> json {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, ClassMatch>) return {{"type", "class_match"}, {"index", k.index}};
          else if constexpr (std::is_same_v<K, SameScene>) return {{"type", "same_scene"}};
          else if constexpr (std::is_same_v<K, TemporalOverlap>) return {{"type", "temporal_overlap"}};
          else if constexpr (std::is_same_v<K, NextTo>)
            return {{"type", "next_to"}, {"i", k.i}, {"j", k.j}, {"max_dist", k.max_dist}};
          else
            return {{"type", "angle_on_top"}, {"i", k.i}, {"j", k.j}, {"lo_deg", k.lo_deg}, {"hi_deg", k.hi_deg}};
        },
        c));
  }
  return out;
}

json alignment_to_json(const std::optional<Alignment>& a) {
  if (!a) return nullptr;
  json mapping = json::array();
  for (const auto& key : a->mapping) mapping.push_back({{"scene_id", key.scene_id}, {"object_id", key.object_id}});
  return {{"mapping", std::move(mapping)}, {"score", a->score}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(FormatErrorCode::kBadPayload, path.string() + ": " + e.what());
  }
}

std::vector<SceneObject> read_scenes(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    return scenes_from_json(j);
  } catch (const InvalidArgument& e) {
    throw FormatError(FormatErrorCode::kBadPayload, path.string() + ": " + e.what());
  }
}

void write_scenes(std::span<const SceneObject> objects, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatErrorCode::kIo, "cannot write " + path.string());
  out << scenes_to_json(objects).dump() << '\n';
}

}  // namespace simsearch
