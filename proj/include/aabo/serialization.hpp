#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "aabo/anchor_space.hpp"
#include "aabo/error.hpp"

namespace aabo {

using json = nlohmann::ordered_json;

inline constexpr const char* kSpaceSchema = "aabo-space/1";
inline constexpr const char* kConfigSchema = "aabo-config/1";

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw InvalidInput("write failed for " + path.string());
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(what + ": " + e.what());
  }
}

// ---- COCO-style annotations -------------------------------------------------

struct CocoAnnotations {
  std::vector<BoxRecord> boxes;
  std::size_t skipped_degenerate = 0;  // zero-area boxes are legal COCO but unusable here
  std::size_t image_count = 0;
};

// Reads "annotations[*].bbox" = [x, y, width, height]. Other fields are ignored.
inline CocoAnnotations parse_coco(const json& doc) {
  if (!doc.is_object() || !doc.contains("annotations") || !doc["annotations"].is_array()) {
    throw InvalidInput("COCO document has no \"annotations\" array");
  }
  CocoAnnotations out;
  if (doc.contains("images") && doc["images"].is_array()) out.image_count = doc["images"].size();
  const auto& anns = doc["annotations"];
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const auto& a = anns[i];
    const std::string where = "annotations[" + std::to_string(i) + "]";
    if (!a.is_object() || !a.contains("bbox")) throw InvalidInput(where + ": missing \"bbox\"");
    const auto& bb = a["bbox"];
    if (!bb.is_array() || bb.size() != 4) {
      throw InvalidInput(where + ": \"bbox\" must be [x, y, width, height]");
    }
    for (const auto& v : bb) {
      if (!v.is_number()) throw InvalidInput(where + ": \"bbox\" entries must be numbers");
    }
    BoxRecord box;
    box.width = bb[2].get<double>();
    box.height = bb[3].get<double>();
    if (a.contains("image_id") && a["image_id"].is_number_integer()) {
      box.image_id = a["image_id"].get<std::int64_t>();
    }
    if (!std::isfinite(box.width) || !std::isfinite(box.height) || box.width < 0.0 ||
        box.height < 0.0) {
      throw InvalidInput(where + ": negative or non-finite box size");
    }
    if (box.width == 0.0 || box.height == 0.0) {
      ++out.skipped_degenerate;
      continue;
    }
    out.boxes.push_back(box);
  }
  return out;
}

inline CocoAnnotations load_coco(const std::filesystem::path& path) {
  return parse_coco(parse_json_text(read_text_file(path), path.string()));
}

// ---- aabo-space/1 -----------------------------------------------------------

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw InvalidInput(where + ": missing \"" + key + "\"");
  }
  return obj[key];
}

inline double require_number(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) throw InvalidInput(where + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

inline int require_int(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number_integer()) throw InvalidInput(where + ": \"" + key + "\" must be an integer");
  return v.get<int>();
}

inline std::pair<double, double> require_pair(const json& obj, const char* key,
                                              const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw InvalidInput(where + ": \"" + key + "\" must be a two-element numeric array");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

inline void require_schema(const json& doc, const char* schema) {
  if (!doc.is_object() || !doc.contains("schema") || doc["schema"] != schema) {
    throw InvalidInput(std::string("expected a document with \"schema\": \"") + schema + "\"");
  }
}

}  // namespace detail

inline json to_json(const SearchSpace& space) {
  json levels = json::array();
  for (const auto& lv : space.levels) {
    levels.push_back({{"level", lv.level_index},
                      {"stride", lv.stride},
                      {"anchor_count", {lv.anchor_count.lo, lv.anchor_count.hi}},
                      {"scale_range", {lv.scale_range.lo, lv.scale_range.hi}},
                      {"ratio_range", {lv.ratio_range.lo, lv.ratio_range.hi}}});
  }
  return {{"schema", kSpaceSchema},
          {"limits", {{"max_width", space.limits.max_width}, {"max_height", space.limits.max_height}}},
          {"levels", std::move(levels)}};
}

// Parses and validates an aabo-space/1 document.
inline SearchSpace space_from_json(const json& doc) {
  detail::require_schema(doc, kSpaceSchema);
  SearchSpace space;
  const auto& lim = detail::require(doc, "limits", "space");
  space.limits.max_width = detail::require_number(lim, "max_width", "limits");
  space.limits.max_height = detail::require_number(lim, "max_height", "limits");
  const auto& levels = detail::require(doc, "levels", "space");
  if (!levels.is_array()) throw InvalidInput("space: \"levels\" must be an array");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const std::string where = "levels[" + std::to_string(i) + "]";
    const auto& l = levels[i];
    LevelSpace lv;
    lv.level_index = detail::require_int(l, "level", where);
    lv.stride = detail::require_int(l, "stride", where);
    const auto& cnt = detail::require(l, "anchor_count", where);
    if (!cnt.is_array() || cnt.size() != 2 || !cnt[0].is_number_integer() ||
        !cnt[1].is_number_integer()) {
      throw InvalidInput(where + ": \"anchor_count\" must be [min, max] integers");
    }
    lv.anchor_count = {cnt[0].get<int>(), cnt[1].get<int>()};
    const auto [slo, shi] = detail::require_pair(l, "scale_range", where);
    const auto [rlo, rhi] = detail::require_pair(l, "ratio_range", where);
    lv.scale_range = {slo, shi};
    lv.ratio_range = {rlo, rhi};
    space.levels.push_back(lv);
  }
  validate(space);
  return space;
}

// ---- aabo-config/1 ----------------------------------------------------------

inline json to_json(const AnchorConfiguration& config) {
  json levels = json::array();
  for (std::size_t i = 0; i < config.levels.size(); ++i) {
    json anchors = json::array();
    for (const auto& a : config.levels[i]) anchors.push_back({{"scale", a.scale}, {"ratio", a.ratio}});
    levels.push_back({{"level", i}, {"anchors", std::move(anchors)}});
  }
  return {{"schema", kConfigSchema}, {"levels", std::move(levels)}};
}

// Parses an aabo-config/1 document; anchor order is preserved.
inline AnchorConfiguration config_from_json(const json& doc) {
  detail::require_schema(doc, kConfigSchema);
  const auto& levels = detail::require(doc, "levels", "config");
  if (!levels.is_array()) throw InvalidInput("config: \"levels\" must be an array");
  AnchorConfiguration config;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const std::string where = "levels[" + std::to_string(i) + "]";
    if (detail::require_int(levels[i], "level", where) != static_cast<int>(i)) {
      throw InvalidInput(where + ": levels must be listed in order from 0");
    }
    const auto& anchors = detail::require(levels[i], "anchors", where);
    if (!anchors.is_array()) throw InvalidInput(where + ": \"anchors\" must be an array");
    std::vector<ScaleRatio> pairs;
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      const std::string w = where + ".anchors[" + std::to_string(j) + "]";
      ScaleRatio sr{detail::require_number(anchors[j], "scale", w),
                    detail::require_number(anchors[j], "ratio", w)};
      if (!(sr.scale > 0.0) || !(sr.ratio > 0.0)) throw InvalidInput(w + ": scale and ratio must be positive");
      pairs.push_back(sr);
    }
    config.levels.push_back(std::move(pairs));
  }
  return config;
}

// Canonical text form: two-space indent, trailing newline.
inline std::string dump_document(const json& doc) { return doc.dump(2) + "\n"; }

inline SearchSpace load_space(const std::filesystem::path& path) {
  return space_from_json(parse_json_text(read_text_file(path), path.string()));
}

inline AnchorConfiguration load_config(const std::filesystem::path& path) {
  return config_from_json(parse_json_text(read_text_file(path), path.string()));
}

}  // namespace aabo
