#pragma once

// Scene documents: background + foregrounds (image, mask, warp) + hierarchy
// weights, composed onto a canvas of a fixed output size.
//
// JSON layout (version 1); relative paths resolve against the scene file:
//   {
//     "version": 1,
//     "background": "bg.png",
//     "output_size": [height, width],            // optional, defaults to bg size
//     "foregrounds": [{"image": "a.png", "mask": "a_mask.png", "warp": {...}}, ...],
//     "hierarchy": {"logits": [...]} | {"weights": [...]}
//   }

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hicomp/error.hpp"
#include "hicomp/hierarchy.hpp"
#include "hicomp/image.hpp"
#include "hicomp/png_io.hpp"
#include "hicomp/warp.hpp"

namespace hicomp {

inline constexpr int kSceneVersion = 1;

struct ForegroundSpec {
  Image image;
  MaskMap mask;
  WarpParams warp = AffineWarp::identity();
};

struct HierarchySpec {
  enum class Kind { Logits, Weights };
  Kind kind = Kind::Logits;
  std::vector<double> values;
};

struct SceneSpec {
  Image background;
  std::vector<ForegroundSpec> foregrounds;
  HierarchySpec hierarchy;
  Size2 output_size;
};

// Checks counts, shapes and weights; every failure names its foreground.
inline const SceneSpec& validate_scene(const SceneSpec& spec, const HierarchyConfig& cfg = {}) {
  const std::size_t m = spec.foregrounds.size();
  if (m < 1) throw ValidationError("scene needs at least one foreground");
  if (m > cfg.max_foregrounds) throw ValidationError(FactorialBlowup(m, cfg.max_foregrounds).what());
  if (spec.background.empty()) throw ValidationError("background is missing");
  if (spec.output_size.height <= 0 || spec.output_size.width <= 0) throw ValidationError("output size must be positive");
  if (spec.background.height() != spec.output_size.height || spec.background.width() != spec.output_size.width) {
    throw ValidationError("background is " + std::to_string(spec.background.height()) + "x" +
                          std::to_string(spec.background.width()) + " but the output size is " +
                          std::to_string(spec.output_size.height) + "x" + std::to_string(spec.output_size.width));
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto& fg = spec.foregrounds[i];
    if (fg.image.empty()) throw ValidationError("image is missing", i);
    if (fg.mask.size() == 0) throw ValidationError("mask is missing", i);
    if (fg.mask.height() != fg.image.height() || fg.mask.width() != fg.image.width()) {
      throw ValidationError("dimension mismatch: mask is " + std::to_string(fg.mask.height()) + "x" +
                                std::to_string(fg.mask.width()) + ", image is " + std::to_string(fg.image.height()) +
                                "x" + std::to_string(fg.image.width()),
                            i);
    }
    if (fg.image.channels() != spec.background.channels()) {
      throw ValidationError("image has " + std::to_string(fg.image.channels()) + " channels, background has " +
                                std::to_string(spec.background.channels()),
                            i);
    }
  }
  const std::size_t expected = factorial(m);
  const auto& h = spec.hierarchy;
  if (h.values.size() != expected) {
    throw ValidationError("expected " + std::to_string(expected) + " weights, got " + std::to_string(h.values.size()));
  }
  try {
    if (h.kind == HierarchySpec::Kind::Logits) {
      (void)softmax_weights(h.values);
    } else {
      (void)HierarchyWeights(h.values);
    }
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
  return spec;
}

inline HierarchyWeights scene_weights(const SceneSpec& spec) {
  return spec.hierarchy.kind == HierarchySpec::Kind::Logits ? softmax_weights(spec.hierarchy.values)
                                                            : HierarchyWeights(spec.hierarchy.values);
}

// Warps every foreground and mask onto the canvas and composes them.
inline Composite<float> compose_scene(const SceneSpec& spec, const HierarchyConfig& cfg = {}) {
  validate_scene(spec, cfg);
  std::vector<Image> fgs;
  std::vector<MaskMap> masks;
  for (const auto& fg : spec.foregrounds) {
    fgs.push_back(warp_image(fg.image, fg.warp, spec.output_size));
    masks.push_back(warp_image(fg.mask, fg.warp, spec.output_size));
  }
  return compose_hierarchy<float>(spec.background, fgs, masks, scene_weights(spec), cfg);
}

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& ref) {
  std::filesystem::path p(ref);
  return p.is_absolute() ? p : base / p;
}

inline std::vector<double> json_numbers(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ValidationError(std::string(what) + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

// Parses a scene document and loads every raster it references.
inline SceneSpec parse_scene(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                             const HierarchyConfig& cfg = {}) {
  if (!doc.is_object()) throw ValidationError("scene must be a JSON object");
  if (!doc.contains("version") || doc["version"] != kSceneVersion) {
    throw ValidationError("scene \"version\" must be " + std::to_string(kSceneVersion));
  }
  SceneSpec spec;

  if (!doc.contains("background") || !doc["background"].is_string()) {
    throw ValidationError("scene \"background\" must be a file path");
  }
  const auto bg_path = detail::resolve(base_dir, doc["background"].get<std::string>());
  if (!std::filesystem::exists(bg_path)) throw ValidationError("background file not found: " + bg_path.string());
  try {
    spec.background = load_image(bg_path);
  } catch (const Error& e) {
    throw ValidationError(std::string("background: ") + e.what());
  }

  if (doc.contains("output_size")) {
    const auto sz = detail::json_numbers(doc["output_size"], "\"output_size\"");
    if (sz.size() != 2) throw ValidationError("\"output_size\" must be [height, width]");
    spec.output_size = {int(sz[0]), int(sz[1])};
  } else {
    spec.output_size = {spec.background.height(), spec.background.width()};
  }

  if (!doc.contains("foregrounds") || !doc["foregrounds"].is_array()) {
    throw ValidationError("scene \"foregrounds\" must be an array");
  }
  const auto& fgs = doc["foregrounds"];
  for (std::size_t i = 0; i < fgs.size(); ++i) {
    const auto& f = fgs[i];
    if (!f.is_object()) throw ValidationError("entry must be an object", i);
    ForegroundSpec fg;
    for (const char* key : {"image", "mask"}) {
      if (!f.contains(key) || !f[key].is_string()) {
        throw ValidationError(std::string("\"") + key + "\" must be a file path", i);
      }
      const auto path = detail::resolve(base_dir, f[key].get<std::string>());
      if (!std::filesystem::exists(path)) throw ValidationError(std::string(key) + " file not found: " + path.string(), i);
      try {
        if (std::string(key) == "image") {
          fg.image = load_image(path);
        } else {
          fg.mask = load_mask(path);
        }
      } catch (const Error& e) {
        throw ValidationError(std::string(key) + ": " + e.what(), i);
      }
    }
    if (f.contains("warp")) {
      try {
        fg.warp = warp_from_json(f["warp"]);
      } catch (const Error& e) {
        throw ValidationError(e.what(), i);
      }
    }
    spec.foregrounds.push_back(std::move(fg));
  }

  if (!doc.contains("hierarchy") || !doc["hierarchy"].is_object()) {
    throw ValidationError("scene \"hierarchy\" must be an object with \"logits\" or \"weights\"");
  }
  const auto& h = doc["hierarchy"];
  if (h.contains("logits") == h.contains("weights")) {
    throw ValidationError("\"hierarchy\" needs exactly one of \"logits\" or \"weights\"");
  }
  if (h.contains("logits")) {
    spec.hierarchy = {HierarchySpec::Kind::Logits, detail::json_numbers(h["logits"], "\"logits\"")};
  } else {
    spec.hierarchy = {HierarchySpec::Kind::Weights, detail::json_numbers(h["weights"], "\"weights\"")};
  }

  validate_scene(spec, cfg);
  return spec;
}

// Throws IoError when the file cannot be read and nlohmann::json::parse_error
// on malformed JSON.
inline SceneSpec load_scene(const std::filesystem::path& path, const HierarchyConfig& cfg = {}) {
  const auto bytes = read_file(path);
  const auto doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  return parse_scene(doc, path.parent_path(), cfg);
}

}  // namespace hicomp
