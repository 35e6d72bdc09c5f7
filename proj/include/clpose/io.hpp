#ifndef CLPOSE_IO_HPP
#define CLPOSE_IO_HPP

// File formats: binary map stacks (.clm), dataset profiles, COCO person
// keypoint annotations (read-only), the simple-poses JSON format, and the
// JSON/CSV report writers used by the command-line tool.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clpose/core.hpp"
#include "clpose/loss.hpp"
#include "clpose/metrics.hpp"
#include "clpose/synthfit.hpp"

namespace clpose {

using ordered_json = nlohmann::ordered_json;

class FormatError : public Error {
 public:
  using Error::Error;
};
class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};
class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TrailingBytesError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Map files
//
// Header: "CLM1", then six little-endian u32 fields: version, K, W', H', S,
// norm mode (0 squared distance, 1 literal L2). Payload: 3K planes of
// little-endian float32 (K heatmaps, K y-offsets, K x-offsets), each
// row-major with y outer.

inline constexpr std::string_view kMapMagic = "CLM1";
inline constexpr std::uint32_t kMapVersion = 1;
inline constexpr std::size_t kMapHeaderBytes = 28;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw FormatError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline std::string serialize_maps(const TargetMaps& maps) {
  if (!maps.well_formed()) throw ContractError("malformed map stack");
  std::string out;
  out.reserve(kMapHeaderBytes + maps.plane_count() * maps.grid.cell_count() * 4);
  out.append(kMapMagic);
  detail::put_u32(out, kMapVersion);
  detail::put_u32(out, detail::checked_u32(maps.keypoints(), "K"));
  detail::put_u32(out, detail::checked_u32(maps.grid.grid_width(), "grid width"));
  detail::put_u32(out, detail::checked_u32(maps.grid.grid_height(), "grid height"));
  detail::put_u32(out, detail::checked_u32(maps.grid.stride(), "stride"));
  detail::put_u32(out, static_cast<std::uint32_t>(maps.norm_mode));
  for (std::size_t pi = 0; pi < maps.plane_count(); ++pi) {
    for (double v : maps.plane(pi).values) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

/// Inverse of serialize_maps. The grid is reconstructed as (W'*S) x (H'*S);
/// a keypoint is marked valid iff its heatmap plane has a non-zero value.
inline TargetMaps parse_maps(std::string_view bytes) {
  if (bytes.size() < kMapMagic.size()) throw TruncatedError("map file shorter than its magic");
  if (bytes.substr(0, 4) != kMapMagic) throw BadMagicError("bad map file magic");
  if (bytes.size() < kMapHeaderBytes) throw TruncatedError("map file header truncated");
  const auto version = detail::get_u32(bytes, 4);
  if (version != kMapVersion) {
    throw VersionMismatchError("unsupported map file version " + std::to_string(version) + " (expected " +
                               std::to_string(kMapVersion) + ")");
  }
  const std::size_t K = detail::get_u32(bytes, 8);
  const std::size_t gw = detail::get_u32(bytes, 12);
  const std::size_t gh = detail::get_u32(bytes, 16);
  const std::size_t stride = detail::get_u32(bytes, 20);
  const auto mode = detail::get_u32(bytes, 24);
  if (K == 0 || gw == 0 || gh == 0 || stride == 0) throw FormatError("map file header has a zero dimension");
  if (mode > 1) throw FormatError("unknown norm mode flag " + std::to_string(mode));
  const std::size_t expected = 3 * K * gw * gh * 4;
  const std::size_t payload = bytes.size() - kMapHeaderBytes;
  if (payload < expected) {
    throw TruncatedError("map payload truncated: " + std::to_string(payload) + " of " + std::to_string(expected) +
                         " bytes");
  }
  if (payload > expected) throw TrailingBytesError("map payload has " + std::to_string(payload - expected) + " extra bytes");

  TargetMaps maps(GridSpec(gw * stride, gh * stride, stride), K);
  maps.norm_mode = static_cast<NormMode>(mode);
  std::size_t at = kMapHeaderBytes;
  for (std::size_t pi = 0; pi < maps.plane_count(); ++pi) {
    for (auto& v : maps.plane(pi).values) {
      v = static_cast<double>(std::bit_cast<float>(detail::get_u32(bytes, at)));
      at += 4;
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    const auto& hv = maps.heatmaps[k].values;
    maps.valid[k] = std::any_of(hv.begin(), hv.end(), [](double v) { return v != 0.0; });
  }
  return maps;
}

/// Writes to a sibling temporary and renames, so a failed write leaves no file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os) {
      os.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("failed writing " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void write_maps(const TargetMaps& maps, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_maps(maps));
}

inline TargetMaps read_maps(const std::filesystem::path& path) { return parse_maps(read_file(path)); }

// ---------------------------------------------------------------------------
// Dataset profiles

struct DatasetProfile {
  std::string name;
  std::size_t K = 0;
  std::vector<std::string> keypoint_names;
  std::vector<double> oks_kappas;
  std::optional<std::pair<std::size_t, std::size_t>> torso_endpoints;
  std::vector<std::pair<std::size_t, std::size_t>> flip_pairs;

  OksConstants oks_constants() const { return {oks_kappas}; }

  friend bool operator==(const DatasetProfile&, const DatasetProfile&) = default;
};

/// COCO person keypoints. The falloff constants are twice the per-keypoint
/// sigmas of the reference COCO evaluator, which matches that evaluator's
/// kernel exp(-d^2 / (2 s^2 (2 sigma)^2)).
inline DatasetProfile coco_profile() {
  DatasetProfile p;
  p.name = "coco";
  p.K = 17;
  p.keypoint_names = {"nose",         "left_eye",      "right_eye",  "left_ear",    "right_ear",   "left_shoulder",
                      "right_shoulder", "left_elbow",  "right_elbow", "left_wrist", "right_wrist", "left_hip",
                      "right_hip",    "left_knee",     "right_knee", "left_ankle",  "right_ankle"};
  p.oks_kappas = {.052, .050, .050, .070, .070, .158, .158, .144, .144, .124, .124, .214, .214, .174, .174, .178, .178};
  p.torso_endpoints = std::pair<std::size_t, std::size_t>{5, 12};
  p.flip_pairs = {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}, {11, 12}, {13, 14}, {15, 16}};
  return p;
}

/// Profile used for generated data: K keypoints, uniform falloff 0.1, torso
/// from the first to the last keypoint.
inline DatasetProfile synthetic_profile(std::size_t K) {
  DatasetProfile p;
  p.name = "synthetic-" + std::to_string(K);
  p.K = K;
  for (std::size_t k = 0; k < K; ++k) p.keypoint_names.push_back("kp" + std::to_string(k));
  p.oks_kappas.assign(K, 0.1);
  if (K >= 2) p.torso_endpoints = std::pair<std::size_t, std::size_t>{0, K - 1};
  return p;
}

inline ordered_json profile_to_json(const DatasetProfile& p) {
  ordered_json j;
  j["name"] = p.name;
  j["K"] = p.K;
  j["keypoint_names"] = p.keypoint_names;
  j["oks_kappas"] = p.oks_kappas;
  if (p.torso_endpoints) {
    j["torso_endpoints"] = {p.torso_endpoints->first, p.torso_endpoints->second};
  } else {
    j["torso_endpoints"] = nullptr;
  }
  if (!p.flip_pairs.empty()) {
    auto arr = ordered_json::array();
    for (const auto& [a, b] : p.flip_pairs) arr.push_back({a, b});
    j["flip_pairs"] = arr;
  }
  return j;
}

inline DatasetProfile profile_from_json(const nlohmann::json& j) {
  try {
    DatasetProfile p;
    p.name = j.at("name").get<std::string>();
    p.K = j.at("K").get<std::size_t>();
    p.keypoint_names = j.at("keypoint_names").get<std::vector<std::string>>();
    p.oks_kappas = j.at("oks_kappas").get<std::vector<double>>();
    if (j.contains("torso_endpoints") && !j.at("torso_endpoints").is_null()) {
      const auto t = j.at("torso_endpoints").get<std::vector<std::size_t>>();
      if (t.size() != 2) throw IngestError("profile torso_endpoints must hold two indices");
      p.torso_endpoints = std::pair<std::size_t, std::size_t>{t[0], t[1]};
    }
    if (j.contains("flip_pairs")) {
      for (const auto& pair : j.at("flip_pairs")) {
        p.flip_pairs.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>());
      }
    }
    if (p.K == 0) throw IngestError("profile K must be positive");
    if (p.keypoint_names.size() != p.K || p.oks_kappas.size() != p.K) {
      throw IngestError("profile '" + p.name + "' lists do not match K=" + std::to_string(p.K));
    }
    if (p.torso_endpoints && (p.torso_endpoints->first >= p.K || p.torso_endpoints->second >= p.K)) {
      throw IngestError("profile torso endpoint out of range");
    }
    p.oks_constants().validate(p.K);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(std::string("malformed dataset profile: ") + e.what());
  } catch (const ConfigError& e) {
    throw IngestError(std::string("malformed dataset profile: ") + e.what());
  }
}

/// "coco", "synthetic-<K>", or a path to a profile JSON file.
inline DatasetProfile resolve_profile(const std::string& name_or_path) {
  if (name_or_path == "coco") return coco_profile();
  constexpr std::string_view synth = "synthetic-";
  if (name_or_path.rfind(synth, 0) == 0) {
    const auto digits = name_or_path.substr(synth.size());
    if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
      const auto K = std::stoul(digits);
      if (K > 0) return synthetic_profile(K);
    }
  }
  if (!std::filesystem::exists(name_or_path)) throw IngestError("unknown dataset profile '" + name_or_path + "'");
  try {
    return profile_from_json(nlohmann::json::parse(read_file(name_or_path)));
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("malformed dataset profile " + name_or_path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Annotation sets

struct ImageEntry {
  std::optional<std::int64_t> id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<PoseInstance> instances;

  friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

struct AnnotationSet {
  std::string profile;
  std::vector<ImageEntry> images;

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

inline Visibility visibility_from_code(std::int64_t v) {
  switch (v) {
    case 0:
      return Visibility::kUnlabeled;
    case 1:
      return Visibility::kOccluded;
    case 2:
      return Visibility::kVisible;
    default:
      throw IngestError("visibility flag " + std::to_string(v) + " not in {0, 1, 2}");
  }
}

inline int visibility_code(Visibility v) { return static_cast<int>(v); }

/// COCO person-keypoints JSON. Only images (id, width, height) and annotation
/// keypoints / area are read. Instances are grouped per image in the order of
/// the "images" array.
inline AnnotationSet ingest_coco(const nlohmann::json& doc, const DatasetProfile& profile) {
  AnnotationSet set;
  set.profile = profile.name;
  std::map<std::int64_t, std::size_t> index;
  try {
    if (!doc.is_object()) throw IngestError("COCO document is not an object");
    for (const auto& img : doc.at("images")) {
      ImageEntry e;
      e.id = img.at("id").get<std::int64_t>();
      e.width = img.at("width").get<std::size_t>();
      e.height = img.at("height").get<std::size_t>();
      index[*e.id] = set.images.size();
      set.images.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(std::string("malformed COCO images section: ") + e.what());
  }
  if (!doc.contains("annotations") || !doc.at("annotations").is_array()) {
    throw IngestError("COCO document has no annotations array");
  }
  for (const auto& ann : doc.at("annotations")) {
    const std::string id = ann.contains("id") ? ann.at("id").dump() : std::string("<no id>");
    try {
      if (!ann.contains("keypoints")) throw IngestError("annotation " + id + ": missing keypoints array");
      const auto& kps = ann.at("keypoints");
      if (!kps.is_array()) throw IngestError("annotation " + id + ": keypoints is not an array");
      if (kps.size() != 3 * profile.K) {
        throw IngestError("annotation " + id + ": " + std::to_string(kps.size()) + " keypoint values, profile '" +
                          profile.name + "' expects " + std::to_string(3 * profile.K));
      }
      const auto image_id = ann.at("image_id").get<std::int64_t>();
      const auto it = index.find(image_id);
      if (it == index.end()) throw IngestError("annotation " + id + ": unknown image_id " + std::to_string(image_id));
      PoseInstance pose;
      for (std::size_t k = 0; k < profile.K; ++k) {
        Keypoint kp;
        kp.x = kps.at(3 * k).get<double>();
        kp.y = kps.at(3 * k + 1).get<double>();
        kp.visibility = visibility_from_code(kps.at(3 * k + 2).get<std::int64_t>());
        pose.keypoints.push_back(kp);
      }
      if (ann.contains("area")) pose.norm_meta.area = ann.at("area").get<double>();
      pose.norm_meta.torso_endpoints = profile.torso_endpoints;
      if (ann.contains("score")) pose.score = ann.at("score").get<double>();
      set.images[it->second].instances.push_back(std::move(pose));
    } catch (const nlohmann::json::exception& e) {
      throw IngestError("annotation " + id + ": " + e.what());
    } catch (const IngestError& e) {
      const std::string msg = e.what();
      if (msg.rfind("annotation ", 0) == 0) throw;
      throw IngestError("annotation " + id + ": " + msg);
    }
  }
  return set;
}

inline AnnotationSet ingest_coco(const std::filesystem::path& path, const DatasetProfile& profile) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return ingest_coco(doc, profile);
}

namespace detail {

class SchemaReader {
 public:
  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw IngestError(path + ": " + what);
  }

  static const nlohmann::json& field(const nlohmann::json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) fail(path, "expected an object");
    if (!obj.contains(key)) fail(path + "." + key, "missing");
    return obj.at(key);
  }

  static double number(const nlohmann::json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }

  static std::size_t count(const nlohmann::json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      fail(path, "expected a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  static const nlohmann::json& array(const nlohmann::json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "expected an array");
    return v;
  }
};

}  // namespace detail

/// Simple-poses JSON:
/// {"profile": str, "images": [{"id"?: int, "width": int, "height": int,
///   "instances": [{"keypoints": [{"x", "y", "v"}], "head_box"?: [x0, y0, x1, y1],
///   "torso_endpoints"?: [a, b], "area"?: num, "score"?: num}]}]}
inline AnnotationSet simple_from_json(const nlohmann::json& doc) {
  using R = detail::SchemaReader;
  AnnotationSet set;
  if (!doc.is_object()) R::fail("$", "expected an object");
  const auto& prof = R::field(doc, "$", "profile");
  if (!prof.is_string()) R::fail("profile", "expected a string");
  set.profile = prof.get<std::string>();
  const auto& images = R::array(R::field(doc, "$", "images"), "images");
  std::optional<std::size_t> K;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string ip = "images[" + std::to_string(i) + "]";
    const auto& img = images[i];
    if (!img.is_object()) R::fail(ip, "expected an object");
    ImageEntry e;
    if (!img.contains("width")) R::fail(ip + ".width", "missing");
    if (!img.contains("height")) R::fail(ip + ".height", "missing");
    e.width = R::count(img.at("width"), ip + ".width");
    e.height = R::count(img.at("height"), ip + ".height");
    if (img.contains("id")) {
      if (!img.at("id").is_number_integer()) R::fail(ip + ".id", "expected an integer");
      e.id = img.at("id").get<std::int64_t>();
    }
    const auto& instances = R::array(R::field(img, ip, "instances"), ip + ".instances");
    for (std::size_t j = 0; j < instances.size(); ++j) {
      const std::string jp = ip + ".instances[" + std::to_string(j) + "]";
      const auto& inst = instances[j];
      PoseInstance pose;
      const auto& kps = R::array(R::field(inst, jp, "keypoints"), jp + ".keypoints");
      if (kps.empty()) R::fail(jp + ".keypoints", "empty");
      if (K && *K != kps.size()) {
        R::fail(jp + ".keypoints", "has " + std::to_string(kps.size()) + " keypoints, expected " + std::to_string(*K));
      }
      K = kps.size();
      for (std::size_t k = 0; k < kps.size(); ++k) {
        const std::string kp_path = jp + ".keypoints[" + std::to_string(k) + "]";
        Keypoint kp;
        kp.x = R::number(R::field(kps[k], kp_path, "x"), kp_path + ".x");
        kp.y = R::number(R::field(kps[k], kp_path, "y"), kp_path + ".y");
        const auto& v = R::field(kps[k], kp_path, "v");
        if (!v.is_number_integer()) R::fail(kp_path + ".v", "expected 0, 1 or 2");
        try {
          kp.visibility = visibility_from_code(v.get<std::int64_t>());
        } catch (const IngestError& err) {
          R::fail(kp_path + ".v", err.what());
        }
        pose.keypoints.push_back(kp);
      }
      if (inst.contains("head_box")) {
        const auto& hb = R::array(inst.at("head_box"), jp + ".head_box");
        if (hb.size() != 4) R::fail(jp + ".head_box", "expected [x0, y0, x1, y1]");
        pose.norm_meta.head_box = Box{R::number(hb[0], jp + ".head_box[0]"), R::number(hb[1], jp + ".head_box[1]"),
                                      R::number(hb[2], jp + ".head_box[2]"), R::number(hb[3], jp + ".head_box[3]")};
      }
      if (inst.contains("torso_endpoints")) {
        const auto& te = R::array(inst.at("torso_endpoints"), jp + ".torso_endpoints");
        if (te.size() != 2) R::fail(jp + ".torso_endpoints", "expected two indices");
        const auto a = R::count(te[0], jp + ".torso_endpoints[0]");
        const auto b = R::count(te[1], jp + ".torso_endpoints[1]");
        if (a >= kps.size() || b >= kps.size()) R::fail(jp + ".torso_endpoints", "index out of range");
        pose.norm_meta.torso_endpoints = std::pair<std::size_t, std::size_t>{a, b};
      }
      if (inst.contains("area")) pose.norm_meta.area = R::number(inst.at("area"), jp + ".area");
      if (inst.contains("score")) pose.score = R::number(inst.at("score"), jp + ".score");
      e.instances.push_back(std::move(pose));
    }
    set.images.push_back(std::move(e));
  }
  return set;
}

inline ordered_json simple_to_json(const AnnotationSet& set) {
  ordered_json doc;
  doc["profile"] = set.profile;
  auto images = ordered_json::array();
  for (const auto& e : set.images) {
    ordered_json img;
    if (e.id) img["id"] = *e.id;
    img["width"] = e.width;
    img["height"] = e.height;
    auto instances = ordered_json::array();
    for (const auto& pose : e.instances) {
      ordered_json inst;
      auto kps = ordered_json::array();
      for (const auto& kp : pose.keypoints) {
        kps.push_back(ordered_json{{"x", kp.x}, {"y", kp.y}, {"v", visibility_code(kp.visibility)}});
      }
      inst["keypoints"] = std::move(kps);
      if (const auto& hb = pose.norm_meta.head_box) inst["head_box"] = {hb->x0, hb->y0, hb->x1, hb->y1};
      if (const auto& te = pose.norm_meta.torso_endpoints) inst["torso_endpoints"] = {te->first, te->second};
      if (pose.norm_meta.area) inst["area"] = *pose.norm_meta.area;
      if (pose.score) inst["score"] = *pose.score;
      instances.push_back(std::move(inst));
    }
    img["instances"] = std::move(instances);
    images.push_back(std::move(img));
  }
  doc["images"] = std::move(images);
  return doc;
}

inline std::string dump_json(const ordered_json& j) { return j.dump(2) + "\n"; }

inline AnnotationSet ingest_simple(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return simple_from_json(doc);
}

inline void write_simple(const AnnotationSet& set, const std::filesystem::path& path) {
  write_file_atomic(path, dump_json(simple_to_json(set)));
}

// ---------------------------------------------------------------------------
// Reports

inline ordered_json to_json(const LossReport& r) {
  ordered_json j;
  j["l_h"] = r.l_h;
  j["l_oy"] = r.l_oy;
  j["l_ox"] = r.l_ox;
  j["total"] = r.total;
  j["n_omega"] = r.n_omega;
  return j;
}

inline ordered_json to_json(const DecodedPose& pose) {
  auto kps = ordered_json::array();
  for (std::size_t k = 0; k < pose.size(); ++k) {
    kps.push_back(ordered_json{{"x", pose.coords[k].x},
                               {"y", pose.coords[k].y},
                               {"confidence", pose.confidence[k]},
                               {"n_cells", pose.diagnostics[k].n_cells},
                               {"used_fallback", pose.diagnostics[k].used_fallback}});
  }
  return ordered_json{{"keypoints", std::move(kps)}};
}

inline ordered_json to_json(const PckReport& r) {
  ordered_json j;
  j["overall"] = r.overall;
  j["correct"] = r.correct;
  j["total"] = r.total;
  auto per = ordered_json::array();
  for (const auto& v : r.per_keypoint) per.push_back(v ? ordered_json(*v) : ordered_json(nullptr));
  j["per_keypoint"] = std::move(per);
  return j;
}

inline ordered_json to_json(const OksApReport& r) {
  ordered_json j;
  j["ap"] = r.ap;
  j["ap50"] = r.ap50 ? ordered_json(*r.ap50) : ordered_json(nullptr);
  j["ap75"] = r.ap75 ? ordered_json(*r.ap75) : ordered_json(nullptr);
  j["ar"] = r.ar;
  j["thresholds"] = r.thresholds;
  j["ap_per_threshold"] = r.ap_per_threshold;
  j["recall_per_threshold"] = r.recall_per_threshold;
  return j;
}

/// Shortest decimal representation that round-trips the double.
inline std::string format_number(double v) { return ordered_json(v).dump(); }

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "stride,grid_width,grid_height,composite_mean_error,argmax_mean_error,n_omega_mean,plane_count\n";
  for (const auto& r : rows) {
    os << r.stride << ',' << r.grid_width << ',' << r.grid_height << ',' << format_number(r.composite_mean_error)
       << ',' << format_number(r.argmax_mean_error) << ',' << format_number(r.n_omega_mean) << ',' << r.plane_count
       << '\n';
  }
  return os.str();
}

}  // namespace clpose

#endif  // CLPOSE_IO_HPP
