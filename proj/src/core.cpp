#include "fusionbiopsy/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fusionbiopsy {

using nlohmann::json;

std::string_view to_string(Modality m) { return m == Modality::F ? "F" : "C"; }
std::string_view to_string(View v) { return v == View::CC ? "CC" : "MLO"; }
std::string_view to_string(Laterality l) { return l == Laterality::Left ? "L" : "R"; }
std::string_view to_string(BiopsyLabel b) { return b == BiopsyLabel::Malignant ? "malignant" : "benign"; }
std::string_view to_string(Phase p) { return p == Phase::Early ? "early" : "late"; }

std::string_view to_string(AcrCategory a) {
  switch (a) {
    case AcrCategory::A: return "a";
    case AcrCategory::B: return "b";
    case AcrCategory::C: return "c";
    case AcrCategory::D: return "d";
    case AcrCategory::NotReported: return "NR";
  }
  return "NR";
}

namespace {

[[noreturn]] void bad_enum(std::string_view what, std::string_view s) {
  throw Error(ErrorCode::InvalidEnum, "invalid " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

Modality parse_modality(std::string_view s) {
  if (s == "F") return Modality::F;
  if (s == "C") return Modality::C;
  bad_enum("modality", s);
}

View parse_view(std::string_view s) {
  if (s == "CC") return View::CC;
  if (s == "MLO") return View::MLO;
  bad_enum("view", s);
}

Laterality parse_laterality(std::string_view s) {
  if (s == "L") return Laterality::Left;
  if (s == "R") return Laterality::Right;
  bad_enum("laterality", s);
}

BiopsyLabel parse_label(std::string_view s) {
  if (s == "malignant") return BiopsyLabel::Malignant;
  if (s == "benign") return BiopsyLabel::Benign;
  bad_enum("label", s);
}

AcrCategory parse_acr(std::string_view s) {
  if (s == "a") return AcrCategory::A;
  if (s == "b") return AcrCategory::B;
  if (s == "c") return AcrCategory::C;
  if (s == "d") return AcrCategory::D;
  bad_enum("acr", s);
}

Phase parse_phase(std::string_view s) {
  if (s == "early") return Phase::Early;
  if (s == "late") return Phase::Late;
  bad_enum("phase", s);
}

std::string channel_key(Channel ch) {
  return std::string(to_string(ch.modality)) + "_" + std::string(to_string(ch.view));
}

std::string to_string(const RecordKey& key) {
  return key.patient_id + "_" + std::string(to_string(key.laterality));
}

// ---------------------------------------------------------------------------
// GrayImage

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels, bool normalized)
    : width_(width), height_(height), pixels_(std::move(pixels)), normalized_(normalized) {
  if (width_ == 0 || height_ == 0) throw Error(ErrorCode::InvalidImage, "image has zero extent");
  if (pixels_.size() != width_ * height_) {
    throw Error(ErrorCode::InvalidImage, "pixel count does not match width*height");
  }
  for (double v : pixels_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidImage, "image contains non-finite values");
    if (normalized_ && (v < 0.0 || v > 1.0)) {
      throw Error(ErrorCode::InvalidImage, "normalized image has values outside [0,1]");
    }
  }
}

GrayImage::GrayImage(std::size_t width, std::size_t height, double fill, bool normalized)
    : GrayImage(width, height, std::vector<double>(width * height, fill), normalized) {}

double GrayImage::min() const { return *std::min_element(pixels_.begin(), pixels_.end()); }
double GrayImage::max() const { return *std::max_element(pixels_.begin(), pixels_.end()); }

GrayImage GrayImage::as_normalized() const { return GrayImage(width_, height_, pixels_, true); }

// ---------------------------------------------------------------------------
// Manifest

const StudyRecord* DatasetManifest::find(const RecordKey& key) const {
  auto it = std::find_if(records.begin(), records.end(),
                         [&](const StudyRecord& r) { return r.key() == key; });
  return it == records.end() ? nullptr : &*it;
}

namespace {

std::string describe(const json& obj, std::size_t index) {
  if (obj.is_object() && obj.contains("patient_id") && obj["patient_id"].is_string()) {
    std::string s = "record " + obj["patient_id"].get<std::string>();
    if (obj.contains("laterality") && obj["laterality"].is_string()) {
      s += "_" + obj["laterality"].get<std::string>();
    }
    return s;
  }
  return "record #" + std::to_string(index);
}

const json& require(const json& obj, const char* field, const std::string& who) {
  if (!obj.contains(field)) {
    throw Error(ErrorCode::MissingField, who + ": missing field '" + field + "'");
  }
  return obj[field];
}

std::string require_string(const json& obj, const char* field, const std::string& who) {
  const json& v = require(obj, field, who);
  if (!v.is_string()) {
    throw Error(ErrorCode::MissingField, who + ": field '" + field + "' must be a string");
  }
  return v.get<std::string>();
}

StudyRecord parse_record(const json& obj, std::size_t index, const std::filesystem::path& root,
                         const ManifestLoadOptions& opts) {
  const std::string who = describe(obj, index);
  if (!obj.is_object()) throw Error(ErrorCode::ParseError, who + ": expected an object");

  StudyRecord rec;
  rec.patient_id = require_string(obj, "patient_id", who);
  if (rec.patient_id.empty()) throw Error(ErrorCode::MissingField, who + ": empty patient_id");
  rec.laterality = parse_laterality(require_string(obj, "laterality", who));
  rec.label = parse_label(require_string(obj, "label", who));
  const json& acr = require(obj, "acr", who);
  rec.acr = acr.is_null() ? AcrCategory::NotReported : parse_acr(acr.get<std::string>());
  rec.phase = parse_phase(require_string(obj, "phase", who));

  const json& images = require(obj, "images", who);
  if (!images.is_object()) throw Error(ErrorCode::MissingField, who + ": 'images' must be an object");
  for (Channel ch : kChannels) {
    const std::string key = channel_key(ch);
    const bool present = images.contains(key) && !images[key].is_null();
    if (!present) {
      if (ch.modality == Modality::F) {
        throw Error(ErrorCode::MissingField, who + ": missing image " + key);
      }
      continue;
    }
    if (!images[key].is_string()) {
      throw Error(ErrorCode::MissingField, who + ": image " + key + " must be a path string");
    }
    std::filesystem::path p = images[key].get<std::string>();
    const std::filesystem::path full = p.is_absolute() ? p : root / p;
    if (opts.check_files && !std::filesystem::exists(full)) {
      throw Error(ErrorCode::UnresolvablePath, who + ": image " + key + " not found: " + full.string());
    }
    rec.images.emplace(ch, std::move(p));
  }
  // A single CESM view is a missing view, not a missing modality.
  if (rec.has({Modality::C, View::CC}) != rec.has({Modality::C, View::MLO})) {
    throw Error(ErrorCode::MissingField, who + ": CESM present for only one view");
  }
  return rec;
}

}  // namespace

DatasetManifest parse_manifest(std::string_view json_text, const std::filesystem::path& root,
                               const ManifestLoadOptions& opts) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, "manifest must be a JSON array");

  DatasetManifest manifest;
  manifest.root = root;
  std::set<RecordKey> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    StudyRecord rec = parse_record(doc[i], i, root, opts);
    if (!seen.insert(rec.key()).second) {
      throw Error(ErrorCode::DuplicateRecord, "duplicate record " + to_string(rec.key()));
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path, const ManifestLoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnresolvablePath, "cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path(), opts);
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  json doc = json::array();
  for (const StudyRecord& r : manifest.records) {
    json images = json::object();
    for (Channel ch : kChannels) {
      auto it = r.images.find(ch);
      images[channel_key(ch)] = it == r.images.end() ? json(nullptr) : json(it->second.generic_string());
    }
    doc.push_back({
        {"patient_id", r.patient_id},
        {"laterality", to_string(r.laterality)},
        {"label", to_string(r.label)},
        {"acr", r.acr == AcrCategory::NotReported ? json(nullptr) : json(to_string(r.acr))},
        {"phase", to_string(r.phase)},
        {"images", images},
    });
  }
  return doc.dump(2) + "\n";
}

std::vector<StudyRecord> biopsy_records(const DatasetManifest& manifest, bool include_late) {
  std::vector<StudyRecord> out;
  for (const StudyRecord& r : manifest.records) {
    if (include_late || r.admitted_to_biopsy()) out.push_back(r);
  }
  return out;
}

std::map<BiopsyLabel, std::size_t> label_histogram(std::span<const StudyRecord> records) {
  std::map<BiopsyLabel, std::size_t> h{{BiopsyLabel::Malignant, 0}, {BiopsyLabel::Benign, 0}};
  for (const StudyRecord& r : records) ++h[r.label];
  return h;
}

}  // namespace fusionbiopsy
