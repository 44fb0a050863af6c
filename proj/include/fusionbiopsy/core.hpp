#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusionbiopsy/error.hpp"

namespace fusionbiopsy {

enum class Modality { F, C };
enum class View { CC, MLO };
enum class Laterality { Left, Right };
enum class BiopsyLabel { Benign = 0, Malignant = 1 };
enum class AcrCategory { A, B, C, D, NotReported };
enum class Phase { Early, Late };

inline constexpr std::array<Modality, 2> kModalities{Modality::F, Modality::C};
inline constexpr std::array<View, 2> kViews{View::CC, View::MLO};
inline constexpr std::array<AcrCategory, 4> kReportedAcr{AcrCategory::A, AcrCategory::B,
                                                         AcrCategory::C, AcrCategory::D};

std::string_view to_string(Modality m);
std::string_view to_string(View v);
std::string_view to_string(Laterality l);  // "L" / "R"
std::string_view to_string(BiopsyLabel b);  // "malignant" / "benign"
std::string_view to_string(AcrCategory a);  // "a".."d", "NR"
std::string_view to_string(Phase p);

// Parsers throw Error(InvalidEnum) on unknown text.
Modality parse_modality(std::string_view s);
View parse_view(std::string_view s);
Laterality parse_laterality(std::string_view s);
BiopsyLabel parse_label(std::string_view s);
AcrCategory parse_acr(std::string_view s);
Phase parse_phase(std::string_view s);

constexpr int class_index(BiopsyLabel b) { return b == BiopsyLabel::Malignant ? 1 : 0; }

/// One (modality, view) image stream, e.g. FFDM-CC.
struct Channel {
  Modality modality;
  View view;
  auto operator<=>(const Channel&) const = default;
};

inline constexpr std::array<Channel, 4> kChannels{
    Channel{Modality::F, View::CC}, Channel{Modality::F, View::MLO},
    Channel{Modality::C, View::CC}, Channel{Modality::C, View::MLO}};

/// "F_CC", "C_MLO", ... as used in the manifest.
std::string channel_key(Channel ch);

/// A breast: one patient side. The unit classified by the pipeline.
struct RecordKey {
  std::string patient_id;
  Laterality laterality;
  auto operator<=>(const RecordKey&) const = default;
};

std::string to_string(const RecordKey& key);  // "p7_R"

/// Row-major 2-D grayscale raster. Invariants are checked on construction.
class GrayImage {
 public:
  GrayImage(std::size_t width, std::size_t height, std::vector<double> pixels,
            bool normalized = false);
  GrayImage(std::size_t width, std::size_t height, double fill, bool normalized = false);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool square() const noexcept { return width_ == height_; }
  bool normalized() const noexcept { return normalized_; }

  double at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }
  double& at(std::size_t row, std::size_t col) { return pixels_[row * width_ + col]; }

  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> row(std::size_t r) const { return {pixels_.data() + r * width_, width_}; }

  double min() const;
  double max() const;

  /// Same pixels, normalized flag set after checking the [0,1] range.
  GrayImage as_normalized() const;

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> pixels_;
  bool normalized_;
};

struct StudyRecord {
  std::string patient_id;
  Laterality laterality = Laterality::Right;
  BiopsyLabel label = BiopsyLabel::Benign;
  AcrCategory acr = AcrCategory::NotReported;
  Phase phase = Phase::Early;
  std::map<Channel, std::filesystem::path> images;

  RecordKey key() const { return {patient_id, laterality}; }
  bool has(Channel ch) const { return images.contains(ch); }
  bool has_cesm() const {
    return has({Modality::C, View::CC}) && has({Modality::C, View::MLO});
  }
  /// Late acquisitions are excluded from the classification task.
  bool admitted_to_biopsy() const { return phase == Phase::Early; }
};

struct DatasetManifest {
  std::vector<StudyRecord> records;
  std::filesystem::path root;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : root / p;
  }
  const StudyRecord* find(const RecordKey& key) const;
};

struct ManifestLoadOptions {
  /// Verify every referenced image exists on disk.
  bool check_files = true;
};

/// Parses the JSON manifest. Image paths are relative to the manifest's
/// directory unless absolute.
DatasetManifest load_manifest(const std::filesystem::path& path,
                              const ManifestLoadOptions& opts = {});
DatasetManifest parse_manifest(std::string_view json_text, const std::filesystem::path& root,
                               const ManifestLoadOptions& opts = {});
std::string serialize_manifest(const DatasetManifest& manifest);

/// Records admitted to the classification task (or all when `include_late`).
std::vector<StudyRecord> biopsy_records(const DatasetManifest& manifest, bool include_late = false);

std::map<BiopsyLabel, std::size_t> label_histogram(std::span<const StudyRecord> records);

}  // namespace fusionbiopsy
