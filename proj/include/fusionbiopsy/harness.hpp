#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fusionbiopsy/core.hpp"
#include "fusionbiopsy/fusion.hpp"
#include "fusionbiopsy/generators.hpp"
#include "fusionbiopsy/metrics.hpp"
#include "fusionbiopsy/preprocess.hpp"
#include "fusionbiopsy/random.hpp"
#include "fusionbiopsy/scorers.hpp"

namespace fusionbiopsy::harness {

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldSplit {
  std::size_t fold_index = 0;
  std::set<RecordKey> train;
  std::set<RecordKey> val;
  std::set<RecordKey> test;

  static std::set<std::string> patients(const std::set<RecordKey>& keys);
};

/// Greedy stratified group k-fold. Patients are the groups; they are placed
/// largest first (random order within a size) into the fold that minimizes
/// the squared deviation from the per-class and per-fold patient targets,
/// ties broken by `rng`. Fold sizes are capped so every fold holds
/// floor(P/k) or ceil(P/k) patients. Fold i is the test set, fold i+1 (mod k) the
/// validation set, the rest train. Throws TooFewPatients.
std::vector<FoldSplit> stratified_group_kfold(std::span<const StudyRecord> records, std::size_t k,
                                              RandomStream& rng);

// ---------------------------------------------------------------------------
// Settings

enum class SettingKind { F, C, Chat, FplusC, FplusChat, Cstar, FplusCstar };

struct Setting {
  SettingKind kind = SettingKind::F;
  int percent = 0;  // Cstar / FplusCstar only

  /// "F", "C", "Chat", "FplusC", "FplusChat", "Cstar(40)", "FplusCstar(40)".
  std::string name() const;
  static Setting parse(std::string_view text);

  bool uses_ffdm() const;
  bool uses_cesm() const;
  bool multimodal() const { return uses_ffdm() && uses_cesm(); }
  bool starred() const { return kind == SettingKind::Cstar || kind == SettingKind::FplusCstar; }
  /// True when every test patient gets synthetic CESM.
  bool all_synthetic() const;

  auto operator<=>(const Setting&) const = default;
};

// ---------------------------------------------------------------------------
// Per-fold channel scores: the interchange between scorer backends and fusion

struct FoldScores {
  ScoreMatrix val;         // real images, validation records
  ScoreMatrix test;        // real images, test records (CESM may be absent)
  ScoreMatrix test_synth;  // C channels scored on synthetic CESM, test records
};

struct RecordOutcome {
  RecordKey key;
  BiopsyLabel truth = BiopsyLabel::Benign;
  AcrCategory acr = AcrCategory::NotReported;
  double p = 0.0;
  std::optional<double> p_f;
  std::optional<double> p_c;
  BiopsyLabel pred = BiopsyLabel::Benign;
  bool synthetic_cesm = false;

  bool operator==(const RecordOutcome&) const = default;
};

struct SettingRun {
  Setting setting;
  std::size_t fold = 0;
  std::optional<int> repetition;
  std::vector<RecordOutcome> records;
  metrics::MetricsTriple metrics;
  std::size_t synthetic_patients = 0;
};

/// Ground truth and strata for the records being evaluated.
using RecordIndex = std::map<RecordKey, const StudyRecord*>;

/// Evaluates one setting on one fold's test records. `synthetic_patients`
/// names the patients whose CESM is replaced by synthetic images (used by
/// starred settings); Chat/FplusChat replace everyone, and any record
/// without real CESM is imputed regardless.
SettingRun run_setting(const FoldSplit& split, const Setting& setting, const FoldScores& scores,
                       const fusion::FusionWeights& weights, const RecordIndex& index,
                       const std::set<std::string>& synthetic_patients = {});

/// ceil(percent * |patients| / 100) patients drawn without replacement.
std::set<std::string> select_synthetic_patients(const std::set<std::string>& test_patients, int percent,
                                                RandomStream& rng);

// ---------------------------------------------------------------------------
// Aggregation

struct Aggregate {
  std::optional<double> mean;
  double standard_error = 0.0;
  std::size_t count = 0;     // values used
  std::size_t excluded = 0;  // null inputs skipped
};

/// Mean and sample-stddev / sqrt(n) of the non-null values (0 when n == 1).
/// Identical inputs aggregate to exactly that value with zero error.
Aggregate aggregate(std::span<const std::optional<double>> values);

struct MetricAggregates {
  Aggregate auc;
  Aggregate gmean;
  Aggregate mcc;
};

/// Per-fold metric values (repetitions already averaged) plus aggregates.
struct SettingSummary {
  Setting setting;
  std::size_t repetitions = 1;
  std::vector<std::optional<double>> fold_auc;
  std::vector<std::optional<double>> fold_gmean;
  std::vector<std::optional<double>> fold_mcc;
  MetricAggregates aggregates;
};

/// Averages each fold's repetitions, then aggregates across folds.
SettingSummary summarize(const Setting& setting, std::span<const SettingRun> runs, std::size_t folds);

struct AcrCell {
  Setting setting;
  AcrCategory acr = AcrCategory::NotReported;
  std::vector<std::optional<double>> fold_auc;
  std::vector<std::optional<double>> fold_gmean;
  std::vector<std::optional<double>> fold_mcc;
  std::vector<metrics::ConfusionCounts> fold_counts;
  MetricAggregates aggregates;
  bool empty = true;  // no test record of this density in any fold
};

/// Breast-density stratified metrics for F, FplusC and FplusChat (whichever
/// were run). Single-class cells keep only the G-mean.
std::vector<AcrCell> acr_stratified_report(std::span<const SettingRun> runs, std::size_t folds);

// ---------------------------------------------------------------------------
// Experiment configuration and execution

struct ScorerSpec {
  enum class Kind { Reference, Table };
  Kind kind = Kind::Reference;
  scorers::TrainHyper hyper;
  std::filesystem::path table;
  std::optional<std::filesystem::path> synthetic_table;
};

struct RobustnessConfig {
  std::vector<int> percentages{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  int repetitions = 10;

  void validate() const;
};

struct ExperimentConfig {
  std::filesystem::path manifest;
  std::size_t k = 5;
  std::uint64_t root_seed = 0;
  std::vector<Setting> settings{{SettingKind::F}, {SettingKind::C}, {SettingKind::FplusC}};
  std::optional<RobustnessConfig> robustness;
  std::map<Channel, ScorerSpec> scorers;
  std::map<View, generators::GeneratorSpec> generators;
  /// LinearPerImage generators refit their global map on each fold's training pairs.
  bool fit_generators = true;
  preprocess::PreprocessConfig preprocess;
  std::optional<preprocess::AugmentConfig> augment;
  bool include_late_phase = false;
  double fusion_floor = fusion::kDefaultFloor;
  bool acr_report = true;
  /// Optional explicit folds (see parse_split_spec) replacing the k-fold splitter.
  std::optional<std::filesystem::path> split_spec;

  void validate() const;
};

/// Parses the experiment config JSON; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Explicit folds from {"folds": [{"val": ["p1_L", ...], "test": [...]}, ...]};
/// train is every other admitted record.
std::vector<FoldSplit> parse_split_spec(std::string_view json_text, std::span<const StudyRecord> records);

struct FoldInfo {
  std::size_t fold = 0;
  std::size_t train_records = 0, val_records = 0, test_records = 0;
  std::size_t train_patients = 0, val_patients = 0, test_patients = 0;
  fusion::FusionWeights weights;
};

struct GenerationCell {
  View view = View::CC;
  std::vector<std::optional<double>> fold_mse;
  std::vector<std::optional<double>> fold_psnr;
  std::vector<std::optional<double>> fold_ssim;
  std::size_t infinite_psnr = 0;
  Aggregate mse, psnr, ssim;
};

struct ExperimentReport {
  std::uint64_t root_seed = 0;
  std::size_t k = 0;
  std::vector<FoldInfo> folds;
  std::vector<SettingRun> runs;
  std::vector<SettingSummary> summaries;
  std::vector<AcrCell> acr;
  std::vector<GenerationCell> generation;
};

/// Runs every configured setting (and the robustness sweep) over all folds.
/// Per fold, reference scorers train on the training records (validation
/// drives early stopping) and tables are looked up; fusion weights come from
/// the validation records. Folds run on up to `threads` workers; the result
/// does not depend on the worker count.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const DatasetManifest& manifest, std::size_t threads);

}  // namespace fusionbiopsy::harness
