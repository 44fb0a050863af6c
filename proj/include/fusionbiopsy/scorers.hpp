#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusionbiopsy/core.hpp"
#include "fusionbiopsy/preprocess.hpp"
#include "fusionbiopsy/random.hpp"

namespace fusionbiopsy {

/// Identifies one channel probability p_{m,v} of one breast.
struct ScoreKey {
  RecordKey record;
  Channel channel;
  auto operator<=>(const ScoreKey&) const = default;
};

/// Per-(record, modality, view) malignancy probabilities.
class ScoreMatrix {
 public:
  /// Throws OutOfRangeProbability or DuplicateKey.
  void insert(const ScoreKey& key, double p);
  /// Overwrites an existing entry (range still checked).
  void assign(const ScoreKey& key, double p);

  std::optional<double> find(const ScoreKey& key) const;
  double at(const ScoreKey& key) const;  // MissingChannel if absent
  bool contains(const ScoreKey& key) const { return entries_.contains(key); }
  std::size_t size() const { return entries_.size(); }
  const std::map<ScoreKey, double>& entries() const { return entries_; }

 private:
  std::map<ScoreKey, double> entries_;
};

/// CSV with header patient_id,laterality,modality,view,p_malignant.
ScoreMatrix load_score_table(const std::filesystem::path& path);
ScoreMatrix parse_score_table(std::string_view csv_text);
std::string write_score_table(const ScoreMatrix& scores);

/// Malignant iff p >= 0.5.
constexpr BiopsyLabel predict_class(double p) {
  return p >= 0.5 ? BiopsyLabel::Malignant : BiopsyLabel::Benign;
}

namespace scorers {

struct TrainHyper {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  int max_epochs = 300;
  int patience = 50;
  int warmup = 50;
  double lr_drop_factor = 0.1;
  int lr_drop_patience = 10;
  std::size_t feature_side = 16;

  void validate() const;
};

/// Mean-pools a square image into feature_side x feature_side cells
/// (row-major). The image side must be a multiple of feature_side.
std::vector<double> pooled_features(const GrayImage& img, std::size_t feature_side);

/// Logistic model over pooled pixels: p = sigmoid(w . x + b).
class LinearScorer {
 public:
  LinearScorer(std::vector<double> weights, double bias, std::size_t feature_side);

  /// All-zero parameters: scores every image 0.5.
  static LinearScorer zero(std::size_t feature_side);

  double score(const GrayImage& img) const;
  double score_features(std::span<const double> features) const;

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  std::size_t feature_side() const { return feature_side_; }

  /// {"weights": [...], "bias": b, "feature_side": n}
  std::string to_json() const;
  static LinearScorer from_json(std::string_view text);

  bool operator==(const LinearScorer&) const = default;

 private:
  std::vector<double> weights_;
  double bias_;
  std::size_t feature_side_;
};

double sigmoid(double z);

/// Rows of a design matrix plus 0/1 targets.
struct FeatureSet {
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
};

/// Mean cross-entropy + (weight_decay / 2) * |w|^2. `params` is [w..., b].
double objective(std::span<const double> params, const FeatureSet& data, double weight_decay);
/// Analytic gradient of `objective` with respect to [w..., b].
std::vector<double> objective_gradient(std::span<const double> params, const FeatureSet& data,
                                       double weight_decay);

struct TrainHistory {
  std::vector<double> train_loss;  // objective after each epoch's step
  std::vector<double> val_loss;    // validation cross-entropy after each step
  std::vector<double> learning_rate;
  int best_epoch = 0;              // 0 means the initial parameters won
};

struct TrainResult {
  LinearScorer scorer;
  TrainHistory history;
};

using LabeledImages = std::vector<std::pair<GrayImage, BiopsyLabel>>;

/// Full-batch gradient descent on standardized pooled features with the
/// warmup / patience / plateau-lr-drop schedule; returns the parameters with
/// the best validation loss, folded back to raw feature space. When `augment`
/// is given, each epoch trains on a fresh augmentation drawn from `rng`.
/// An empty `val` monitors the training loss instead.
TrainResult train_reference(const LabeledImages& train, const LabeledImages& val, const TrainHyper& hyper,
                            RandomStream& rng, const preprocess::AugmentConfig* augment = nullptr);

}  // namespace scorers
}  // namespace fusionbiopsy
