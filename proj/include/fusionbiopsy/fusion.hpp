#pragma once

#include <map>
#include <string>

#include "fusionbiopsy/core.hpp"
#include "fusionbiopsy/scorers.hpp"

namespace fusionbiopsy::fusion {

inline constexpr double kDefaultFloor = 1e-6;

/// Validation MCCs used as late-fusion weights. Values are stored raw
/// (possibly <= 0); the floor is applied only when fusing.
struct FusionWeights {
  std::map<Channel, double> view_mcc;
  std::map<Modality, double> modality_mcc;
  double floor = kDefaultFloor;

  double view_weight(Modality m, View v) const;
  double modality_weight(Modality m) const;
  /// True when any stored MCC is below the floor.
  bool floor_triggered() const;

  /// {"view_mcc": {"F_CC": ..}, "modality_mcc": {"F": ..}, "floor": ..}
  std::string to_json() const;
};

/// sum_i p_i * max(w_i, floor) / sum_i max(w_i, floor) over two inputs.
double weighted_average(double p_a, double p_b, double w_a, double w_b, double floor);

inline double fuse_views(double p_cc, double p_mlo, double w_cc, double w_mlo, double floor = kDefaultFloor) {
  return weighted_average(p_cc, p_mlo, w_cc, w_mlo, floor);
}

inline double fuse_modalities(double p_f, double p_c, double w_f, double w_c, double floor = kDefaultFloor) {
  return weighted_average(p_f, p_c, w_f, w_c, floor);
}

/// View-fused probability of one modality for one record.
double fuse_record_views(const ScoreMatrix& scores, const RecordKey& record, Modality m,
                         const FusionWeights& weights);

/// MCC of each channel's thresholded predictions, then MCC of each
/// modality's view-fused predictions. Channels are evaluated on the records
/// that have them; a modality on records that have both of its views.
/// Throws EmptyValidation when a channel has no validation scores.
FusionWeights compute_weights(const ScoreMatrix& val_scores, const std::map<RecordKey, BiopsyLabel>& val_labels,
                              double floor = kDefaultFloor);

struct RecordDecision {
  double p = 0.0;
  BiopsyLabel label = BiopsyLabel::Benign;
  double p_f = 0.0;
  double p_c = 0.0;
};

/// Full two-stage fusion for one record whose four channel probabilities
/// are in `scores` (CESM ones may be synthetic). Throws MissingChannel.
RecordDecision classify_record(const ScoreMatrix& scores, const RecordKey& record, const FusionWeights& weights);

}  // namespace fusionbiopsy::fusion
