#include "fusionbiopsy/fusion.hpp"

#include <algorithm>
#include <set>
#include <vector>

#include <json.hpp>

#include "fusionbiopsy/metrics.hpp"

namespace fusionbiopsy::fusion {

double FusionWeights::view_weight(Modality m, View v) const {
  auto it = view_mcc.find({m, v});
  if (it == view_mcc.end()) {
    throw Error(ErrorCode::MissingChannel, "no fusion weight for channel " + channel_key({m, v}));
  }
  return it->second;
}

double FusionWeights::modality_weight(Modality m) const {
  auto it = modality_mcc.find(m);
  if (it == modality_mcc.end()) {
    throw Error(ErrorCode::MissingChannel, "no fusion weight for modality " + std::string(to_string(m)));
  }
  return it->second;
}

bool FusionWeights::floor_triggered() const {
  auto below = [&](const auto& kv) { return kv.second < floor; };
  return std::any_of(view_mcc.begin(), view_mcc.end(), below) ||
         std::any_of(modality_mcc.begin(), modality_mcc.end(), below);
}

std::string FusionWeights::to_json() const {
  nlohmann::json views = nlohmann::json::object(), mods = nlohmann::json::object();
  for (const auto& [ch, w] : view_mcc) views[channel_key(ch)] = w;
  for (const auto& [m, w] : modality_mcc) mods[std::string(to_string(m))] = w;
  return nlohmann::json{{"view_mcc", views}, {"modality_mcc", mods}, {"floor", floor}}.dump();
}

double weighted_average(double p_a, double p_b, double w_a, double w_b, double floor) {
  const double a = std::max(w_a, floor);
  const double b = std::max(w_b, floor);
  const double p = (p_a * a + p_b * b) / (a + b);
  // Rounding can leave the quotient one ulp outside the inputs' hull.
  return std::clamp(p, std::min(p_a, p_b), std::max(p_a, p_b));
}

double fuse_record_views(const ScoreMatrix& scores, const RecordKey& record, Modality m,
                         const FusionWeights& weights) {
  const double p_cc = scores.at({record, {m, View::CC}});
  const double p_mlo = scores.at({record, {m, View::MLO}});
  return fuse_views(p_cc, p_mlo, weights.view_weight(m, View::CC), weights.view_weight(m, View::MLO),
                    weights.floor);
}

FusionWeights compute_weights(const ScoreMatrix& val_scores, const std::map<RecordKey, BiopsyLabel>& val_labels,
                              double floor) {
  FusionWeights weights;
  weights.floor = floor;

  for (Channel ch : kChannels) {
    std::vector<BiopsyLabel> preds, truth;
    for (const auto& [record, label] : val_labels) {
      if (auto p = val_scores.find({record, ch})) {
        preds.push_back(predict_class(*p));
        truth.push_back(label);
      }
    }
    if (preds.empty()) {
      throw Error(ErrorCode::EmptyValidation, "no validation scores for channel " + channel_key(ch));
    }
    weights.view_mcc[ch] = metrics::mcc(metrics::confusion(preds, truth));
  }

  for (Modality m : kModalities) {
    std::vector<BiopsyLabel> preds, truth;
    for (const auto& [record, label] : val_labels) {
      if (!val_scores.contains({record, {m, View::CC}}) || !val_scores.contains({record, {m, View::MLO}})) continue;
      preds.push_back(predict_class(fuse_record_views(val_scores, record, m, weights)));
      truth.push_back(label);
    }
    if (preds.empty()) {
      throw Error(ErrorCode::EmptyValidation, "no validation records with both views of modality " +
                                                  std::string(to_string(m)));
    }
    weights.modality_mcc[m] = metrics::mcc(metrics::confusion(preds, truth));
  }
  return weights;
}

RecordDecision classify_record(const ScoreMatrix& scores, const RecordKey& record, const FusionWeights& weights) {
  RecordDecision d;
  d.p_f = fuse_record_views(scores, record, Modality::F, weights);
  d.p_c = fuse_record_views(scores, record, Modality::C, weights);
  d.p = fuse_modalities(d.p_f, d.p_c, weights.modality_weight(Modality::F), weights.modality_weight(Modality::C),
                        weights.floor);
  d.label = predict_class(d.p);
  return d;
}

}  // namespace fusionbiopsy::fusion
