#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "fusionbiopsy/core.hpp"

namespace fusionbiopsy::metrics {

/// Binary confusion counts, Malignant as the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  std::size_t positives() const { return tp + fn; }
  std::size_t negatives() const { return tn + fp; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Throws LengthMismatch or Empty.
ConfusionCounts confusion(std::span<const BiopsyLabel> preds, std::span<const BiopsyLabel> truth);

/// (TP*TN - FP*FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN)); 0 when the denominator vanishes.
double mcc(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);       // 0 without positives
double specificity(const ConfusionCounts& c);  // 0 without negatives
double gmean(const ConfusionCounts& c);

/// Mann-Whitney AUC (ties count 1/2). nullopt when a class is absent.
std::optional<double> auc(std::span<const double> scores, std::span<const BiopsyLabel> truth);

/// One evaluation of a test slice. AUC and MCC are null on single-class slices.
struct MetricsTriple {
  std::optional<double> auc;
  double gmean = 0.0;
  std::optional<double> mcc;
  ConfusionCounts counts;
};

MetricsTriple evaluate(std::span<const double> scores, std::span<const BiopsyLabel> preds,
                       std::span<const BiopsyLabel> truth);

}  // namespace fusionbiopsy::metrics
