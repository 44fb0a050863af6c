#include "fusionbiopsy/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace fusionbiopsy::metrics {

ConfusionCounts confusion(std::span<const BiopsyLabel> preds, std::span<const BiopsyLabel> truth) {
  if (preds.size() != truth.size()) throw Error(ErrorCode::LengthMismatch, "confusion: length mismatch");
  if (preds.empty()) throw Error(ErrorCode::Empty, "confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool pred_pos = preds[i] == BiopsyLabel::Malignant;
    const bool true_pos = truth[i] == BiopsyLabel::Malignant;
    if (pred_pos && true_pos) ++c.tp;
    else if (pred_pos) ++c.fp;
    else if (true_pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double mcc(const ConfusionCounts& c) {
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

double recall(const ConfusionCounts& c) {
  return c.positives() == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.positives());
}

double specificity(const ConfusionCounts& c) {
  return c.negatives() == 0 ? 0.0 : static_cast<double>(c.tn) / static_cast<double>(c.negatives());
}

double gmean(const ConfusionCounts& c) { return std::sqrt(recall(c) * specificity(c)); }

std::optional<double> auc(std::span<const double> scores, std::span<const BiopsyLabel> truth) {
  if (scores.size() != truth.size()) throw Error(ErrorCode::LengthMismatch, "auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of 1-based midranks of the positives, doubled to stay integral.
  std::size_t n_pos = 0;
  std::size_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::size_t twice_midrank = i + 1 + j;  // 2 * ((i+1) + j) / 2
    for (std::size_t t = i; t < j; ++t) {
      if (truth[order[t]] == BiopsyLabel::Malignant) {
        ++n_pos;
        twice_rank_sum += twice_midrank;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  // U = R - n_pos (n_pos + 1) / 2, all doubled.
  const std::size_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsTriple evaluate(std::span<const double> scores, std::span<const BiopsyLabel> preds,
                       std::span<const BiopsyLabel> truth) {
  MetricsTriple m;
  m.counts = confusion(preds, truth);
  m.gmean = gmean(m.counts);
  m.auc = auc(scores, truth);
  if (m.counts.positives() > 0 && m.counts.negatives() > 0) m.mcc = mcc(m.counts);
  return m;
}

}  // namespace fusionbiopsy::metrics
