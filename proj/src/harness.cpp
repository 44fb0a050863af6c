#include "fusionbiopsy/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>

namespace fusionbiopsy::harness {

std::set<std::string> FoldSplit::patients(const std::set<RecordKey>& keys) {
  std::set<std::string> out;
  for (const auto& k : keys) out.insert(k.patient_id);
  return out;
}

namespace {

struct PatientGroup {
  std::string id;
  std::int64_t records = 0;
  std::int64_t per_class[2] = {0, 0};
};

std::int64_t sq(std::int64_t v) { return v * v; }

}  // namespace

std::vector<FoldSplit> stratified_group_kfold(std::span<const StudyRecord> records, std::size_t k,
                                              RandomStream& rng) {
  if (k < 2) throw Error(ErrorCode::InvalidConfig, "k-fold needs k >= 2, got " + std::to_string(k));

  std::map<std::string, PatientGroup> by_patient;
  std::int64_t class_total[2] = {0, 0};
  for (const auto& r : records) {
    auto& g = by_patient[r.patient_id];
    g.id = r.patient_id;
    ++g.records;
    ++g.per_class[class_index(r.label)];
    ++class_total[class_index(r.label)];
  }
  for (int c = 0; c < 2; ++c) {
    const auto n = std::count_if(by_patient.begin(), by_patient.end(),
                                 [&](const auto& kv) { return kv.second.per_class[c] > 0; });
    if (static_cast<std::size_t>(n) < k) {
      throw Error(ErrorCode::TooFewPatients,
                  std::to_string(n) + " " + std::string(to_string(static_cast<BiopsyLabel>(c))) +
                      " patients for " + std::to_string(k) + " folds");
    }
  }

  std::vector<PatientGroup> groups;
  groups.reserve(by_patient.size());
  for (auto& [id, g] : by_patient) groups.push_back(g);
  rng.shuffle(groups);
  std::stable_sort(groups.begin(), groups.end(),
                   [](const PatientGroup& a, const PatientGroup& b) { return a.records > b.records; });

  // Costs are scaled by k so every target is an integer: a fold's ideal
  // class-c record count is N_c / k, its ideal patient count P / k.
  const auto kk = static_cast<std::int64_t>(k);
  const auto n_patients = static_cast<std::int64_t>(groups.size());
  std::vector<std::array<std::int64_t, 2>> fold_class(k, {0, 0});
  std::vector<std::int64_t> fold_patients(k, 0);
  std::map<std::string, std::size_t> fold_of;

  // Hard patient capacity: every fold ends with floor(P/k) or ceil(P/k)
  // patients, and at most P mod k folds reach the ceiling.
  const std::int64_t base_size = n_patients / kk, big_folds = n_patients % kk;
  std::int64_t folds_at_ceiling = 0;

  for (const auto& g : groups) {
    std::vector<std::size_t> best;
    std::int64_t best_cost = std::numeric_limits<std::int64_t>::max();
    for (std::size_t f = 0; f < k; ++f) {
      if (fold_patients[f] > base_size || (fold_patients[f] == base_size && folds_at_ceiling >= big_folds)) continue;
      std::int64_t delta = sq(kk * (fold_patients[f] + 1) - n_patients) - sq(kk * fold_patients[f] - n_patients);
      for (int c = 0; c < 2; ++c) {
        delta += sq(kk * (fold_class[f][c] + g.per_class[c]) - class_total[c]) -
                 sq(kk * fold_class[f][c] - class_total[c]);
      }
      if (delta < best_cost) {
        best_cost = delta;
        best.assign(1, f);
      } else if (delta == best_cost) {
        best.push_back(f);
      }
    }
    const std::size_t f = best.size() == 1 ? best[0] : best[rng.below(best.size())];
    fold_of[g.id] = f;
    if (++fold_patients[f] > base_size) ++folds_at_ceiling;
    for (int c = 0; c < 2; ++c) fold_class[f][c] += g.per_class[c];
  }

  std::vector<FoldSplit> splits(k);
  for (std::size_t i = 0; i < k; ++i) {
    splits[i].fold_index = i;
    for (const auto& r : records) {
      const std::size_t f = fold_of.at(r.patient_id);
      if (f == i) splits[i].test.insert(r.key());
      else if (f == (i + 1) % k) splits[i].val.insert(r.key());
      else splits[i].train.insert(r.key());
    }
  }
  return splits;
}

std::string Setting::name() const {
  switch (kind) {
    case SettingKind::F: return "F";
    case SettingKind::C: return "C";
    case SettingKind::Chat: return "Chat";
    case SettingKind::FplusC: return "FplusC";
    case SettingKind::FplusChat: return "FplusChat";
    case SettingKind::Cstar: return "Cstar(" + std::to_string(percent) + ")";
    case SettingKind::FplusCstar: return "FplusCstar(" + std::to_string(percent) + ")";
  }
  throw Error(ErrorCode::Internal, "bad setting kind");
}

Setting Setting::parse(std::string_view text) {
  static const std::pair<std::string_view, SettingKind> plain[] = {
      {"F", SettingKind::F},           {"C", SettingKind::C},
      {"Chat", SettingKind::Chat},     {"FplusC", SettingKind::FplusC},
      {"FplusChat", SettingKind::FplusChat}};
  for (const auto& [s, kind] : plain) {
    if (text == s) return {kind, 0};
  }
  for (auto [prefix, kind] : {std::pair{std::string_view("Cstar("), SettingKind::Cstar},
                              std::pair{std::string_view("FplusCstar("), SettingKind::FplusCstar}}) {
    if (!text.starts_with(prefix) || !text.ends_with(")")) continue;
    const auto digits = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    int n = -1;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty() || n < 0 || n > 100) {
      throw Error(ErrorCode::InvalidEnum, "bad percentage in setting '" + std::string(text) + "'");
    }
    return {kind, n};
  }
  throw Error(ErrorCode::InvalidEnum, "unknown setting '" + std::string(text) + "'");
}

bool Setting::uses_ffdm() const {
  return kind == SettingKind::F || kind == SettingKind::FplusC || kind == SettingKind::FplusChat ||
         kind == SettingKind::FplusCstar;
}

bool Setting::uses_cesm() const { return kind != SettingKind::F; }

bool Setting::all_synthetic() const {
  return kind == SettingKind::Chat || kind == SettingKind::FplusChat || (starred() && percent == 100);
}

namespace {

bool has_both_views(const ScoreMatrix& scores, const RecordKey& key, Modality m) {
  return scores.contains({key, {m, View::CC}}) && scores.contains({key, {m, View::MLO}});
}

}  // namespace

SettingRun run_setting(const FoldSplit& split, const Setting& setting, const FoldScores& scores,
                       const fusion::FusionWeights& weights, const RecordIndex& index,
                       const std::set<std::string>& synthetic_patients) {
  SettingRun run;
  run.setting = setting;
  run.fold = split.fold_index;

  std::set<std::string> imputed;
  std::vector<double> ps;
  std::vector<BiopsyLabel> preds, truth;
  for (const auto& key : split.test) {
    auto it = index.find(key);
    if (it == index.end()) throw Error(ErrorCode::Internal, "test record " + to_string(key) + " not indexed");
    const StudyRecord& rec = *it->second;

    RecordOutcome out;
    out.key = key;
    out.truth = rec.label;
    out.acr = rec.acr;
    if (setting.uses_ffdm()) out.p_f = fusion::fuse_record_views(scores.test, key, Modality::F, weights);
    if (setting.uses_cesm()) {
      out.synthetic_cesm = setting.all_synthetic() || synthetic_patients.contains(key.patient_id) ||
                           !has_both_views(scores.test, key, Modality::C);
      const ScoreMatrix& source = out.synthetic_cesm ? scores.test_synth : scores.test;
      out.p_c = fusion::fuse_record_views(source, key, Modality::C, weights);
      if (out.synthetic_cesm) imputed.insert(key.patient_id);
    }
    if (out.p_f && out.p_c) {
      out.p = fusion::fuse_modalities(*out.p_f, *out.p_c, weights.modality_weight(Modality::F),
                                      weights.modality_weight(Modality::C), weights.floor);
    } else {
      out.p = out.p_f ? *out.p_f : *out.p_c;
    }
    out.pred = predict_class(out.p);

    ps.push_back(out.p);
    preds.push_back(out.pred);
    truth.push_back(out.truth);
    run.records.push_back(std::move(out));
  }
  run.metrics = metrics::evaluate(ps, preds, truth);
  run.synthetic_patients = imputed.size();
  return run;
}

std::set<std::string> select_synthetic_patients(const std::set<std::string>& test_patients, int percent,
                                                RandomStream& rng) {
  if (percent < 0 || percent > 100) {
    throw Error(ErrorCode::InvalidConfig, "percentage out of range: " + std::to_string(percent));
  }
  std::vector<std::string> pool(test_patients.begin(), test_patients.end());
  const std::size_t n = pool.size();
  const std::size_t take = (static_cast<std::size_t>(percent) * n + 99) / 100;
  if (take == n) return test_patients;
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(pool[i], pool[i + rng.below(n - i)]);
  }
  return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take)};
}

Aggregate aggregate(std::span<const std::optional<double>> values) {
  Aggregate a;
  std::vector<double> xs;
  for (const auto& v : values) {
    if (v) xs.push_back(*v);
    else ++a.excluded;
  }
  a.count = xs.size();
  if (xs.empty()) return a;
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
    a.mean = xs.front();
    return a;
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double n = static_cast<double>(xs.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  a.mean = mean;
  a.standard_error = std::sqrt(ss / (n - 1.0) / n);
  return a;
}

namespace {

MetricAggregates aggregate_all(const std::vector<std::optional<double>>& auc,
                               const std::vector<std::optional<double>>& gmean,
                               const std::vector<std::optional<double>>& mcc) {
  return {aggregate(auc), aggregate(gmean), aggregate(mcc)};
}

}  // namespace

SettingSummary summarize(const Setting& setting, std::span<const SettingRun> runs, std::size_t folds) {
  SettingSummary s;
  s.setting = setting;
  s.repetitions = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::optional<double>> auc, gmean, mcc;
    for (const auto& r : runs) {
      if (r.setting != setting || r.fold != f) continue;
      auc.push_back(r.metrics.auc);
      gmean.emplace_back(r.metrics.gmean);
      mcc.push_back(r.metrics.mcc);
    }
    if (gmean.empty()) throw Error(ErrorCode::Internal, "no runs of " + setting.name() + " in fold " + std::to_string(f));
    s.repetitions = std::max(s.repetitions, gmean.size());
    s.fold_auc.push_back(aggregate(auc).mean);
    s.fold_gmean.push_back(aggregate(gmean).mean);
    s.fold_mcc.push_back(aggregate(mcc).mean);
  }
  s.aggregates = aggregate_all(s.fold_auc, s.fold_gmean, s.fold_mcc);
  return s;
}

std::vector<AcrCell> acr_stratified_report(std::span<const SettingRun> runs, std::size_t folds) {
  static constexpr AcrCategory kCategories[] = {AcrCategory::A, AcrCategory::B, AcrCategory::C, AcrCategory::D,
                                                AcrCategory::NotReported};
  std::vector<AcrCell> cells;
  for (Setting setting : {Setting{SettingKind::F}, Setting{SettingKind::FplusC}, Setting{SettingKind::FplusChat}}) {
    std::vector<const SettingRun*> per_fold(folds, nullptr);
    bool present = false;
    for (const auto& r : runs) {
      if (r.setting == setting && r.fold < folds && !per_fold[r.fold]) {
        per_fold[r.fold] = &r;
        present = true;
      }
    }
    if (!present) continue;

    for (AcrCategory cat : kCategories) {
      AcrCell cell;
      cell.setting = setting;
      cell.acr = cat;
      for (std::size_t f = 0; f < folds; ++f) {
        std::vector<double> ps;
        std::vector<BiopsyLabel> preds, truth;
        if (per_fold[f]) {
          for (const auto& o : per_fold[f]->records) {
            if (o.acr != cat) continue;
            ps.push_back(o.p);
            preds.push_back(o.pred);
            truth.push_back(o.truth);
          }
        }
        if (ps.empty()) {
          cell.fold_auc.emplace_back();
          cell.fold_gmean.emplace_back();
          cell.fold_mcc.emplace_back();
          cell.fold_counts.emplace_back();
          continue;
        }
        cell.empty = false;
        const auto m = metrics::evaluate(ps, preds, truth);
        cell.fold_auc.push_back(m.auc);
        cell.fold_gmean.emplace_back(m.gmean);
        cell.fold_mcc.push_back(m.mcc);
        cell.fold_counts.push_back(m.counts);
      }
      cell.aggregates = aggregate_all(cell.fold_auc, cell.fold_gmean, cell.fold_mcc);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void RobustnessConfig::validate() const {
  if (repetitions < 1) throw Error(ErrorCode::InvalidConfig, "robustness.repetitions must be >= 1");
  if (percentages.empty()) throw Error(ErrorCode::InvalidConfig, "robustness.percentages is empty");
  for (int n : percentages) {
    if (n < 0 || n > 100) throw Error(ErrorCode::InvalidConfig, "robustness percentage out of range: " + std::to_string(n));
  }
}

}  // namespace fusionbiopsy::harness
