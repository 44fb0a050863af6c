#include <algorithm>
#include <fstream>
#include <sstream>

#include "fusionbiopsy/harness.hpp"
#include "fusionbiopsy/parallel.hpp"
#include "fusionbiopsy/raster.hpp"

namespace fusionbiopsy::harness {

namespace {

using ImageCache = std::map<ScoreKey, GrayImage>;

struct Inputs {
  const ExperimentConfig& cfg;
  SeedPath root;
  std::vector<StudyRecord> records;
  RecordIndex index;
  ImageCache images;
  std::map<std::filesystem::path, ScoreMatrix> tables;
};

struct FoldResult {
  FoldInfo info;
  FoldScores scores;
  std::map<View, std::vector<generators::GenQuality>> quality;
  std::vector<SettingRun> runs;
};

ImageCache load_images(const DatasetManifest& manifest, std::span<const StudyRecord> records,
                       const preprocess::PreprocessConfig& cfg, std::size_t threads) {
  std::vector<std::pair<const StudyRecord*, Channel>> jobs;
  for (const auto& r : records) {
    for (const auto& [ch, path] : r.images) jobs.emplace_back(&r, ch);
  }
  std::vector<std::optional<GrayImage>> out(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const auto& [rec, ch] = jobs[i];
    const Raster raster = read_raster(manifest.resolve(rec->images.at(ch)));
    out[i] = preprocess::preprocess(raster.image, rec->laterality, cfg);
  });
  ImageCache cache;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    cache.emplace(ScoreKey{jobs[i].first->key(), jobs[i].second}, std::move(*out[i]));
  }
  return cache;
}

const GrayImage* cached(const ImageCache& images, const RecordKey& key, Channel ch) {
  auto it = images.find({key, ch});
  return it == images.end() ? nullptr : &it->second;
}

scorers::LabeledImages labeled(const Inputs& in, const std::set<RecordKey>& keys, Channel ch) {
  scorers::LabeledImages out;
  for (const auto& key : keys) {
    if (const GrayImage* img = cached(in.images, key, ch)) out.emplace_back(*img, in.index.at(key)->label);
  }
  return out;
}

/// Table lookups for every record of `keys` that has channel `ch`; absent
/// rows are collected into `missing`.
void copy_scores(const ScoreMatrix& table, const Inputs& in, const std::set<RecordKey>& keys, Channel ch,
                 ScoreMatrix& dst, std::vector<std::string>& missing, bool require_image) {
  for (const auto& key : keys) {
    if (require_image && !in.index.at(key)->has(ch)) continue;
    if (auto p = table.find({key, ch})) {
      dst.insert({key, ch}, *p);
    } else {
      missing.push_back("(" + key.patient_id + ", " + std::string(to_string(key.laterality)) + ", " +
                        std::string(to_string(ch.modality)) + ", " + std::string(to_string(ch.view)) + ")");
    }
  }
}

std::map<View, generators::GeneratorSpec> fitted_generators(const Inputs& in, const FoldSplit& split) {
  auto gens = in.cfg.generators;
  if (!in.cfg.fit_generators) return gens;
  for (auto& [view, g] : gens) {
    if (g.kind != generators::GeneratorKind::LinearPerImage) continue;
    std::vector<std::pair<const GrayImage*, const GrayImage*>> pairs;
    for (const auto& key : split.train) {
      const GrayImage* f = cached(in.images, key, {Modality::F, view});
      const GrayImage* c = cached(in.images, key, {Modality::C, view});
      if (f && c) pairs.emplace_back(f, c);
    }
    if (!pairs.empty()) std::tie(g.gain, g.offset) = generators::fit_affine_pooled(pairs);
  }
  return gens;
}

std::vector<Setting> expand_settings(const ExperimentConfig& cfg) {
  std::vector<Setting> out;
  auto add = [&](Setting s) {
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  };
  for (const auto& s : cfg.settings) add(s);
  if (cfg.robustness) {
    for (int n : cfg.robustness->percentages) add({SettingKind::Cstar, n});
    for (int n : cfg.robustness->percentages) add({SettingKind::FplusCstar, n});
  }
  return out;
}

int repetitions_for(const ExperimentConfig& cfg, const Setting& s) {
  if (!s.starred()) return 1;
  return cfg.robustness ? cfg.robustness->repetitions : RobustnessConfig{}.repetitions;
}

FoldResult run_fold(const Inputs& in, const FoldSplit& split, const std::vector<Setting>& settings) {
  const ExperimentConfig& cfg = in.cfg;
  const SeedPath fold_seed = in.root.child("fold", static_cast<std::int64_t>(split.fold_index));
  FoldResult res;

  // Synthetic CESM for the test records.
  std::map<ScoreKey, GrayImage> synth;
  if (!cfg.generators.empty()) {
    const auto gens = fitted_generators(in, split);
    for (const auto& [view, gen] : gens) {
      const Channel f_ch{Modality::F, view}, c_ch{Modality::C, view};
      for (const auto& key : split.test) {
        const GrayImage* f = cached(in.images, key, f_ch);
        if (!f) continue;
        generators::GenerationContext ctx;
        ctx.record = key;
        ctx.noise_seed = in.root.child("synth:" + to_string(key), static_cast<std::int64_t>(view));
        GrayImage img = generators::generate(gen, *f, ctx);
        if (const GrayImage* real = cached(in.images, key, c_ch)) {
          res.quality[view].push_back(generators::eval_generation(img, *real));
        }
        synth.emplace(ScoreKey{key, c_ch}, std::move(img));
      }
    }
  }

  std::vector<std::string> missing;
  for (std::size_t ci = 0; ci < kChannels.size(); ++ci) {
    const Channel ch = kChannels[ci];
    const ScorerSpec& spec = cfg.scorers.at(ch);
    if (spec.kind == ScorerSpec::Kind::Reference) {
      const auto train = labeled(in, split.train, ch);
      const auto val = labeled(in, split.val, ch);
      RandomStream rng = derive_rng(fold_seed.child("train", static_cast<std::int64_t>(ci)));
      const auto result =
          scorers::train_reference(train, val, spec.hyper, rng, cfg.augment ? &*cfg.augment : nullptr);
      for (auto [keys, dst] : {std::pair{&split.val, &res.scores.val}, std::pair{&split.test, &res.scores.test}}) {
        for (const auto& key : *keys) {
          if (const GrayImage* img = cached(in.images, key, ch)) dst->insert({key, ch}, result.scorer.score(*img));
        }
      }
      if (ch.modality == Modality::C) {
        for (const auto& [sk, img] : synth) {
          if (sk.channel == ch) res.scores.test_synth.insert(sk, result.scorer.score(img));
        }
      }
    } else {
      const ScoreMatrix& table = in.tables.at(spec.table);
      copy_scores(table, in, split.val, ch, res.scores.val, missing, true);
      copy_scores(table, in, split.test, ch, res.scores.test, missing, true);
      if (spec.synthetic_table) {
        std::vector<std::string> ignored;
        copy_scores(in.tables.at(*spec.synthetic_table), in, split.test, ch, res.scores.test_synth, ignored, false);
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "score table lacks " + std::to_string(missing.size()) + " row(s):";
    for (const auto& m : missing) msg += " " + m;
    throw Error(ErrorCode::MissingChannel, msg);
  }

  std::map<RecordKey, BiopsyLabel> val_labels;
  for (const auto& key : split.val) val_labels[key] = in.index.at(key)->label;
  res.info.fold = split.fold_index;
  res.info.train_records = split.train.size();
  res.info.val_records = split.val.size();
  res.info.test_records = split.test.size();
  res.info.train_patients = FoldSplit::patients(split.train).size();
  res.info.val_patients = FoldSplit::patients(split.val).size();
  res.info.test_patients = FoldSplit::patients(split.test).size();
  res.info.weights = fusion::compute_weights(res.scores.val, val_labels, cfg.fusion_floor);

  const auto test_patients = FoldSplit::patients(split.test);
  for (const Setting& s : settings) {
    if (!s.starred()) {
      res.runs.push_back(run_setting(split, s, res.scores, res.info.weights, in.index));
      continue;
    }
    for (int r = 0; r < repetitions_for(cfg, s); ++r) {
      // Cstar(n) and FplusCstar(n) share the subset drawn for (fold, n, r).
      RandomStream rng = derive_rng(fold_seed.child("robust", s.percent).child("rep", r));
      const auto chosen = select_synthetic_patients(test_patients, s.percent, rng);
      SettingRun run = run_setting(split, s, res.scores, res.info.weights, in.index, chosen);
      run.repetition = r;
      res.runs.push_back(std::move(run));
    }
  }
  return res;
}

bool needs_synthetic(const std::vector<Setting>& settings) {
  return std::any_of(settings.begin(), settings.end(),
                     [](const Setting& s) { return s.all_synthetic() || (s.starred() && s.percent > 0); });
}

std::vector<GenerationCell> generation_cells(const std::vector<FoldResult>& folds) {
  std::vector<GenerationCell> cells;
  for (View v : kViews) {
    GenerationCell cell;
    cell.view = v;
    bool any = false;
    for (const auto& f : folds) {
      auto it = f.quality.find(v);
      if (it == f.quality.end() || it->second.empty()) {
        cell.fold_mse.emplace_back();
        cell.fold_psnr.emplace_back();
        cell.fold_ssim.emplace_back();
        continue;
      }
      any = true;
      std::vector<std::optional<double>> mse, psnr, ssim;
      for (const auto& q : it->second) {
        mse.emplace_back(q.mse);
        ssim.emplace_back(q.ssim);
        if (q.psnr_infinite) ++cell.infinite_psnr;
        else psnr.emplace_back(q.psnr);
      }
      cell.fold_mse.push_back(aggregate(mse).mean);
      cell.fold_psnr.push_back(aggregate(psnr).mean);
      cell.fold_ssim.push_back(aggregate(ssim).mean);
    }
    if (!any) continue;
    cell.mse = aggregate(cell.fold_mse);
    cell.psnr = aggregate(cell.fold_psnr);
    cell.ssim = aggregate(cell.fold_ssim);
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnresolvablePath, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const DatasetManifest& manifest, std::size_t threads) {
  cfg.validate();
  const auto settings = expand_settings(cfg);

  bool any_reference = false;
  for (const auto& [ch, spec] : cfg.scorers) any_reference |= spec.kind == ScorerSpec::Kind::Reference;
  if (needs_synthetic(settings)) {
    for (View v : kViews) {
      const ScorerSpec& spec = cfg.scorers.at({Modality::C, v});
      const bool ok = spec.kind == ScorerSpec::Kind::Reference ? cfg.generators.contains(v)
                                                                : spec.synthetic_table.has_value();
      if (!ok) {
        throw Error(ErrorCode::UntrainedScorer, "settings need synthetic CESM but channel " +
                                                    channel_key({Modality::C, v}) +
                                                    " has no generator or synthetic score table");
      }
    }
  }

  Inputs in{cfg, SeedPath{cfg.root_seed, {}}, biopsy_records(manifest, cfg.include_late_phase), {}, {}, {}};
  for (const auto& r : in.records) in.index[r.key()] = &r;
  if (any_reference || !cfg.generators.empty()) {
    in.images = load_images(manifest, in.records, cfg.preprocess, threads);
  }
  for (const auto& [ch, spec] : cfg.scorers) {
    if (spec.kind != ScorerSpec::Kind::Table) continue;
    if (!in.tables.contains(spec.table)) in.tables[spec.table] = load_score_table(spec.table);
    if (spec.synthetic_table && !in.tables.contains(*spec.synthetic_table)) {
      in.tables[*spec.synthetic_table] = load_score_table(*spec.synthetic_table);
    }
  }

  std::vector<FoldSplit> splits;
  if (cfg.split_spec) {
    splits = parse_split_spec(read_file(*cfg.split_spec), in.records);
  } else {
    RandomStream rng = derive_rng(in.root.child("split"));
    splits = stratified_group_kfold(in.records, cfg.k, rng);
  }

  std::vector<FoldResult> folds(splits.size());
  parallel_for(splits.size(), threads, [&](std::size_t i) { folds[i] = run_fold(in, splits[i], settings); });

  ExperimentReport report;
  report.root_seed = cfg.root_seed;
  report.k = splits.size();
  for (auto& f : folds) report.folds.push_back(f.info);
  for (const Setting& s : settings) {
    for (const auto& f : folds) {
      for (const auto& run : f.runs) {
        if (run.setting == s) report.runs.push_back(run);
      }
    }
    report.summaries.push_back(summarize(s, report.runs, splits.size()));
  }
  if (cfg.acr_report) report.acr = acr_stratified_report(report.runs, splits.size());
  report.generation = generation_cells(folds);
  return report;
}

}  // namespace fusionbiopsy::harness
