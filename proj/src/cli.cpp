#include "fusionbiopsy/cli.hpp"

#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fusionbiopsy/parallel.hpp"
#include "fusionbiopsy/preprocess.hpp"
#include "fusionbiopsy/raster.hpp"
#include "fusionbiopsy/report.hpp"

namespace fusionbiopsy::cli {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnresolvablePath, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void apply(harness::ExperimentConfig& cfg, const RunOverrides& o) {
  if (o.seed) cfg.root_seed = *o.seed;
  if (o.folds) cfg.k = *o.folds;
}

harness::ExperimentReport execute(const harness::ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                  const ManifestLoadOptions& opts = {}) {
  const DatasetManifest manifest = load_manifest(cfg.manifest, opts);
  auto report = harness::run_experiment(cfg, manifest, configured_threads());
  report::write_report(report, out_dir);
  return report;
}

}  // namespace

std::string error_json(const std::string& code, const std::string& category, const std::string& message) {
  return nlohmann::json{{"error", {{"code", code}, {"category", category}, {"message", message}}}}.dump();
}

harness::ExperimentReport cmd_run(const std::filesystem::path& config, const std::filesystem::path& out_dir,
                                  const RunOverrides& overrides) {
  auto cfg = harness::load_config(config);
  apply(cfg, overrides);
  cfg.validate();
  return execute(cfg, out_dir);
}

harness::ExperimentReport cmd_robustness(const std::filesystem::path& config, const std::filesystem::path& out_dir,
                                         const RunOverrides& overrides) {
  auto cfg = harness::load_config(config);
  apply(cfg, overrides);
  if (!cfg.robustness) cfg.robustness = harness::RobustnessConfig{};
  std::vector<harness::Setting> settings{{harness::SettingKind::F}, {harness::SettingKind::C},
                                         {harness::SettingKind::FplusC}};
  for (const auto& s : cfg.settings) {
    if (std::find(settings.begin(), settings.end(), s) == settings.end()) settings.push_back(s);
  }
  cfg.settings = settings;
  cfg.validate();
  return execute(cfg, out_dir);
}

harness::ExperimentReport cmd_evaluate(const std::filesystem::path& scores, const std::filesystem::path& manifest,
                                       const std::filesystem::path& split_spec, const std::filesystem::path& out_dir,
                                       const std::optional<std::filesystem::path>& synthetic_scores) {
  harness::ExperimentConfig cfg;
  cfg.manifest = manifest;
  cfg.split_spec = split_spec;
  cfg.settings = {{harness::SettingKind::F}, {harness::SettingKind::C}, {harness::SettingKind::FplusC}};
  if (synthetic_scores) {
    cfg.settings.push_back({harness::SettingKind::Chat});
    cfg.settings.push_back({harness::SettingKind::FplusChat});
  }
  for (Channel ch : kChannels) {
    harness::ScorerSpec spec;
    spec.kind = harness::ScorerSpec::Kind::Table;
    spec.table = scores;
    if (ch.modality == Modality::C) spec.synthetic_table = synthetic_scores;
    cfg.scorers[ch] = spec;
  }
  return execute(cfg, out_dir, ManifestLoadOptions{.check_files = false});
}

void cmd_generate(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& config) {
  preprocess::PreprocessConfig pre;
  std::map<View, generators::GeneratorSpec> gens;
  std::uint64_t seed = 0;
  bool include_late = false;
  if (config) {
    const auto cfg = harness::load_config(*config);
    pre = cfg.preprocess;
    gens = cfg.generators;
    seed = cfg.root_seed;
    include_late = cfg.include_late_phase;
  }
  for (View v : kViews) {
    if (!gens.contains(v)) gens[v] = generators::GeneratorSpec{.view = v};
  }

  const DatasetManifest manifest = load_manifest(manifest_path);
  const auto records = biopsy_records(manifest, include_late);
  std::filesystem::create_directories(out_dir);

  struct Job {
    const StudyRecord* rec;
    View view;
  };
  std::vector<Job> jobs;
  for (const auto& r : records) {
    for (View v : kViews) jobs.push_back({&r, v});
  }
  std::vector<std::optional<generators::GenQuality>> quality(jobs.size());
  const SeedPath root{seed, {}};
  parallel_for(jobs.size(), configured_threads(), [&](std::size_t i) {
    const StudyRecord& rec = *jobs[i].rec;
    const View v = jobs[i].view;
    auto load = [&](Modality m) {
      return preprocess::preprocess(read_raster(manifest.resolve(rec.images.at({m, v}))).image, rec.laterality, pre);
    };
    const GrayImage ffdm = load(Modality::F);
    generators::GenerationContext ctx;
    ctx.record = rec.key();
    ctx.noise_seed = root.child("synth:" + to_string(rec.key()), static_cast<std::int64_t>(v));
    const GrayImage synth = generators::generate(gens.at(v), ffdm, ctx);
    write_pgm(out_dir / (rec.patient_id + "_" + std::string(to_string(rec.laterality)) + "_" +
                         std::string(to_string(v)) + ".pgm"),
              synth, 65535);
    if (rec.has({Modality::C, v})) quality[i] = generators::eval_generation(synth, load(Modality::C));
  });

  std::string csv = "patient_id,laterality,view,mse,psnr,ssim\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!quality[i]) continue;
    const auto& q = *quality[i];
    csv += jobs[i].rec->patient_id + "," + std::string(to_string(jobs[i].rec->laterality)) + "," +
           std::string(to_string(jobs[i].view)) + "," + report::format_number(q.mse) + "," +
           (q.psnr_infinite ? std::string("inf") : report::format_number(q.psnr)) + "," +
           report::format_number(q.ssim) + "\n";
  }
  std::ofstream(out_dir / "quality.csv", std::ios::binary) << csv;
}

fixture::FixtureSpec cmd_fixture(const std::filesystem::path& out_dir, const fixture::FixtureSpec& spec) {
  fixture::write_fixture(spec, out_dir);
  return spec;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal multi-view virtual biopsy pipeline"};
  app.require_subcommand(1);

  std::string config, out_dir = "out", manifest, scores, splits, synthetic, spec_path;
  std::optional<std::uint64_t> seed, fixture_seed;
  std::optional<std::size_t> folds, patients;
  std::optional<double> malignant_fraction;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Experiment config JSON")->required();
    sub->add_option("--seed", seed, "Root seed override");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--folds", folds, "Number of folds override");
  };
  auto* run = app.add_subcommand("run", "Run every configured setting over all folds");
  add_run_flags(run);
  auto* robust = app.add_subcommand("robustness", "Run the synthetic-CESM robustness sweep");
  add_run_flags(robust);

  auto* evaluate = app.add_subcommand("evaluate", "Fuse and score an external probability table");
  evaluate->add_option("--scores", scores, "Score table CSV")->required();
  evaluate->add_option("--manifest", manifest, "Dataset manifest JSON")->required();
  evaluate->add_option("--splits", splits, "Split spec JSON")->required();
  evaluate->add_option("--synthetic-scores", synthetic, "Score table for synthetic CESM channels");
  evaluate->add_option("--out", out_dir, "Output directory");

  auto* generate = app.add_subcommand("generate", "Write synthetic CESM images");
  generate->add_option("--manifest", manifest, "Dataset manifest JSON")->required();
  generate->add_option("--config", config, "Experiment config JSON (generators, preprocessing)");
  generate->add_option("--out", out_dir, "Output directory");

  auto* fixture_cmd = app.add_subcommand("fixture", "Synthesize a fixture dataset");
  fixture_cmd->add_option("--out", out_dir, "Output directory");
  fixture_cmd->add_option("--spec", spec_path, "Fixture spec JSON");
  fixture_cmd->add_option("--patients", patients, "Patient count");
  fixture_cmd->add_option("--malignant-fraction", malignant_fraction, "Share of malignant patients");
  fixture_cmd->add_option("--seed", fixture_seed, "Fixture seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_json("Usage", "config", e.what()) << "\n";
    return exit_code_for(ErrorCategory::Config);
  }

  try {
    const RunOverrides overrides{seed, folds};
    if (run->parsed()) {
      cmd_run(config, out_dir, overrides);
    } else if (robust->parsed()) {
      cmd_robustness(config, out_dir, overrides);
    } else if (evaluate->parsed()) {
      cmd_evaluate(scores, manifest, splits, out_dir,
                   synthetic.empty() ? std::nullopt : std::optional<std::filesystem::path>(synthetic));
    } else if (generate->parsed()) {
      cmd_generate(manifest, out_dir, config.empty() ? std::nullopt : std::optional<std::filesystem::path>(config));
    } else if (fixture_cmd->parsed()) {
      fixture::FixtureSpec spec = spec_path.empty() ? fixture::FixtureSpec{} : fixture::parse_fixture_spec(read_file(spec_path));
      if (patients) spec.patients = *patients;
      if (malignant_fraction) spec.malignant_fraction = *malignant_fraction;
      if (fixture_seed) spec.seed = *fixture_seed;
      cmd_fixture(out_dir, spec);
    }
    out << nlohmann::json{{"status", "ok"}, {"out", out_dir}}.dump() << "\n";
    return 0;
  } catch (const Error& e) {
    static constexpr const char* kCategory[] = {"config", "data", "internal"};
    err << error_json(std::string(to_string(e.code())), kCategory[static_cast<int>(e.category())], e.what()) << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    err << error_json("Internal", "internal", e.what()) << "\n";
    return exit_code_for(ErrorCategory::Internal);
  }
}

}  // namespace fusionbiopsy::cli
