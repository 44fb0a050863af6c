#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fusionbiopsy/harness.hpp"

namespace fusionbiopsy::harness {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) bad(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      bad("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get(const json& obj, const char* key, T fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    bad(where + "." + key + " has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

scorers::TrainHyper parse_hyper(const json& j, const std::string& where) {
  check_keys(j, {"learning_rate", "weight_decay", "max_epochs", "patience", "warmup", "lr_drop_factor",
                 "lr_drop_patience", "feature_side"},
             where);
  scorers::TrainHyper h;
  h.learning_rate = get(j, "learning_rate", h.learning_rate, where);
  h.weight_decay = get(j, "weight_decay", h.weight_decay, where);
  h.max_epochs = get(j, "max_epochs", h.max_epochs, where);
  h.patience = get(j, "patience", h.patience, where);
  h.warmup = get(j, "warmup", h.warmup, where);
  h.lr_drop_factor = get(j, "lr_drop_factor", h.lr_drop_factor, where);
  h.lr_drop_patience = get(j, "lr_drop_patience", h.lr_drop_patience, where);
  h.feature_side = get(j, "feature_side", h.feature_side, where);
  try {
    h.validate();
  } catch (const Error& e) {
    bad(where + ": " + e.what());
  }
  return h;
}

ScorerSpec parse_scorer(const json& j, const std::filesystem::path& base, const std::string& where) {
  check_keys(j, {"kind", "hyper", "table", "synthetic_table"}, where);
  ScorerSpec s;
  const auto kind = get<std::string>(j, "kind", "reference", where);
  if (kind == "reference") {
    s.kind = ScorerSpec::Kind::Reference;
  } else if (kind == "table") {
    s.kind = ScorerSpec::Kind::Table;
  } else {
    throw Error(ErrorCode::InvalidEnum, where + ".kind: unknown scorer kind '" + kind + "'");
  }
  if (j.contains("hyper")) s.hyper = parse_hyper(j.at("hyper"), where + ".hyper");
  if (s.kind == ScorerSpec::Kind::Table) {
    const auto table = get<std::string>(j, "table", "", where);
    if (table.empty()) throw Error(ErrorCode::MissingField, where + ".table is required for table scorers");
    s.table = resolve(base, table);
    const auto synth = get<std::string>(j, "synthetic_table", "", where);
    if (!synth.empty()) s.synthetic_table = resolve(base, synth);
  }
  return s;
}

generators::GeneratorSpec parse_generator(const json& j, View view, const std::filesystem::path& base,
                                          const std::string& where) {
  check_keys(j, {"kind", "gain", "offset", "path_pattern", "root", "noise_sigma"}, where);
  generators::GeneratorSpec g;
  g.view = view;
  const auto kind = get<std::string>(j, "kind", "identity", where);
  if (kind == "identity") g.kind = generators::GeneratorKind::Identity;
  else if (kind == "linear") g.kind = generators::GeneratorKind::LinearPerImage;
  else if (kind == "external") g.kind = generators::GeneratorKind::External;
  else throw Error(ErrorCode::InvalidEnum, where + ".kind: unknown generator kind '" + kind + "'");
  g.gain = get(j, "gain", g.gain, where);
  g.offset = get(j, "offset", g.offset, where);
  g.path_pattern = get<std::string>(j, "path_pattern", "", where);
  g.root = resolve(base, get<std::string>(j, "root", ".", where));
  g.noise_sigma = get(j, "noise_sigma", g.noise_sigma, where);
  if (!(g.noise_sigma >= 0.0)) bad(where + ".noise_sigma must be >= 0");
  return g;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!split_spec && k < 2) bad("k must be >= 2");
  if (settings.empty() && !robustness) bad("no settings to run");
  for (Channel ch : kChannels) {
    if (!scorers.contains(ch)) throw Error(ErrorCode::MissingField, "no scorer for channel " + channel_key(ch));
  }
  if (robustness) robustness->validate();
  if (!(fusion_floor > 0.0)) bad("fusion_floor must be > 0");
  preprocess.validate();
  if (augment) augment->validate();
  for (const auto& [view, g] : generators) {
    if (g.view != view) bad("generator registered under the wrong view");
  }
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  const std::string where = "config";
  check_keys(doc, {"manifest", "k", "root_seed", "settings", "robustness", "scorers", "generators",
                   "fit_generators", "preprocess", "augment", "include_late_phase", "fusion_floor", "acr_report",
                   "splits"},
             where);

  ExperimentConfig cfg;
  const auto manifest = get<std::string>(doc, "manifest", "", where);
  if (manifest.empty()) throw Error(ErrorCode::MissingField, "config.manifest is required");
  cfg.manifest = resolve(base_dir, manifest);
  cfg.k = get(doc, "k", cfg.k, where);
  cfg.root_seed = get(doc, "root_seed", cfg.root_seed, where);

  if (doc.contains("settings")) {
    if (!doc["settings"].is_array()) bad("config.settings must be an array");
    cfg.settings.clear();
    for (const auto& s : doc["settings"]) {
      if (!s.is_string()) bad("config.settings entries must be strings");
      cfg.settings.push_back(Setting::parse(s.get<std::string>()));
    }
  }

  if (doc.contains("robustness") && !doc["robustness"].is_null()) {
    const json& r = doc["robustness"];
    check_keys(r, {"percentages", "repetitions"}, "config.robustness");
    RobustnessConfig rc;
    rc.percentages = get(r, "percentages", rc.percentages, "config.robustness");
    rc.repetitions = get(r, "repetitions", rc.repetitions, "config.robustness");
    cfg.robustness = rc;
  }

  // "scorers": one spec for all channels, or {"F_CC": spec, ...} per channel.
  const json scorers = doc.value("scorers", json::object());
  bool per_channel = scorers.is_object() && !scorers.empty();
  for (const auto& [key, value] : scorers.items()) {
    bool is_channel = false;
    for (Channel ch : kChannels) is_channel |= key == channel_key(ch);
    per_channel &= is_channel;
  }
  for (Channel ch : kChannels) {
    const std::string ck = channel_key(ch);
    if (per_channel) {
      if (!scorers.contains(ck)) throw Error(ErrorCode::MissingField, "config.scorers." + ck + " is missing");
      cfg.scorers[ch] = parse_scorer(scorers.at(ck), base_dir, "config.scorers." + ck);
    } else {
      cfg.scorers[ch] = parse_scorer(scorers, base_dir, "config.scorers");
    }
  }

  // "generators": one spec for both views, or {"CC": spec, "MLO": spec}.
  if (doc.contains("generators") && !doc["generators"].is_null()) {
    const json& g = doc["generators"];
    if (!g.is_object()) bad("config.generators must be an object");
    const bool per_view = g.contains("CC") || g.contains("MLO");
    for (View v : kViews) {
      const std::string vk(to_string(v));
      if (per_view) {
        if (!g.contains(vk)) throw Error(ErrorCode::MissingField, "config.generators." + vk + " is missing");
        cfg.generators[v] = parse_generator(g.at(vk), v, base_dir, "config.generators." + vk);
      } else {
        cfg.generators[v] = parse_generator(g, v, base_dir, "config.generators");
      }
    }
  }
  cfg.fit_generators = get(doc, "fit_generators", cfg.fit_generators, where);

  if (doc.contains("preprocess")) {
    const json& p = doc["preprocess"];
    const std::string pw = "config.preprocess";
    check_keys(p, {"target_size", "stretch_lo_percentile", "stretch_hi_percentile", "border_frac"}, pw);
    cfg.preprocess.target_size = get(p, "target_size", cfg.preprocess.target_size, pw);
    cfg.preprocess.stretch_lo_percentile = get(p, "stretch_lo_percentile", cfg.preprocess.stretch_lo_percentile, pw);
    cfg.preprocess.stretch_hi_percentile = get(p, "stretch_hi_percentile", cfg.preprocess.stretch_hi_percentile, pw);
    cfg.preprocess.border_frac = get(p, "border_frac", cfg.preprocess.border_frac, pw);
  }
  if (doc.contains("augment") && !doc["augment"].is_null()) {
    const json& a = doc["augment"];
    const std::string aw = "config.augment";
    check_keys(a, {"shift_frac", "zoom_frac", "rot_deg"}, aw);
    preprocess::AugmentConfig ac;
    ac.shift_frac = get(a, "shift_frac", ac.shift_frac, aw);
    ac.zoom_frac = get(a, "zoom_frac", ac.zoom_frac, aw);
    ac.rot_deg = get(a, "rot_deg", ac.rot_deg, aw);
    cfg.augment = ac;
  }
  cfg.include_late_phase = get(doc, "include_late_phase", cfg.include_late_phase, where);
  cfg.fusion_floor = get(doc, "fusion_floor", cfg.fusion_floor, where);
  cfg.acr_report = get(doc, "acr_report", cfg.acr_report, where);
  const auto splits = get<std::string>(doc, "splits", "", where);
  if (!splits.empty()) cfg.split_spec = resolve(base_dir, splits);

  try {
    cfg.validate();
  } catch (const Error& e) {
    if (category_of(e.code()) != ErrorCategory::Config) bad(e.what());
    throw;
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnresolvablePath, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

namespace {

RecordKey parse_record_key(const std::string& text) {
  const auto cut = text.rfind('_');
  if (cut == std::string::npos || cut == 0) bad("bad record key '" + text + "' in split spec");
  return {text.substr(0, cut), parse_laterality(text.substr(cut + 1))};
}

}  // namespace

std::vector<FoldSplit> parse_split_spec(std::string_view json_text, std::span<const StudyRecord> records) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("split spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("folds") || !doc["folds"].is_array() || doc["folds"].empty()) {
    throw Error(ErrorCode::MissingField, "split spec needs a non-empty 'folds' array");
  }
  std::set<RecordKey> known;
  for (const auto& r : records) known.insert(r.key());

  std::vector<FoldSplit> splits;
  for (std::size_t i = 0; i < doc["folds"].size(); ++i) {
    const json& f = doc["folds"][i];
    const std::string where = "split spec fold " + std::to_string(i);
    check_keys(f, {"val", "test"}, where);
    FoldSplit s;
    s.fold_index = i;
    for (auto [name, target] : {std::pair{"val", &s.val}, std::pair{"test", &s.test}}) {
      if (!f.contains(name) || !f[name].is_array()) throw Error(ErrorCode::MissingField, where + " needs '" + name + "'");
      for (const auto& k : f[name]) {
        if (!k.is_string()) bad(where + ": record keys must be strings");
        RecordKey key = parse_record_key(k.get<std::string>());
        if (!known.contains(key)) throw Error(ErrorCode::MissingField, where + ": unknown record " + to_string(key));
        target->insert(std::move(key));
      }
    }
    for (const auto& key : s.val) {
      if (s.test.contains(key)) bad(where + ": record " + to_string(key) + " is in both val and test");
    }
    for (const auto& key : known) {
      if (!s.val.contains(key) && !s.test.contains(key)) s.train.insert(key);
    }
    splits.push_back(std::move(s));
  }
  return splits;
}

}  // namespace fusionbiopsy::harness
