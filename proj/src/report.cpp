#include "fusionbiopsy/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fusionbiopsy::report {

using nlohmann::json;
using harness::Aggregate;
using harness::SettingKind;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json opt_array(const std::vector<std::optional<double>>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(opt(v));
  return a;
}

json aggregate_json(const Aggregate& a) {
  return {{"mean", opt(a.mean)}, {"se", a.standard_error}, {"n", a.count}, {"excluded", a.excluded}};
}

json metric_aggregates_json(const harness::MetricAggregates& m) {
  return {{"auc", aggregate_json(m.auc)}, {"gmean", aggregate_json(m.gmean)}, {"mcc", aggregate_json(m.mcc)}};
}

json counts_json(const metrics::ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

json run_to_json(const harness::SettingRun& run, bool with_identity) {
  json records = json::array();
  for (const auto& o : run.records) {
    records.push_back({{"patient_id", o.key.patient_id},
                       {"laterality", to_string(o.key.laterality)},
                       {"truth", to_string(o.truth)},
                       {"acr", to_string(o.acr)},
                       {"p", o.p},
                       {"p_f", opt(o.p_f)},
                       {"p_c", opt(o.p_c)},
                       {"pred", to_string(o.pred)},
                       {"synthetic_cesm", o.synthetic_cesm}});
  }
  json j = {{"fold", run.fold},
            {"synthetic_patients", run.synthetic_patients},
            {"metrics",
             {{"auc", opt(run.metrics.auc)},
              {"gmean", run.metrics.gmean},
              {"mcc", opt(run.metrics.mcc)},
              {"counts", counts_json(run.metrics.counts)}}},
            {"records", records}};
  if (with_identity) {
    j["setting"] = run.setting.name();
    j["repetition"] = run.repetition ? json(*run.repetition) : json(nullptr);
  }
  return j;
}

json summary_to_json(const harness::SettingSummary& s, bool with_identity) {
  json j = {{"folds", {{"auc", opt_array(s.fold_auc)}, {"gmean", opt_array(s.fold_gmean)}, {"mcc", opt_array(s.fold_mcc)}}},
            {"aggregate", metric_aggregates_json(s.aggregates)}};
  if (with_identity) {
    j["setting"] = s.setting.name();
    j["repetitions"] = s.repetitions;
  }
  return j;
}

json weights_json(const fusion::FusionWeights& w) {
  json views = json::object(), mods = json::object();
  for (const auto& [ch, v] : w.view_mcc) views[channel_key(ch)] = v;
  for (const auto& [m, v] : w.modality_mcc) mods[std::string(to_string(m))] = v;
  return {{"view_mcc", views}, {"modality_mcc", mods}, {"floor", w.floor}, {"floor_triggered", w.floor_triggered()}};
}

json report_to_json(const harness::ExperimentReport& r) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"records", {{"train", f.train_records}, {"val", f.val_records}, {"test", f.test_records}}},
                     {"patients", {{"train", f.train_patients}, {"val", f.val_patients}, {"test", f.test_patients}}},
                     {"weights", weights_json(f.weights)}});
  }
  json settings = json::array();
  for (const auto& s : r.summaries) settings.push_back(summary_to_json(s, true));
  json runs = json::array();
  for (const auto& run : r.runs) runs.push_back(run_to_json(run, true));
  json acr = json::array();
  for (const auto& c : r.acr) {
    json counts = json::array();
    for (const auto& fc : c.fold_counts) counts.push_back(counts_json(fc));
    acr.push_back({{"setting", c.setting.name()},
                   {"acr", to_string(c.acr)},
                   {"empty", c.empty},
                   {"folds",
                    {{"auc", opt_array(c.fold_auc)},
                     {"gmean", opt_array(c.fold_gmean)},
                     {"mcc", opt_array(c.fold_mcc)},
                     {"counts", counts}}},
                   {"aggregate", metric_aggregates_json(c.aggregates)}});
  }
  json generation = json::array();
  for (const auto& g : r.generation) {
    generation.push_back({{"view", to_string(g.view)},
                          {"folds", {{"mse", opt_array(g.fold_mse)}, {"psnr", opt_array(g.fold_psnr)}, {"ssim", opt_array(g.fold_ssim)}}},
                          {"infinite_psnr", g.infinite_psnr},
                          {"aggregate", {{"mse", aggregate_json(g.mse)}, {"psnr", aggregate_json(g.psnr)}, {"ssim", aggregate_json(g.ssim)}}}});
  }
  return {{"root_seed", r.root_seed}, {"k", r.k},          {"folds", folds},         {"settings", settings},
          {"runs", runs},             {"acr", acr},        {"generation", generation}};
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ParseError, "report.json: " + what); }

void require(const json& obj, const char* key, json::value_t type, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) invalid(where + " lacks '" + key + "'");
  const json& v = obj.at(key);
  const bool number = type == json::value_t::number_float;
  const bool ok = number ? (v.is_number() || v.is_null()) : v.type() == type ||
                  (type == json::value_t::number_unsigned && v.is_number_integer() && !v.is_number_float());
  if (!ok) invalid(where + "." + key + " has the wrong type");
}

void require_aggregate(const json& a, const std::string& where) {
  require(a, "mean", json::value_t::number_float, where);
  require(a, "se", json::value_t::number_float, where);
  require(a, "n", json::value_t::number_unsigned, where);
  require(a, "excluded", json::value_t::number_unsigned, where);
}

std::string scaled(const std::optional<double>& v, double scale) {
  return v ? format_number(*v * scale) : std::string();
}

std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void append_aggregate(std::string& row, const Aggregate& a, double scale) {
  row += "," + scaled(a.mean, scale) + "," + format_number(a.standard_error * scale) + "," + std::to_string(a.count);
}

const harness::SettingSummary* find_summary(const harness::ExperimentReport& r, const harness::Setting& s) {
  for (const auto& sum : r.summaries) {
    if (sum.setting == s) return &sum;
  }
  return nullptr;
}

}  // namespace

std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorCode::Internal, "number formatting failed");
  return std::string(buf, ptr);
}

std::string report_json(const harness::ExperimentReport& report) { return report_to_json(report).dump(2) + "\n"; }

std::string run_json(const harness::SettingRun& run, bool with_identity) {
  return run_to_json(run, with_identity).dump();
}

std::string summary_json(const harness::SettingSummary& summary, bool with_identity) {
  return summary_to_json(summary, with_identity).dump();
}

void validate_report_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(std::string("not JSON: ") + e.what());
  }
  using vt = json::value_t;
  require(doc, "root_seed", vt::number_unsigned, "report");
  require(doc, "k", vt::number_unsigned, "report");
  for (const char* key : {"folds", "settings", "runs", "acr", "generation"}) require(doc, key, vt::array, "report");
  const auto k = doc["k"].get<std::size_t>();
  if (doc["folds"].size() != k) invalid("folds has " + std::to_string(doc["folds"].size()) + " entries, k is " + std::to_string(k));

  for (const auto& f : doc["folds"]) {
    require(f, "fold", vt::number_unsigned, "fold");
    require(f, "weights", vt::object, "fold");
    for (const char* key : {"view_mcc", "modality_mcc"}) require(f["weights"], key, vt::object, "fold.weights");
    for (Channel ch : kChannels) require(f["weights"]["view_mcc"], channel_key(ch).c_str(), vt::number_float, "view_mcc");
    for (const char* m : {"F", "C"}) require(f["weights"]["modality_mcc"], m, vt::number_float, "modality_mcc");
  }
  for (const auto& s : doc["settings"]) {
    require(s, "setting", vt::string, "settings[]");
    harness::Setting::parse(s["setting"].get<std::string>());
    require(s, "repetitions", vt::number_unsigned, "settings[]");
    require(s, "folds", vt::object, "settings[]");
    require(s, "aggregate", vt::object, "settings[]");
    for (const char* m : {"auc", "gmean", "mcc"}) {
      require(s["folds"], m, vt::array, "settings[].folds");
      if (s["folds"][m].size() != k) invalid("settings[].folds." + std::string(m) + " must have k entries");
      require(s["aggregate"], m, vt::object, "settings[].aggregate");
      require_aggregate(s["aggregate"][m], "settings[].aggregate." + std::string(m));
    }
  }
  for (const auto& r : doc["runs"]) {
    require(r, "setting", vt::string, "runs[]");
    require(r, "fold", vt::number_unsigned, "runs[]");
    require(r, "metrics", vt::object, "runs[]");
    require(r, "records", vt::array, "runs[]");
    for (const auto& o : r["records"]) {
      require(o, "patient_id", vt::string, "record");
      require(o, "p", vt::number_float, "record");
      require(o, "pred", vt::string, "record");
      require(o, "truth", vt::string, "record");
    }
  }
}

std::map<std::string, std::string> tables(const harness::ExperimentReport& report) {
  std::map<std::string, std::string> out;

  std::string settings = "setting,repetitions,auc_mean,auc_se,auc_n,gmean_mean,gmean_se,gmean_n,mcc_mean,mcc_se,mcc_n\n";
  std::string folds = "setting,fold,auc,gmean,mcc\n";
  for (const auto& s : report.summaries) {
    std::string row = csv_field(s.setting.name()) + "," + std::to_string(s.repetitions);
    append_aggregate(row, s.aggregates.auc, 100.0);
    append_aggregate(row, s.aggregates.gmean, 100.0);
    append_aggregate(row, s.aggregates.mcc, 100.0);
    settings += row + "\n";
    for (std::size_t f = 0; f < s.fold_gmean.size(); ++f) {
      folds += csv_field(s.setting.name()) + "," + std::to_string(f) + "," + scaled(s.fold_auc[f], 100.0) + "," +
               scaled(s.fold_gmean[f], 100.0) + "," + scaled(s.fold_mcc[f], 100.0) + "\n";
    }
  }
  out["settings.csv"] = settings;
  out["folds.csv"] = folds;

  std::string robust = "n,series,repetitions,auc_mean,auc_se,auc_n,gmean_mean,gmean_se,gmean_n,mcc_mean,mcc_se,mcc_n\n";
  bool any_starred = false;
  for (const auto& s : report.summaries) {
    if (!s.setting.starred()) continue;
    any_starred = true;
    std::string row = std::to_string(s.setting.percent) + "," +
                      (s.setting.kind == SettingKind::Cstar ? "Cstar" : "FplusCstar") + "," + std::to_string(s.repetitions);
    append_aggregate(row, s.aggregates.auc, 100.0);
    append_aggregate(row, s.aggregates.gmean, 100.0);
    append_aggregate(row, s.aggregates.mcc, 100.0);
    robust += row + "\n";
  }
  if (any_starred) out["robustness.csv"] = robust;

  if (!report.acr.empty()) {
    std::string acr = "setting,acr,empty,auc_mean,auc_se,auc_n,gmean_mean,gmean_se,gmean_n,mcc_mean,mcc_se,mcc_n,tp,fp,tn,fn\n";
    for (const auto& c : report.acr) {
      metrics::ConfusionCounts total;
      for (const auto& fc : c.fold_counts) total += fc;
      std::string row = csv_field(c.setting.name()) + "," + std::string(to_string(c.acr)) + "," + (c.empty ? "1" : "0");
      append_aggregate(row, c.aggregates.auc, 100.0);
      append_aggregate(row, c.aggregates.gmean, 100.0);
      append_aggregate(row, c.aggregates.mcc, 100.0);
      row += "," + std::to_string(total.tp) + "," + std::to_string(total.fp) + "," + std::to_string(total.tn) + "," +
             std::to_string(total.fn);
      acr += row + "\n";
    }
    out["acr.csv"] = acr;
  }

  if (!report.generation.empty()) {
    std::string gen = "view,mse_mean,mse_se,mse_n,psnr_mean,psnr_se,psnr_n,ssim_mean,ssim_se,ssim_n,infinite_psnr\n";
    for (const auto& g : report.generation) {
      std::string row(to_string(g.view));
      append_aggregate(row, g.mse, 1.0);
      append_aggregate(row, g.psnr, 1.0);
      append_aggregate(row, g.ssim, 1.0);
      gen += row + "," + std::to_string(g.infinite_psnr) + "\n";
    }
    out["generation.csv"] = gen;
  }
  return out;
}

std::map<std::string, std::string> robustness_plots(const harness::ExperimentReport& report) {
  std::vector<int> ns;
  for (const auto& s : report.summaries) {
    if (s.setting.starred() && std::find(ns.begin(), ns.end(), s.setting.percent) == ns.end()) ns.push_back(s.setting.percent);
  }
  if (ns.empty()) return {};
  std::sort(ns.begin(), ns.end());

  struct Metric {
    const char* key;
    const char* label;
    double lo, hi;
    const Aggregate harness::MetricAggregates::*field;
  };
  const Metric metrics_list[] = {{"auc", "AUC", 0, 100, &harness::MetricAggregates::auc},
                                 {"gmean", "G-mean", 0, 100, &harness::MetricAggregates::gmean},
                                 {"mcc", "MCC", -100, 100, &harness::MetricAggregates::mcc}};
  struct Series {
    const char* name;
    const char* color;
  };
  const Series series[] = {{"F", "#1f77b4"}, {"Cstar", "#ff7f0e"}, {"FplusCstar", "#2ca02c"}};

  constexpr double W = 640, H = 400, L = 60, R = 130, T = 30, B = 50;
  auto px = [&](double n) { return L + (W - L - R) * n / 100.0; };

  std::map<std::string, std::string> out;
  for (const Metric& m : metrics_list) {
    auto py = [&](double v) { return T + (H - T - B) * (m.hi - v) / (m.hi - m.lo); };
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
        << W << " " << H << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << m.label
        << " vs synthetic CESM percentage</text>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int n : ns) {
      svg << "<text x=\"" << px(n) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">" << n
          << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
      const double v = m.lo + (m.hi - m.lo) * i / 4.0;
      svg << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 3 << "\" text-anchor=\"end\" font-size=\"10\">" << v
          << "</text>\n";
    }
    svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">n (%)</text>\n";

    for (std::size_t si = 0; si < std::size(series); ++si) {
      const Series& s = series[si];
      std::vector<std::pair<int, double>> pts;
      for (int n : ns) {
        harness::Setting setting{SettingKind::F};
        if (si == 1) setting = {SettingKind::Cstar, n};
        if (si == 2) setting = {SettingKind::FplusCstar, n};
        const auto* sum = find_summary(report, setting);
        if (!sum) continue;
        const auto& mean = (sum->aggregates.*m.field).mean;
        if (mean) pts.emplace_back(n, *mean * 100.0);
      }
      if (pts.empty()) continue;
      svg << "<g class=\"series\" data-series=\"" << s.name << "\">\n<polyline fill=\"none\" stroke=\"" << s.color
          << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i) svg << (i ? " " : "") << px(pts[i].first) << "," << py(pts[i].second);
      svg << "\"/>\n";
      for (const auto& [n, v] : pts) {
        svg << "<circle cx=\"" << px(n) << "\" cy=\"" << py(v) << "\" r=\"3\" fill=\"" << s.color << "\" data-n=\"" << n
            << "\" data-value=\"" << format_number(v) << "\"/>\n";
      }
      svg << "</g>\n";
      const double ly = T + 16 * static_cast<double>(si);
      svg << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
      svg << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << s.name << "</text>\n";
    }
    svg << "</svg>\n";
    out[std::string("robustness_") + m.key + ".svg"] = svg.str();
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnresolvablePath, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::UnresolvablePath, "write failed: " + path.string());
}

}  // namespace

void write_report(const harness::ExperimentReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "tables");
  write_text(out_dir / "report.json", report_json(report));
  for (const auto& [name, text] : tables(report)) write_text(out_dir / "tables" / name, text);
  const auto plots = robustness_plots(report);
  if (!plots.empty()) {
    std::filesystem::create_directories(out_dir / "plots");
    for (const auto& [name, text] : plots) write_text(out_dir / "plots" / name, text);
  }
}

}  // namespace fusionbiopsy::report
