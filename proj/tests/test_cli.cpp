#include <gtest/gtest.h>

#include <sstream>

#include "fixture_util.hpp"
#include "fusionbiopsy/cli.hpp"
#include "fusionbiopsy/raster.hpp"
#include "fusionbiopsy/report.hpp"

using namespace fusionbiopsy;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "fusionbiopsy");
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Manifest of single-breast patients; image paths are never opened.
std::string manifest_for(const std::vector<std::pair<std::string, bool>>& patients) {
  json m = json::array();
  for (const auto& [id, mal] : patients) {
    json images;
    for (Channel ch : kChannels) images[channel_key(ch)] = id + "_" + channel_key(ch) + ".pgm";
    m.push_back({{"patient_id", id},
                 {"laterality", "R"},
                 {"label", mal ? "malignant" : "benign"},
                 {"acr", "b"},
                 {"phase", "early"},
                 {"images", images}});
  }
  return m.dump(2);
}

std::string table_for(const std::map<std::string, std::array<double, 4>>& rows) {
  std::string csv = "patient_id,laterality,modality,view,p_malignant\n";
  for (const auto& [id, p] : rows) {
    for (std::size_t i = 0; i < 4; ++i) {
      const Channel ch = kChannels[i];
      csv += id + ",R," + std::string(to_string(ch.modality)) + "," + std::string(to_string(ch.view)) + "," +
             report::format_number(p[i]) + "\n";
    }
  }
  return csv;
}

double fuse(double pa, double pb, double wa, double wb) {
  wa = std::max(wa, 1e-6);
  wb = std::max(wb, 1e-6);
  return (pa * wa + pb * wb) / (wa + wb);
}

const json* find_record(const json& doc, const std::string& setting, const std::string& id) {
  for (const auto& r : doc["runs"])
    if (r["setting"] == setting)
      for (const auto& o : r["records"])
        if (o["patient_id"] == id) return &o;
  return nullptr;
}

}  // namespace

TEST(Cli, UsageAndConfigErrors) {
  CliResult r = run({});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["error"]["code"], "Usage");
  r = run({"run"});
  EXPECT_EQ(r.code, 2);
  r = run({"run", "--config", "/nonexistent/config.json"});
  EXPECT_EQ(r.code, 2);
  const auto err = json::parse(r.err)["error"];
  EXPECT_EQ(err["code"], "UnresolvablePath");
  EXPECT_EQ(err["category"], "config");
  EXPECT_FALSE(err["message"].get<std::string>().empty());
}

TEST(Cli, EvaluateWorkedTable) {
  testutil::TempDir dir("evaluate");
  // Order of the four probabilities: F_CC, F_MLO, C_CC, C_MLO.
  const std::map<std::string, std::array<double, 4>> rows{
      {"a", {0.8, 0.3, 0.9, 0.7}},  // validation, malignant
      {"b", {0.2, 0.6, 0.6, 0.1}},  // validation, benign
      {"c", {0.4, 0.9, 0.3, 0.8}},  // test, malignant
      {"d", {0.6, 0.1, 0.7, 0.2}},  // test, benign
  };
  testutil::spit(dir / "manifest.json", manifest_for({{"a", true}, {"b", false}, {"c", true}, {"d", false}}));
  testutil::spit(dir / "scores.csv", table_for(rows));
  testutil::spit(dir / "splits.json", R"({"folds": [{"val": ["a_R", "b_R"], "test": ["c_R", "d_R"]}]})");
  const CliResult r = run({"evaluate", "--scores", (dir / "scores.csv").string(), "--manifest",
                           (dir / "manifest.json").string(), "--splits", (dir / "splits.json").string(), "--out",
                           (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(testutil::slurp(dir / "out/report.json"));

  // Validation: F_CC perfect (1), F_MLO inverted (-1), C_CC constant (0),
  // C_MLO perfect (1); both view-fused modalities then separate a from b.
  const auto& w = doc["folds"][0]["weights"];
  EXPECT_EQ(w["view_mcc"]["F_CC"], 1.0);
  EXPECT_EQ(w["view_mcc"]["F_MLO"], -1.0);
  EXPECT_EQ(w["view_mcc"]["C_CC"], 0.0);
  EXPECT_EQ(w["view_mcc"]["C_MLO"], 1.0);
  EXPECT_EQ(w["modality_mcc"]["F"], 1.0);
  EXPECT_EQ(w["modality_mcc"]["C"], 1.0);
  EXPECT_TRUE(w["floor_triggered"].get<bool>());

  for (const std::string id : {"c", "d"}) {
    const auto& p = rows.at(id);
    const double pf = fuse(p[0], p[1], 1.0, -1.0);
    const double pc = fuse(p[2], p[3], 0.0, 1.0);
    const double fused = fuse(pf, pc, 1.0, 1.0);
    const json* rec = find_record(doc, "FplusC", id);
    ASSERT_NE(rec, nullptr);
    EXPECT_NEAR((*rec)["p_f"].get<double>(), pf, 1e-12);
    EXPECT_NEAR((*rec)["p_c"].get<double>(), pc, 1e-12);
    EXPECT_NEAR((*rec)["p"].get<double>(), fused, 1e-12);
    EXPECT_NEAR((*find_record(doc, "F", id))["p"].get<double>(), pf, 1e-12);
  }
}

TEST(Cli, EvaluatePerfectCesmTable) {
  testutil::TempDir dir("evaluate");
  std::vector<std::pair<std::string, bool>> patients;
  std::map<std::string, std::array<double, 4>> rows;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "p" + std::to_string(i);
    const bool mal = i % 2 == 0;
    patients.emplace_back(id, mal);
    rows[id] = {0.5, 0.5, mal ? 1.0 : 0.0, mal ? 1.0 : 0.0};
  }
  testutil::spit(dir / "manifest.json", manifest_for(patients));
  testutil::spit(dir / "scores.csv", table_for(rows));
  testutil::spit(dir / "splits.json",
                 R"({"folds": [{"val": ["p0_R", "p1_R", "p2_R", "p3_R"], "test": ["p4_R", "p5_R", "p6_R", "p7_R"]},
                               {"val": ["p4_R", "p5_R", "p6_R", "p7_R"], "test": ["p0_R", "p1_R", "p8_R", "p9_R"]}]})");
  const auto report = cli::cmd_evaluate(dir / "scores.csv", dir / "manifest.json", dir / "splits.json", dir / "out");
  for (const auto& s : report.summaries) {
    if (s.setting.name() == "C") {
      EXPECT_EQ(s.aggregates.mcc.mean, 1.0);
      EXPECT_EQ(s.aggregates.auc.mean, 1.0);
    }
    if (s.setting.name() == "F") EXPECT_EQ(s.aggregates.mcc.mean, 0.0);
  }
}

TEST(Cli, EvaluateMissingRowIsNamed) {
  testutil::TempDir dir("evaluate");
  testutil::spit(dir / "manifest.json", manifest_for({{"a", true}, {"b", false}, {"c", true}, {"d", false}}));
  std::string csv = table_for({{"a", {0.8, 0.3, 0.9, 0.7}},
                               {"b", {0.2, 0.6, 0.6, 0.1}},
                               {"c", {0.4, 0.9, 0.3, 0.8}},
                               {"d", {0.6, 0.1, 0.7, 0.2}}});
  const std::string drop = "c,R,C,MLO,0.8\n";
  csv.erase(csv.find(drop), drop.size());
  testutil::spit(dir / "scores.csv", csv);
  testutil::spit(dir / "splits.json", R"({"folds": [{"val": ["a_R", "b_R"], "test": ["c_R", "d_R"]}]})");
  const CliResult r = run({"evaluate", "--scores", (dir / "scores.csv").string(), "--manifest",
                           (dir / "manifest.json").string(), "--splits", (dir / "splits.json").string(), "--out",
                           (dir / "out").string()});
  EXPECT_EQ(r.code, 3);
  const auto err = json::parse(r.err)["error"];
  EXPECT_EQ(err["code"], "MissingChannel");
  EXPECT_NE(err["message"].get<std::string>().find("(c, R, C, MLO)"), std::string::npos);
}

TEST(Cli, RunWritesReportAndIsDeterministic) {
  testutil::TempDir dir("run");
  const auto cfg = testutil::make_fixture(dir / "data", testutil::small_spec(20), [](json& c) {
    testutil::shorten_training(c);
    c["k"] = 4;
    c["settings"] = {"F", "FplusC"};
  });
  const CliResult r1 = run({"run", "--config", cfg.string(), "--out", (dir / "a").string()});
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_EQ(json::parse(r1.out)["status"], "ok");
  const CliResult r2 = run({"run", "--config", cfg.string(), "--out", (dir / "b").string()});
  ASSERT_EQ(r2.code, 0);
  const std::string a = testutil::slurp(dir / "a/report.json");
  EXPECT_EQ(a, testutil::slurp(dir / "b/report.json"));
  EXPECT_NO_THROW(report::validate_report_json(a));
  const json doc = json::parse(a);
  EXPECT_EQ(doc["k"], 4);
  std::vector<std::string> names;
  for (const auto& s : doc["settings"]) names.push_back(s["setting"]);
  EXPECT_EQ(names, (std::vector<std::string>{"F", "FplusC"}));
  EXPECT_FALSE(std::filesystem::exists(dir / "a/plots"));

  const CliResult r3 = run({"run", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "99",
                            "--folds", "3"});
  ASSERT_EQ(r3.code, 0) << r3.err;
  const json other = json::parse(testutil::slurp(dir / "c/report.json"));
  EXPECT_EQ(other["k"], 3);
  EXPECT_EQ(other["root_seed"], 99);
}

TEST(Cli, GenerateWritesImagesAndQuality) {
  testutil::TempDir dir("generate");
  auto spec = testutil::small_spec(4);
  testutil::make_fixture(dir / "data", spec);
  const CliResult r = run({"generate", "--manifest", (dir / "data/manifest.json").string(), "--config",
                           (dir / "data/config.json").string(), "--out", (dir / "synth").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = load_manifest(dir / "data/manifest.json");
  for (const auto& rec : manifest.records)
    for (View v : kViews) {
      const auto path = dir / "synth" / (rec.patient_id + "_" + std::string(to_string(rec.laterality)) + "_" +
                                         std::string(to_string(v)) + ".pgm");
      ASSERT_TRUE(std::filesystem::exists(path)) << path;
      const Raster img = read_raster(path);
      EXPECT_EQ(img.maxval, 65535u);
      EXPECT_EQ(img.image.width(), spec.target_size);
    }
  const std::string quality = testutil::slurp(dir / "synth/quality.csv");
  EXPECT_EQ(quality.substr(0, quality.find('\n')), "patient_id,laterality,view,mse,psnr,ssim");
  EXPECT_EQ(std::count(quality.begin(), quality.end(), '\n'), 1 + 2 * static_cast<long>(manifest.records.size()));
}

TEST(Cli, FixtureBalanceAndDeterminism) {
  testutil::TempDir dir("fixture");
  const CliResult r = run({"fixture", "--out", (dir / "a").string(), "--patients", "20", "--malignant-fraction",
                           "0.6", "--seed", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  run({"fixture", "--out", (dir / "b").string(), "--patients", "20", "--malignant-fraction", "0.6", "--seed", "7"});
  const auto m = load_manifest(dir / "a/manifest.json");
  std::set<std::string> mal, ben;
  for (const auto& rec : m.records) (rec.label == BiopsyLabel::Malignant ? mal : ben).insert(rec.patient_id);
  EXPECT_EQ(mal.size(), 12u);
  EXPECT_EQ(ben.size(), 8u);
  for (const auto& entry : std::filesystem::directory_iterator(dir / "a/images")) {
    EXPECT_EQ(testutil::slurp(entry.path()), testutil::slurp(dir / "b/images" / entry.path().filename()));
  }
  EXPECT_EQ(testutil::slurp(dir / "a/manifest.json"), testutil::slurp(dir / "b/manifest.json"));
}

TEST(Cli, FixtureSpecFileAndValidation) {
  testutil::TempDir dir("fixture");
  testutil::spit(dir / "spec.json", R"({"patients": 12, "margin": {"F": 0.2, "C": 0.9}, "width": 24, "height": 20})");
  CliResult r = run({"fixture", "--out", (dir / "a").string(), "--spec", (dir / "spec.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_raster(dir / "a/images/P01_R_F_CC.pgm").image.width(), 24u);
  testutil::spit(dir / "bad.json", R"({"patients": 12, "colour": 3})");
  r = run({"fixture", "--out", (dir / "b").string(), "--spec", (dir / "bad.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["error"]["code"], "InvalidConfig");
}

TEST(Cli, NullSignalFixtureGivesChanceLevelMcc) {
  testutil::TempDir dir("null");
  auto spec = testutil::small_spec(60, 3);
  for (auto& [ch, m] : spec.margin) m = 0.0;
  const auto cfg = testutil::make_fixture(dir / "data", spec, [](json& c) {
    testutil::shorten_training(c);
    c["settings"] = {"F", "C"};
  });
  const auto report = cli::cmd_run(cfg, dir / "out");
  for (const auto& s : report.summaries) {
    ASSERT_TRUE(s.aggregates.mcc.mean.has_value());
    EXPECT_LT(std::abs(*s.aggregates.mcc.mean), 0.3) << s.setting.name();
  }
}
