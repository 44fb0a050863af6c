#include "fusionbiopsy/fixture.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "fusionbiopsy/random.hpp"
#include "fusionbiopsy/raster.hpp"

namespace fusionbiopsy::fixture {

using nlohmann::json;

void FixtureSpec::validate() const {
  auto fraction = [](double f, const char* what) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorCode::InvalidConfig, std::string(what) + " must be in [0,1]");
  };
  if (patients < 2) throw Error(ErrorCode::InvalidConfig, "fixture needs at least 2 patients");
  fraction(malignant_fraction, "malignant_fraction");
  fraction(bilateral_fraction, "bilateral_fraction");
  fraction(missing_cesm_fraction, "missing_cesm_fraction");
  for (Channel ch : kChannels) {
    auto it = margin.find(ch);
    if (it == margin.end() || !(it->second >= 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "fixture margin for " + channel_key(ch) + " must be >= 0");
    }
  }
  if (!(jitter >= 0.0) || !(pixel_noise >= 0.0) || !(unit > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "fixture jitter/noise must be >= 0 and unit > 0");
  }
  if (width < 16 || height < 16) throw Error(ErrorCode::InvalidConfig, "fixture images must be at least 16x16");
  if (target_size < 8) throw Error(ErrorCode::InvalidConfig, "fixture target_size must be >= 8");
}

FixtureSpec parse_fixture_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("fixture spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "fixture spec must be an object");
  FixtureSpec s;
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "patients") s.patients = v.get<std::size_t>();
      else if (key == "malignant_fraction") s.malignant_fraction = v.get<double>();
      else if (key == "bilateral_fraction") s.bilateral_fraction = v.get<double>();
      else if (key == "missing_cesm_fraction") s.missing_cesm_fraction = v.get<double>();
      else if (key == "jitter") s.jitter = v.get<double>();
      else if (key == "unit") s.unit = v.get<double>();
      else if (key == "pixel_noise") s.pixel_noise = v.get<double>();
      else if (key == "width") s.width = v.get<std::size_t>();
      else if (key == "height") s.height = v.get<std::size_t>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "target_size") s.target_size = v.get<std::size_t>();
      else if (key == "margin") {
        // Either one number per modality {"F": .., "C": ..} or per channel {"F_CC": ..}.
        for (const auto& [mk, mv] : v.items()) {
          bool matched = false;
          for (Channel ch : kChannels) {
            if (mk == to_string(ch.modality) || mk == channel_key(ch)) {
              s.margin[ch] = mv.get<double>();
              matched = true;
            }
          }
          if (!matched) throw Error(ErrorCode::InvalidConfig, "unknown margin key '" + mk + "'");
        }
      } else {
        throw Error(ErrorCode::InvalidConfig, "unknown fixture spec key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("fixture spec has a wrong type: ") + e.what());
  }
  s.validate();
  return s;
}

std::size_t malignant_patients(const FixtureSpec& spec) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(spec.patients) * spec.malignant_fraction));
}

namespace {

struct ViewGeometry {
  double breast_rows;  // semi-axis, fraction of height
  double breast_cols;  // semi-axis, fraction of width
  double lesion_row;   // fraction of height
  double lesion_col;   // fraction of width
};

ViewGeometry geometry(View v) {
  return v == View::CC ? ViewGeometry{0.42, 0.72, 0.45, 0.38} : ViewGeometry{0.47, 0.66, 0.58, 0.32};
}

/// One image in right-breast orientation (chest wall on the left edge).
GrayImage render(const FixtureSpec& spec, Channel ch, BiopsyLabel label, RandomStream& rng) {
  const auto w = spec.width, h = spec.height;
  const ViewGeometry g = geometry(ch.view);
  const double tissue = 90.0;
  const double background = 8.0;

  const double s = label == BiopsyLabel::Malignant ? 1.0 : -1.0;
  const double amplitude = 45.0 + s * spec.margin.at(ch) * spec.unit + spec.jitter * spec.unit * rng.normal();
  const double lr = g.lesion_row * static_cast<double>(h) + rng.uniform(-1.5, 1.5);
  const double lc = g.lesion_col * static_cast<double>(w) + rng.uniform(-1.5, 1.5);
  const double sigma = 0.06 * static_cast<double>(std::min(w, h));
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  std::vector<double> px(w * h);
  const double cr = static_cast<double>(h) / 2.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double y = (static_cast<double>(r) - cr) / (g.breast_rows * static_cast<double>(h));
      const double x = static_cast<double>(c) / (g.breast_cols * static_cast<double>(w));
      double v = background;
      if (x * x + y * y <= 1.0) {
        const double texture = 6.0 * std::sin(0.35 * static_cast<double>(c) + 0.2 * static_cast<double>(r) + phase);
        const double dr = static_cast<double>(r) - lr, dc = static_cast<double>(c) - lc;
        v = tissue * (1.0 - 0.25 * x * x) + texture + amplitude * std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
        // Bright chest-wall band pins the upper stretch percentile above every lesion.
        if (static_cast<double>(c) < 0.08 * static_cast<double>(w)) v = 210.0 + texture;
      }
      px[r * w + c] = std::clamp(v + spec.pixel_noise * rng.normal(), 0.0, 255.0);
    }
  }
  return GrayImage(w, h, std::move(px));
}

std::string image_name(const RecordKey& key, Channel ch) {
  return "images/" + key.patient_id + "_" + std::string(to_string(key.laterality)) + "_" + channel_key(ch) + ".pgm";
}

json default_config(const FixtureSpec& spec) {
  const std::size_t feature_side = spec.target_size % 8 == 0 ? 8 : spec.target_size;
  return {{"manifest", "manifest.json"},
          {"k", 5},
          {"root_seed", spec.seed},
          {"settings", {"F", "C", "Chat", "FplusC", "FplusChat"}},
          {"scorers",
           {{"kind", "reference"},
            {"hyper",
             {{"learning_rate", 0.5},
              {"weight_decay", 1e-3},
              {"max_epochs", 200},
              {"patience", 30},
              {"warmup", 20},
              {"lr_drop_factor", 0.1},
              {"lr_drop_patience", 10},
              {"feature_side", feature_side}}}}},
          {"generators", {{"kind", "identity"}, {"noise_sigma", 0.01}}},
          {"preprocess", {{"target_size", spec.target_size}}}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnresolvablePath, "cannot write " + path.string());
  out << text;
}

}  // namespace

DatasetManifest write_fixture(const FixtureSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir / "images");
  const SeedPath root{spec.seed, {}};
  RandomStream meta = derive_rng(root.child("fixture-meta"));

  const std::size_t n = spec.patients;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  meta.shuffle(order);
  std::vector<BiopsyLabel> labels(n, BiopsyLabel::Benign);
  const std::size_t n_mal = malignant_patients(spec);
  for (std::size_t i = 0; i < n_mal; ++i) labels[order[i]] = BiopsyLabel::Malignant;
  meta.shuffle(order);
  std::vector<bool> bilateral(n, false);
  const auto n_bi = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.bilateral_fraction));
  for (std::size_t i = 0; i < n_bi; ++i) bilateral[order[i]] = true;

  static constexpr AcrCategory kAcr[] = {AcrCategory::A, AcrCategory::B, AcrCategory::C, AcrCategory::D,
                                         AcrCategory::NotReported};
  static constexpr double kAcrCdf[] = {0.10, 0.50, 0.85, 0.95, 1.0};
  const int width = static_cast<int>(std::to_string(n).size());

  DatasetManifest manifest;
  manifest.root = out_dir;
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = std::to_string(i + 1);
    id = "P" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    const Laterality first = meta.below(2) == 0 ? Laterality::Left : Laterality::Right;
    std::vector<Laterality> sides{first};
    if (bilateral[i]) sides.push_back(first == Laterality::Left ? Laterality::Right : Laterality::Left);
    for (Laterality lat : sides) {
      StudyRecord rec;
      rec.patient_id = id;
      rec.laterality = lat;
      rec.label = labels[i];
      const double u = meta.uniform();
      std::size_t a = 0;
      while (u >= kAcrCdf[a]) ++a;
      rec.acr = kAcr[a];
      manifest.records.push_back(std::move(rec));
    }
  }

  std::vector<std::size_t> rec_order(manifest.records.size());
  for (std::size_t i = 0; i < rec_order.size(); ++i) rec_order[i] = i;
  meta.shuffle(rec_order);
  const auto n_missing = static_cast<std::size_t>(
      std::llround(static_cast<double>(rec_order.size()) * spec.missing_cesm_fraction));
  std::vector<bool> no_cesm(rec_order.size(), false);
  for (std::size_t i = 0; i < n_missing; ++i) no_cesm[rec_order[i]] = true;

  for (std::size_t ri = 0; ri < manifest.records.size(); ++ri) {
    StudyRecord& rec = manifest.records[ri];
    const RecordKey key = rec.key();
    for (std::size_t ci = 0; ci < kChannels.size(); ++ci) {
      const Channel ch = kChannels[ci];
      if (ch.modality == Modality::C && no_cesm[ri]) continue;
      RandomStream rng = derive_rng(root.child("fixture-image:" + to_string(key), static_cast<std::int64_t>(ci)));
      GrayImage img = render(spec, ch, rec.label, rng);
      if (rec.laterality == Laterality::Left) {
        std::vector<double> flipped(img.pixels().size());
        for (std::size_t r = 0; r < img.height(); ++r) {
          for (std::size_t c = 0; c < img.width(); ++c) flipped[r * img.width() + c] = img.at(r, img.width() - 1 - c);
        }
        img = GrayImage(img.width(), img.height(), std::move(flipped));
      }
      const std::string name = image_name(key, ch);
      write_pgm(out_dir / name, img, 255);
      rec.images.emplace(ch, name);
    }
  }

  write_text(out_dir / "manifest.json", serialize_manifest(manifest) + "\n");
  write_text(out_dir / "config.json", default_config(spec).dump(2) + "\n");
  return manifest;
}

}  // namespace fusionbiopsy::fixture
