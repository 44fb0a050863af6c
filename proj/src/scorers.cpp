#include "fusionbiopsy/scorers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "fusionbiopsy/simd/kernels.hpp"

namespace fusionbiopsy {

// ---------------------------------------------------------------------------
// ScoreMatrix

namespace {

std::string describe(const ScoreKey& key) {
  return "(" + to_string(key.record) + ", " + std::string(to_string(key.channel.modality)) + ", " +
         std::string(to_string(key.channel.view)) + ")";
}

void check_probability(const ScoreKey& key, double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::OutOfRangeProbability,
                "probability " + std::to_string(p) + " out of [0,1] for " + describe(key));
  }
}

}  // namespace

void ScoreMatrix::insert(const ScoreKey& key, double p) {
  check_probability(key, p);
  if (!entries_.emplace(key, p).second) {
    throw Error(ErrorCode::DuplicateKey, "duplicate score key " + describe(key));
  }
}

void ScoreMatrix::assign(const ScoreKey& key, double p) {
  check_probability(key, p);
  entries_[key] = p;
}

std::optional<double> ScoreMatrix::find(const ScoreKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

double ScoreMatrix::at(const ScoreKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorCode::MissingChannel, "missing score " + describe(key));
  return it->second;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    // trim
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

ScoreMatrix parse_score_table(std::string_view csv_text) {
  std::istringstream in{std::string(csv_text)};
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "score table: empty file");
  const std::vector<std::string> expected{"patient_id", "laterality", "modality", "view", "p_malignant"};
  if (split_csv_line(line) != expected) {
    throw Error(ErrorCode::ParseError,
                "score table: header must be patient_id,laterality,modality,view,p_malignant");
  }

  ScoreMatrix scores;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> f = split_csv_line(line);
    const std::string where = "score table line " + std::to_string(lineno);
    if (f.size() != 5) throw Error(ErrorCode::ParseError, where + ": expected 5 fields");
    if (f[0].empty()) throw Error(ErrorCode::ParseError, where + ": empty patient_id");
    ScoreKey key;
    try {
      key = {{f[0], parse_laterality(f[1])}, {parse_modality(f[2]), parse_view(f[3])}};
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
    double p = 0.0;
    std::size_t used = 0;
    try {
      p = std::stod(f[4], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != f[4].size() || f[4].empty()) {
      throw Error(ErrorCode::ParseError, where + ": bad probability '" + f[4] + "'");
    }
    scores.insert(key, p);
  }
  return scores;
}

ScoreMatrix load_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UnresolvablePath, "cannot open score table " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_score_table(buf.str());
}

std::string write_score_table(const ScoreMatrix& scores) {
  std::ostringstream out;
  out.precision(17);
  out << "patient_id,laterality,modality,view,p_malignant\n";
  for (const auto& [key, p] : scores.entries()) {
    out << key.record.patient_id << ',' << to_string(key.record.laterality) << ','
        << to_string(key.channel.modality) << ',' << to_string(key.channel.view) << ',' << p << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Reference scorer

namespace scorers {

void TrainHyper::validate() const {
  if (!(learning_rate >= 0.0 && weight_decay >= 0.0 && lr_drop_factor > 0.0) || max_epochs <= 0 ||
      patience <= 0 || warmup < 0 || lr_drop_patience <= 0 || feature_side == 0 || patience > max_epochs) {
    throw Error(ErrorCode::InvalidConfig, "invalid training hyperparameters");
  }
}

std::vector<double> pooled_features(const GrayImage& img, std::size_t feature_side) {
  if (!img.square() || feature_side == 0 || img.width() % feature_side != 0) {
    throw Error(ErrorCode::ShapeMismatch, "image side " + std::to_string(img.width()) + "x" +
                                              std::to_string(img.height()) + " does not pool to " +
                                              std::to_string(feature_side));
  }
  const std::size_t block = img.width() / feature_side;
  const double inv_area = 1.0 / static_cast<double>(block * block);
  std::vector<double> out(feature_side * feature_side, 0.0);
  for (std::size_t r = 0; r < img.height(); ++r) {
    const auto row = img.row(r);
    double* cells = out.data() + (r / block) * feature_side;
    for (std::size_t j = 0; j < feature_side; ++j) cells[j] += simd::sum(row.subspan(j * block, block));
  }
  for (double& v : out) v *= inv_area;
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

/// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double cross_entropy_term(double logit, double target) {
  // -[y log s(z) + (1-y) log(1-s(z))] = y softplus(-z) + (1-y) softplus(z)
  return target * softplus(-logit) + (1.0 - target) * softplus(logit);
}

double logit_of(std::span<const double> params, std::span<const double> x) {
  return simd::dot(params.first(x.size()), x) + params.back();
}

double mean_cross_entropy(std::span<const double> params, const FeatureSet& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    total += cross_entropy_term(logit_of(params, data.rows[i]), data.targets[i]);
  }
  return total / static_cast<double>(data.rows.size());
}

}  // namespace

LinearScorer::LinearScorer(std::vector<double> weights, double bias, std::size_t feature_side)
    : weights_(std::move(weights)), bias_(bias), feature_side_(feature_side) {
  if (feature_side_ == 0 || weights_.size() != feature_side_ * feature_side_) {
    throw Error(ErrorCode::ShapeMismatch, "scorer weights do not match feature_side^2");
  }
  for (double w : weights_) {
    if (!std::isfinite(w)) throw Error(ErrorCode::InvalidConfig, "scorer weight is not finite");
  }
  if (!std::isfinite(bias_)) throw Error(ErrorCode::InvalidConfig, "scorer bias is not finite");
}

LinearScorer LinearScorer::zero(std::size_t feature_side) {
  return LinearScorer(std::vector<double>(feature_side * feature_side, 0.0), 0.0, feature_side);
}

double LinearScorer::score_features(std::span<const double> features) const {
  if (features.size() != weights_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "feature vector length does not match scorer");
  }
  return sigmoid(simd::dot(weights_, features) + bias_);
}

double LinearScorer::score(const GrayImage& img) const {
  return score_features(pooled_features(img, feature_side_));
}

std::string LinearScorer::to_json() const {
  nlohmann::json j{{"weights", weights_}, {"bias", bias_}, {"feature_side", feature_side_}};
  return j.dump();
}

LinearScorer LinearScorer::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return LinearScorer(j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>(),
                        j.at("feature_side").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("scorer JSON: ") + e.what());
  }
}

double objective(std::span<const double> params, const FeatureSet& data, double weight_decay) {
  const std::size_t d = params.size() - 1;
  const double decay = 0.5 * weight_decay * simd::dot(params.first(d), params.first(d));
  return mean_cross_entropy(params, data) + decay;
}

std::vector<double> objective_gradient(std::span<const double> params, const FeatureSet& data,
                                       double weight_decay) {
  const std::size_t d = params.size() - 1;
  std::vector<double> grad(params.size(), 0.0);
  std::span<double> gw(grad.data(), d);
  const double inv_n = 1.0 / static_cast<double>(data.rows.size());
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const double residual = (sigmoid(logit_of(params, data.rows[i])) - data.targets[i]) * inv_n;
    simd::axpy(residual, data.rows[i], gw);
    grad[d] += residual;
  }
  simd::axpy(weight_decay, params.first(d), gw);
  return grad;
}

namespace {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const std::vector<std::vector<double>>& rows) {
    const std::size_t d = rows.front().size();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    }
    for (double& m : s.mean) m /= n;
    std::vector<double> var(d, 0.0);
    for (const auto& r : rows) {
      for (std::size_t j = 0; j < d; ++j) var[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / n);
      s.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  std::vector<double> apply(std::vector<double> x) const {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - mean[j]) / scale[j];
    return x;
  }
};

FeatureSet build_set(const LabeledImages& images, std::size_t feature_side, const Standardizer* standardizer) {
  FeatureSet set;
  set.rows.reserve(images.size());
  for (const auto& [img, label] : images) {
    auto x = pooled_features(img, feature_side);
    set.rows.push_back(standardizer ? standardizer->apply(std::move(x)) : std::move(x));
    set.targets.push_back(static_cast<double>(class_index(label)));
  }
  return set;
}

}  // namespace

TrainResult train_reference(const LabeledImages& train, const LabeledImages& val, const TrainHyper& hyper,
                            RandomStream& rng, const preprocess::AugmentConfig* augment) {
  hyper.validate();
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, "reference scorer: empty training set");
  const bool has_pos = std::any_of(train.begin(), train.end(),
                                   [](const auto& s) { return s.second == BiopsyLabel::Malignant; });
  const bool has_neg = std::any_of(train.begin(), train.end(),
                                   [](const auto& s) { return s.second == BiopsyLabel::Benign; });
  if (!has_pos || !has_neg) {
    throw Error(ErrorCode::SingleClassTrainingSet, "reference scorer: training set has a single class");
  }

  const std::size_t fs = hyper.feature_side;
  const FeatureSet raw_train = build_set(train, fs, nullptr);
  const Standardizer standardizer = Standardizer::fit(raw_train.rows);
  FeatureSet train_set = build_set(train, fs, &standardizer);
  const FeatureSet val_set = val.empty() ? train_set : build_set(val, fs, &standardizer);

  const std::size_t d = fs * fs;
  std::vector<double> params(d + 1, 0.0);
  std::vector<double> best = params;
  double best_val = mean_cross_entropy(params, val_set);
  double lr = hyper.learning_rate;
  int since_best = 0;
  int since_plateau_reset = 0;
  TrainHistory history;

  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    if (augment) {
      LabeledImages augmented;
      augmented.reserve(train.size());
      for (const auto& [img, label] : train) augmented.emplace_back(preprocess::augment(img, *augment, rng), label);
      train_set = build_set(augmented, fs, &standardizer);
    }
    const std::vector<double> grad = objective_gradient(params, train_set, hyper.weight_decay);
    simd::axpy(-lr, grad, params);

    const double val_loss = mean_cross_entropy(params, val_set);
    history.train_loss.push_back(objective(params, train_set, hyper.weight_decay));
    history.val_loss.push_back(val_loss);
    history.learning_rate.push_back(lr);

    if (val_loss < best_val) {
      best_val = val_loss;
      best = params;
      history.best_epoch = epoch;
      since_best = 0;
      since_plateau_reset = 0;
    } else {
      ++since_best;
      ++since_plateau_reset;
    }
    if (since_plateau_reset >= hyper.lr_drop_patience) {
      lr *= hyper.lr_drop_factor;
      since_plateau_reset = 0;
    }
    if (epoch >= hyper.warmup && since_best >= hyper.patience) break;
  }

  // Fold the standardization into raw-feature weights.
  std::vector<double> weights(d);
  double bias = best[d];
  for (std::size_t j = 0; j < d; ++j) {
    weights[j] = best[j] / standardizer.scale[j];
    bias -= weights[j] * standardizer.mean[j];
  }
  return {LinearScorer(std::move(weights), bias, fs), std::move(history)};
}

}  // namespace scorers
}  // namespace fusionbiopsy
