#include <gtest/gtest.h>

#include <cmath>

#include "fusionbiopsy/scorers.hpp"
#include "test_util.hpp"

using namespace fusionbiopsy;
using namespace fusionbiopsy::scorers;

namespace {

ScoreKey key(const std::string& id, Laterality lat, Modality m, View v) { return {{id, lat}, {m, v}}; }

scorers::FeatureSet random_set(RandomStream& rng, std::size_t n, std::size_t d) {
  FeatureSet set;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d);
    for (double& x : row) x = rng.uniform(-1.0, 1.0);
    set.rows.push_back(std::move(row));
    set.targets.push_back(static_cast<double>(rng.below(2)));
  }
  return set;
}

// Image with a bright or dark square in the upper-left quadrant.
GrayImage blob_image(bool malignant, RandomStream& rng) {
  std::vector<double> px(16 * 16);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c) {
      const bool in_blob = r < 8 && c < 8;
      const double base = in_blob ? (malignant ? 0.8 : 0.2) : 0.5;
      px[r * 16 + c] = std::clamp(base + rng.uniform(-0.05, 0.05), 0.0, 1.0);
    }
  return GrayImage(16, 16, px, true);
}

// Perceptron run to convergence: a returned (w, b) is a certificate that the
// pooled features are strictly linearly separable.
std::optional<std::vector<double>> perceptron(const std::vector<std::vector<double>>& rows,
                                              const std::vector<int>& sign) {
  std::vector<double> w(rows.front().size() + 1, 0.0);
  for (int pass = 0; pass < 1000; ++pass) {
    bool clean = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double z = w.back();
      for (std::size_t j = 0; j < rows[i].size(); ++j) z += w[j] * rows[i][j];
      if (sign[i] * z <= 0) {
        clean = false;
        for (std::size_t j = 0; j < rows[i].size(); ++j) w[j] += sign[i] * rows[i][j];
        w.back() += sign[i];
      }
    }
    if (clean) return w;
  }
  return std::nullopt;
}

}  // namespace

TEST(ScoreMatrix, InsertValidation) {
  ScoreMatrix m;
  m.insert(key("p1", Laterality::Left, Modality::F, View::CC), 0.25);
  EXPECT_EQ(m.at(key("p1", Laterality::Left, Modality::F, View::CC)), 0.25);
  EXPECT_THROW(m.insert(key("p1", Laterality::Left, Modality::F, View::CC), 0.3), Error);
  EXPECT_THROW(m.insert(key("p2", Laterality::Left, Modality::F, View::CC), 1.2), Error);
  EXPECT_THROW(m.insert(key("p2", Laterality::Left, Modality::F, View::CC), std::nan("")), Error);
  try {
    m.at(key("p1", Laterality::Left, Modality::C, View::MLO));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingChannel);
  }
  m.assign(key("p1", Laterality::Left, Modality::F, View::CC), 0.75);
  EXPECT_EQ(m.find(key("p1", Laterality::Left, Modality::F, View::CC)), 0.75);
}

TEST(ScoreTable, ParseRows) {
  const auto m = parse_score_table("patient_id,laterality,modality,view,p_malignant\np7,R,C,CC,0.93\np7,R,F,MLO,0\n");
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at(key("p7", Laterality::Right, Modality::C, View::CC)), 0.93);
}

TEST(ScoreTable, Errors) {
  const std::string header = "patient_id,laterality,modality,view,p_malignant\n";
  try {
    parse_score_table(header + "p7,R,C,CC,1.2\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfRangeProbability);
  }
  try {
    parse_score_table(header + "p7,R,C,CC,0.2\np7,R,C,CC,0.3\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateKey);
    EXPECT_NE(std::string(e.what()).find("p7"), std::string::npos);
  }
  EXPECT_THROW(parse_score_table("a,b\n"), Error);
  EXPECT_THROW(parse_score_table(header + "p7,R,C,CC\n"), Error);
  EXPECT_THROW(parse_score_table(header + "p7,R,X,CC,0.1\n"), Error);
  EXPECT_THROW(parse_score_table(header + "p7,R,C,CC,abc\n"), Error);
  EXPECT_THROW(load_score_table("/nonexistent/table.csv"), Error);
}

TEST(ScoreTable, WriteRoundTrip) {
  RandomStream rng(4);
  ScoreMatrix m;
  for (int i = 0; i < 10; ++i)
    for (Channel ch : kChannels) m.insert({{"p" + std::to_string(i), Laterality::Left}, ch}, rng.uniform());
  const auto again = parse_score_table(write_score_table(m));
  EXPECT_EQ(again.entries(), m.entries());
}

TEST(PredictClass, TieIsMalignant) {
  EXPECT_EQ(predict_class(0.5), BiopsyLabel::Malignant);
  EXPECT_EQ(predict_class(0.4999), BiopsyLabel::Benign);
  EXPECT_EQ(predict_class(1.0), BiopsyLabel::Malignant);
}

TEST(LinearScorer, ZeroScoresHalfAndPurity) {
  RandomStream rng(2);
  const GrayImage img = testutil::random_image(16, 16, rng);
  const auto zero = LinearScorer::zero(4);
  EXPECT_EQ(zero.score(img), 0.5);
  const LinearScorer s(std::vector<double>(16, 0.3), -2.0, 4);
  EXPECT_EQ(s.score(img), s.score(img));
  EXPECT_THROW(s.score(testutil::random_image(10, 10, rng)), Error);
}

TEST(LinearScorer, NegatedModelIsComplement) {
  RandomStream rng(3);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> w(16);
    for (double& x : w) x = rng.uniform(-3, 3);
    const double b = rng.uniform(-1, 1);
    std::vector<double> neg = w;
    for (double& x : neg) x = -x;
    const LinearScorer s(w, b, 4), c(neg, -b, 4);
    const GrayImage img = testutil::random_image(8, 8, rng);
    EXPECT_NEAR(s.score(img) + c.score(img), 1.0, 1e-15);
  }
}

TEST(LinearScorer, JsonRoundTrip) {
  const LinearScorer s({0.1, -0.2, 0.3, 1e-17}, 0.7, 2);
  EXPECT_EQ(LinearScorer::from_json(s.to_json()), s);
  EXPECT_THROW(LinearScorer::from_json("{\"weights\": [1], \"bias\": 0, \"feature_side\": 2}"), Error);
}

TEST(PooledFeatures, BlockMeans) {
  std::vector<double> px(16);
  for (int i = 0; i < 16; ++i) px[i] = i;
  const auto f = pooled_features(GrayImage(4, 4, px), 2);
  EXPECT_EQ(f, (std::vector<double>{2.5, 4.5, 10.5, 12.5}));
  EXPECT_THROW(pooled_features(GrayImage(5, 5, 0.0), 2), Error);
}

TEST(Objective, GradientMatchesCentralDifferences) {
  RandomStream rng(17);
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t d = 1 + rng.below(6);
    const FeatureSet set = random_set(rng, 3 + rng.below(10), d);
    std::vector<double> params(d + 1);
    for (double& p : params) p = rng.uniform(-2, 2);
    const double wd = rng.uniform(0, 0.5);
    const auto grad = objective_gradient(params, set, wd);
    const double h = 1e-5;
    for (std::size_t j = 0; j <= d; ++j) {
      std::vector<double> up = params, down = params;
      up[j] += h;
      down[j] -= h;
      const double fd = (objective(up, set, wd) - objective(down, set, wd)) / (2 * h);
      EXPECT_LE(std::abs(fd - grad[j]), 1e-5 * std::max(1.0, std::abs(fd))) << inst << "," << j;
    }
  }
}

TEST(Train, Errors) {
  RandomStream rng(1);
  EXPECT_THROW(train_reference({}, {}, {}, rng), Error);
  LabeledImages one_class{{blob_image(true, rng), BiopsyLabel::Malignant}};
  TrainHyper h;
  h.feature_side = 4;
  try {
    train_reference(one_class, {}, h, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClassTrainingSet);
  }
}

TEST(Train, SeparableBlobsReachPerfectValidation) {
  RandomStream rng(5);
  LabeledImages train, val;
  for (int i = 0; i < 40; ++i) {
    const bool m = i % 2 == 0;
    (i < 30 ? train : val).emplace_back(blob_image(m, rng), m ? BiopsyLabel::Malignant : BiopsyLabel::Benign);
  }
  std::vector<std::vector<double>> rows;
  std::vector<int> sign;
  for (const auto* set : {&train, &val})
    for (const auto& [img, label] : *set) {
      rows.push_back(pooled_features(img, 4));
      sign.push_back(label == BiopsyLabel::Malignant ? 1 : -1);
    }
  ASSERT_TRUE(perceptron(rows, sign).has_value());

  TrainHyper h;
  h.learning_rate = 0.5;
  h.feature_side = 4;
  h.max_epochs = 100;
  h.patience = 20;
  h.warmup = 10;
  const auto result = train_reference(train, val, h, rng);
  for (const auto& [img, label] : val) EXPECT_EQ(predict_class(result.scorer.score(img)), label);
  EXPECT_LE(static_cast<int>(result.history.train_loss.size()), h.max_epochs);
}

TEST(Train, DuplicatedPairLossDecreases) {
  RandomStream rng(6);
  const LabeledImages pair{{blob_image(true, rng), BiopsyLabel::Malignant},
                           {blob_image(false, rng), BiopsyLabel::Benign}};
  TrainHyper h;
  h.learning_rate = 0.1;
  h.feature_side = 4;
  h.max_epochs = 20;
  h.patience = 20;
  const auto result = train_reference(pair, pair, h, rng);
  ASSERT_GE(result.history.train_loss.size(), 10u);
  for (std::size_t i = 1; i < 10; ++i) EXPECT_LT(result.history.train_loss[i], result.history.train_loss[i - 1]);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  RandomStream rng(7);
  LabeledImages train;
  for (int i = 0; i < 6; ++i) train.emplace_back(blob_image(i % 2, rng), i % 2 ? BiopsyLabel::Malignant : BiopsyLabel::Benign);
  TrainHyper h;
  h.learning_rate = 0.0;
  h.feature_side = 4;
  h.max_epochs = 5;
  h.patience = 5;
  const auto result = train_reference(train, train, h, rng);
  EXPECT_EQ(result.scorer, LinearScorer::zero(4));
  EXPECT_EQ(result.history.best_epoch, 0);
}

TEST(Train, ReturnsBestValidationParameters) {
  RandomStream rng(8);
  LabeledImages train, val;
  for (int i = 0; i < 10; ++i) train.emplace_back(blob_image(i % 2, rng), i % 2 ? BiopsyLabel::Malignant : BiopsyLabel::Benign);
  // Noise labels on validation make the loss turn upward at some point.
  for (int i = 0; i < 10; ++i) val.emplace_back(blob_image(i % 2, rng), rng.below(2) ? BiopsyLabel::Malignant : BiopsyLabel::Benign);
  TrainHyper h;
  h.learning_rate = 1.0;
  h.feature_side = 4;
  h.max_epochs = 60;
  h.patience = 15;
  h.warmup = 5;
  const auto result = train_reference(train, val, h, rng);
  const auto& vl = result.history.val_loss;
  ASSERT_FALSE(vl.empty());
  // Zero initial parameters score ln 2 on any set.
  const double best = result.history.best_epoch == 0 ? std::log(2.0) : vl[result.history.best_epoch - 1];
  for (double v : vl) EXPECT_GE(v, best);
}

TEST(Train, DeterministicWithAugmentation) {
  LabeledImages train;
  RandomStream data(9);
  for (int i = 0; i < 8; ++i) train.emplace_back(blob_image(i % 2, data), i % 2 ? BiopsyLabel::Malignant : BiopsyLabel::Benign);
  TrainHyper h;
  h.learning_rate = 0.2;
  h.feature_side = 4;
  h.max_epochs = 15;
  h.patience = 15;
  const preprocess::AugmentConfig aug;
  RandomStream a(10), b(10);
  EXPECT_EQ(train_reference(train, {}, h, a, &aug).scorer, train_reference(train, {}, h, b, &aug).scorer);
}
