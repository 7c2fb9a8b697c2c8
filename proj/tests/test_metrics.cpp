#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "fauseg/metrics.hpp"

using namespace fauseg;

namespace {

LabelMap random_map(std::mt19937& rng, int h, int w) {
  LabelMap m(h, w);
  for (auto& v : m.values) v = static_cast<std::uint8_t>(rng() % kNumClasses);
  return m;
}

// Set-definition metrics over pixel index sets, no confusion matrix involved.
struct SetMetrics {
  std::optional<double> dice, iou;
};

SetMetrics set_metrics(const LabelMap& pred, const LabelMap& gt, int c) {
  std::set<std::size_t> a, b;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt.values[i] == c) a.insert(i);
    if (pred.values[i] == c) b.insert(i);
  }
  if (a.empty()) return {};
  std::size_t inter = 0;
  for (const auto i : a) inter += b.count(i);
  std::set<std::size_t> uni = a;
  uni.insert(b.begin(), b.end());
  return {2.0 * static_cast<double>(inter) / static_cast<double>(a.size() + b.size()),
          static_cast<double>(inter) / static_cast<double>(uni.size())};
}

}  // namespace

TEST(Confusion, IdenticalMapsAreDiagonal) {
  std::mt19937 rng(1);
  const auto m = random_map(rng, 6, 6);
  const auto cm = confusion_counts(m, m);
  std::array<int64_t, kNumClasses> per_class{};
  for (const auto v : m.values) ++per_class[v];
  for (std::size_t i = 0; i < kNumClasses; ++i)
    for (std::size_t j = 0; j < kNumClasses; ++j) EXPECT_EQ(cm[i][j], i == j ? per_class[i] : 0);
}

TEST(Confusion, AllBackgroundPredictionAgainstAllCz) {
  const auto cm = confusion_counts(LabelMap(4, 4, 0), LabelMap(4, 4, 1));
  for (std::size_t i = 0; i < kNumClasses; ++i)
    for (std::size_t j = 0; j < kNumClasses; ++j) EXPECT_EQ(cm[i][j], (i == 1 && j == 0) ? 16 : 0);
}

TEST(Confusion, MatchesPixelLoopOnRandomPairs) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_map(rng, 8, 8), g = random_map(rng, 8, 8);
    ConfusionMatrix expected{};
    int64_t total = 0;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) ++expected[g(y, x)][p(y, x)], ++total;
    const auto cm = confusion_counts(p, g);
    EXPECT_EQ(cm, expected);
    int64_t sum = 0;
    for (const auto& row : cm)
      for (const auto v : row) sum += v;
    EXPECT_EQ(sum, total);
  }
}

TEST(Confusion, ShapeMismatchThrows) {
  EXPECT_THROW((void)confusion_counts(LabelMap(4, 4), LabelMap(4, 5)), ShapeError);
  EXPECT_THROW((void)dice(LabelMap(3, 4), LabelMap(4, 4), 1), ShapeError);
}

TEST(Overlap, PerfectPredictionScoresOne) {
  LabelMap m(4, 4, 0);
  m(1, 1) = m(1, 2) = 2;
  EXPECT_DOUBLE_EQ(*dice(m, m, 2), 1.0);
  EXPECT_DOUBLE_EQ(*iou(m, m, 2), 1.0);
}

TEST(Overlap, HalfOverlapFixture) {
  // |A| = 4, |B| = 4, |A n B| = 2.
  LabelMap gt(4, 4, 0), pred(4, 4, 0);
  gt(0, 0) = gt(0, 1) = gt(0, 2) = gt(0, 3) = 1;
  pred(0, 2) = pred(0, 3) = pred(1, 0) = pred(1, 1) = 1;
  EXPECT_DOUBLE_EQ(*dice(pred, gt, 1), 0.5);
  EXPECT_DOUBLE_EQ(*iou(pred, gt, 1), 1.0 / 3.0);
}

TEST(Overlap, AbsentClassIsUndefinedRegardlessOfPrediction) {
  LabelMap gt(4, 4, 1), pred(4, 4, 3);
  EXPECT_FALSE(dice(pred, gt, 3).has_value());
  EXPECT_FALSE(iou(pred, gt, 3).has_value());
  EXPECT_FALSE(dice(gt, gt, 4).has_value());
  EXPECT_DOUBLE_EQ(*dice(pred, gt, 1), 0.0);  // present but never predicted
  EXPECT_DOUBLE_EQ(*iou(pred, gt, 1), 0.0);
}

TEST(Overlap, AgreesWithSetDefinitionAndDiceIouRelation) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = random_map(rng, 8, 8), g = random_map(rng, 8, 8);
    for (int c = 1; c < kNumClasses; ++c) {
      const auto expected = set_metrics(p, g, c);
      const auto d = dice(p, g, c), j = iou(p, g, c);
      ASSERT_EQ(d.has_value(), expected.dice.has_value());
      if (!d) continue;
      EXPECT_EQ(*d, *expected.dice);
      EXPECT_EQ(*j, *expected.iou);
      EXPECT_NEAR(*d, 2.0 * *j / (1.0 + *j), 1e-12);
    }
  }
}

TEST(Overlap, InvariantUnderRelabellingAndBackgroundPadding) {
  std::mt19937 rng(4);
  const std::array<std::uint8_t, 5> perm{0, 3, 1, 4, 2};
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_map(rng, 8, 8), g = random_map(rng, 8, 8);
    LabelMap pp = p, gg = g;
    for (auto& v : pp.values) v = perm[v];
    for (auto& v : gg.values) v = perm[v];
    LabelMap pad_p(8, 12, 0), pad_g(8, 12, 0);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) pad_p(y, x) = p(y, x), pad_g(y, x) = g(y, x);
    for (int c = 1; c < kNumClasses; ++c) {
      EXPECT_EQ(dice(p, g, c), dice(pp, gg, perm[c]));
      EXPECT_EQ(iou(p, g, c), iou(pp, gg, perm[c]));
      EXPECT_EQ(dice(p, g, c), dice(pad_p, pad_g, c));
      EXPECT_EQ(iou(p, g, c), iou(pad_p, pad_g, c));
    }
  }
}

TEST(Overlap, MonotoneInIntersectionAtFixedSizes) {
  // Slide a 4-pixel prediction over a 4-pixel target; |A|, |B| fixed.
  LabelMap gt(1, 12, 0);
  for (int x = 4; x < 8; ++x) gt(0, x) = 1;
  double last_d = -1, last_j = -1;
  for (int offset = 0; offset <= 4; ++offset) {
    LabelMap pred(1, 12, 0);
    for (int x = offset; x < offset + 4; ++x) pred(0, x) = 1;
    const double d = *dice(pred, gt, 1), j = *iou(pred, gt, 1);
    EXPECT_GE(d, last_d);
    EXPECT_GE(j, last_j);
    last_d = d;
    last_j = j;
  }
  EXPECT_DOUBLE_EQ(last_d, 1.0);
}

TEST(Aggregation, TwoImageToySetMatchesHandComputation) {
  // Image a: CZ perfect, PZ half overlap (dice .5, iou 1/3), TZ/TUM absent.
  LabelMap ga(4, 4, 0), pa(4, 4, 0);
  ga(0, 0) = ga(0, 1) = pa(0, 0) = pa(0, 1) = 1;
  ga(2, 0) = ga(2, 1) = ga(2, 2) = ga(2, 3) = 2;
  pa(2, 2) = pa(2, 3) = pa(3, 0) = pa(3, 1) = 2;
  // Image b: TUM present but missed entirely (dice 0, iou 0), nothing else.
  LabelMap gb(4, 4, 0), pb(4, 4, 0);
  gb(1, 1) = 4;
  auto records = image_records("a", pa, ga);
  const auto rb = image_records("b", pb, gb);
  records.insert(records.end(), rb.begin(), rb.end());
  ASSERT_EQ(records.size(), 8u);
  EXPECT_EQ(std::count_if(records.begin(), records.end(), [](const auto& r) { return r.present_in_gt; }), 3);
  const auto m = overall_means(records);
  EXPECT_EQ(m.count, 3u);
  EXPECT_NEAR(m.mean_dsc, (1.0 + 0.5 + 0.0) / 3.0, 1e-15);
  EXPECT_NEAR(m.mean_iou, (1.0 + 1.0 / 3.0 + 0.0) / 3.0, 1e-15);
}

TEST(Aggregation, ZoneSummaryUsesOnlyPresentRecords) {
  std::vector<MetricRecord> records;
  const std::array<double, 5> values{0.9, 0.0, 0.5, 0.7, 0.8};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double j = values[i];
    records.push_back({"img" + std::to_string(i), 3, 2 * j / (1 + j), j, true});
    records.push_back({"img" + std::to_string(i), 4, std::nullopt, std::nullopt, false});
  }
  const auto z = summarize_zone(records, 3);
  EXPECT_EQ(z.count, 5u);
  EXPECT_NEAR(z.mean_iou, 0.58, 1e-15);
  EXPECT_DOUBLE_EQ(z.median, 0.7);
  EXPECT_DOUBLE_EQ(z.q1, 0.5);
  EXPECT_DOUBLE_EQ(z.q3, 0.8);
  ASSERT_EQ(z.outliers.size(), 1u);  // 0.0 < 0.5 - 1.5 * 0.3
  EXPECT_DOUBLE_EQ(z.outliers[0], 0.0);
  EXPECT_DOUBLE_EQ(z.whisker_low, 0.5);
  EXPECT_DOUBLE_EQ(z.whisker_high, 0.9);
  EXPECT_EQ(summarize_zone(records, 4).count, 0u);
}

TEST(Uncertainty, EntropyFixtures) {
  // Three pixels: one-hot, uniform, (0.5, 0.5, 0, 0, 0).
  std::vector<double> probs(5 * 3, 0.0);
  const auto at = [&](int c, int p) -> double& { return probs[static_cast<std::size_t>(c * 3 + p)]; };
  at(2, 0) = 1.0;
  for (int c = 0; c < 5; ++c) at(c, 1) = 0.2;
  at(0, 2) = at(1, 2) = 0.5;
  const auto h = uncertainty_map(probs, 5, 1, 3);
  EXPECT_DOUBLE_EQ(h.values[0], 0.0);
  EXPECT_NEAR(h.values[1], std::log(5.0), 1e-12);
  EXPECT_NEAR(h.values[1], 1.60944, 1e-5);
  EXPECT_NEAR(h.values[2], 0.69315, 1e-5);
}

TEST(Uncertainty, MaximalOnlyAtUniform) {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(5);
    double s = 0.0;
    for (auto& v : p) s += (v = u(rng));
    for (auto& v : p) v /= s;
    const double h = uncertainty_map(p, 5, 1, 1).values[0];
    EXPECT_GE(h, 0.0);
    EXPECT_LT(h, std::log(5.0));
  }
}

TEST(Uncertainty, RejectsUnnormalizedInput) {
  EXPECT_THROW((void)uncertainty_map(std::vector<double>{0.5, 0.6}, 2, 1, 1), NumericError);
  EXPECT_THROW((void)uncertainty_map(std::vector<double>{1.5, -0.5}, 2, 1, 1), NumericError);
  EXPECT_THROW((void)uncertainty_map(std::vector<double>{1.0}, 2, 1, 1), ShapeError);
}

TEST(RecordsCsv, RoundTripsPresenceAndValues) {
  const auto path = std::filesystem::temp_directory_path() / "fauseg_records.csv";
  const std::vector<MetricRecord> records{{"a", 1, 0.5, 1.0 / 3.0, true}, {"a", 3, std::nullopt, std::nullopt, false}};
  write_records_csv(path, records);
  const auto back = read_records_csv(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].class_id, 1);
  EXPECT_EQ(*back[0].iou, 1.0 / 3.0);
  EXPECT_FALSE(back[1].present_in_gt);
  EXPECT_FALSE(back[1].dsc.has_value());
  std::filesystem::remove(path);
}
