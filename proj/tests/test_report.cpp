#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fauseg/report.hpp"

using namespace fauseg;
namespace fs = std::filesystem;

namespace {

std::vector<MetricRecord> fake_records(int images, double offset) {
  std::vector<MetricRecord> out;
  for (int i = 0; i < images; ++i)
    for (int k = 1; k < kNumClasses; ++k) {
      const double v = std::clamp(offset + 0.1 * k + 0.01 * i, 0.0, 1.0);
      out.push_back({sample_id(i), k, 2 * v / (1 + v), v, true});
    }
  return out;
}

bool contains_color(const Canvas& c, png::Rgb color) {
  for (int y = 0; y < c.height(); ++y)
    for (int x = 0; x < c.width(); ++x)
      if (c.get(x, y) == color) return true;
  return false;
}

}  // namespace

TEST(ParamTable, FlagsToleranceAndOrdering) {
  const std::vector<std::pair<Arch, int64_t>> good{{Arch::UNet, 1'940'885}, {Arch::AttUNet, 1'995'409}};
  const auto t = param_table(good);
  EXPECT_TRUE(t.ok());
  EXPECT_EQ(t.rows[0].rank, 1);
  EXPECT_DOUBLE_EQ(t.rows[0].delta, 0.0);

  const std::vector<std::pair<Arch, int64_t>> off{{Arch::UNet, 2'000'000}};
  EXPECT_FALSE(param_table(off).all_within());

  const std::vector<std::pair<Arch, int64_t>> swapped{{Arch::UNet, 1'950'000}, {Arch::AttUNet, 1'945'000}};
  const auto s = param_table(swapped);
  EXPECT_TRUE(s.all_within());
  EXPECT_FALSE(s.ordering_matches);
}

TEST(ParamTable, CsvHasOneRowPerArchitecture) {
  const std::vector<std::pair<Arch, int64_t>> counts{{Arch::UNet, 1'940'885}, {Arch::FAUNet, 2'048'936}};
  std::ostringstream out;
  write_param_table(out, param_table(counts));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "arch,count,reference,delta_pct,tolerance_pct,within_tolerance,rank,reference_rank");
  std::getline(in, line);
  EXPECT_EQ(line, "unet,1940885,1940885,0.00,0.50,yes,1,1");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("fau_net,2048936,2158505,-5.08,8.00,yes,2,2", 0), 0u);
}

TEST(Boxplot, FourModelsFourZonesGiveSixteenGroups) {
  std::vector<ModelRecords> models;
  for (int m = 0; m < 4; ++m) models.push_back({"model" + std::to_string(m), fake_records(10, 0.1 * m)});
  const auto fig = render_boxplot(models);
  EXPECT_EQ(fig.groups.size(), 16u);
  std::set<std::pair<int, std::size_t>> keys;
  for (const auto& g : fig.groups) keys.insert({g.class_id, g.model});
  EXPECT_EQ(keys.size(), 16u);
  for (const auto& best : fig.best_model) {
    ASSERT_TRUE(best.has_value());
    EXPECT_EQ(*best, 3u);  // largest offset wins every zone
  }
  EXPECT_TRUE(contains_color(fig.canvas, kHighlight));
  EXPECT_TRUE(contains_color(fig.canvas, kModelColors[0]));
}

TEST(Boxplot, MedianAndDotsFollowRecords) {
  std::vector<ModelRecords> models{{"a", fake_records(5, 0.0)}};
  const auto fig = render_boxplot(models);
  const auto& g = fig.groups.front();
  EXPECT_EQ(g.summary.count, 5u);
  EXPECT_NEAR(g.summary.median, 0.12, 1e-12);
  EXPECT_EQ(g.summary.values.size(), 5u);
}

TEST(Boxplot, ZoneWithoutRecordsHasNoBest) {
  auto records = fake_records(4, 0.0);
  std::erase_if(records, [](const MetricRecord& r) { return r.class_id == 4; });
  std::vector<ModelRecords> models{{"a", records}};
  const auto fig = render_boxplot(models);
  EXPECT_FALSE(fig.best_model[3].has_value());
  EXPECT_TRUE(fig.best_model[0].has_value());
}

TEST(Boxplot, EmptyRecordsRejected) {
  std::vector<ModelRecords> none;
  EXPECT_THROW((void)render_boxplot(none), DataError);
  std::vector<ModelRecords> empty{{"a", {}}};
  EXPECT_THROW((void)render_boxplot(empty), DataError);
}

TEST(Boxplot, DeterministicPixels) {
  std::vector<ModelRecords> models{{"a", fake_records(6, 0.0)}, {"b", fake_records(6, 0.2)}};
  EXPECT_EQ(render_boxplot(models).canvas.raster().pixels, render_boxplot(models).canvas.raster().pixels);
}

TEST(PredictionGrid, FourCombosNineRowsGiveThirtySixPanels) {
  const auto ds = generate_dataset(3, 8, PhantomOptions{.size = 32});
  const auto examples = grid_examples(ds.samples);
  ASSERT_EQ(examples.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(examples[i].combo, kAllCombos[i]);
  std::vector<PredictionRow> rows;
  for (const auto arch : kAllArchs) {
    PredictionRow row{std::string(arch_display_name(arch)), {}};
    for (const auto& e : examples) row.maps.push_back(e.mask);
    rows.push_back(std::move(row));
  }
  const auto fig = render_prediction_grid(examples, rows, 32);
  EXPECT_EQ(fig.rows, 9);
  EXPECT_EQ(fig.cols, 4);
  EXPECT_EQ(fig.panels(), 36);
  // legend and masks carry every zone colour
  for (const auto& color : kZoneColors) EXPECT_TRUE(contains_color(fig.canvas, color));
}

TEST(PredictionGrid, MismatchedRowRejected) {
  const auto ds = generate_dataset(4, 4, PhantomOptions{.size = 32});
  std::vector<PredictionRow> rows{{"short", {ds.samples[0].mask}}};
  EXPECT_THROW((void)render_prediction_grid(ds.samples, rows, 32), DataError);
  EXPECT_THROW((void)render_prediction_grid({}, {}, 32), DataError);
}

TEST(PredictionGrid, SavedPngIsDeterministic) {
  const auto ds = generate_dataset(5, 4, PhantomOptions{.size = 32});
  const auto dir = fs::temp_directory_path() / "fauseg_report_test";
  fs::create_directories(dir);
  render_prediction_grid(ds.samples, {}, 32).canvas.save(dir / "a.png");
  render_prediction_grid(ds.samples, {}, 32).canvas.save(dir / "b.png");
  const auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(read(dir / "a.png"), read(dir / "b.png"));
  const auto back = png::read(dir / "a.png");
  EXPECT_EQ(back.format, png::PixelFormat::Rgb);
  fs::remove_all(dir);
}

TEST(Canvas, TextUsesGlyphBitmaps) {
  Canvas c(20, 10);
  EXPECT_EQ(c.text(1, 1, "I", kBlack), 6);
  EXPECT_EQ(c.get(2, 1), kBlack);         // top bar of 'I'
  EXPECT_EQ(c.get(1, 3), (png::Rgb{255, 255, 255}));
}
