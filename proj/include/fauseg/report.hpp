#pragma once

// Result tables and figures: parameter table, results table, per-zone IoU
// boxplot and the qualitative prediction grid.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fauseg/canvas.hpp"
#include "fauseg/data.hpp"
#include "fauseg/metrics.hpp"
#include "fauseg/models.hpp"

namespace fauseg {

// ---------------------------------------------------------------------------
// Tables

struct ParamRow {
  std::string arch;
  int64_t count = 0;
  int64_t reference = 0;
  double delta = 0.0;  // relative, signed
  double tolerance = 0.0;
  bool within = false;
  int rank = 0;            // 1-based rank by measured count
  int reference_rank = 0;  // 1-based rank by reference count
};

struct ParamTable {
  std::vector<ParamRow> rows;
  bool ordering_matches = true;

  [[nodiscard]] bool all_within() const {
    return std::all_of(rows.begin(), rows.end(), [](const ParamRow& r) { return r.within; });
  }
  [[nodiscard]] bool ok() const { return ordering_matches && all_within(); }
};

namespace detail {

template <class T>
std::vector<int> ranks(const std::vector<T>& values) {
  std::vector<int> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
  std::vector<int> rank(values.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r) + 1;
  return rank;
}

}  // namespace detail

[[nodiscard]] inline ParamTable param_table(std::span<const std::pair<Arch, int64_t>> counts) {
  ParamTable t;
  std::vector<int64_t> measured, reference;
  for (const auto& [arch, count] : counts) {
    const auto ref = reference_parameter_count(arch);
    ParamRow row;
    row.arch = std::string(arch_name(arch));
    row.count = count;
    row.reference = ref.count;
    row.delta = static_cast<double>(count - ref.count) / static_cast<double>(ref.count);
    row.tolerance = ref.relative_tolerance;
    row.within = std::abs(row.delta) <= ref.relative_tolerance;
    t.rows.push_back(row);
    measured.push_back(count);
    reference.push_back(ref.count);
  }
  const auto r = detail::ranks(measured), rr = detail::ranks(reference);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    t.rows[i].rank = r[i];
    t.rows[i].reference_rank = rr[i];
    if (r[i] != rr[i]) t.ordering_matches = false;
  }
  // Ties in measured counts would hide an ordering violation behind stable_sort.
  for (std::size_t i = 0; i < measured.size(); ++i)
    for (std::size_t j = i + 1; j < measured.size(); ++j)
      if (measured[i] == measured[j]) t.ordering_matches = false;
  return t;
}

inline void write_param_table(std::ostream& out, const ParamTable& t) {
  out << "arch,count,reference,delta_pct,tolerance_pct,within_tolerance,rank,reference_rank\n";
  for (const auto& r : t.rows) {
    out << r.arch << ',' << r.count << ',' << r.reference << ',' << std::fixed << std::setprecision(2)
        << 100.0 * r.delta << ',' << 100.0 * r.tolerance << ',' << (r.within ? "yes" : "no") << ',' << r.rank
        << ',' << r.reference_rank << '\n';
    out.unsetf(std::ios::floatfield);
  }
}

/// Published scores of each architecture on the private clinical data; kept
/// only as context columns, never as pass/fail targets.
struct ReferenceScore {
  double iou_pct;
  double dsc_pct;
  double loss;
};

[[nodiscard]] inline ReferenceScore reference_score(Arch arch) {
  switch (arch) {
    case Arch::UNet: return {70.76, 80.00, 0.0138};
    case Arch::AttUNet: return {74.92, 84.01, 0.0114};
    case Arch::FAUNet: return {75.49, 84.15, 0.0107};
    case Arch::DenseUNet: return {74.53, 83.65, 0.0225};
    case Arch::AttDenseUNet: return {75.12, 84.01, 0.0211};
    case Arch::R2UNet: return {76.60, 85.30, 0.0131};
    case Arch::AttR2UNet: return {76.89, 85.42, 0.0120};
  }
  return {0, 0, 0};
}

struct ResultRow {
  Arch arch = Arch::UNet;
  double mean_iou = 0.0;
  double mean_dsc = 0.0;
  double mean_cce = 0.0;
};

inline void write_results_table(const std::filesystem::path& path, std::span<const ResultRow> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "arch,iou_pct,dsc_pct,loss,reference_iou_pct,reference_dsc_pct,reference_loss\n";
  out << std::fixed;
  for (const auto& r : rows) {
    const auto ref = reference_score(r.arch);
    out << arch_name(r.arch) << ',' << std::setprecision(2) << 100.0 * r.mean_iou << ',' << 100.0 * r.mean_dsc << ','
        << std::setprecision(4) << r.mean_cce << ',' << std::setprecision(2) << ref.iou_pct << ',' << ref.dsc_pct
        << ',' << std::setprecision(4) << ref.loss << '\n';
  }
}

// ---------------------------------------------------------------------------
// Figures

inline constexpr std::array<png::Rgb, 8> kModelColors{{
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {148, 103, 189},
    {140, 86, 75}, {227, 119, 194}, {127, 127, 127}, {23, 190, 207},
}};
inline constexpr png::Rgb kBlack{0, 0, 0};
inline constexpr png::Rgb kHighlight{220, 0, 0};
inline constexpr png::Rgb kGridLine{225, 225, 225};

struct ModelRecords {
  std::string name;
  std::vector<MetricRecord> records;
};

struct BoxGroup {
  int class_id = 1;
  std::size_t model = 0;
  ZoneSummary summary;
  int x0 = 0, x1 = 0;  // box extent in pixels
};

struct BoxplotFigure {
  Canvas canvas;
  std::vector<BoxGroup> groups;
  std::array<std::optional<std::size_t>, kNumClasses - 1> best_model;  // per foreground zone, by mean IoU
};

/// One group per (zone, model); zones left to right, models within a zone in
/// input order. Boxes span the quartiles with a median line and 1.5 IQR
/// whiskers; every image is a dot; the best model per zone is framed in red.
[[nodiscard]] inline BoxplotFigure render_boxplot(std::span<const ModelRecords> models,
                                                  const std::string& title = "IoU per zone") {
  if (models.empty()) throw DataError("boxplot needs at least one model");
  const bool any = std::any_of(models.begin(), models.end(), [](const ModelRecords& m) { return !m.records.empty(); });
  if (!any) throw DataError("boxplot needs at least one metric record");

  constexpr int kBox = 22, kGap = 8, kZoneGap = 34, kLeft = 48, kTop = 30, kPlot = 320;
  const int n = static_cast<int>(models.size());
  const int zone_width = n * kBox + (n - 1) * kGap;
  int legend_width = 0;
  for (const auto& m : models) legend_width += 22 + Canvas::text_width(m.name) + 12;
  const int plot_width = 4 * zone_width + 5 * kZoneGap;
  const int width = kLeft + std::max(plot_width, legend_width) + 16;
  const int height = kTop + kPlot + 70;

  BoxplotFigure fig{Canvas(width, height), {}, {}};
  auto& c = fig.canvas;
  const auto y_of = [&](double v) { return kTop + static_cast<int>(std::lround((1.0 - std::clamp(v, 0.0, 1.0)) * kPlot)); };

  c.text(kLeft, 10, title, kBlack, 1);
  for (int t = 0; t <= 10; t += 2) {
    const double v = t / 10.0;
    c.hline(kLeft, kLeft + plot_width, y_of(v), kGridLine);
    std::ostringstream label;
    label << std::fixed << std::setprecision(1) << v;
    c.text(kLeft - 26, y_of(v) - 3, label.str(), kBlack);
  }
  c.vline(kLeft, kTop, kTop + kPlot, kBlack);
  c.hline(kLeft, kLeft + plot_width, kTop + kPlot, kBlack);

  for (int zone = 1; zone < kNumClasses; ++zone) {
    const int zx = kLeft + kZoneGap + (zone - 1) * (zone_width + kZoneGap);
    std::optional<std::size_t> best;
    double best_mean = -1.0;
    for (std::size_t m = 0; m < models.size(); ++m) {
      BoxGroup g;
      g.class_id = zone;
      g.model = m;
      g.summary = summarize_zone(models[m].records, zone);
      g.x0 = zx + static_cast<int>(m) * (kBox + kGap);
      g.x1 = g.x0 + kBox;
      if (g.summary.count > 0 && g.summary.mean_iou > best_mean) {
        best_mean = g.summary.mean_iou;
        best = m;
      }
      fig.groups.push_back(std::move(g));
    }
    fig.best_model[static_cast<std::size_t>(zone - 1)] = best;
    const auto name = kZoneNames[static_cast<std::size_t>(zone)];
    c.text(zx + zone_width / 2 - Canvas::text_width(name) / 2, kTop + kPlot + 8, name, kBlack);
  }

  for (const auto& g : fig.groups) {
    const auto color = kModelColors[g.model % kModelColors.size()];
    const auto& s = g.summary;
    if (s.count == 0) continue;
    const int mid = (g.x0 + g.x1) / 2;
    c.vline(mid, y_of(s.whisker_low), y_of(s.q1), kBlack);
    c.vline(mid, y_of(s.q3), y_of(s.whisker_high), kBlack);
    c.hline(mid - kBox / 4, mid + kBox / 4, y_of(s.whisker_low), kBlack);
    c.hline(mid - kBox / 4, mid + kBox / 4, y_of(s.whisker_high), kBlack);
    const png::Rgb fill{static_cast<uint8_t>(255 - (255 - color.r) / 3), static_cast<uint8_t>(255 - (255 - color.g) / 3),
                        static_cast<uint8_t>(255 - (255 - color.b) / 3)};
    c.fill_rect(g.x0, y_of(s.q3), g.x1, y_of(s.q1) + 1, fill);
    c.outline_rect(g.x0, y_of(s.q3), g.x1, y_of(s.q1) + 1, color);
    // deterministic horizontal spread so overlapping values stay visible
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const int jitter = static_cast<int>((i * 7) % 9) - 4;
      c.dot(mid + jitter * (kBox / 10), y_of(s.values[i]), 1, color);
    }
    c.hline(g.x0, g.x1 - 1, y_of(s.median), kBlack, 2);
    const auto& best = fig.best_model[static_cast<std::size_t>(g.class_id - 1)];
    if (best && *best == g.model) c.outline_rect(g.x0 - 3, kTop + 2, g.x1 + 3, kTop + kPlot - 1, kHighlight, 2);
  }

  int lx = kLeft;
  const int ly = kTop + kPlot + 30;
  for (std::size_t m = 0; m < models.size(); ++m) {
    c.fill_rect(lx, ly, lx + 14, ly + 8, kModelColors[m % kModelColors.size()]);
    lx += 20;
    lx += c.text(lx, ly, models[m].name, kBlack) + 12;
  }
  c.outline_rect(kLeft, ly + 16, kLeft + 14, ly + 24, kHighlight, 2);
  c.text(kLeft + 20, ly + 17, "best mean IoU in zone", kBlack);
  return fig;
}

struct PredictionRow {
  std::string name;
  std::vector<LabelMap> maps;  // one per grid column
};

struct GridFigure {
  Canvas canvas;
  int rows = 0;
  int cols = 0;
  [[nodiscard]] int panels() const noexcept { return rows * cols; }
};

/// First sample of each zone combination, in combination order.
[[nodiscard]] inline std::vector<Sample> grid_examples(std::span<const Sample> samples) {
  std::vector<Sample> out;
  for (const auto combo : kAllCombos) {
    const auto it = std::find_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.combo == combo; });
    if (it != samples.end()) out.push_back(*it);
  }
  return out;
}

/// Rows: input image, ground truth, then one row per model; one column per
/// example. Masks use the zone colormap, whose legend is drawn underneath.
[[nodiscard]] inline GridFigure render_prediction_grid(std::span<const Sample> examples,
                                                       std::span<const PredictionRow> models, int panel = 96) {
  if (examples.empty()) throw DataError("prediction grid needs at least one example");
  for (const auto& m : models) {
    if (m.maps.size() != examples.size()) {
      throw DataError("prediction row '" + m.name + "' has " + std::to_string(m.maps.size()) + " maps for " +
                      std::to_string(examples.size()) + " examples");
    }
  }
  if (panel < 8) throw ConfigError("panel size must be >= 8");

  constexpr int kLabel = 96, kHeader = 18, kPad = 4, kLegend = 26;
  const int cols = static_cast<int>(examples.size());
  const int rows = 2 + static_cast<int>(models.size());
  const int width = kLabel + cols * (panel + kPad) + kPad;
  const int height = kHeader + rows * (panel + kPad) + kLegend;
  GridFigure fig{Canvas(width, height), rows, cols};
  auto& c = fig.canvas;

  const auto paint = [&](int px, int py, int h, int w, auto&& color_at) {
    for (int y = 0; y < panel; ++y)
      for (int x = 0; x < panel; ++x) c.set(px + x, py + y, color_at(y * h / panel, x * w / panel));
  };
  const auto paint_mask = [&](int px, int py, const LabelMap& m) {
    paint(px, py, m.height, m.width, [&](int y, int x) {
      const auto v = m(y, x);
      return v < kNumClasses ? kZoneColors[v] : kHighlight;
    });
  };

  for (int col = 0; col < cols; ++col) {
    const auto name = combo_name(examples[static_cast<std::size_t>(col)].combo);
    c.text(kLabel + kPad + col * (panel + kPad) + panel / 2 - Canvas::text_width(name) / 2, 5, name, kBlack);
  }
  for (int row = 0; row < rows; ++row) {
    const int py = kHeader + row * (panel + kPad);
    const std::string label = row == 0 ? "input" : row == 1 ? "ground truth" : models[static_cast<std::size_t>(row - 2)].name;
    c.text(4, py + panel / 2 - 3, label.substr(0, static_cast<std::size_t>((kLabel - 8) / 6)), kBlack);
    for (int col = 0; col < cols; ++col) {
      const int px = kLabel + kPad + col * (panel + kPad);
      const auto& ex = examples[static_cast<std::size_t>(col)];
      if (row == 0) {
        paint(px, py, ex.image.height, ex.image.width, [&](int y, int x) {
          const auto g = static_cast<uint8_t>(std::lround(std::clamp(ex.image(y, x), 0.0f, 1.0f) * 255.0f));
          return png::Rgb{g, g, g};
        });
      } else if (row == 1) {
        paint_mask(px, py, ex.mask);
      } else {
        paint_mask(px, py, models[static_cast<std::size_t>(row - 2)].maps[static_cast<std::size_t>(col)]);
      }
    }
  }

  int lx = kLabel + kPad;
  const int ly = height - kLegend + 8;
  for (int k = 0; k < kNumClasses; ++k) {
    c.fill_rect(lx, ly, lx + 12, ly + 10, kZoneColors[static_cast<std::size_t>(k)]);
    c.outline_rect(lx, ly, lx + 12, ly + 10, png::Rgb{128, 128, 128});
    lx += 16;
    lx += c.text(lx, ly + 2, kZoneNames[static_cast<std::size_t>(k)], kBlack) + 10;
  }
  return fig;
}

}  // namespace fauseg
