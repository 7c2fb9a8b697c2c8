#pragma once

// Presence-aware per-class overlap metrics, their aggregation and the
// per-pixel predictive entropy map.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fauseg/errors.hpp"
#include "fauseg/grid.hpp"

namespace fauseg {

/// entry[i][j] = number of pixels with ground truth i predicted as j.
using ConfusionMatrix = std::array<std::array<int64_t, kNumClasses>, kNumClasses>;

[[nodiscard]] inline ConfusionMatrix confusion_counts(const LabelMap& pred, const LabelMap& gt) {
  require_same_shape(pred, gt, "confusion_counts");
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto t = gt.values[i], p = pred.values[i];
    if (t >= kNumClasses || p >= kNumClasses) {
      throw DataError("confusion_counts: label " + std::to_string(std::max(t, p)) + " outside 0..4");
    }
    ++m[t][p];
  }
  return m;
}

struct ClassOverlap {
  int64_t gt = 0;            // |A|
  int64_t pred = 0;          // |B|
  int64_t intersection = 0;  // |A n B|
};

[[nodiscard]] inline ClassOverlap class_overlap(const ConfusionMatrix& m, int class_id) {
  if (class_id < 0 || class_id >= kNumClasses) throw ConfigError("class id must lie in 0..4");
  ClassOverlap o;
  const auto c = static_cast<std::size_t>(class_id);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    o.gt += m[c][k];
    o.pred += m[k][c];
  }
  o.intersection = m[c][c];
  return o;
}

/// 2|A n B| / (|A| + |B|); nullopt when the class is absent from ground truth.
[[nodiscard]] inline std::optional<double> dice(const ConfusionMatrix& m, int class_id) {
  const auto o = class_overlap(m, class_id);
  if (o.gt == 0) return std::nullopt;
  return 2.0 * static_cast<double>(o.intersection) / static_cast<double>(o.gt + o.pred);
}

/// |A n B| / |A u B|; nullopt when the class is absent from ground truth.
[[nodiscard]] inline std::optional<double> iou(const ConfusionMatrix& m, int class_id) {
  const auto o = class_overlap(m, class_id);
  if (o.gt == 0) return std::nullopt;
  return static_cast<double>(o.intersection) / static_cast<double>(o.gt + o.pred - o.intersection);
}

[[nodiscard]] inline std::optional<double> dice(const LabelMap& pred, const LabelMap& gt, int class_id) {
  return dice(confusion_counts(pred, gt), class_id);
}

[[nodiscard]] inline std::optional<double> iou(const LabelMap& pred, const LabelMap& gt, int class_id) {
  return iou(confusion_counts(pred, gt), class_id);
}

struct MetricRecord {
  std::string image_id;
  int class_id = 1;
  std::optional<double> dsc;
  std::optional<double> iou;
  bool present_in_gt = false;
};

/// One record per foreground class (1..4) for a single image.
[[nodiscard]] inline std::vector<MetricRecord> image_records(const std::string& image_id, const LabelMap& pred,
                                                             const LabelMap& gt) {
  const auto m = confusion_counts(pred, gt);
  std::vector<MetricRecord> records;
  for (int c = 1; c < kNumClasses; ++c) {
    const auto d = dice(m, c);
    records.push_back({image_id, c, d, iou(m, c), d.has_value()});
  }
  return records;
}

struct OverallMeans {
  double mean_dsc = 0.0;
  double mean_iou = 0.0;
  std::size_t count = 0;  // records that contributed
};

/// Macro average over every defined (image, class) record.
[[nodiscard]] inline OverallMeans overall_means(std::span<const MetricRecord> records) {
  OverallMeans m;
  for (const auto& r : records) {
    if (!r.present_in_gt) continue;
    m.mean_dsc += *r.dsc;
    m.mean_iou += *r.iou;
    ++m.count;
  }
  if (m.count > 0) {
    m.mean_dsc /= static_cast<double>(m.count);
    m.mean_iou /= static_cast<double>(m.count);
  }
  return m;
}

/// Box statistics of IoU for one class over the images that contain it.
struct ZoneSummary {
  int class_id = 1;
  std::size_t count = 0;
  double mean_iou = 0.0;
  double mean_dsc = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;   // smallest value >= q1 - 1.5 IQR
  double whisker_high = 0.0;  // largest value <= q3 + 1.5 IQR
  std::vector<double> values;    // sorted IoU values
  std::vector<double> outliers;  // values beyond the whiskers
};

/// Linear-interpolation quantile of sorted data (q in [0,1]).
[[nodiscard]] inline double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

[[nodiscard]] inline ZoneSummary summarize_zone(std::span<const MetricRecord> records, int class_id) {
  ZoneSummary z;
  z.class_id = class_id;
  double dsc_sum = 0.0;
  for (const auto& r : records) {
    if (r.class_id != class_id || !r.present_in_gt) continue;
    z.values.push_back(*r.iou);
    dsc_sum += *r.dsc;
  }
  z.count = z.values.size();
  if (z.count == 0) return z;
  std::sort(z.values.begin(), z.values.end());
  z.mean_iou = std::accumulate(z.values.begin(), z.values.end(), 0.0) / static_cast<double>(z.count);
  z.mean_dsc = dsc_sum / static_cast<double>(z.count);
  z.median = quantile(z.values, 0.5);
  z.q1 = quantile(z.values, 0.25);
  z.q3 = quantile(z.values, 0.75);
  const double iqr = z.q3 - z.q1;
  const double lo = z.q1 - 1.5 * iqr, hi = z.q3 + 1.5 * iqr;
  z.whisker_low = z.q1;
  z.whisker_high = z.q3;
  for (const double v : z.values) {
    if (v < lo || v > hi) {
      z.outliers.push_back(v);
    } else {
      z.whisker_low = std::min(z.whisker_low, v);
      z.whisker_high = std::max(z.whisker_high, v);
    }
  }
  return z;
}

/// Shannon entropy (natural log) of per-pixel class probabilities laid out as
/// (classes, height, width). Each probability vector must sum to 1 within 1e-5.
[[nodiscard]] inline Grid<double> uncertainty_map(std::span<const double> probabilities, int classes, int height,
                                                  int width) {
  const auto plane = static_cast<std::size_t>(height) * width;
  if (classes < 1 || height < 1 || width < 1 || probabilities.size() != plane * classes) {
    throw ShapeError("uncertainty_map: probability buffer does not match (classes, height, width)");
  }
  Grid<double> entropy(height, width, 0.0);
  for (std::size_t p = 0; p < plane; ++p) {
    double sum = 0.0, h = 0.0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(classes); ++c) {
      const double q = probabilities[c * plane + p];
      if (!(q >= 0.0) || q > 1.0 + 1e-5) {
        throw NumericError("uncertainty_map: probability " + std::to_string(q) + " outside [0,1] at pixel " +
                           std::to_string(p));
      }
      sum += q;
      if (q > 0.0) h -= q * std::log(q);
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      throw NumericError("uncertainty_map: probabilities at pixel " + std::to_string(p) + " sum to " +
                         std::to_string(sum));
    }
    entropy.values[p] = std::max(0.0, h);
  }
  return entropy;
}

// ---------------------------------------------------------------------------
// CSV: records.csv (image_id,class,dsc,iou,present), summary.csv.

namespace detail {
inline std::string format_optional(const std::optional<double>& v) {
  if (!v) return "NA";
  std::ostringstream os;
  os << std::setprecision(17) << *v;
  return os.str();
}
}  // namespace detail

inline void write_records_csv(const std::filesystem::path& path, std::span<const MetricRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "image_id,class,dsc,iou,present\n";
  for (const auto& r : records) {
    out << r.image_id << ',' << kZoneNames[static_cast<std::size_t>(r.class_id)] << ','
        << detail::format_optional(r.dsc) << ',' << detail::format_optional(r.iou) << ','
        << (r.present_in_gt ? 1 : 0) << '\n';
  }
}

[[nodiscard]] inline std::vector<MetricRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open records file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "image_id,class,dsc,iou,present") {
    throw DataError(path.string() + ": expected header 'image_id,class,dsc,iou,present'");
  }
  const auto parse_value = [&](const std::string& s) -> std::optional<double> {
    if (s == "NA") return std::nullopt;
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": bad metric value '" + s + "'");
    }
  };
  std::vector<MetricRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, ',');) f.push_back(field);
    if (f.size() != 5) throw DataError(path.string() + ": expected 5 columns in '" + line + "'");
    const auto cls = std::find(kZoneNames.begin(), kZoneNames.end(), f[1]);
    if (cls == kZoneNames.end() || cls == kZoneNames.begin()) {
      throw DataError(path.string() + ": unknown class '" + f[1] + "'");
    }
    MetricRecord r{f[0], static_cast<int>(cls - kZoneNames.begin()), parse_value(f[2]), parse_value(f[3]), f[4] == "1"};
    if (r.present_in_gt != (r.dsc.has_value() && r.iou.has_value())) {
      throw DataError(path.string() + ": presence flag disagrees with metric values for " + r.image_id);
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline void write_summary_csv(const std::filesystem::path& path, std::span<const MetricRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(10);
  out << "class,count,mean_dsc,mean_iou,median_iou,q1_iou,q3_iou\n";
  for (int c = 1; c < kNumClasses; ++c) {
    const auto z = summarize_zone(records, c);
    out << kZoneNames[static_cast<std::size_t>(c)] << ',' << z.count << ',' << z.mean_dsc << ',' << z.mean_iou << ','
        << z.median << ',' << z.q1 << ',' << z.q3 << '\n';
  }
  const auto all = overall_means(records);
  out << "ALL," << all.count << ',' << all.mean_dsc << ',' << all.mean_iou << ",,,\n";
}

}  // namespace fauseg
