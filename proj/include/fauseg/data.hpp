#pragma once

// Synthetic zonal phantoms, dataset inventory and the stratified split.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fauseg/errors.hpp"
#include "fauseg/grid.hpp"
#include "fauseg/png_io.hpp"

namespace fauseg {

/// Which foreground zones an image contains. CZ and PZ are always present.
enum class ZoneCombo : std::uint8_t { CP = 0, CPT = 1, CPU = 2, CPTU = 3 };

inline constexpr std::array<ZoneCombo, 4> kAllCombos{ZoneCombo::CP, ZoneCombo::CPT, ZoneCombo::CPU, ZoneCombo::CPTU};

/// Image counts per combination in the reference dataset (205 images).
inline constexpr std::array<int, 4> kComboWeights{73, 68, 23, 41};

[[nodiscard]] inline std::string_view combo_name(ZoneCombo combo) {
  static constexpr std::array<std::string_view, 4> names{"CP", "CPT", "CPU", "CPTU"};
  return names[static_cast<std::size_t>(combo)];
}

[[nodiscard]] inline ZoneCombo parse_combo(std::string_view name) {
  for (const auto c : kAllCombos) {
    if (combo_name(c) == name) return c;
  }
  throw DataError("unknown zone combination '" + std::string(name) + "'");
}

[[nodiscard]] inline bool combo_has_tz(ZoneCombo c) { return c == ZoneCombo::CPT || c == ZoneCombo::CPTU; }
[[nodiscard]] inline bool combo_has_tumor(ZoneCombo c) { return c == ZoneCombo::CPU || c == ZoneCombo::CPTU; }

[[nodiscard]] inline std::set<int> combo_labels(ZoneCombo c) {
  std::set<int> labels{1, 2};
  if (combo_has_tz(c)) labels.insert(3);
  if (combo_has_tumor(c)) labels.insert(4);
  return labels;
}

[[nodiscard]] inline std::set<int> nonzero_labels(const LabelMap& mask) {
  std::array<bool, 256> seen{};
  for (const auto v : mask.values) seen[v] = true;
  std::set<int> labels;
  for (int v = 1; v < 256; ++v) {
    if (seen[static_cast<std::size_t>(v)]) labels.insert(v);
  }
  return labels;
}

/// Display colors: BG black, CZ blue, PZ green, TZ yellow, TUM red.
inline constexpr std::array<png::Rgb, kNumClasses> kZoneColors{
    png::Rgb{0, 0, 0}, png::Rgb{40, 90, 255}, png::Rgb{40, 200, 60}, png::Rgb{255, 220, 0}, png::Rgb{230, 30, 30}};

struct Sample {
  std::string id;
  Image image;
  LabelMap mask;
  ZoneCombo combo = ZoneCombo::CP;
};

struct PhantomOptions {
  int size = 256;
  double noise_sigma = 0.05;
  double blur_sigma = 1.0;
  // Mean intensity per class: BG, CZ, PZ, TZ, TUM.
  std::array<double, kNumClasses> intensity{0.1, 0.55, 0.4, 0.7, 0.85};
};

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur with clamp-to-edge borders.
inline std::vector<double> blur(const std::vector<double>& src, int h, int w, double sigma) {
  if (sigma <= 0.0) return src;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        acc += k[static_cast<std::size_t>(i + r)] * src[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) {
        acc += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

struct Ellipse {
  double cx, cy, rx, ry, angle;

  // Coordinates in the ellipse frame, normalized so the boundary is at radius 1.
  [[nodiscard]] std::pair<double, double> local(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    return {(c * dx + s * dy) / rx, (-s * dx + c * dy) / ry};
  }
  [[nodiscard]] bool contains(double x, double y) const {
    const auto [u, v] = local(x, y);
    return u * u + v * v <= 1.0;
  }
};

inline LabelMap draw_phantom_mask(std::mt19937_64& rng, ZoneCombo combo, int size) {
  const double s = size / 256.0;
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double cx = size / 2.0 + uniform(-12, 12) * s;
  const double cy = size / 2.0 + uniform(-12, 12) * s;
  const Ellipse cz{cx, cy, uniform(40, 55) * s, uniform(30, 42) * s, uniform(-0.3, 0.3)};

  // PZ: posterior crescent between CZ and a larger, downward-shifted ellipse.
  const double shift = uniform(0.25, 0.4) * cz.ry;
  const Ellipse outer{cx - std::sin(cz.angle) * shift, cy + std::cos(cz.angle) * shift, cz.rx * uniform(1.2, 1.35),
                      cz.ry * uniform(1.25, 1.45), cz.angle};
  const double pz_cut = uniform(-0.35, -0.15);

  const double tz_shift = uniform(0.1, 0.25) * cz.ry;
  const Ellipse tz{cx + std::sin(cz.angle) * tz_shift, cy - std::cos(cz.angle) * tz_shift,
                   uniform(0.35, 0.5) * cz.rx, uniform(0.35, 0.5) * cz.ry, cz.angle + uniform(-0.2, 0.2)};

  // Tumor: lobed blob centred on the lower CZ boundary so it straddles zones.
  const double boundary_angle = uniform(0.25, 0.75) * std::numbers::pi;
  const double ca = std::cos(cz.angle), sa = std::sin(cz.angle);
  const double bu = cz.rx * std::cos(boundary_angle), bv = cz.ry * std::sin(boundary_angle);
  const double tum_x = cx + ca * bu - sa * bv;
  const double tum_y = cy + sa * bu + ca * bv;
  const double tum_r = uniform(10, 16) * s;
  const double phase3 = uniform(0, 2 * std::numbers::pi), phase5 = uniform(0, 2 * std::numbers::pi);

  LabelMap mask(size, size, 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      std::uint8_t label = 0;
      const bool in_cz = cz.contains(px, py);
      if (in_cz) label = 1;
      if (!in_cz && outer.contains(px, py) && cz.local(px, py).second > pz_cut) label = 2;
      if (combo_has_tz(combo) && tz.contains(px, py)) label = 3;
      if (combo_has_tumor(combo)) {
        const double dx = px - tum_x, dy = py - tum_y;
        const double theta = std::atan2(dy, dx);
        const double radius = tum_r * (1.0 + 0.25 * std::sin(3 * theta + phase3) + 0.15 * std::sin(5 * theta + phase5));
        if (dx * dx + dy * dy <= radius * radius) label = 4;
      }
      mask(y, x) = label;
    }
  }
  return mask;
}

}  // namespace detail

/// Deterministic phantom for (seed, combo). Zones are painted CZ, PZ, TZ, TUM
/// with later zones overwriting earlier ones, so labels are exclusive.
[[nodiscard]] inline Sample generate_phantom(uint64_t seed, ZoneCombo combo, const PhantomOptions& options = {}) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(combo)};
  std::mt19937_64 rng(seq);
  const int n = options.size;

  LabelMap mask;
  const auto wanted = combo_labels(combo);
  // Redraw in the (rare) case a zone ends up fully covered by a later one.
  for (int attempt = 0;; ++attempt) {
    mask = detail::draw_phantom_mask(rng, combo, n);
    if (nonzero_labels(mask) == wanted) break;
    if (attempt == 64) throw DataError("phantom generator could not realise combination " + std::string(combo_name(combo)));
  }

  std::normal_distribution<double> noise(0.0, options.noise_sigma);
  std::vector<double> intensity(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    intensity[i] = std::clamp(options.intensity[mask.values[i]] + noise(rng), 0.0, 1.0);
  }
  intensity = detail::blur(intensity, n, n, options.blur_sigma);

  Sample sample;
  sample.combo = combo;
  sample.mask = std::move(mask);
  sample.image = Image(n, n);
  for (std::size_t i = 0; i < intensity.size(); ++i) {
    sample.image.values[i] = static_cast<float>(std::clamp(intensity[i], 0.0, 1.0));
  }
  return sample;
}

/// Largest-remainder apportionment of `total` proportional to `weights`.
/// Ties in the remainder go to the earlier stratum.
[[nodiscard]] inline std::vector<int> apportion(std::span<const int> weights, int total) {
  if (weights.empty()) throw ConfigError("apportion: no strata");
  int64_t weight_sum = 0;
  for (const int w : weights) {
    if (w < 0) throw ConfigError("apportion: negative weight");
    weight_sum += w;
  }
  if (weight_sum == 0) throw ConfigError("apportion: all weights are zero");
  std::vector<int> counts(weights.size());
  std::vector<int64_t> remainders(weights.size());
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const int64_t scaled = static_cast<int64_t>(weights[i]) * total;
    counts[i] = static_cast<int>(scaled / weight_sum);
    remainders[i] = scaled % weight_sum;
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[order[k % order.size()]];
  return counts;
}

struct Dataset {
  std::vector<Sample> samples;
};

[[nodiscard]] inline std::string sample_id(int index) {
  std::ostringstream os;
  os << "img" << std::setw(4) << std::setfill('0') << index;
  return os.str();
}

/// `total` phantoms whose combinations follow the reference 73:68:23:41 mix.
[[nodiscard]] inline Dataset generate_dataset(uint64_t seed, int total = 205, const PhantomOptions& options = {}) {
  if (total < 4) throw ConfigError("dataset total must be >= 4, got " + std::to_string(total));
  const auto counts = apportion(kComboWeights, total);
  Dataset dataset;
  dataset.samples.reserve(static_cast<std::size_t>(total));
  std::mt19937_64 seeds(seed);
  int index = 0;
  for (std::size_t c = 0; c < kAllCombos.size(); ++c) {
    for (int i = 0; i < counts[c]; ++i, ++index) {
      auto sample = generate_phantom(seeds(), kAllCombos[c], options);
      sample.id = sample_id(index);
      dataset.samples.push_back(std::move(sample));
    }
  }
  return dataset;
}

enum class Split : std::uint8_t { Train, Test };

[[nodiscard]] inline std::string_view split_name(Split s) { return s == Split::Train ? "train" : "test"; }

[[nodiscard]] inline Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  throw DataError("unknown split '" + std::string(name) + "'");
}

struct ManifestEntry {
  std::string id;
  ZoneCombo combo = ZoneCombo::CP;
};

struct SplitSpec {
  uint64_t seed = 0;
  std::map<std::string, Split> assignment;

  [[nodiscard]] Split at(const std::string& id) const {
    const auto it = assignment.find(id);
    if (it == assignment.end()) throw DataError("sample '" + id + "' has no split assignment");
    return it->second;
  }
  [[nodiscard]] std::size_t count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(assignment.begin(), assignment.end(), [s](const auto& kv) { return kv.second == s; }));
  }
};

[[nodiscard]] inline std::vector<ManifestEntry> manifest_entries(const Dataset& dataset) {
  std::vector<ManifestEntry> entries;
  entries.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) entries.push_back({s.id, s.combo});
  return entries;
}

/// Per-stratum train counts: floor(fraction * n) per combination, then the
/// strata with the largest fractional remainders are promoted until the global
/// train count reaches round(fraction * total).
[[nodiscard]] inline std::array<int, 4> stratified_train_counts(const std::array<int, 4>& stratum_sizes,
                                                                double train_fraction) {
  constexpr double kEps = 1e-9;
  std::array<int, 4> train{};
  std::array<double, 4> remainder{};
  int total = 0, assigned = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    const double exact = train_fraction * stratum_sizes[c];
    train[c] = std::min(stratum_sizes[c], static_cast<int>(std::floor(exact + kEps)));
    remainder[c] = std::max(0.0, exact - train[c]);
    total += stratum_sizes[c];
    assigned += train[c];
  }
  const int target = static_cast<int>(std::floor(train_fraction * total + 0.5 + kEps));
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b] + kEps; });
  for (const auto c : order) {
    if (assigned >= target) break;
    if (train[c] < stratum_sizes[c] && remainder[c] > kEps) {
      ++train[c];
      ++assigned;
    }
  }
  return train;
}

[[nodiscard]] inline SplitSpec stratified_split(std::span<const ManifestEntry> entries, double train_fraction,
                                                uint64_t seed) {
  if (entries.empty()) throw DataError("cannot split an empty manifest");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train fraction must lie in [0, 1]");
  }
  std::array<std::vector<std::string>, 4> strata;
  for (const auto& e : entries) strata[static_cast<std::size_t>(e.combo)].push_back(e.id);
  std::array<int, 4> sizes{};
  for (std::size_t c = 0; c < 4; ++c) {
    std::sort(strata[c].begin(), strata[c].end());
    sizes[c] = static_cast<int>(strata[c].size());
  }
  const auto train = stratified_train_counts(sizes, train_fraction);

  SplitSpec spec;
  spec.seed = seed;
  for (std::size_t c = 0; c < 4; ++c) {
    std::mt19937_64 rng(seed * 4 + c);
    std::shuffle(strata[c].begin(), strata[c].end(), rng);
    for (std::size_t i = 0; i < strata[c].size(); ++i) {
      const auto [it, inserted] =
          spec.assignment.emplace(strata[c][i], static_cast<int>(i) < train[c] ? Split::Train : Split::Test);
      if (!inserted) throw DataError("duplicate sample id '" + strata[c][i] + "' in manifest");
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// On-disk layout: images/<id>.png (8-bit gray), masks/<id>.png (8-bit
// paletted, index = class), manifest.csv (id,combo,split).

[[nodiscard]] inline png::Raster image_to_raster(const Image& image) {
  png::Raster r{image.width, image.height, png::PixelFormat::Gray, {}, {}};
  r.pixels.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    r.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(image.values[i], 0.0f, 1.0f)));
  }
  return r;
}

inline void write_image(const std::filesystem::path& path, const Image& image) { png::write(path, image_to_raster(image)); }

[[nodiscard]] inline Image read_image(const std::filesystem::path& path) {
  const auto r = png::read(path);
  if (r.format != png::PixelFormat::Gray) throw DataError(path.string() + ": expected an 8-bit grayscale image");
  Image image(r.height, r.width);
  for (std::size_t i = 0; i < r.pixels.size(); ++i) image.values[i] = static_cast<float>(r.pixels[i] / 255.0);
  return image;
}

inline void write_mask(const std::filesystem::path& path, const LabelMap& mask) {
  png::Raster r{mask.width, mask.height, png::PixelFormat::Palette, mask.values,
                std::vector<png::Rgb>(kZoneColors.begin(), kZoneColors.end())};
  for (const auto v : mask.values) {
    if (v >= kNumClasses) throw DataError(path.string() + ": label value " + std::to_string(v) + " outside 0..4");
  }
  png::write(path, r);
}

/// Reads a paletted or grayscale mask; every pixel must be a class index 0..4.
[[nodiscard]] inline LabelMap read_mask(const std::filesystem::path& path) {
  const auto r = png::read(path);
  if (r.format == png::PixelFormat::Rgb) throw DataError(path.string() + ": mask must be paletted or grayscale");
  LabelMap mask(r.height, r.width);
  for (std::size_t i = 0; i < r.pixels.size(); ++i) {
    if (r.pixels[i] >= kNumClasses) {
      throw DataError(path.string() + ": invalid mask value " + std::to_string(r.pixels[i]) + " (expected 0..4)");
    }
    mask.values[i] = r.pixels[i];
  }
  return mask;
}

inline void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries,
                           const SplitSpec& split) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "id,combo,split\n";
  for (const auto& e : entries) out << e.id << ',' << combo_name(e.combo) << ',' << split_name(split.at(e.id)) << '\n';
}

struct ManifestFile {
  std::vector<ManifestEntry> entries;
  SplitSpec split;
};

[[nodiscard]] inline ManifestFile read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "id,combo,split") {
    throw DataError(path.string() + ": expected header 'id,combo,split'");
  }
  ManifestFile m;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != 3) throw DataError(path.string() + ":" + std::to_string(number) + ": expected 3 columns");
    m.entries.push_back({fields[0], parse_combo(fields[1])});
    if (!m.split.assignment.emplace(fields[0], parse_split(fields[2])).second) {
      throw DataError(path.string() + ": duplicate id '" + fields[0] + "'");
    }
  }
  return m;
}

inline void save_dataset(const std::filesystem::path& dir, const Dataset& dataset, const SplitSpec& split) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  for (const auto& s : dataset.samples) {
    write_image(dir / "images" / (s.id + ".png"), s.image);
    write_mask(dir / "masks" / (s.id + ".png"), s.mask);
  }
  write_manifest(dir / "manifest.csv", manifest_entries(dataset), split);
}

struct LoadedDataset {
  Dataset dataset;
  SplitSpec split;
};

/// Loads every sample listed in manifest.csv and validates image/mask pairs.
[[nodiscard]] inline LoadedDataset load_dataset(const std::filesystem::path& dir) {
  auto manifest = read_manifest(dir / "manifest.csv");
  LoadedDataset loaded;
  loaded.split = std::move(manifest.split);
  for (const auto& e : manifest.entries) {
    Sample s;
    s.id = e.id;
    s.combo = e.combo;
    s.image = read_image(dir / "images" / (e.id + ".png"));
    s.mask = read_mask(dir / "masks" / (e.id + ".png"));
    if (s.image.height != s.mask.height || s.image.width != s.mask.width) {
      throw DataError("sample '" + e.id + "': image and mask sizes differ");
    }
    loaded.dataset.samples.push_back(std::move(s));
  }
  return loaded;
}

[[nodiscard]] inline std::vector<Sample> select(const Dataset& dataset, const SplitSpec& split, Split which) {
  std::vector<Sample> out;
  for (const auto& s : dataset.samples) {
    if (split.at(s.id) == which) out.push_back(s);
  }
  return out;
}

}  // namespace fauseg
