#pragma once

// Flat experiment settings shared by the command-line front end. Everything
// is read from one KeyValueConfig so a config file and command-line flags
// merge by simply overwriting keys.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "fauseg/kv_config.hpp"
#include "fauseg/models.hpp"
#include "fauseg/train.hpp"

namespace fauseg {

/// Comma- or whitespace-separated architecture names; "all" expands to every
/// supported architecture. Duplicates are dropped, order is kept.
[[nodiscard]] inline std::vector<Arch> parse_arch_list(const std::string& text) {
  std::vector<Arch> archs;
  std::string token;
  std::istringstream in(text);
  const auto add = [&](Arch a) {
    if (std::find(archs.begin(), archs.end(), a) == archs.end()) archs.push_back(a);
  };
  for (std::string word; in >> word;) {
    std::istringstream parts(word);
    while (std::getline(parts, token, ',')) {
      if (token.empty()) continue;
      if (token == "all") {
        for (const auto a : kAllArchs) add(a);
      } else {
        add(parse_arch(token));
      }
    }
  }
  if (archs.empty()) throw ConfigError("architecture list is empty");
  return archs;
}

[[nodiscard]] inline std::string arch_list_string(const std::vector<Arch>& archs) {
  std::string s;
  for (const auto a : archs) {
    if (!s.empty()) s += ',';
    s += arch_name(a);
  }
  return s;
}

struct ExperimentConfig {
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "runs";
  std::vector<Arch> archs{kAllArchs.begin(), kAllArchs.end()};
  ModelConfig model;  // arch field is overridden per architecture
  TrainConfig train;
  int total = 205;
  double train_fraction = 0.85;
  int image_size = 256;
  bool report_boxplot = true;
  bool report_grid = true;

  void validate() const {
    if (total < 4) throw ConfigError("total must be >= 4 (one sample per zone combination), got " + std::to_string(total));
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must be in (0, 1)");
    if (image_size < 16 || image_size % 16 != 0) throw ConfigError("image size must be a positive multiple of 16");
    if (archs.empty()) throw ConfigError("no architectures selected");
    train.validate();
    model.validate();
  }

  [[nodiscard]] ModelConfig model_for(Arch arch) const {
    auto c = model;
    c.arch = arch;
    return c;
  }

  static ExperimentConfig from_kv(const KeyValueConfig& kv) {
    ExperimentConfig c;
    if (const auto v = kv.get("data_dir")) c.data_dir = *v;
    if (const auto v = kv.get("out_dir")) c.out_dir = *v;
    if (const auto v = kv.get("archs")) c.archs = parse_arch_list(*v);
    c.model = ModelConfig::from_kv(kv);
    c.train = TrainConfig::from_kv(kv);
    c.total = kv.get_number_or("total", c.total);
    c.train_fraction = kv.get_number_or("train_fraction", c.train_fraction);
    c.image_size = kv.get_number_or("image_size", c.image_size);
    c.report_boxplot = parse_bool(kv, "report_boxplot", c.report_boxplot);
    c.report_grid = parse_bool(kv, "report_grid", c.report_grid);
    c.validate();
    return c;
  }

 private:
  static bool parse_bool(const KeyValueConfig& kv, const std::string& key, bool fallback) {
    const auto v = kv.get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got " + *v);
  }
};

}  // namespace fauseg
