#pragma once

// Checkpoint directory: config.txt (model config as key = value),
// parameters.pt (torch serialized module) and params.csv (layer, count).

#include <torch/torch.h>

#include <filesystem>
#include <fstream>

#include "fauseg/errors.hpp"
#include "fauseg/kv_config.hpp"
#include "fauseg/models.hpp"

namespace fauseg {

inline void write_param_report_csv(const std::filesystem::path& path, const ParamReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "layer,count\n";
  for (const auto& [layer, count] : report.layers) out << layer << ',' << count << '\n';
  out << "total," << report.total << '\n';
}

inline void save_checkpoint(const std::filesystem::path& dir, SegmentationNet& model) {
  std::filesystem::create_directories(dir);
  model->config().to_kv().save(dir / "config.txt");
  torch::save(model, (dir / "parameters.pt").string());
  write_param_report_csv(dir / "params.csv", count_parameters(model));
}

[[nodiscard]] inline SegmentationNet load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("checkpoint directory not found: " + dir.string());
  for (const char* file : {"config.txt", "parameters.pt"}) {
    if (!std::filesystem::exists(dir / file)) throw DataError("checkpoint is missing " + (dir / file).string());
  }
  auto model = build(ModelConfig::from_kv(KeyValueConfig::load(dir / "config.txt")));
  try {
    torch::load(model, (dir / "parameters.pt").string());
  } catch (const c10::Error& e) {
    throw DataError("cannot load parameters from " + (dir / "parameters.pt").string() + ": " + e.what_without_backtrace());
  }
  return model;
}

}  // namespace fauseg
