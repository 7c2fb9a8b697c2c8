#pragma once

// Mini-batch Adam on categorical cross-entropy with per-epoch evaluation,
// best/final checkpoints and a CSV history.

#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fauseg/checkpoint.hpp"
#include "fauseg/data.hpp"
#include "fauseg/evaluation.hpp"
#include "fauseg/kv_config.hpp"
#include "fauseg/models.hpp"

namespace fauseg {

struct TrainConfig {
  int epochs = 145;
  double learning_rate = 1e-4;
  int batch_size = 6;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  }

  static TrainConfig from_kv(const KeyValueConfig& kv) {
    TrainConfig c;
    c.epochs = kv.get_number_or("epochs", c.epochs);
    c.learning_rate = kv.get_number_or("learning_rate", c.learning_rate);
    c.batch_size = kv.get_number_or("batch_size", c.batch_size);
    c.seed = kv.get_number_or("seed", c.seed);
    c.validate();
    return c;
  }
};

[[nodiscard]] inline torch::optim::Adam make_optimizer(SegmentationNet& model, const TrainConfig& config) {
  return torch::optim::Adam(model->parameters(), torch::optim::AdamOptions(config.learning_rate)
                                                     .betas({config.beta1, config.beta2})
                                                     .eps(config.epsilon)
                                                     .weight_decay(0.0));
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_dsc = 0.0;
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double test_dsc = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
};

inline void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,train_loss,train_dsc,test_loss,test_dsc,seconds\n" << std::setprecision(10);
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.train_dsc << ',' << e.test_loss << ',' << e.test_dsc << ','
        << e.seconds << '\n';
  }
}

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_dir;  // receives best/, final/, history.csv
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains `model` in place on `train_set`, evaluating on `test_set` after each
/// epoch. Batch order within epoch e comes from a shuffle seeded with seed + e.
inline TrainHistory train(SegmentationNet& model, std::span<const Sample> train_set, std::span<const Sample> test_set,
                          const TrainConfig& config, const TrainOptions& options = {}) {
  config.validate();
  if (train_set.empty()) throw DataError("training split is empty");
  if (model->config().num_classes != kNumClasses) throw ConfigError("training expects a 5-class model");

  auto optimizer = make_optimizer(model, config);
  TrainHistory history;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::vector<Sample> batch;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(config.seed + static_cast<uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    model->train();
    double loss_sum = 0.0;
    std::vector<MetricRecord> train_records;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      batch.clear();
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);

      optimizer.zero_grad();
      const auto logits = model->forward(images_to_tensor(batch));
      const auto loss = cce_loss(logits, masks_to_tensor(batch));
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      loss.backward();
      optimizer.step();

      loss_sum += value * static_cast<double>(batch.size());
      const auto predictions = logits_to_labels(logits);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        auto recs = image_records(batch[i].id, predictions[i], batch[i].mask);
        train_records.insert(train_records.end(), recs.begin(), recs.end());
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train_set.size());
    record.train_dsc = overall_means(train_records).mean_dsc;
    if (!test_set.empty()) {
      const auto eval = evaluate(model, test_set, static_cast<std::size_t>(config.batch_size));
      record.test_loss = eval.mean_cce;
      record.test_dsc = eval.mean_dsc;
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    history.epochs.push_back(record);

    const double score = test_set.empty() ? record.train_loss : record.test_loss;
    if (score < best_score) {
      best_score = score;
      history.best_epoch = epoch;
      if (options.checkpoint_dir) save_checkpoint(*options.checkpoint_dir / "best", model);
    }
    if (options.on_epoch) options.on_epoch(record);
  }

  if (options.checkpoint_dir) {
    save_checkpoint(*options.checkpoint_dir / "final", model);
    write_history_csv(*options.checkpoint_dir / "history.csv", history);
  }
  return history;
}

/// Convenience overload selecting the TRAIN / TEST halves of a dataset.
inline TrainHistory train(SegmentationNet& model, const Dataset& dataset, const SplitSpec& split,
                          const TrainConfig& config, const TrainOptions& options = {}) {
  const auto train_set = select(dataset, split, Split::Train);
  const auto test_set = select(dataset, split, Split::Test);
  return train(model, train_set, test_set, config, options);
}

}  // namespace fauseg
