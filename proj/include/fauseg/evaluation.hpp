#pragma once

// Tensor-side glue: batching samples, the categorical cross-entropy loss and
// model evaluation into metric records.

#include <torch/torch.h>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fauseg/data.hpp"
#include "fauseg/metrics.hpp"
#include "fauseg/models.hpp"

namespace fauseg {

[[nodiscard]] inline torch::Tensor images_to_tensor(std::span<const Sample> samples) {
  if (samples.empty()) throw DataError("cannot batch zero samples");
  const int h = samples.front().image.height, w = samples.front().image.width;
  auto t = torch::empty({static_cast<int64_t>(samples.size()), 1, h, w}, torch::kFloat);
  auto* dst = t.data_ptr<float>();
  for (const auto& s : samples) {
    if (s.image.height != h || s.image.width != w) throw ShapeError("batch mixes image sizes (" + s.id + ")");
    dst = std::copy(s.image.values.begin(), s.image.values.end(), dst);
  }
  return t;
}

[[nodiscard]] inline torch::Tensor masks_to_tensor(std::span<const Sample> samples) {
  if (samples.empty()) throw DataError("cannot batch zero samples");
  const int h = samples.front().mask.height, w = samples.front().mask.width;
  auto t = torch::empty({static_cast<int64_t>(samples.size()), h, w}, torch::kLong);
  auto* dst = t.data_ptr<int64_t>();
  for (const auto& s : samples) {
    if (s.mask.height != h || s.mask.width != w) throw ShapeError("batch mixes mask sizes (" + s.id + ")");
    dst = std::copy(s.mask.values.begin(), s.mask.values.end(), dst);
  }
  return t;
}

/// Mean over all pixels (background included) of -log softmax(logits)[target].
[[nodiscard]] inline torch::Tensor cce_loss(const torch::Tensor& logits, const torch::Tensor& target) {
  if (logits.dim() != 4 || target.dim() != 3 || logits.size(0) != target.size(0) || logits.size(2) != target.size(1) ||
      logits.size(3) != target.size(2)) {
    throw ShapeError("cce_loss: expected logits (N,C,H,W) and target (N,H,W) of matching size");
  }
  const auto classes = logits.size(1);
  if (target.numel() > 0) {
    const auto lo = target.min().item<int64_t>(), hi = target.max().item<int64_t>();
    if (lo < 0 || hi >= classes) {
      throw DataError("cce_loss: target label " + std::to_string(lo < 0 ? lo : hi) + " outside 0.." +
                      std::to_string(classes - 1));
    }
  }
  return torch::nn::functional::cross_entropy(logits, target);
}

/// One-hot logits reproducing `masks` exactly (scaled so softmax is ~one-hot).
[[nodiscard]] inline torch::Tensor one_hot_logits(std::span<const Sample> samples, double scale = 1000.0) {
  const auto masks = masks_to_tensor(samples);
  return torch::one_hot(masks, kNumClasses).permute({0, 3, 1, 2}).to(torch::kFloat) * scale;
}

/// Softmax entropy per pixel for one logits plane (C, H, W).
[[nodiscard]] inline Grid<double> logits_entropy(const torch::Tensor& logits) {
  if (logits.dim() != 3) throw ShapeError("logits_entropy expects (classes, H, W)");
  const auto probs = torch::softmax(logits.detach().to(torch::kCPU, torch::kDouble), 0).contiguous();
  return uncertainty_map(std::span<const double>(probs.data_ptr<double>(), static_cast<std::size_t>(probs.numel())),
                         static_cast<int>(probs.size(0)), static_cast<int>(probs.size(1)),
                         static_cast<int>(probs.size(2)));
}

struct EvalResult {
  std::vector<MetricRecord> records;
  double mean_iou = 0.0;
  double mean_dsc = 0.0;
  double mean_cce = 0.0;
};

/// Folds (logits, ground truth) batches into records and a pixel-weighted CCE.
class EvalAccumulator {
 public:
  void add(const torch::Tensor& logits, std::span<const Sample> batch) {
    torch::NoGradGuard no_grad;
    const auto loss = cce_loss(logits, masks_to_tensor(batch)).item<double>();
    if (!std::isfinite(loss)) throw NumericError("non-finite evaluation loss");
    loss_sum_ += loss * static_cast<double>(batch.size());
    images_ += batch.size();
    const auto predictions = logits_to_labels(logits);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto recs = image_records(batch[i].id, predictions[i], batch[i].mask);
      records_.insert(records_.end(), recs.begin(), recs.end());
    }
  }

  [[nodiscard]] EvalResult result() const {
    EvalResult r;
    r.records = records_;
    const auto means = overall_means(records_);
    r.mean_dsc = means.mean_dsc;
    r.mean_iou = means.mean_iou;
    r.mean_cce = images_ ? loss_sum_ / static_cast<double>(images_) : std::numeric_limits<double>::quiet_NaN();
    return r;
  }

 private:
  std::vector<MetricRecord> records_;
  double loss_sum_ = 0.0;
  std::size_t images_ = 0;
};

/// Records for every (image, foreground class), macro means over the defined
/// records and CCE averaged over images.
[[nodiscard]] inline EvalResult evaluate(SegmentationNet& model, std::span<const Sample> samples,
                                         std::size_t batch_size = 6) {
  if (samples.empty()) throw DataError("evaluate: empty test set");
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  EvalAccumulator acc;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const auto batch = samples.subspan(start, std::min(batch_size, samples.size() - start));
    acc.add(model->forward(images_to_tensor(batch)), batch);
  }
  model->train(was_training);
  return acc.result();
}

/// Stand-in predictor that echoes the ground truth; used to check the
/// evaluation path end to end.
[[nodiscard]] inline EvalResult evaluate_ground_truth_echo(std::span<const Sample> samples) {
  if (samples.empty()) throw DataError("evaluate: empty test set");
  EvalAccumulator acc;
  for (const auto& s : samples) acc.add(one_hot_logits(std::span<const Sample>(&s, 1)), std::span<const Sample>(&s, 1));
  return acc.result();
}

}  // namespace fauseg
