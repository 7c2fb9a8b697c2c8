// fauseg — command-line front end: synthesize data, split, train, evaluate,
// count parameters, predict and render report figures.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <CLI11.hpp>
#include <torch/torch.h>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "fauseg/checkpoint.hpp"
#include "fauseg/data.hpp"
#include "fauseg/evaluation.hpp"
#include "fauseg/experiment.hpp"
#include "fauseg/metrics.hpp"
#include "fauseg/models.hpp"
#include "fauseg/report.hpp"
#include "fauseg/train.hpp"

namespace fs = std::filesystem;
using namespace fauseg;

namespace {

// Collects "--flag value" pairs that map onto config keys, so a --config file
// and flags merge into one KeyValueConfig with flags winning.
class FlagSet {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = storage_[app->get_name() + "/" + key];
    auto* opt = app->add_option(flag, slot, help);
    if (key == "archs") opt->multi_option_policy(CLI::MultiOptionPolicy::Join)->delimiter(',');
    bindings_.push_back({opt, key, &slot});
  }

  void add_config(CLI::App* app) { app->add_option("--config", config_path_, "key = value config file"); }

  [[nodiscard]] KeyValueConfig merged() const {
    auto kv = config_path_.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path_);
    for (const auto& b : bindings_) {
      if (b.option->count() > 0) kv.set(b.key, *b.value);
    }
    return kv;
  }

 private:
  struct Binding {
    CLI::Option* option;
    std::string key;
    std::string* value;
  };
  std::map<std::string, std::string> storage_;
  std::vector<Binding> bindings_;
  std::string config_path_;
};

void add_common(FlagSet& flags, CLI::App* app) {
  flags.add_config(app);
  flags.add(app, "--seed", "seed", "random seed");
  flags.add(app, "--arch", "archs", "architectures (comma list or 'all')");
  flags.add(app, "--epochs", "epochs", "training epochs");
  flags.add(app, "--data-dir", "data_dir", "dataset directory");
  flags.add(app, "--out-dir", "out_dir", "output directory");
}

void print_combo_counts(const std::vector<ManifestEntry>& entries, const SplitSpec& split) {
  std::cout << "combo,total,train,test\n";
  int tr_all = 0, te_all = 0;
  for (const auto combo : kAllCombos) {
    int tr = 0, te = 0;
    for (const auto& e : entries) {
      if (e.combo != combo) continue;
      (split.at(e.id) == Split::Train ? tr : te)++;
    }
    tr_all += tr;
    te_all += te;
    std::cout << combo_name(combo) << ',' << tr + te << ',' << tr << ',' << te << '\n';
  }
  std::cout << "ALL," << tr_all + te_all << ',' << tr_all << ',' << te_all << '\n';
}

std::vector<Sample> samples_for(const LoadedDataset& data, const std::string& which) {
  if (which == "all") return data.dataset.samples;
  return select(data.dataset, data.split, parse_split(which));
}

SegmentationNet load_model_for(const ExperimentConfig& cfg, Arch arch, const std::string& checkpoint) {
  const fs::path dir = checkpoint.empty() ? cfg.out_dir / arch_name(arch) / "best" : fs::path(checkpoint);
  if (!fs::exists(dir / "config.txt")) throw DataError("checkpoint not found: " + dir.string());
  auto model = load_checkpoint(dir);
  if (model->config().arch != arch) {
    throw ConfigError("checkpoint " + dir.string() + " holds " + std::string(arch_name(model->config().arch)) +
                      ", not " + std::string(arch_name(arch)));
  }
  return model;
}

// ---------------------------------------------------------------------------

int cmd_synth(const ExperimentConfig& cfg) {
  PhantomOptions options;
  options.size = cfg.image_size;
  const auto dataset = generate_dataset(cfg.train.seed, cfg.total, options);
  const auto entries = manifest_entries(dataset);
  const auto split = stratified_split(entries, cfg.train_fraction, cfg.train.seed);
  save_dataset(cfg.out_dir, dataset, split);
  std::cout << "wrote " << dataset.samples.size() << " samples to " << cfg.out_dir.string() << '\n';
  print_combo_counts(entries, split);
  return 0;
}

int cmd_split(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto manifest = read_manifest(cfg.data_dir / "manifest.csv");
  const auto split = stratified_split(manifest.entries, cfg.train_fraction, cfg.train.seed);
  fs::create_directories(out_dir);
  write_manifest(out_dir / "manifest.csv", manifest.entries, split);
  print_combo_counts(manifest.entries, split);
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  const auto data = load_dataset(cfg.data_dir);
  for (const auto arch : cfg.archs) {
    auto model = build(cfg.model_for(arch), cfg.train.seed);
    const auto dir = cfg.out_dir / arch_name(arch);
    std::cout << "== " << arch_name(arch) << " (" << trainable_parameter_count(*model) << " parameters)\n"
              << "epoch,train_loss,train_dsc,test_loss,test_dsc,seconds\n";
    TrainOptions options;
    options.checkpoint_dir = dir;
    options.on_epoch = [](const EpochRecord& e) {
      std::cout << e.epoch << ',' << e.train_loss << ',' << e.train_dsc << ',' << e.test_loss << ',' << e.test_dsc
                << ',' << e.seconds << std::endl;
    };
    const auto history = train(model, data.dataset, data.split, cfg.train, options);
    std::cout << "best epoch " << history.best_epoch << ", checkpoints in " << dir.string() << '\n';
  }
  return 0;
}

struct EvalFlags {
  std::string checkpoint;
  std::string split = "test";
  bool echo_ground_truth = false;
  bool untrained = false;
};

int cmd_eval(const ExperimentConfig& cfg, const EvalFlags& flags) {
  if (!flags.checkpoint.empty() && cfg.archs.size() != 1) {
    throw ConfigError("--checkpoint needs exactly one --arch");
  }
  const auto data = load_dataset(cfg.data_dir);
  const auto samples = samples_for(data, flags.split);
  std::vector<ResultRow> rows;
  for (const auto arch : cfg.archs) {
    EvalResult result;
    if (flags.echo_ground_truth) {
      result = evaluate_ground_truth_echo(samples);
    } else {
      auto model = flags.untrained ? build(cfg.model_for(arch), cfg.train.seed) : load_model_for(cfg, arch, flags.checkpoint);
      result = evaluate(model, samples, cfg.train.batch_size);
    }
    if (!std::isfinite(result.mean_cce)) throw NumericError(std::string(arch_name(arch)) + ": non-finite evaluation loss");
    const auto dir = cfg.out_dir / arch_name(arch);
    fs::create_directories(dir);
    write_records_csv(dir / "records.csv", result.records);
    write_summary_csv(dir / "summary.csv", result.records);
    rows.push_back({arch, result.mean_iou, result.mean_dsc, result.mean_cce});
  }
  fs::create_directories(cfg.out_dir);
  write_results_table(cfg.out_dir / "results_table.csv", rows);
  std::cout << "arch,iou_pct,dsc_pct,loss\n" << std::fixed;
  for (const auto& r : rows) {
    std::cout << arch_name(r.arch) << ',' << std::setprecision(2) << 100.0 * r.mean_iou << ',' << 100.0 * r.mean_dsc
              << ',' << std::setprecision(4) << r.mean_cce << '\n';
  }
  return 0;
}

int cmd_params(const ExperimentConfig& cfg, bool write_table) {
  std::vector<std::pair<Arch, int64_t>> counts;
  for (const auto arch : cfg.archs) counts.emplace_back(arch, count_parameters(build(cfg.model_for(arch))).total);
  const auto table = param_table(counts);
  write_param_table(std::cout, table);
  if (write_table) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir / "param_table.csv");
    if (!out) throw DataError("cannot write " + (cfg.out_dir / "param_table.csv").string());
    write_param_table(out, table);
  }
  if (!table.ok()) {
    std::cerr << "error: parameter counts violate the reference "
              << (table.ordering_matches ? "tolerance" : "ordering") << '\n';
    return static_cast<int>(ExitCode::Numeric);
  }
  return 0;
}

int cmd_predict(const ExperimentConfig& cfg, const std::string& checkpoint, const std::string& which, int limit) {
  if (!checkpoint.empty() && cfg.archs.size() != 1) throw ConfigError("--checkpoint needs exactly one --arch");
  const auto data = load_dataset(cfg.data_dir);
  auto samples = samples_for(data, which);
  if (limit > 0 && static_cast<std::size_t>(limit) < samples.size()) samples.resize(static_cast<std::size_t>(limit));
  if (samples.empty()) throw DataError("no samples to predict");
  for (const auto arch : cfg.archs) {
    auto model = load_model_for(cfg, arch, checkpoint);
    model->eval();
    const auto dir = cfg.out_dir / arch_name(arch) / "predictions";
    fs::create_directories(dir);
    torch::NoGradGuard no_grad;
    for (const auto& s : samples) {
      const auto logits = model->forward(images_to_tensor(std::span(&s, 1)));
      write_mask(dir / (s.id + ".png"), logits_to_labels(logits)[0]);
      const auto entropy = logits_entropy(logits[0]);
      Image scaled(entropy.height, entropy.width);
      for (std::size_t i = 0; i < entropy.values.size(); ++i) {
        scaled.values[i] = static_cast<float>(entropy.values[i] / std::log(static_cast<double>(kNumClasses)));
      }
      write_image(dir / (s.id + "_entropy.png"), scaled);
    }
    std::cout << arch_name(arch) << ": " << samples.size() << " predictions in " << dir.string() << '\n';
  }
  return 0;
}

int cmd_report(const ExperimentConfig& cfg, bool archs_given) {
  std::vector<ModelRecords> models;
  std::vector<Arch> archs;
  for (const auto arch : cfg.archs) {
    const auto path = cfg.out_dir / arch_name(arch) / "records.csv";
    if (!fs::exists(path)) {
      if (archs_given) throw DataError("records not found: " + path.string());
      continue;
    }
    auto records = read_records_csv(path);
    if (records.empty()) throw DataError("empty records: " + path.string());
    models.push_back({std::string(arch_display_name(arch)), std::move(records)});
    archs.push_back(arch);
  }
  if (models.empty()) throw DataError("no records.csv found under " + cfg.out_dir.string());

  const auto fig_dir = cfg.out_dir / "figures";
  fs::create_directories(fig_dir);
  if (cfg.report_boxplot) {
    const auto fig = render_boxplot(models);
    fig.canvas.save(fig_dir / "iou_boxplot.png");
    std::cout << "boxplot: " << fig.groups.size() << " groups -> " << (fig_dir / "iou_boxplot.png").string() << '\n';
  }
  if (cfg.report_grid) {
    const auto data = load_dataset(cfg.data_dir);
    auto pool = select(data.dataset, data.split, Split::Test);
    if (pool.empty()) pool = data.dataset.samples;
    const auto examples = grid_examples(pool);
    std::vector<PredictionRow> rows;
    for (std::size_t m = 0; m < archs.size(); ++m) {
      auto model = load_model_for(cfg, archs[m], "");
      rows.push_back({models[m].name, predict_labels(model, images_to_tensor(examples))});
    }
    const auto fig = render_prediction_grid(examples, rows);
    fig.canvas.save(fig_dir / "prediction_grid.png");
    std::cout << "prediction grid: " << fig.panels() << " panels -> " << (fig_dir / "prediction_grid.png").string()
              << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fauseg: prostate-zone segmentation model zoo and experiment harness"};
  app.require_subcommand(1, 1);
  FlagSet flags;

  auto* synth = app.add_subcommand("synth", "generate a phantom dataset with a stratified split");
  add_common(flags, synth);
  flags.add(synth, "--total", "total", "number of samples");
  flags.add(synth, "--train-fraction", "train_fraction", "training fraction");
  flags.add(synth, "--image-size", "image_size", "image side length");

  auto* split = app.add_subcommand("split", "recompute the stratified split of a dataset");
  add_common(flags, split);
  flags.add(split, "--train-fraction", "train_fraction", "training fraction");

  auto* train_cmd = app.add_subcommand("train", "train architectures on a dataset");
  add_common(flags, train_cmd);
  flags.add(train_cmd, "--lr", "learning_rate", "Adam learning rate");
  flags.add(train_cmd, "--batch-size", "batch_size", "batch size");
  flags.add(train_cmd, "--base-channels", "base_channels", "first-level channel width");

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints; writes records, summary and results table");
  add_common(flags, eval);
  flags.add(eval, "--batch-size", "batch_size", "inference batch size");
  flags.add(eval, "--base-channels", "base_channels", "width for --untrained models");
  eval->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint directory (single --arch)");
  eval->add_option("--split", eval_flags.split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));
  auto* echo = eval->add_flag("--echo-ground-truth", eval_flags.echo_ground_truth, "score the ground truth itself");
  eval->add_flag("--untrained", eval_flags.untrained, "score freshly initialized models")->excludes(echo);

  bool write_table = false;
  auto* params = app.add_subcommand("params", "count trainable parameters against the reference table");
  add_common(flags, params);
  flags.add(params, "--base-channels", "base_channels", "first-level channel width");
  params->add_flag("--write", write_table, "also write <out-dir>/param_table.csv");

  std::string predict_checkpoint, predict_split = "test";
  int predict_limit = 0;
  auto* predict = app.add_subcommand("predict", "write predicted masks and entropy maps");
  add_common(flags, predict);
  predict->add_option("--checkpoint", predict_checkpoint, "checkpoint directory (single --arch)");
  predict->add_option("--split", predict_split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));
  predict->add_option("--limit", predict_limit, "at most this many samples")->check(CLI::NonNegativeNumber);

  bool no_grid = false, no_boxplot = false;
  auto* report = app.add_subcommand("report", "render the per-zone boxplot and the prediction grid");
  add_common(flags, report);
  report->add_flag("--no-grid", no_grid, "skip the prediction grid");
  report->add_flag("--no-boxplot", no_boxplot, "skip the boxplot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Usage);
  }

  try {
    auto kv = flags.merged();
    auto* active = app.get_subcommands().front();
    // synth writes where --out-dir points; data_dir is its fallback
    if (active == synth && !kv.contains("out_dir") && kv.contains("data_dir")) kv.set("out_dir", *kv.get("data_dir"));
    if (active == synth && !kv.contains("out_dir")) kv.set("out_dir", std::string("data"));
    if (active == report) {
      if (no_grid) kv.set("report_grid", std::string("false"));
      if (no_boxplot) kv.set("report_boxplot", std::string("false"));
    }
    const auto cfg = ExperimentConfig::from_kv(kv);

    if (active == synth) return cmd_synth(cfg);
    if (active == split) return cmd_split(cfg, kv.contains("out_dir") ? cfg.out_dir : cfg.data_dir);
    if (active == train_cmd) return cmd_train(cfg);
    if (active == eval) return cmd_eval(cfg, eval_flags);
    if (active == params) return cmd_params(cfg, write_table);
    if (active == predict) return cmd_predict(cfg, predict_checkpoint, predict_split, predict_limit);
    if (active == report) return cmd_report(cfg, kv.contains("archs"));
  } catch (const fauseg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const c10::Error& e) {
    std::cerr << "error: " << e.what_without_backtrace() << '\n';
    return static_cast<int>(ExitCode::Numeric);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::Data);
  }
  return static_cast<int>(ExitCode::Usage);
}
