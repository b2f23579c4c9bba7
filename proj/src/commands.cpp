#include "sprout/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "sprout/augment.hpp"
#include "sprout/checkpoint.hpp"
#include "sprout/config.hpp"
#include "sprout/csv.hpp"
#include "sprout/dataset.hpp"
#include "sprout/error.hpp"
#include "sprout/image_io.hpp"
#include "sprout/metrics.hpp"
#include "sprout/parallel.hpp"
#include "sprout/trainer.hpp"

namespace fs = std::filesystem;

namespace sprout {

namespace {

/// Bad flags, missing inputs and other problems the caller can fix.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Overrides {
  std::string config_file;
  std::optional<std::string> data_dir, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> freeze, epochs, batch_size, image_size, classes, threads;
  std::optional<double> alpha;
  bool deterministic = false;
  bool print_config = false;
  std::vector<std::string> settings;
};

void add_common(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_file, "key = value configuration file");
  app.add_option("--seed", o.seed, "Seed for split, initialization, shuffling and augmentation");
  app.add_option("--freeze", o.freeze, "Freeze the first N backbone layers");
  app.add_option("--alpha", o.alpha, "Width multiplier (0.25, 0.5, 0.75, 1.0)");
  app.add_option("--image-size", o.image_size, "Input resolution (multiple of 32)");
  app.add_option("--threads", o.threads, "Worker thread cap");
  app.add_flag("--deterministic", o.deterministic, "Single-threaded, bit-reproducible run");
  app.add_option("--set", o.settings, "Extra key=value override (repeatable)");
  app.add_flag("--print-config", o.print_config, "Print the effective configuration and exit");
}

Config resolve(const Overrides& o) {
  Config c;
  try {
    if (!o.config_file.empty()) {
      if (!fs::exists(o.config_file)) throw UsageError("config file not found: " + o.config_file);
      c.merge_file(o.config_file);
    }
    if (o.data_dir) c.data_dir = *o.data_dir;
    if (o.out_dir) c.out_dir = *o.out_dir;
    if (o.seed) c.seed = *o.seed;
    if (o.freeze) c.freeze_prefix = *o.freeze;
    if (o.epochs) c.train.epochs = *o.epochs;
    if (o.batch_size) c.train.batch_size = *o.batch_size;
    if (o.image_size) c.image_size = *o.image_size;
    if (o.classes) c.num_classes = *o.classes;
    if (o.threads) c.threads = *o.threads;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.deterministic) c.deterministic = true;
    for (const auto& s : o.settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      c.set(s.substr(0, eq), s.substr(eq + 1));
    }
    c.train.seed = c.seed;
    c.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (c.deterministic) {
    set_max_threads(1);
  } else if (c.threads > 0) {
    set_max_threads(c.threads);
  }
  return c;
}

Model<float> build_checked(const ModelOptions& opts) {
  try {
    return build_model<float>(opts);
  } catch (const ValueError& e) {
    throw UsageError(e.what());
  }
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// Architecture recorded in a checkpoint, with class names.
struct SavedModel {
  TensorArchive archive;
  ModelOptions options;
  std::vector<std::string> class_names;
};

SavedModel open_checkpoint(const std::string& path, const Config& cfg) {
  if (path.empty()) throw UsageError("--weights is required");
  if (!fs::exists(path)) throw UsageError("weights file not found: " + path);
  SavedModel s;
  s.archive = TensorArchive::load(path);
  s.options = cfg.model_options();
  const auto& md = s.archive.metadata();
  if (auto it = md.find("alpha"); it != md.end()) s.options.alpha = std::stod(it->second);
  if (auto it = md.find("input_size"); it != md.end()) s.options.input_size = std::stoull(it->second);
  if (auto it = md.find("num_classes"); it != md.end()) s.options.num_classes = std::stoull(it->second);
  if (auto it = md.find("class_names"); it != md.end()) {
    s.class_names = nlohmann::json::parse(it->second).get<std::vector<std::string>>();
  }
  if (s.class_names.empty()) {
    for (std::size_t i = 0; i < s.options.num_classes; ++i)
      s.class_names.push_back("class" + std::to_string(i));
  }
  return s;
}

bool small_enough_to_cache(std::size_t images, std::size_t size) {
  return images * size * size * 3 * sizeof(float) <= (std::size_t(1) << 30);
}

void write_eval_outputs(const fs::path& dir, const ConfusionMatrix& cm,
                        const ClassificationReport& rep) {
  fs::create_directories(dir);
  write_file_atomic(dir / "confusion.csv", confusion_csv(cm));
  write_file_atomic(dir / "report.csv", report_csv(rep));
  write_confusion_png(dir / "confusion.png", cm);
}

DatasetSplit make_split(const Config& cfg, const std::optional<std::string>& split_file,
                        const std::vector<std::string>& class_names, std::ostream& err) {
  if (cfg.data_dir.empty()) throw UsageError("--data-dir is required");
  if (!fs::is_directory(cfg.data_dir)) {
    throw UsageError("data directory not found: " + cfg.data_dir.string());
  }
  if (split_file) {
    if (!fs::exists(*split_file)) throw UsageError("split file not found: " + *split_file);
    return read_split_csv(*split_file, cfg.data_dir, class_names);
  }
  const ScanReport scan = scan_dataset(cfg.data_dir, true);
  for (const auto& s : scan.skipped) err << "warning: skipped undecodable file " << s << "\n";
  return split_dataset(scan.manifest, cfg.split_spec());
}

int cmd_train(const Config& base, const std::optional<std::string>& split_file,
              const std::string& weights, const std::string& weights_map, std::ostream& out,
              std::ostream& err) {
  Config cfg = base;
  const DatasetSplit split = make_split(cfg, split_file, {}, err);
  cfg.num_classes = split.train.class_names.size();
  fs::create_directories(cfg.out_dir);
  write_file_atomic(cfg.out_dir / "config.txt", cfg.to_text());
  write_split_csv(cfg.out_dir / "split.csv", split);
  out << "classes: " << cfg.num_classes << "  train " << split.train.size() << "  val "
      << split.val.size() << "  test " << split.test.size() << "\n";

  Model<float> model = build_checked(cfg.model_options());
  if (!weights.empty()) {
    if (!fs::exists(weights)) throw UsageError("weights file not found: " + weights);
    const auto archive = TensorArchive::load(weights);
    NameMap map;
    if (weights_map == "identity") {
      map = identity_name_map();
    } else if (weights_map == "keras") {
      map = keras_mobilenet_name_map();
    } else {
      throw UsageError("unknown --weights-map '" + weights_map + "' (identity or keras)");
    }
    const auto rep = import_backbone(archive, model, map);
    out << "imported " << rep.imported << " backbone tensors from " << weights << "\n";
    for (const auto& n : rep.ignored) err << "warning: ignored archive tensor " << n << "\n";
  }
  const auto counts = model.count_params();
  out << "parameters: " << group_thousands(counts.total) << " / "
      << group_thousands(counts.trainable) << " / " << group_thousands(counts.non_trainable)
      << "\n";

  const std::size_t n_all = split.train.size() + split.val.size() + split.test.size();
  const bool cache = small_enough_to_cache(n_all, cfg.image_size);
  ImageFolderSource train_src(split.train, cfg.image_size, cache);
  ImageFolderSource val_src(split.val, cfg.image_size, cache);
  ImageFolderSource test_src(split.test, cfg.image_size, cache);

  TrainConfig tc = cfg.train;
  tc.out_dir = cfg.out_dir;
  tc.log = &out;
  tc.checkpoint_info = CheckpointInfo{cfg.alpha, cfg.image_size, split.train.class_names};
  const TrainResult result = run_training(model, train_src, val_src, tc, cfg.augment);

  const fs::path best = cfg.out_dir / tc.checkpoint_file;
  if (fs::exists(best)) load_checkpoint(best, model);
  BatchLoader test_loader(test_src, tc.batch_size, false,
                          AugmentPipeline::evaluation(cfg.augment.rescale), cfg.seed);
  const Evaluation ev = evaluate(model, test_loader, tc.lambda_l2);
  const auto cm = confusion_matrix(ev.y_true, ev.y_pred, cfg.num_classes, split.test.class_names);
  const auto rep = classification_report(cm);
  write_eval_outputs(cfg.out_dir, cm, rep);
  out << "epochs run: " << result.history.size() << "  best epoch: " << result.callbacks.best_epoch
      << "\n";
  out << "test set\n" << format_report(rep);
  return kExitOk;
}

int cmd_eval(const Config& cfg, const std::string& weights,
             const std::optional<std::string>& split_file, const std::string& subset,
             std::ostream& out, std::ostream& err) {
  SavedModel saved = open_checkpoint(weights, cfg);
  Model<float> model = build_checked(saved.options);
  load_checkpoint(saved.archive, model);

  Manifest selected;
  if (subset == "all") {
    if (cfg.data_dir.empty()) throw UsageError("--data-dir is required");
    if (!fs::is_directory(cfg.data_dir)) {
      throw UsageError("data directory not found: " + cfg.data_dir.string());
    }
    const ScanReport scan = scan_dataset(cfg.data_dir, true);
    for (const auto& s : scan.skipped) err << "warning: skipped undecodable file " << s << "\n";
    selected = scan.manifest;
  } else {
    const DatasetSplit split = make_split(cfg, split_file, saved.class_names, err);
    if (subset == "train") {
      selected = split.train;
    } else if (subset == "val") {
      selected = split.val;
    } else if (subset == "test") {
      selected = split.test;
    } else {
      throw UsageError("unknown subset '" + subset + "' (train, val, test or all)");
    }
  }
  if (selected.class_names != saved.class_names) {
    throw UsageError("dataset classes do not match the checkpoint classes");
  }
  if (selected.entries.empty()) throw UsageError("no samples in subset '" + subset + "'");

  const std::size_t size = saved.options.input_size;
  ImageFolderSource src(selected, size, false);
  BatchLoader loader(src, cfg.train.batch_size, false,
                     AugmentPipeline::evaluation(cfg.augment.rescale), cfg.seed);
  const Evaluation ev = evaluate(model, loader, cfg.train.lambda_l2);
  const auto cm = confusion_matrix(ev.y_true, ev.y_pred, saved.class_names.size(),
                                   saved.class_names);
  const auto rep = classification_report(cm);
  write_eval_outputs(cfg.out_dir, cm, rep);
  out << format_report(rep);
  out << "accuracy: " << fixed(rep.accuracy, 4) << "\n";
  return kExitOk;
}

int cmd_predict(const Config& cfg, const std::string& weights,
                const std::vector<std::string>& images, bool all_probs, std::ostream& out,
                std::ostream& err) {
  if (images.empty()) throw UsageError("predict needs at least one image path");
  SavedModel saved = open_checkpoint(weights, cfg);
  Model<float> model = build_checked(saved.options);
  load_checkpoint(saved.archive, model);
  const std::size_t size = saved.options.input_size;
  const std::size_t k = saved.class_names.size();
  int failures = 0;
  for (const auto& path : images) {
    Tensor<float> probs;
    try {
      const auto img = rescale(load_image(path, size), cfg.augment.rescale);
      probs = model.forward(img.reshaped({1, size, size, 3}), Mode::inference, false);
    } catch (const Error& e) {
      err << "error: " << path << ": " << e.what() << "\n";
      ++failures;
      continue;
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (probs[j] > probs[best]) best = j;
    CsvRow row{path, saved.class_names[best], fixed(probs[best], 6)};
    if (all_probs)
      for (std::size_t j = 0; j < k; ++j) row.push_back(fixed(probs[j], 6));
    out << csv_line(row);
  }
  return failures == 0 ? kExitOk : kExitFailure;
}

int cmd_augment_preview(const Config& cfg, const std::string& image, std::size_t count,
                        std::ostream& out) {
  if (image.empty()) throw UsageError("--image is required");
  if (!fs::exists(image)) throw UsageError("image not found: " + image);
  const auto src = load_image(image, cfg.image_size);
  fs::create_directories(cfg.out_dir);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(augment_seed(cfg.seed, 0, i));
    const auto params = sample_augment_params(rng, cfg.augment, cfg.image_size, cfg.image_size);
    const auto aug = apply_affine(src, params);
    char name[64];
    std::snprintf(name, sizeof name, "preview_%03zu.png", i);
    write_png(cfg.out_dir / name, aug);
    char line[256];
    std::snprintf(line, sizeof line,
                  "%s  theta %.3f  tx %.2f  ty %.2f  shear %.3f  zx %.3f  zy %.3f  flip %d\n", name,
                  params.theta_deg, params.tx, params.ty, params.shear_deg, params.zx, params.zy,
                  params.flip ? 1 : 0);
    out << line;
  }
  return kExitOk;
}

}  // namespace

std::string group_thousands(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

std::string format_summary(const Model<float>& model) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%5s  %-16s %-16s %-22s %-16s %12s  %s\n", "index", "name", "kind",
                "hyper", "output", "params", "frozen");
  os << buf;
  for (const auto& r : model.enumeration()) {
    std::snprintf(buf, sizeof buf, "%5zu  %-16s %-16s %-22s %-16s %12s  %s\n", r.index,
                  r.name.c_str(), r.kind.c_str(), r.hyper.c_str(),
                  shape_str(r.output_shape).c_str(), group_thousands(r.params.total).c_str(),
                  r.frozen ? "yes" : "no");
    os << buf;
  }
  const auto c = model.count_params();
  const auto pct = [&](std::size_t v) { return fixed(100.0 * v / static_cast<double>(c.total), 2); };
  os << "total / trainable / non_trainable: " << group_thousands(c.total) << " / "
     << group_thousands(c.trainable) << " / " << group_thousands(c.non_trainable) << "\n";
  os << "trainable " << pct(c.trainable) << "%, non-trainable " << pct(c.non_trainable) << "%\n";
  return os.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sprout: lightweight leaf-disease image classifier"};
  app.require_subcommand(1);
  Overrides o;

  auto* train = app.add_subcommand("train", "Split the data, train, and evaluate on the test set");
  add_common(*train, o);
  std::optional<std::string> split_file;
  std::string weights, weights_map = "identity";
  train->add_option("--data-dir", o.data_dir, "Dataset root with one folder per class");
  train->add_option("--out", o.out_dir, "Output directory");
  train->add_option("--epochs", o.epochs, "Number of epochs");
  train->add_option("--batch-size", o.batch_size, "Batch size");
  train->add_option("--split", split_file, "Reuse an existing split.csv");
  train->add_option("--weights", weights, "Backbone weights archive to import");
  train->add_option("--weights-map", weights_map, "Name map for --weights: identity or keras");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a data subset");
  add_common(*eval, o);
  std::string subset = "test";
  eval->add_option("--weights", weights, "Checkpoint to evaluate")->required();
  eval->add_option("--data-dir", o.data_dir, "Dataset root");
  eval->add_option("--split", split_file, "split.csv selecting the subset");
  eval->add_option("--subset", subset, "train, val, test or all");
  eval->add_option("--out", o.out_dir, "Directory for confusion.csv and report.csv");
  eval->add_option("--batch-size", o.batch_size, "Batch size");

  auto* predict = app.add_subcommand("predict", "Classify image files");
  add_common(*predict, o);
  std::vector<std::string> images;
  bool all_probs = false;
  predict->add_option("--weights", weights, "Checkpoint")->required();
  predict->add_option("images", images, "Image files");
  predict->add_flag("--probs", all_probs, "Append the full probability row");

  auto* summary = app.add_subcommand("summary", "Print the layer table and parameter totals");
  add_common(*summary, o);
  bool as_csv = false;
  summary->add_option("--classes", o.classes, "Number of output classes");
  summary->add_flag("--csv", as_csv, "Print the enumeration as CSV");

  auto* preview = app.add_subcommand("augment-preview", "Write augmented copies of an image");
  add_common(*preview, o);
  std::string image;
  std::size_t count = 8;
  preview->add_option("--image", image, "Source image");
  preview->add_option("--count", count, "Number of previews");
  preview->add_option("--out", o.out_dir, "Output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    const Config cfg = resolve(o);
    if (o.print_config) {
      out << cfg.to_text();
      return kExitOk;
    }
    if (*train) return cmd_train(cfg, split_file, weights, weights_map, out, err);
    if (*eval) return cmd_eval(cfg, weights, split_file, subset, out, err);
    if (*predict) return cmd_predict(cfg, weights, images, all_probs, out, err);
    if (*summary) {
      const Model<float> model = build_checked(cfg.model_options());
      out << (as_csv ? enumeration_csv(model) : format_summary(model));
      return kExitOk;
    }
    if (*preview) return cmd_augment_preview(cfg, image, count, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace sprout
