#include "sprout/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "sprout/csv.hpp"
#include "sprout/error.hpp"

namespace sprout {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string num(double v) {
  // Shortest text that reads back to the same value.
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string flag(bool b) { return b ? "true" : "false"; }

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw FormatError("config key '" + key + "': expected a number, got '" + v + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (!v.empty() && std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); })) {
    try {
      return std::stoull(v);
    } catch (const std::exception&) {
    }
  }
  throw FormatError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
}

bool to_bool(const std::string& key, std::string v) {
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw FormatError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_units(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(to_uint(key, trim(part)));
  return out;
}

struct Field {
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&, const std::string&)> set;
};

#define SP_DOUBLE(expr) \
  Field{[](const Config& c) { return num(c.expr); }, \
        [](Config& c, const std::string& k, const std::string& v) { c.expr = to_double(k, v); }}
#define SP_SIZE(expr) \
  Field{[](const Config& c) { return std::to_string(c.expr); }, \
        [](Config& c, const std::string& k, const std::string& v) { c.expr = to_uint(k, v); }}
#define SP_BOOL(expr) \
  Field{[](const Config& c) { return flag(c.expr); }, \
        [](Config& c, const std::string& k, const std::string& v) { c.expr = to_bool(k, v); }}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"data_dir", Field{[](const Config& c) { return c.data_dir.string(); },
                         [](Config& c, const std::string&, const std::string& v) { c.data_dir = v; }}},
      {"out_dir", Field{[](const Config& c) { return c.out_dir.string(); },
                        [](Config& c, const std::string&, const std::string& v) { c.out_dir = v; }}},
      {"seed", SP_SIZE(seed)},
      {"train_ratio", SP_DOUBLE(split.train)},
      {"val_ratio", SP_DOUBLE(split.val)},
      {"test_ratio", SP_DOUBLE(split.test)},
      {"stratified", SP_BOOL(stratified)},
      {"rescale", SP_DOUBLE(augment.rescale)},
      {"rotation_range", SP_DOUBLE(augment.rotation_range_deg)},
      {"width_shift_range", SP_DOUBLE(augment.width_shift_frac)},
      {"height_shift_range", SP_DOUBLE(augment.height_shift_frac)},
      {"shear_range", SP_DOUBLE(augment.shear_range)},
      {"shear_unit",
       Field{[](const Config& c) {
               return std::string(c.augment.shear_unit == ShearUnit::degrees ? "degrees" : "radians");
             },
             [](Config& c, const std::string& k, const std::string& v) {
               if (v == "degrees") {
                 c.augment.shear_unit = ShearUnit::degrees;
               } else if (v == "radians") {
                 c.augment.shear_unit = ShearUnit::radians;
               } else {
                 throw FormatError("config key '" + k + "': expected degrees or radians, got '" +
                                   v + "'");
               }
             }}},
      {"zoom_range", SP_DOUBLE(augment.zoom_range)},
      {"horizontal_flip", SP_BOOL(augment.horizontal_flip)},
      {"image_size", SP_SIZE(image_size)},
      {"alpha", SP_DOUBLE(alpha)},
      {"num_classes", SP_SIZE(num_classes)},
      {"freeze_prefix", SP_SIZE(freeze_prefix)},
      {"dense_units",
       Field{[](const Config& c) {
               std::string s;
               for (std::size_t i = 0; i < c.head.units.size(); ++i)
                 s += (i ? "," : "") + std::to_string(c.head.units[i]);
               return s;
             },
             [](Config& c, const std::string& k, const std::string& v) {
               c.head.units = to_units(k, v);
             }}},
      {"dropout", SP_DOUBLE(head.dropout)},
      {"epochs", SP_SIZE(train.epochs)},
      {"batch_size", SP_SIZE(train.batch_size)},
      {"learning_rate", SP_DOUBLE(train.initial_lr)},
      {"lambda_l2", SP_DOUBLE(train.lambda_l2)},
      {"beta1", SP_DOUBLE(train.optimizer.beta1)},
      {"beta2", SP_DOUBLE(train.optimizer.beta2)},
      {"adam_epsilon", SP_DOUBLE(train.optimizer.epsilon)},
      {"weight_decay", SP_DOUBLE(train.optimizer.weight_decay)},
      {"save_best_only", SP_BOOL(train.callbacks.save_best_only)},
      {"early_stop_patience", SP_SIZE(train.callbacks.early_stop_patience)},
      {"restore_best_weights", SP_BOOL(train.callbacks.restore_best_weights)},
      {"lr_factor", SP_DOUBLE(train.callbacks.lr_factor)},
      {"lr_patience", SP_SIZE(train.callbacks.lr_patience)},
      {"min_lr", SP_DOUBLE(train.callbacks.min_lr)},
      {"min_delta", SP_DOUBLE(train.callbacks.min_delta)},
      {"deterministic", SP_BOOL(deterministic)},
      {"threads", SP_SIZE(threads)},
  };
  return table;
}

#undef SP_DOUBLE
#undef SP_SIZE
#undef SP_BOOL

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void Config::set(const std::string& key, const std::string& value) {
  for (const auto& [name, f] : fields()) {
    if (name == key) {
      f.set(*this, key, value);
      return;
    }
  }
  throw FormatError("unknown config key '" + key + "'");
}

void Config::merge_text(const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const FormatError& e) {
      throw FormatError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void Config::merge_file(const std::filesystem::path& path) {
  merge_text(read_file(path), path.string());
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

void Config::validate() const {
  augment.validate();
  train.validate();
  const double sum = split.train + split.val + split.test;
  if (!(split.train > 0 && split.val > 0 && split.test > 0) || std::abs(sum - 1.0) > 1e-9) {
    throw ValueError("split ratios must be positive and sum to 1");
  }
  if (alpha != 0.25 && alpha != 0.5 && alpha != 0.75 && alpha != 1.0) {
    throw ValueError("alpha must be one of 0.25, 0.5, 0.75, 1.0");
  }
  if (image_size < 32 || image_size % 32 != 0) {
    throw ValueError("image_size must be a positive multiple of 32");
  }
  if (num_classes < 2) throw ValueError("num_classes must be at least 2");
  if (freeze_prefix > backbone_layer_count()) {
    throw ValueError("freeze_prefix exceeds the " + std::to_string(backbone_layer_count()) +
                     " backbone layers");
  }
  if (head.dropout < 0.0 || head.dropout >= 1.0) throw ValueError("dropout must lie in [0, 1)");
  if (train.callbacks.lr_factor <= 0.0 || train.callbacks.lr_factor >= 1.0) {
    throw ValueError("lr_factor must lie in (0, 1)");
  }
  if (train.callbacks.min_lr < 0.0) throw ValueError("min_lr must be non-negative");
}

ModelOptions Config::model_options() const {
  ModelOptions o;
  o.alpha = alpha;
  o.input_size = image_size;
  o.num_classes = num_classes;
  o.freeze_prefix = freeze_prefix;
  o.head = head;
  o.seed = seed;
  return o;
}

SplitSpec Config::split_spec() const {
  SplitSpec s;
  s.seed = seed;
  s.ratios = split;
  s.stratified = stratified;
  return s;
}

}  // namespace sprout
