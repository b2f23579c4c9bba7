#include "sprout/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <json.hpp>

#include "sprout/csv.hpp"
#include "sprout/error.hpp"

namespace sprout {

namespace {

using nlohmann::json;

constexpr const char* kMetaKey = "__metadata__";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xffu));
}

float get_f32(const char* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= std::uint32_t(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(u);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("checkpoint metadata '" + key + "' is not a number: " + s);
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("checkpoint metadata '" + key + "' is not an integer: " + s);
}

Shape squeeze(const Shape& s) {
  Shape out;
  for (auto d : s)
    if (d != 1) out.push_back(d);
  return out;
}

}  // namespace

void TensorArchive::add(const std::string& name, Shape shape, std::vector<float> values) {
  if (name == kMetaKey) throw ValueError("reserved tensor name " + name);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor " + name + " has " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
  }
  tensors_[name] = ArchiveTensor{std::move(shape), std::move(values)};
}

const ArchiveTensor& TensorArchive::get(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw FormatError("archive has no tensor '" + name + "'");
  return it->second;
}

const std::string& TensorArchive::meta(const std::string& key) const {
  const auto it = metadata_.find(key);
  if (it == metadata_.end()) throw FormatError("archive metadata has no '" + key + "'");
  return it->second;
}

std::string TensorArchive::serialize() const {
  json header = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors_) {
    const std::uint64_t length = 4 * t.values.size();
    header[name] = {{"dtype", "f32"}, {"shape", t.shape}, {"offset", offset}, {"length", length}};
    offset += length;
  }
  header[kMetaKey] = metadata_;
  const std::string text = header.dump();

  std::string out(kArchiveMagic);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : tensors_)
    for (float v : t.values) put_f32(out, v);
  return out;
}

TensorArchive TensorArchive::parse(std::string_view bytes, const std::string& origin) {
  const std::size_t prefix = kArchiveMagic.size() + 8;
  if (bytes.size() < prefix || bytes.substr(0, kArchiveMagic.size()) != kArchiveMagic) {
    throw FormatError(origin + ": not a tensor archive (bad magic)");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + kArchiveMagic.size());
  if (header_len > bytes.size() - prefix) {
    throw FormatError(origin + ": header length " + std::to_string(header_len) +
                      " exceeds file size");
  }
  json header;
  try {
    header = json::parse(bytes.substr(prefix, header_len));
  } catch (const json::exception& e) {
    throw FormatError(origin + ": malformed header: " + e.what());
  }
  if (!header.is_object()) throw FormatError(origin + ": header is not a JSON object");
  const std::string_view payload = bytes.substr(prefix + header_len);

  TensorArchive archive;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  try {
    for (const auto& [name, entry] : header.items()) {
      if (name == kMetaKey) {
        for (const auto& [k, v] : entry.items()) archive.metadata_[k] = v.get<std::string>();
        continue;
      }
      if (entry.at("dtype").get<std::string>() != "f32") {
        throw FormatError(origin + ": tensor " + name + " has unsupported dtype " +
                          entry.at("dtype").dump());
      }
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto length = entry.at("length").get<std::uint64_t>();
      const std::size_t numel = shape_numel(shape);
      if (length != 4 * numel) {
        throw FormatError(origin + ": tensor " + name + " length " + std::to_string(length) +
                          " does not match shape " + shape_str(shape));
      }
      if (offset > payload.size() || length > payload.size() - offset) {
        throw FormatError(origin + ": tensor " + name + " lies outside the payload");
      }
      spans.emplace_back(offset, length);
      std::vector<float> values(numel);
      for (std::size_t i = 0; i < numel; ++i) values[i] = get_f32(payload.data() + offset + 4 * i);
      archive.tensors_[name] = ArchiveTensor{shape, std::move(values)};
    }
  } catch (const json::exception& e) {
    throw FormatError(origin + ": malformed header entry: " + e.what());
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i - 1].first + spans[i - 1].second > spans[i].first) {
      throw FormatError(origin + ": overlapping tensor data");
    }
  }
  return archive;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

std::string architecture_checksum(const Model<float>& model) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    h ^= 0xff;
    h *= 0x100000001b3ull;
  };
  mix(shape_str(model.input_shape()));
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& l = model.layer(i);
    mix(l.name());
    mix(to_string(l.kind()));
    mix(l.hyper());
    mix(shape_str(model.output_shape(i)));
    for (const auto& p : l.params()) {
      mix(p.name);
      mix(shape_str(p.value.shape()));
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TensorArchive make_checkpoint(const Model<float>& model, const TrainState& state,
                              const CheckpointInfo& info) {
  TensorArchive a;
  for (const auto& ref : model.parameters()) {
    a.add(ref.name, ref.param->value.shape(), ref.param->value.values());
    const auto m = state.optimizer.first_moment.find(ref.name);
    const auto v = state.optimizer.second_moment.find(ref.name);
    if (m != state.optimizer.first_moment.end() && v != state.optimizer.second_moment.end()) {
      a.add("optimizer.m." + ref.name, ref.param->value.shape(), m->second);
      a.add("optimizer.v." + ref.name, ref.param->value.shape(), v->second);
    }
  }
  auto& md = a.metadata();
  md["format_version"] = std::string(kFormatVersion);
  md["architecture_checksum"] = architecture_checksum(model);
  md["alpha"] = fmt_double(info.alpha);
  md["input_size"] = std::to_string(info.input_size);
  md["num_classes"] = std::to_string(model.num_outputs());
  md["class_names"] = json(info.class_names).dump();
  md["epoch"] = std::to_string(state.epoch);
  md["learning_rate"] = fmt_double(state.learning_rate);
  md["optimizer_step"] = std::to_string(state.optimizer.step);
  md["optimizer_learning_rate"] = fmt_double(state.optimizer.learning_rate);
  return a;
}

void save_checkpoint(const Model<float>& model, const TrainState& state,
                     const std::filesystem::path& path, const CheckpointInfo& info) {
  make_checkpoint(model, state, info).save(path);
}

TrainState load_checkpoint(const TensorArchive& a, Model<float>& model) {
  const std::string& version = a.meta("format_version");
  if (version != kFormatVersion) {
    throw FormatError("checkpoint format version " + version + " is not supported (expected " +
                      std::string(kFormatVersion) + ")");
  }
  auto refs = model.parameters();
  TrainState state;
  for (const auto& ref : refs) {
    if (!a.contains(ref.name)) throw FormatError("checkpoint is missing tensor '" + ref.name + "'");
    const auto& t = a.get(ref.name);
    if (t.shape != ref.param->value.shape()) {
      throw DimensionError("checkpoint tensor '" + ref.name + "' has shape " + shape_str(t.shape) +
                           ", model expects " + shape_str(ref.param->value.shape()));
    }
    const std::string mname = "optimizer.m." + ref.name;
    const std::string vname = "optimizer.v." + ref.name;
    if (a.contains(mname) != a.contains(vname)) {
      throw FormatError("checkpoint has only one optimizer moment for '" + ref.name + "'");
    }
    if (a.contains(mname)) {
      for (const auto* n : {&mname, &vname}) {
        if (a.get(*n).shape != t.shape) {
          throw DimensionError("checkpoint tensor '" + *n + "' has shape " +
                               shape_str(a.get(*n).shape) + ", expected " + shape_str(t.shape));
        }
      }
      state.optimizer.first_moment[ref.name] = a.get(mname).values;
      state.optimizer.second_moment[ref.name] = a.get(vname).values;
    }
  }
  if (const auto it = a.metadata().find("architecture_checksum"); it != a.metadata().end()) {
    const std::string expected = architecture_checksum(model);
    if (it->second != expected) {
      throw FormatError("checkpoint architecture checksum " + it->second +
                        " does not match the model (" + expected + ")");
    }
  }
  state.epoch = parse_u64(a.meta("epoch"), "epoch");
  state.learning_rate = parse_double(a.meta("learning_rate"), "learning_rate");
  state.optimizer.step = parse_u64(a.meta("optimizer_step"), "optimizer_step");
  state.optimizer.learning_rate =
      parse_double(a.meta("optimizer_learning_rate"), "optimizer_learning_rate");

  for (auto& ref : refs) {
    const auto& src = a.get(ref.name).values;
    std::copy(src.begin(), src.end(), ref.param->value.data().begin());
  }
  return state;
}

TrainState load_checkpoint(const std::filesystem::path& path, Model<float>& model) {
  return load_checkpoint(TensorArchive::load(path), model);
}

NameMap identity_name_map() {
  return [](const std::string& name) -> std::optional<std::string> { return name; };
}

NameMap keras_mobilenet_name_map() {
  return [](const std::string& name) -> std::optional<std::string> {
    const auto dot = name.rfind('.');
    if (dot == std::string::npos) return std::nullopt;
    const std::string layer = name.substr(0, dot);
    std::string param = name.substr(dot + 1);
    if (param == "moving_var") param = "moving_variance";

    std::string base;
    if (layer == "stem.conv") {
      base = "conv1";
    } else if (layer == "stem.bn") {
      base = "conv1_bn";
    } else if (layer.size() > 1 && layer[0] == 'b') {
      const auto d = layer.find('.');
      if (d == std::string::npos) return std::nullopt;
      const std::string block = layer.substr(1, d - 1);
      const std::string rest = layer.substr(d + 1);
      if (rest == "dw") {
        base = "conv_dw_" + block;
        if (param == "kernel") param = "depthwise_kernel";
      } else if (rest == "dw.bn") {
        base = "conv_dw_" + block + "_bn";
      } else if (rest == "pw") {
        base = "conv_pw_" + block;
      } else if (rest == "pw.bn") {
        base = "conv_pw_" + block + "_bn";
      } else {
        return std::nullopt;
      }
    } else {
      return std::nullopt;
    }
    return base + "/" + param + ":0";
  };
}

ImportReport import_backbone(const TensorArchive& archive, Model<float>& model,
                             const NameMap& name_map) {
  struct Pending {
    Parameter<float>* param;
    const ArchiveTensor* source;
  };
  std::vector<Pending> pending;
  std::vector<std::string> used;
  for (std::size_t i = 0; i < model.backbone_size(); ++i) {
    auto& l = model.layer(i);
    for (auto& p : l.params()) {
      const std::string name = l.name() + "." + p.name;
      const auto mapped = name_map(name);
      if (!mapped) continue;
      if (!archive.contains(*mapped)) {
        throw FormatError("backbone import: archive has no tensor '" + *mapped + "' for " + name);
      }
      const auto& t = archive.get(*mapped);
      if (squeeze(t.shape) != squeeze(p.value.shape())) {
        throw DimensionError("backbone import: '" + *mapped + "' has shape " + shape_str(t.shape) +
                             ", " + name + " expects " + shape_str(p.value.shape()));
      }
      pending.push_back({&p, &t});
      used.push_back(*mapped);
    }
  }
  for (auto& [param, source] : pending) {
    std::copy(source->values.begin(), source->values.end(), param->value.data().begin());
  }
  ImportReport report;
  report.imported = pending.size();
  std::sort(used.begin(), used.end());
  for (const auto& [name, t] : archive.tensors()) {
    if (!std::binary_search(used.begin(), used.end(), name)) report.ignored.push_back(name);
  }
  return report;
}

}  // namespace sprout
