#include "sprout/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sprout/csv.hpp"
#include "sprout/error.hpp"
#include "sprout/image_io.hpp"

namespace sprout {

ConfusionMatrix::ConfusionMatrix(std::size_t k, std::vector<std::string> class_names)
    : k_(k), names_(std::move(class_names)), counts_(k * k, 0) {
  if (k == 0) throw ValueError("confusion matrix needs at least one class");
  if (names_.empty()) {
    for (std::size_t i = 0; i < k; ++i) names_.push_back("class" + std::to_string(i));
  }
  if (names_.size() != k) throw ValueError("class name count does not match k");
}

void ConfusionMatrix::check(std::size_t index) const {
  if (index >= k_) {
    throw ValueError("class index " + std::to_string(index) + " out of range [0, " +
                     std::to_string(k_) + ")");
  }
}

std::uint64_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  check(truth);
  check(predicted);
  return counts_[truth * k_ + predicted];
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
  check(truth);
  check(predicted);
  counts_[truth * k_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k_; ++i) t += counts_[i * k_ + i];
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
  check(truth);
  std::uint64_t t = 0;
  for (std::size_t j = 0; j < k_; ++j) t += counts_[truth * k_ + j];
  return t;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t predicted) const {
  check(predicted);
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < k_; ++i) t += counts_[i * k_ + predicted];
  return t;
}

ConfusionMatrix confusion_matrix(const std::vector<std::size_t>& y_true,
                                 const std::vector<std::size_t>& y_pred, std::size_t k,
                                 std::vector<std::string> class_names) {
  if (y_true.size() != y_pred.size()) {
    throw ValueError("y_true has " + std::to_string(y_true.size()) + " entries, y_pred " +
                     std::to_string(y_pred.size()));
  }
  ConfusionMatrix cm(k, std::move(class_names));
  for (std::size_t i = 0; i < y_true.size(); ++i) cm.add(y_true[i], y_pred[i]);
  return cm;
}

ClassificationReport classification_report(const ConfusionMatrix& cm) {
  ClassificationReport r;
  r.total = cm.total();
  if (r.total == 0) throw ValueError("classification report of an empty confusion matrix");
  r.correct = cm.trace();
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  for (std::size_t c = 0; c < cm.k(); ++c) {
    ClassMetrics m;
    m.name = cm.class_names()[c];
    const auto tp = static_cast<double>(cm.at(c, c));
    const auto col = cm.column_sum(c);
    const auto row = cm.row_sum(c);
    m.support = row;
    m.precision_undefined = col == 0;
    m.recall_undefined = row == 0;
    m.precision = col == 0 ? 0.0 : tp / static_cast<double>(col);
    m.recall = row == 0 ? 0.0 : tp / static_cast<double>(row);
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    r.classes.push_back(std::move(m));
  }
  return r;
}

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::floor(value * scale + 0.5) / scale;
}

std::string format_report(const ClassificationReport& report) {
  std::size_t width = 8;
  for (const auto& c : report.classes) width = std::max(width, c.name.size());
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %9s %9s %9s %9s\n", static_cast<int>(width), "class",
                "precision", "recall", "f1", "support");
  os << buf;
  for (const auto& c : report.classes) {
    std::snprintf(buf, sizeof buf, "%-*s %9.2f %9.2f %9.2f %9llu%s\n", static_cast<int>(width),
                  c.name.c_str(), round_to(c.precision, 2), round_to(c.recall, 2),
                  round_to(c.f1, 2), static_cast<unsigned long long>(c.support),
                  c.precision_undefined ? "  (no predictions)" : "");
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "accuracy %.2f%% (%llu/%llu)\n", 100.0 * report.accuracy,
                static_cast<unsigned long long>(report.correct),
                static_cast<unsigned long long>(report.total));
  os << buf;
  return os.str();
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  CsvRow header{"true\\predicted"};
  for (const auto& n : cm.class_names()) header.push_back(n);
  std::string out = csv_line(header);
  for (std::size_t i = 0; i < cm.k(); ++i) {
    CsvRow row{cm.class_names()[i]};
    for (std::size_t j = 0; j < cm.k(); ++j) row.push_back(std::to_string(cm.at(i, j)));
    out += csv_line(row);
  }
  return out;
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string report_csv(const ClassificationReport& report) {
  std::string out = csv_line({"class", "precision", "recall", "f1"});
  for (const auto& c : report.classes) {
    out += csv_line({c.name, fixed6(c.precision), fixed6(c.recall), fixed6(c.f1)});
  }
  out += csv_line({"accuracy", fixed6(report.accuracy), "", ""});
  return out;
}

void write_confusion_png(const std::filesystem::path& path, const ConfusionMatrix& cm,
                         std::size_t cell) {
  const std::size_t k = cm.k();
  Tensor<float> img({k * cell, k * cell, 1}, 255.0f);
  for (std::size_t i = 0; i < k; ++i) {
    const auto row = cm.row_sum(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double frac = row == 0 ? 0.0 : static_cast<double>(cm.at(i, j)) / row;
      const auto v = static_cast<float>(255.0 * (1.0 - frac));
      for (std::size_t y = 0; y < cell; ++y)
        for (std::size_t x = 0; x < cell; ++x) img[(i * cell + y) * k * cell + j * cell + x] = v;
    }
  }
  write_png(path, img);
}

}  // namespace sprout
