#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sprout {

/// K x K counts; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix(std::size_t k, std::vector<std::string> class_names = {});

  std::size_t k() const { return k_; }
  const std::vector<std::string>& class_names() const { return names_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const;
  void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t truth) const;
  std::uint64_t column_sum(std::size_t predicted) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  void check(std::size_t index) const;

  std::size_t k_;
  std::vector<std::string> names_;
  std::vector<std::uint64_t> counts_;
};

/// Throws ValueError on length mismatch or an index outside [0, k).
ConfusionMatrix confusion_matrix(const std::vector<std::size_t>& y_true,
                                 const std::vector<std::size_t>& y_pred, std::size_t k,
                                 std::vector<std::string> class_names = {});

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  /// Set when a zero denominator forced the value to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct ClassificationReport {
  std::vector<ClassMetrics> classes;
  double accuracy = 0.0;
  std::uint64_t correct = 0;
  std::uint64_t total = 0;
};

/// Per-class precision / recall / F1 and overall accuracy at full precision.
/// Throws ValueError for an empty matrix.
ClassificationReport classification_report(const ConfusionMatrix& cm);

/// Fixed-width text table with 2-decimal values, as printed by the CLI.
std::string format_report(const ClassificationReport& report);
/// Value rounded half-up to `decimals` places, for display comparisons.
double round_to(double value, int decimals);

/// `true\predicted,<names...>` header then one row per true class.
std::string confusion_csv(const ConfusionMatrix& cm);
/// `class,precision,recall,f1` rows then a trailing `accuracy,<value>,,`.
std::string report_csv(const ClassificationReport& report);
/// Grayscale heatmap, darker cells for larger row-normalized counts.
void write_confusion_png(const std::filesystem::path& path, const ConfusionMatrix& cm,
                         std::size_t cell = 32);

}  // namespace sprout
