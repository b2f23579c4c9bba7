#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sprout/model.hpp"

namespace sprout {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Command-line entry point: train | eval | predict | summary | augment-preview.
/// Returns the process exit code; never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 3525063 -> "3,525,063".
std::string group_thousands(std::size_t n);

/// Per-layer table followed by "total / trainable / non_trainable".
std::string format_summary(const Model<float>& model);

}  // namespace sprout
