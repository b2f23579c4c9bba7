#pragma once

// Parameter totals recomputed from closed-form per-layer formulas, written
// independently of the model builder:
//   conv kh*kw*C*F, depthwise kh*kw*C, batch norm 2C trainable + 2C moving,
//   dense D*U + U. A layer at index < freeze contributes only non-trainable.

#include <cstddef>
#include <vector>

namespace sprout::test {

struct OracleCounts {
  std::size_t total = 0;
  std::size_t trainable = 0;
  std::size_t non_trainable = 0;
};

inline OracleCounts oracle_counts(double alpha, std::size_t classes, std::size_t freeze) {
  struct Row {
    std::size_t learnable;
    std::size_t moving;
  };
  std::vector<Row> rows;
  auto ch = [alpha](std::size_t f) { return static_cast<std::size_t>(f * alpha); };
  auto conv = [&](std::size_t k, std::size_t c, std::size_t f) { rows.push_back({k * k * c * f, 0}); };
  auto bn = [&](std::size_t c) { rows.push_back({2 * c, 2 * c}); };
  auto none = [&] { rows.push_back({0, 0}); };

  none();  // input
  none();  // stem pad
  std::size_t c = ch(32);
  conv(3, 3, c);
  bn(c);
  none();
  const std::size_t filters[13] = {64, 128, 128, 256, 256, 512, 512, 512, 512, 512, 512, 1024, 1024};
  for (int b = 1; b <= 13; ++b) {
    if (b == 2 || b == 4 || b == 6 || b == 12) none();
    rows.push_back({9 * c, 0});  // depthwise
    bn(c);
    none();
    const std::size_t out = ch(filters[b - 1]);
    conv(1, c, out);
    bn(out);
    none();
    c = out;
  }
  none();  // pooling
  rows.push_back({c * 256 + 256, 0});
  none();
  rows.push_back({256 * 128 + 128, 0});
  none();
  rows.push_back({128 * classes + classes, 0});

  OracleCounts o;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    o.total += rows[i].learnable + rows[i].moving;
    o.non_trainable += rows[i].moving;
    if (i < freeze) {
      o.non_trainable += rows[i].learnable;
    } else {
      o.trainable += rows[i].learnable;
    }
  }
  return o;
}

}  // namespace sprout::test
