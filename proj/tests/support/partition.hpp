#pragma once

#include <map>

#include "binseg/tensor_io.hpp"

namespace binseg::testing {

/// True when the two label maps induce the same partition of the pixels.
inline bool same_partition(const LabelMap& a, const LabelMap& b) {
  if (a.height != b.height || a.width != b.width || a.size() != b.size()) return false;
  std::map<std::int32_t, std::int32_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto [x, fresh_x] = ab.emplace(a.labels[i], b.labels[i]);
    const auto [y, fresh_y] = ba.emplace(b.labels[i], a.labels[i]);
    if (x->second != b.labels[i] || y->second != a.labels[i]) return false;
  }
  return true;
}

/// Number of 4-connected components of each label; 1 everywhere means every
/// region is connected.
inline int max_components_per_label(const LabelMap& m) {
  std::vector<std::int32_t> comp(m.size(), -1);
  std::map<std::int32_t, int> per_label;
  int next = 0;
  int worst = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < m.size(); ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = next;
    stack.assign(1, s);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int r = static_cast<int>(i / m.width), c = static_cast<int>(i % m.width);
      const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        if (rr < 0 || cc < 0 || rr >= m.height || cc >= m.width) continue;
        const std::size_t j = static_cast<std::size_t>(rr) * m.width + cc;
        if (comp[j] < 0 && m.labels[j] == m.labels[i]) {
          comp[j] = next;
          stack.push_back(j);
        }
      }
    }
    worst = std::max(worst, ++per_label[m.labels[s]]);
    ++next;
  }
  return worst;
}

}  // namespace binseg::testing
