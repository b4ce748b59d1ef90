#include <algorithm>
#include <map>
#include <numeric>
#include <vector>

#include "binseg/errors.hpp"
#include "binseg/superpixel.hpp"

namespace binseg {

namespace {

// 4-connected components numbered in raster order of their first pixel.
std::vector<std::int32_t> label_components(const LabelMap& labels, int& count) {
  const int h = labels.height, w = labels.width;
  std::vector<std::int32_t> comp(labels.size(), -1);
  std::vector<std::size_t> stack;
  count = 0;
  for (std::size_t seed = 0; seed < comp.size(); ++seed) {
    if (comp[seed] >= 0) continue;
    const std::int32_t id = count++;
    const std::int32_t value = labels.labels[seed];
    comp[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int y = static_cast<int>(i / w), x = static_cast<int>(i % w);
      auto visit = [&](int ny, int nx) {
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) return;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (comp[j] < 0 && labels.labels[j] == value) {
          comp[j] = id;
          stack.push_back(j);
        }
      };
      visit(y - 1, x);
      visit(y + 1, x);
      visit(y, x - 1);
      visit(y, x + 1);
    }
  }
  return comp;
}

}  // namespace

LabelMap enforce_connectivity(const LabelMap& labels, int min_size) {
  labels.validate();
  const int h = labels.height, w = labels.width;
  int count = 0;
  const std::vector<std::int32_t> comp = label_components(labels, count);

  std::vector<std::size_t> size(count, 0);
  for (std::int32_t c : comp) ++size[c];

  // Shared boundary length between adjacent components.
  std::vector<std::map<std::int32_t, std::size_t>> shared(count);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t a = comp[static_cast<std::size_t>(y) * w + x];
      if (x + 1 < w) {
        const std::int32_t b = comp[static_cast<std::size_t>(y) * w + x + 1];
        if (a != b) {
          ++shared[a][b];
          ++shared[b][a];
        }
      }
      if (y + 1 < h) {
        const std::int32_t b = comp[static_cast<std::size_t>(y + 1) * w + x];
        if (a != b) {
          ++shared[a][b];
          ++shared[b][a];
        }
      }
    }
  }

  std::vector<std::int32_t> parent(count);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::int32_t c) {
    while (parent[c] != c) c = parent[c] = parent[parent[c]];
    return c;
  };
  // A group is known by its lowest component id, which is also its rank in
  // raster order.
  std::vector<std::int32_t> group_label(count);
  std::iota(group_label.begin(), group_label.end(), 0);
  std::vector<std::vector<std::int32_t>> members(count);
  for (std::int32_t c = 0; c < count; ++c) members[c] = {c};

  const std::size_t floor = static_cast<std::size_t>(std::max(min_size, 1));
  for (bool changed = true; changed;) {
    changed = false;
    for (std::int32_t c = 0; c < count; ++c) {
      if (find(c) != c || size[c] >= floor) continue;
      std::map<std::int32_t, std::size_t> boundary;
      for (std::int32_t m : members[c]) {
        for (const auto& [other, len] : shared[m]) {
          const std::int32_t root = find(other);
          if (root != c) boundary[root] += len;
        }
      }
      if (boundary.empty()) continue;
      std::int32_t target = -1;
      std::size_t target_len = 0;
      for (const auto& [root, len] : boundary) {
        if (target < 0 || len > target_len ||
            (len == target_len && group_label[root] < group_label[target])) {
          target = root;
          target_len = len;
        }
      }
      parent[c] = target;
      size[target] += size[c];
      group_label[target] = std::min(group_label[target], group_label[c]);
      members[target].insert(members[target].end(), members[c].begin(), members[c].end());
      members[c].clear();
      changed = true;
    }
  }

  std::vector<std::int32_t> merged(comp.size());
  for (std::size_t i = 0; i < comp.size(); ++i) merged[i] = find(comp[i]);
  return LabelMap::from_raster_order(h, w, merged);
}

std::size_t boundary_length(const LabelMap& labels) {
  std::size_t total = 0;
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      if (x + 1 < labels.width && labels.at(y, x) != labels.at(y, x + 1)) ++total;
      if (y + 1 < labels.height && labels.at(y, x) != labels.at(y + 1, x)) ++total;
    }
  }
  return total;
}

}  // namespace binseg
