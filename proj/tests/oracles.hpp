#pragma once

// Direct, slow reimplementations of the evaluation metrics used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "supercam/image.hpp"
#include "supercam/metrics.hpp"

namespace oracle {

inline std::set<std::int32_t> ids_of(const supercam::LabelMap& m, const supercam::LabelMap& truth) {
  std::set<std::int32_t> out;
  for (std::size_t i = 0; i < m.pixel_count(); ++i)
    if (truth.ids()[i] != supercam::LabelMap::kVoidLabel) out.insert(m.ids()[i]);
  return out;
}

inline double ue(const supercam::LabelMap& s, const supercam::LabelMap& g) {
  const auto sids = ids_of(s, g);
  const auto gids = ids_of(g, g);
  long n = 0;
  for (auto v : g.ids()) n += v != supercam::LabelMap::kVoidLabel;
  long total = 0;
  for (auto gi : gids) {
    for (auto sj : sids) {
      long inside = 0;
      long outside = 0;
      for (std::size_t p = 0; p < s.pixel_count(); ++p) {
        if (g.ids()[p] == supercam::LabelMap::kVoidLabel || s.ids()[p] != sj) continue;
        if (g.ids()[p] == gi) {
          ++inside;
        } else {
          ++outside;
        }
      }
      if (inside > 0) total += std::min(inside, outside);
    }
  }
  return double(total) / double(n);
}

inline std::vector<std::vector<int>> boundary(const supercam::LabelMap& m) {
  std::vector<std::vector<int>> b(m.height(), std::vector<int>(m.width(), 0));
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (x + 1 < m.width() && m.at(x + 1, y) != m.at(x, y)) b[y][x] = 1;
      if (y + 1 < m.height() && m.at(x, y + 1) != m.at(x, y)) b[y][x] = 1;
    }
  return b;
}

struct Pr {
  double precision;
  double recall;
  long tp;
  long fp;
  long fn;
};

inline Pr precision_recall(const supercam::LabelMap& s, const supercam::LabelMap& g, int r) {
  const auto bs = boundary(s);
  const auto bg = boundary(g);
  long tp = 0;
  long fp = 0;
  long ng = 0;
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x) {
      ng += bg[y][x];
      if (!bs[y][x]) continue;
      bool hit = false;
      for (int dy = -r; dy <= r && !hit; ++dy)
        for (int dx = -r; dx <= r && !hit; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx >= 0 && yy >= 0 && xx < s.width() && yy < s.height() && bg[yy][xx]) hit = true;
        }
      if (hit) {
        ++tp;
      } else {
        ++fp;
      }
    }
  const long fn = std::max(0L, ng - tp);
  return {tp + fp ? double(tp) / double(tp + fp) : 1.0, tp + fn ? double(tp) / double(tp + fn) : 1.0,
          tp, fp, fn};
}

inline double miou_error(const supercam::LabelMap& s, const supercam::LabelMap& g) {
  const auto sids = ids_of(s, g);
  const auto gids = ids_of(g, g);
  double total = 0.0;
  for (auto sj : sids) {
    long best = -1;
    std::int32_t best_g = -1;
    for (auto gi : gids) {
      long inter = 0;
      for (std::size_t p = 0; p < s.pixel_count(); ++p)
        inter += s.ids()[p] == sj && g.ids()[p] == gi;
      if (inter > best) {
        best = inter;
        best_g = gi;
      }
    }
    long uni = 0;
    for (std::size_t p = 0; p < s.pixel_count(); ++p) {
      if (g.ids()[p] == supercam::LabelMap::kVoidLabel) continue;
      uni += s.ids()[p] == sj || g.ids()[p] == best_g;
    }
    total += 1.0 - double(best) / double(uni);
  }
  return total / double(sids.size());
}

inline supercam::metrics::DepthScore depth(const supercam::metrics::DepthMap& pred,
                                           const supercam::metrics::DepthMap& gt) {
  double rel = 0.0;
  long within = 0;
  long n = 0;
  for (std::size_t i = 0; i < gt.depth.size(); ++i) {
    if (!gt.mask.empty() && !gt.mask[i]) continue;
    rel += std::fabs(gt.depth[i] - pred.depth[i]) / gt.depth[i];
    const double ratio = std::max(gt.depth[i] / pred.depth[i], pred.depth[i] / gt.depth[i]);
    within += ratio < 1.25;
    ++n;
  }
  return {rel / double(n), double(within) / double(n)};
}

}  // namespace oracle
