#include "ordsurf/stitch.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace ordsurf {

namespace {

double region_mean(const RasterGrid& g, const RegionRef& r) {
  if (r.w < 1 || r.h < 1) throw std::runtime_error("stitch: empty overlap region");
  if (r.x0 < 0 || r.y0 < 0 || r.x0 + r.w > g.width || r.y0 + r.h > g.height) {
    throw std::runtime_error("stitch: overlap region out of bounds");
  }
  double sum = 0.0;
  for (int y = r.y0; y < r.y0 + r.h; ++y)
    for (int x = r.x0; x < r.x0 + r.w; ++x) sum += double(g.at(x, y));
  return sum / (double(r.w) * r.h);
}

// Intersection of two layout rects, returned in each patch's local coords.
bool shared_region(const PatchRect& a, const PatchRect& b, RegionRef& ra, RegionRef& rb) {
  const int x0 = std::max(a.x0, b.x0), y0 = std::max(a.y0, b.y0);
  const int x1 = std::min(a.x0 + a.size, b.x0 + b.size);
  const int y1 = std::min(a.y0 + a.size, b.y0 + b.size);
  if (x1 <= x0 || y1 <= y0) return false;
  ra = RegionRef{x0 - a.x0, y0 - a.y0, x1 - x0, y1 - y0};
  rb = RegionRef{x0 - b.x0, y0 - b.y0, x1 - x0, y1 - y0};
  return true;
}

}  // namespace

double estimate_shift(const RasterGrid& prev, const RegionRef& prev_region,
                      const RasterGrid& next, const RegionRef& next_region) {
  if (prev_region.w != next_region.w || prev_region.h != next_region.h) {
    throw std::runtime_error("stitch: overlap regions differ in size");
  }
  return region_mean(prev, prev_region) - region_mean(next, next_region);
}

StitchResult stitch(const std::vector<RasterGrid>& patches, const PatchLayout& layout) {
  const std::size_t count = std::size_t(layout.rows) * layout.cols;
  if (patches.size() != count) throw std::runtime_error("stitch: patch count mismatch");
  for (std::size_t i = 0; i < count; ++i) {
    if (patches[i].width != layout.rects[i].size || patches[i].height != layout.rects[i].size) {
      throw std::runtime_error("stitch: patch size mismatch");
    }
  }

  std::vector<double> shifts(count, 0.0);
  auto align = [&](int pr, int pc, int r, int c) {
    const PatchRect& prev_rect = layout.rect(pr, pc);
    const PatchRect& next_rect = layout.rect(r, c);
    RegionRef ra, rb;
    if (!shared_region(prev_rect, next_rect, ra, rb)) {
      throw std::runtime_error("stitch: adjacent patches do not overlap");
    }
    const std::size_t pi = std::size_t(pr) * layout.cols + pc;
    const std::size_t ni = std::size_t(r) * layout.cols + c;
    // The previous patch is compared after its own shift, so offsets chain.
    shifts[ni] = shifts[pi] + estimate_shift(patches[pi], ra, patches[ni], rb);
  };
  for (int c = 1; c < layout.cols; ++c) align(0, c - 1, 0, c);
  for (int c = 0; c < layout.cols; ++c)
    for (int r = 1; r < layout.rows; ++r) align(r - 1, c, r, c);

  RasterGrid out;
  out.width = layout.image_width;
  out.height = layout.image_height;
  out.data.assign(std::size_t(out.width) * out.height, 0.0f);
  std::vector<double> acc(out.data.size(), 0.0);
  std::vector<std::uint16_t> hits(out.data.size(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const PatchRect& rect = layout.rects[i];
    for (int y = 0; y < rect.size; ++y) {
      const std::size_t row = std::size_t(rect.y0 + y) * out.width + rect.x0;
      for (int x = 0; x < rect.size; ++x) {
        acc[row + x] += double(patches[i].at(x, y)) + shifts[i];
        ++hits[row + x];
      }
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (hits[i] == 0) throw std::runtime_error("stitch: layout leaves uncovered pixels");
    out.data[i] = float(acc[i] / hits[i]);
  }
  return StitchResult{std::move(out), std::move(shifts)};
}

void save_layout(const PatchLayout& layout, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("layout: cannot write " + path);
  out << "row,col,x0,y0,size\n";
  for (const PatchRect& r : layout.rects) {
    out << r.row << ',' << r.col << ',' << r.x0 << ',' << r.y0 << ',' << r.size << '\n';
  }
  if (!out) throw std::runtime_error("layout: write failed for " + path);
}

PatchLayout load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("layout: cannot open " + path);
  std::map<std::pair<int, int>, PatchRect> by_pos;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("row,", 0) == 0) continue;
    }
    PatchRect r;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%d", &r.row, &r.col, &r.x0, &r.y0, &r.size) != 5) {
      throw std::runtime_error("layout: malformed line: " + line);
    }
    if (!by_pos.emplace(std::make_pair(r.row, r.col), r).second) {
      throw std::runtime_error("layout: duplicate patch position");
    }
  }
  if (by_pos.empty()) throw std::runtime_error("layout: empty file " + path);

  PatchLayout layout;
  layout.rows = by_pos.rbegin()->first.first + 1;
  layout.cols = 0;
  for (const auto& [pos, r] : by_pos) layout.cols = std::max(layout.cols, pos.second + 1);
  if (by_pos.size() != std::size_t(layout.rows) * layout.cols) {
    throw std::runtime_error("layout: grid has holes");
  }
  layout.rects.resize(by_pos.size());
  layout.patch_size = by_pos.begin()->second.size;
  for (const auto& [pos, r] : by_pos) {
    layout.rects[std::size_t(pos.first) * layout.cols + pos.second] = r;
    layout.image_width = std::max(layout.image_width, r.x0 + r.size);
    layout.image_height = std::max(layout.image_height, r.y0 + r.size);
  }
  // Overlap is implied by the rects; recover it for bookkeeping.
  layout.overlap = layout.patch_size;
  if (layout.cols > 1) {
    const int gap = layout.rect(0, 1).x0 - layout.rect(0, 0).x0;
    layout.overlap = std::min(layout.overlap, layout.patch_size - gap);
  }
  if (layout.rows > 1) {
    const int gap = layout.rect(1, 0).y0 - layout.rect(0, 0).y0;
    layout.overlap = std::min(layout.overlap, layout.patch_size - gap);
  }
  if (layout.rows == 1 && layout.cols == 1) layout.overlap = 0;
  return layout;
}

void save_shifts(const std::vector<double>& shifts, const PatchLayout& layout,
                 const std::string& path) {
  if (shifts.size() != layout.rects.size()) {
    throw std::runtime_error("shifts: count does not match layout");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("shifts: cannot write " + path);
  out << "row,col,shift\n";
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    char line[96];
    std::snprintf(line, sizeof line, "%d,%d,%.9g\n", layout.rects[i].row, layout.rects[i].col,
                  shifts[i]);
    out << line;
  }
  if (!out) throw std::runtime_error("shifts: write failed for " + path);
}

}  // namespace ordsurf
