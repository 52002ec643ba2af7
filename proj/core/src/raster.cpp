#include "ordsurf/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ordsurf {

namespace {

void put_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("hmap: truncated " + what);
  }
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

// Floats are serialized little-endian; on the (ubiquitous) little-endian
// hosts this is a plain memcpy of the payload.
void put_f32le(std::ostream& os, const float* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t u;
    std::memcpy(&u, &p[i], 4);
    put_u32le(os, u);
  }
}

void get_f32le(std::istream& is, float* p, std::size_t n) {
  std::vector<unsigned char> buf(n * 4);
  if (!is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()))) {
    throw std::runtime_error("hmap: truncated payload");
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t u = std::uint32_t(buf[4 * i]) |
                      (std::uint32_t(buf[4 * i + 1]) << 8) |
                      (std::uint32_t(buf[4 * i + 2]) << 16) |
                      (std::uint32_t(buf[4 * i + 3]) << 24);
    std::memcpy(&p[i], &u, 4);
  }
}

}  // namespace

RasterGrid load_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("hmap: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "HMAP", 4) != 0) {
    throw std::runtime_error("hmap: bad magic in " + path);
  }
  std::uint32_t w = get_u32le(in, "width");
  std::uint32_t h = get_u32le(in, "height");
  if (w == 0 || h == 0) throw std::runtime_error("hmap: zero dimension in " + path);
  if (std::uint64_t(w) * h > (std::uint64_t(1) << 31)) {
    throw std::runtime_error("hmap: dimensions overflow in " + path);
  }
  RasterGrid g;
  g.width = int(w);
  g.height = int(h);
  g.data.resize(std::size_t(w) * h);
  get_f32le(in, g.data.data(), g.data.size());
  return g;
}

void save_raster(const RasterGrid& grid, const std::string& path) {
  if (grid.width < 1 || grid.height < 1 ||
      grid.data.size() != std::size_t(grid.width) * grid.height) {
    throw std::runtime_error("hmap: grid dimensions inconsistent with payload");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("hmap: cannot write " + path);
  out.write("HMAP", 4);
  put_u32le(out, std::uint32_t(grid.width));
  put_u32le(out, std::uint32_t(grid.height));
  put_f32le(out, grid.data.data(), grid.data.size());
  if (!out) throw std::runtime_error("hmap: write failed for " + path);
}

ImageTile load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ppm: cannot open " + path);
  auto next_token = [&in, &path]() -> std::string {
    // Tokens may be separated by whitespace and '#' comments.
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '#') {
        while ((c = in.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(char(c));
    }
    if (tok.empty()) throw std::runtime_error("ppm: truncated header in " + path);
    return tok;
  };
  if (next_token() != "P6") throw std::runtime_error("ppm: not a P6 file: " + path);
  int w = std::stoi(next_token());
  int h = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  if (w < 1 || h < 1) throw std::runtime_error("ppm: bad dimensions in " + path);
  if (maxval != 255) throw std::runtime_error("ppm: only maxval 255 supported: " + path);
  std::vector<unsigned char> raw(std::size_t(w) * h * 3);
  if (!in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()))) {
    throw std::runtime_error("ppm: truncated pixel data in " + path);
  }
  ImageTile t;
  t.width = w;
  t.height = h;
  t.channels = 3;
  t.data.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    t.data[i] = float(raw[i]) / 255.0f;
  }
  return t;
}

void save_ppm(const ImageTile& image, const std::string& path) {
  if (image.channels != 3) throw std::runtime_error("ppm: image must have 3 channels");
  if (image.width < 1 || image.height < 1 ||
      image.data.size() != std::size_t(image.width) * image.height * 3) {
    throw std::runtime_error("ppm: image dimensions inconsistent with payload");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("ppm: cannot write " + path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    float v = std::clamp(image.data[i], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::floor(v * 255.0f + 0.5f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
  if (!out) throw std::runtime_error("ppm: write failed for " + path);
}

LocalizedPatch localize_patch(const RasterGrid& grid, int x0, int y0, int size) {
  if (size < 1) throw std::runtime_error("localize: patch size must be >= 1");
  if (x0 < 0 || y0 < 0 || x0 + size > grid.width || y0 + size > grid.height) {
    throw std::runtime_error("localize: rectangle out of bounds");
  }
  LocalizedPatch out;
  out.grid.width = size;
  out.grid.height = size;
  out.grid.data.resize(std::size_t(size) * size);
  float lo = std::numeric_limits<float>::infinity();
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      float v = grid.at(x0 + x, y0 + y);
      if (grid.is_nodata(v)) throw std::runtime_error("localize: crop contains nodata");
      out.grid.at(x, y) = v;
      lo = std::min(lo, v);
    }
  }
  for (float& v : out.grid.data) v -= lo;
  out.spec = PatchSpec{x0, y0, size, lo};
  return out;
}

CropPair random_crop_pair(const ImageTile& image, const RasterGrid& dsm,
                          int size, SplitMix64& rng) {
  if (image.width != dsm.width || image.height != dsm.height) {
    throw std::runtime_error("crop: image and height map dimensions differ");
  }
  if (size < 1 || size > image.width || size > image.height) {
    throw std::runtime_error("crop: size exceeds source dimensions");
  }
  const int xs = image.width - size + 1;
  const int ys = image.height - size + 1;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    int x0 = int(rng.below(std::uint64_t(xs)));
    int y0 = int(rng.below(std::uint64_t(ys)));
    bool has_nodata = false;
    for (int y = 0; y < size && !has_nodata; ++y) {
      for (int x = 0; x < size; ++x) {
        if (dsm.is_nodata(dsm.at(x0 + x, y0 + y))) {
          has_nodata = true;
          break;
        }
      }
    }
    if (has_nodata) continue;
    CropPair out;
    LocalizedPatch lp = localize_patch(dsm, x0, y0, size);
    out.dsm = std::move(lp.grid);
    out.spec = lp.spec;
    out.image.width = size;
    out.image.height = size;
    out.image.channels = image.channels;
    out.image.data.resize(std::size_t(size) * size * image.channels);
    for (int y = 0; y < size; ++y) {
      const float* src = &image.data[(std::size_t(y0 + y) * image.width + x0) * image.channels];
      float* dst = &out.image.data[std::size_t(y) * size * image.channels];
      std::copy(src, src + std::size_t(size) * image.channels, dst);
    }
    return out;
  }
  throw std::runtime_error("crop: no nodata-free crop found after 1000 attempts");
}

namespace {

std::vector<int> plan_axis(int extent, int patch, int stride) {
  std::vector<int> offsets;
  for (int x = 0;; x += stride) {
    if (x + patch >= extent) {
      offsets.push_back(extent - patch);
      break;
    }
    offsets.push_back(x);
  }
  return offsets;
}

}  // namespace

PatchLayout plan_grid(int width, int height, int patch_size, int overlap) {
  if (patch_size < 1) throw std::runtime_error("plan: patch size must be >= 1");
  if (overlap < 1 || overlap >= patch_size) {
    throw std::runtime_error("plan: overlap must be in [1, patch_size)");
  }
  if (width < patch_size || height < patch_size) {
    throw std::runtime_error("plan: image smaller than patch size");
  }
  const int stride = patch_size - overlap;
  std::vector<int> xs = plan_axis(width, patch_size, stride);
  std::vector<int> ys = plan_axis(height, patch_size, stride);
  PatchLayout layout;
  layout.rows = int(ys.size());
  layout.cols = int(xs.size());
  layout.patch_size = patch_size;
  layout.overlap = overlap;
  layout.image_width = width;
  layout.image_height = height;
  layout.rects.reserve(std::size_t(layout.rows) * layout.cols);
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) {
      layout.rects.push_back(PatchRect{r, c, xs[std::size_t(c)], ys[std::size_t(r)], patch_size});
    }
  }
  return layout;
}

}  // namespace ordsurf
