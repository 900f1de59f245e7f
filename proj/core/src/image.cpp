#include "hook/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>

#include "hook/errors.hpp"

namespace hook {

namespace {

uint8_t quantize(double v) {
  double q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<uint8_t>(q);
}

// netpbm token scanner: skips whitespace and '#' comments.
struct PnmScanner {
  std::string_view s;
  size_t pos = 0;

  void skip_space() {
    while (pos < s.size()) {
      char c = s[pos];
      if (c == '#') {
        while (pos < s.size() && s[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
  }

  int next_int(const char* what) {
    skip_space();
    if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos])))
      throw ParseError(std::string("netpbm: expected ") + what);
    long v = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      v = v * 10 + (s[pos] - '0');
      if (v > 1 << 30) throw ParseError("netpbm: absurd header value");
      ++pos;
    }
    return static_cast<int>(v);
  }
};

// Shared header parse for P5/P6; returns offset of the raw payload.
size_t parse_header(std::string_view bytes, const char* magic, int& w, int& h) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != magic)
    throw ParseError(std::string("netpbm: missing ") + magic + " magic");
  PnmScanner sc{bytes, 2};
  w = sc.next_int("width");
  h = sc.next_int("height");
  int maxval = sc.next_int("maxval");
  if (w <= 0 || h <= 0) throw ParseError("netpbm: non-positive dimensions");
  if (maxval != 255) throw ParseError("netpbm: only maxval 255 is supported, got " +
                                      std::to_string(maxval));
  if (sc.pos >= bytes.size()) throw ParseError("netpbm: missing payload");
  ++sc.pos;  // exactly one whitespace byte separates header and payload
  return sc.pos;
}

}  // namespace

std::string encode_ppm(const Image& img) {
  char hdr[64];
  int n = std::snprintf(hdr, sizeof(hdr), "P6\n%d %d\n255\n", img.w, img.h);
  std::string out(hdr, static_cast<size_t>(n));
  out.reserve(out.size() + img.rgb.size());
  for (double v : img.rgb) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

Image decode_ppm(std::string_view bytes) {
  int w, h;
  size_t off = parse_header(bytes, "P6", w, h);
  size_t need = static_cast<size_t>(w) * static_cast<size_t>(h) * 3;
  if (bytes.size() - off < need)
    throw ParseError("ppm: truncated payload: need " + std::to_string(need) + " bytes, have " +
                     std::to_string(bytes.size() - off));
  Image img{h, w, std::vector<double>(need)};
  for (size_t i = 0; i < need; ++i)
    img.rgb[i] = static_cast<uint8_t>(bytes[off + i]) / 255.0;
  return img;
}

std::string encode_pgm(const MaskImage& mask) {
  char hdr[64];
  int n = std::snprintf(hdr, sizeof(hdr), "P5\n%d %d\n255\n", mask.w, mask.h);
  std::string out(hdr, static_cast<size_t>(n));
  out.reserve(out.size() + mask.v.size());
  for (int v : mask.v) {
    if (v < 0 || v > 255)
      throw ContractError("pgm: mask value " + std::to_string(v) + " outside [0, 255]");
    out.push_back(static_cast<char>(static_cast<uint8_t>(v)));
  }
  return out;
}

MaskImage decode_pgm(std::string_view bytes) {
  int w, h;
  size_t off = parse_header(bytes, "P5", w, h);
  size_t need = static_cast<size_t>(w) * static_cast<size_t>(h);
  if (bytes.size() - off < need)
    throw ParseError("pgm: truncated payload: need " + std::to_string(need) + " bytes, have " +
                     std::to_string(bytes.size() - off));
  MaskImage mask{h, w, std::vector<int>(need)};
  for (size_t i = 0; i < need; ++i) mask.v[i] = static_cast<uint8_t>(bytes[off + i]);
  return mask;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed for " + path);
  return data;
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path);
}

Image read_ppm(const std::string& path) { return decode_ppm(read_file(path)); }
void write_ppm(const std::string& path, const Image& img) { write_file(path, encode_ppm(img)); }
MaskImage read_pgm(const std::string& path) { return decode_pgm(read_file(path)); }
void write_pgm(const std::string& path, const MaskImage& mask) {
  write_file(path, encode_pgm(mask));
}

Tensor image_to_tensor(const Image& img) {
  Tensor t(Shape{3, img.h, img.w}, 0.0);
  double* d = t.data();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) d[(c * img.h + y) * img.w + x] = img.at(y, x, c);
  return t;
}

Image tensor_to_image(const Tensor& t) {
  if (t.ndim() != 3 || t.dim(0) != 3)
    throw DimensionError("tensor_to_image: expected [3, H, W], got " + shape_str(t.shape()));
  const int h = static_cast<int>(t.dim(1)), w = static_cast<int>(t.dim(2));
  Image img{h, w, std::vector<double>(static_cast<size_t>(h) * w * 3)};
  const double* d = t.data();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(y, x, c) = std::clamp(d[(c * h + y) * w + x], 0.0, 1.0);
  return img;
}

std::vector<MaskImage> connected_components(const MaskImage& mask) {
  std::vector<MaskImage> out;
  std::vector<bool> seen(mask.v.size(), false);
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) {
      size_t start = static_cast<size_t>(y * mask.w + x);
      if (seen[start] || mask.v[start] == 0) continue;
      MaskImage comp{mask.h, mask.w, std::vector<int>(mask.v.size(), 0)};
      std::deque<std::pair<int, int>> queue{{y, x}};
      seen[start] = true;
      while (!queue.empty()) {
        auto [cy, cx] = queue.front();
        queue.pop_front();
        comp.at(cy, cx) = 1;
        const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          int ny = cy + dy[k], nx = cx + dx[k];
          if (ny < 0 || ny >= mask.h || nx < 0 || nx >= mask.w) continue;
          size_t idx = static_cast<size_t>(ny * mask.w + nx);
          if (!seen[idx] && mask.v[idx] != 0) {
            seen[idx] = true;
            queue.emplace_back(ny, nx);
          }
        }
      }
      out.push_back(std::move(comp));
    }
  return out;
}

}  // namespace hook
