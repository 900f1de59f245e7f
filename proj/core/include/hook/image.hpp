#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hook/tensor.hpp"

namespace hook {

// RGB image, row-major (y, x, channel), values in [0, 1].
struct Image {
  int h = 0, w = 0;
  std::vector<double> rgb;  // h * w * 3

  double& at(int y, int x, int c) { return rgb[static_cast<size_t>((y * w + x) * 3 + c)]; }
  double at(int y, int x, int c) const { return rgb[static_cast<size_t>((y * w + x) * 3 + c)]; }
};

// Integer-valued mask (class or instance ids), row-major.
struct MaskImage {
  int h = 0, w = 0;
  std::vector<int> v;  // h * w

  int& at(int y, int x) { return v[static_cast<size_t>(y * w + x)]; }
  int at(int y, int x) const { return v[static_cast<size_t>(y * w + x)]; }
};

// Binary P6 with maxval 255. Values are quantized round(v*255) at encode;
// decoding returns q/255, so already-quantized data round-trips exactly.
std::string encode_ppm(const Image& img);
Image decode_ppm(std::string_view bytes);

// Binary P5 with maxval 255. Mask values must lie in [0, 255].
std::string encode_pgm(const MaskImage& mask);
MaskImage decode_pgm(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& img);
MaskImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const MaskImage& mask);

// [3, H, W] tensor from an image and back (values clamped to [0, 1]).
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

// 4-connected components of the nonzero region, in deterministic
// (scanline-first) order. Each returned mask is 0/1.
std::vector<MaskImage> connected_components(const MaskImage& mask);

}  // namespace hook
