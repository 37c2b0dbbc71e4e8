#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace oxgen {

/// 8-bit interleaved raster, row-major, `channels` samples per pixel.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c = 3, std::uint8_t fill = 0);

  bool empty() const { return width == 0 || height == 0; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  std::uint8_t& at(int x, int y, int c = 0) { return pixels[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c = 0) const { return pixels[index(x, y, c)]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Planar (CHW) float32 tensor produced by normalization.
struct FloatTensor {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  float& at(int c, int x, int y) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int x, int y) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  friend bool operator==(const FloatTensor&, const FloatTensor&) = default;
};

/// Copies the window [x0, x0+w) x [y0, y0+h); pixels outside the source
/// are zero.
Image crop_or_pad(const Image& src, int x0, int y0, int w, int h);

// PNG container (lossless). Decoding converts gray/palette/alpha/16-bit
// inputs to 8-bit RGB.
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> bytes);
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);
/// Width and height from the IHDR chunk without decoding pixels.
std::array<int, 2> png_dimensions(const std::filesystem::path& path);

// Tensor file: 28-byte little-endian header then float32 samples.
// See docs/tensor_format.md.
inline constexpr std::array<char, 4> kTensorMagic = {'O', 'X', 'T', '1'};
std::vector<std::uint8_t> encode_tensor(const FloatTensor& t);
FloatTensor decode_tensor(std::span<const std::uint8_t> bytes);

}  // namespace oxgen
