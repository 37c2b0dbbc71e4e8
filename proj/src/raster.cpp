#include "oxgen/raster.hpp"

#include <cstring>
#include <fstream>

#include <png.h>

#include "oxgen/error.hpp"
#include "oxgen/fileio.hpp"

namespace oxgen {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      pixels(static_cast<std::size_t>(w) * h * c, fill) {}

Image crop_or_pad(const Image& src, int x0, int y0, int w, int h) {
  Image out(w, h, src.channels, 0);
  for (int y = 0; y < h; ++y) {
    const int sy = y0 + y;
    if (sy < 0 || sy >= src.height) continue;
    const int sx_begin = std::max(0, x0);
    const int sx_end = std::min(src.width, x0 + w);
    if (sx_begin >= sx_end) continue;
    std::memcpy(&out.pixels[out.index(sx_begin - x0, y)], &src.pixels[src.index(sx_begin, sy)],
                static_cast<std::size_t>(sx_end - sx_begin) * src.channels);
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.channels != 3 && img.channels != 1)
    throw InputError("PNG encoding supports 1 or 3 channels");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
    throw InputError(std::string("PNG encode failed: ") + image.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr))
    throw InputError(std::string("PNG encode failed: ") + image.message);
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw InputError(std::string("PNG decode failed: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  Image out(static_cast<int>(image.width), static_cast<int>(image.height), 3);
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw InputError(std::string("PNG decode failed: ") + image.message);
  }
  return out;
}

Image read_png(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  try {
    return decode_png(bytes);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const Image& img) {
  write_file_atomic(path, encode_png(img));
}

std::array<int, 2> png_dimensions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char head[24];
  if (!in.read(reinterpret_cast<char*>(head), sizeof head) ||
      png_sig_cmp(head, 0, 8) != 0 || std::memcmp(head + 12, "IHDR", 4) != 0)
    throw InputError(path.string() + ": not a PNG file");
  auto be32 = [](const unsigned char* p) {
    return static_cast<int>((std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                            (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]});
  };
  return {be32(head + 16), be32(head + 20)};
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[at + i]} << (8 * i);
  return v;
}

constexpr std::size_t kTensorHeaderSize = 28;
constexpr std::uint32_t kTensorVersion = 1;
constexpr std::uint32_t kLayoutChw = 0;

}  // namespace

std::vector<std::uint8_t> encode_tensor(const FloatTensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderSize + t.data.size() * 4);
  out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
  put_u32(out, kTensorVersion);
  put_u32(out, static_cast<std::uint32_t>(t.channels));
  put_u32(out, static_cast<std::uint32_t>(t.height));
  put_u32(out, static_cast<std::uint32_t>(t.width));
  const char order[4] = {'R', 'G', 'B', '\0'};
  out.insert(out.end(), order, order + 4);
  put_u32(out, kLayoutChw);
  for (float f : t.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

FloatTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kTensorHeaderSize ||
      std::memcmp(bytes.data(), kTensorMagic.data(), 4) != 0)
    throw InputError("not a tensor file");
  if (get_u32(bytes, 4) != kTensorVersion) throw InputError("unsupported tensor version");
  FloatTensor t;
  t.channels = static_cast<int>(get_u32(bytes, 8));
  t.height = static_cast<int>(get_u32(bytes, 12));
  t.width = static_cast<int>(get_u32(bytes, 16));
  if (get_u32(bytes, 24) != kLayoutChw) throw InputError("unsupported tensor layout");
  const std::size_t n = static_cast<std::size_t>(t.channels) * t.height * t.width;
  if (bytes.size() != kTensorHeaderSize + n * 4) throw InputError("tensor size mismatch");
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bits = get_u32(bytes, kTensorHeaderSize + 4 * i);
    std::memcpy(&t.data[i], &bits, 4);
  }
  return t;
}

}  // namespace oxgen
