#include "amd/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace amd {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const Image& img) {
  if (img.c != 1 && img.c != 3)
    throw ContractError("write_png: only 1 or 3 channels supported");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw LoadError("write_png: cannot open '" + path + "'");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw LoadError("write_png: libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw LoadError("write_png: encode failed for '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.w, img.h, 8,
               img.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> row(static_cast<size_t>(img.w) * img.c);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < img.c; ++ch) {
        float v = img.at(ch, y, x);
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        row[static_cast<size_t>(x) * img.c + ch] =
            static_cast<unsigned char>(std::lround(v * 255.f));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw LoadError("read_png: cannot open '" + path + "'");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw LoadError("read_png: libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("read_png: decode failed for '" + path + "'");
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  png_byte color = png_get_color_type(png, info);
  png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("read_png: unsupported channel count in '" + path + "'");
  }

  Image img(channels, static_cast<int>(h), static_cast<int>(w));
  std::vector<unsigned char> row(static_cast<size_t>(w) * channels);
  for (int y = 0; y < img.h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < channels; ++ch)
        img.at(ch, y, x) = row[static_cast<size_t>(x) * channels + ch] / 255.f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_tensor(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw LoadError("write_tensor: cannot open '" + path + "'");
  f.write("AMDT", 4);
  uint32_t dims[3] = {static_cast<uint32_t>(img.c), static_cast<uint32_t>(img.h),
                      static_cast<uint32_t>(img.w)};
  f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  f.write(reinterpret_cast<const char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size() * sizeof(float)));
  if (!f) throw LoadError("write_tensor: short write to '" + path + "'");
}

Image read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("read_tensor: cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "AMDT", 4) != 0)
    throw ParseError("read_tensor: bad magic in '" + path + "'");
  uint32_t dims[3];
  f.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!f) throw ParseError("read_tensor: truncated header in '" + path + "'");
  Image img(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
            static_cast<int>(dims[2]));
  f.read(reinterpret_cast<char*>(img.data.data()),
         static_cast<std::streamsize>(img.data.size() * sizeof(float)));
  if (!f) throw ParseError("read_tensor: truncated data in '" + path + "'");
  return img;
}

Image load_image_file(const std::string& path) {
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".amdt") == 0)
    return read_tensor(path);
  return read_png(path);
}

}  // namespace amd
