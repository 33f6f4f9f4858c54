#pragma once

#include "amd/types.hpp"

#include <string>

namespace amd {

// 8-bit RGB (or grayscale) PNG. Values are clamped to [0,1] and rounded on
// write; reads divide by 255.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Raw little-endian tensor fixture: "AMDT" magic, u32 c/h/w, float32 data.
// Lossless, used by tests that must round-trip exact float values.
void write_tensor(const std::string& path, const Image& img);
Image read_tensor(const std::string& path);

// Dispatches on extension (.png / .amdt).
Image load_image_file(const std::string& path);

}  // namespace amd
