#pragma once

#include "amd/common.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace amd {

// Six-way answer taxonomy. Order matches option letters A..F.
enum class ManipClass { REAL = 0, FS = 1, FA = 2, TF = 3, FS_TF = 4, FA_TF = 5 };

constexpr int kNumClasses = 6;

// Indices into y_mul.
constexpr int kFS = 0;
constexpr int kFA = 1;
constexpr int kTF = 2;

// Normalized corner coordinates, fractions of image width/height.
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  bool operator==(const BBox&) const = default;
};

bool bbox_valid(const BBox& b);
double bbox_area(const BBox& b);

// Planar float image, values in [0,1], layout (c, h, w).
struct Image {
  int c = 0, h = 0, w = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c_, int h_, int w_)
      : c(c_), h(h_), w(w_), data(static_cast<size_t>(c_) * h_ * w_, 0.f) {}

  float& at(int ch, int y, int x) {
    return data[(static_cast<size_t>(ch) * h + y) * w + x];
  }
  float at(int ch, int y, int x) const {
    return data[(static_cast<size_t>(ch) * h + y) * w + x];
  }
};

struct MediaSample {
  std::string id;
  std::string image;  // path relative to the corpus root
  std::string text;
  bool y_bin = false;
  std::array<bool, 3> y_mul = {false, false, false};  // (FS, FA, TF)
  std::optional<BBox> y_box;
  std::string domain;
};

struct ClassLabels {
  bool y_bin;
  std::array<bool, 3> y_mul;
  bool needs_box;
};

ClassLabels class_to_labels(ManipClass c);
ManipClass labels_to_class(const std::array<bool, 3>& y_mul);

char option_letter(ManipClass c);       // A..F
ManipClass class_from_letter(char o);   // contract error outside A..F
const char* class_name(ManipClass c);   // "REAL", "FS", ...

// Checks every MediaSample invariant; throws ValidationError naming the field.
void validate_sample(const MediaSample& s);

}  // namespace amd
