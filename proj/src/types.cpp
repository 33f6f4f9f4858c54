#include "amd/types.hpp"

namespace amd {

bool bbox_valid(const BBox& b) {
  return b.x1 >= 0 && b.y1 >= 0 && b.x2 <= 1 && b.y2 <= 1 && b.x1 <= b.x2 &&
         b.y1 <= b.y2;
}

double bbox_area(const BBox& b) {
  return (b.x2 - b.x1) * (b.y2 - b.y1);
}

ClassLabels class_to_labels(ManipClass c) {
  switch (c) {
    case ManipClass::REAL:  return {false, {false, false, false}, false};
    case ManipClass::FS:    return {true, {true, false, false}, true};
    case ManipClass::FA:    return {true, {false, true, false}, true};
    case ManipClass::TF:    return {true, {false, false, true}, false};
    case ManipClass::FS_TF: return {true, {true, false, true}, true};
    case ManipClass::FA_TF: return {true, {false, true, true}, true};
  }
  throw ContractError("class_to_labels: invalid class");
}

ManipClass labels_to_class(const std::array<bool, 3>& m) {
  if (m[kFS] && m[kFA]) throw ContractError("labels_to_class: FS and FA both set");
  if (!m[kFS] && !m[kFA] && !m[kTF]) return ManipClass::REAL;
  if (m[kFS]) return m[kTF] ? ManipClass::FS_TF : ManipClass::FS;
  if (m[kFA]) return m[kTF] ? ManipClass::FA_TF : ManipClass::FA;
  return ManipClass::TF;
}

char option_letter(ManipClass c) {
  return static_cast<char>('A' + static_cast<int>(c));
}

ManipClass class_from_letter(char o) {
  if (o < 'A' || o > 'F') throw ContractError("class_from_letter: letter outside A..F");
  return static_cast<ManipClass>(o - 'A');
}

const char* class_name(ManipClass c) {
  switch (c) {
    case ManipClass::REAL:  return "REAL";
    case ManipClass::FS:    return "FS";
    case ManipClass::FA:    return "FA";
    case ManipClass::TF:    return "TF";
    case ManipClass::FS_TF: return "FS_TF";
    case ManipClass::FA_TF: return "FA_TF";
  }
  return "?";
}

void validate_sample(const MediaSample& s) {
  if (s.id.empty()) throw ValidationError("id: empty");
  bool any = s.y_mul[kFS] || s.y_mul[kFA] || s.y_mul[kTF];
  if (s.y_bin != any)
    throw ValidationError("y_bin: must equal OR of y_mul (sample '" + s.id + "')");
  if (s.y_mul[kFS] && s.y_mul[kFA])
    throw ValidationError("y_mul: FS and FA mutually exclusive (sample '" + s.id + "')");
  bool face = s.y_mul[kFS] || s.y_mul[kFA];
  if (face && !s.y_box)
    throw ValidationError("y_box: required for face manipulation (sample '" + s.id + "')");
  if (!face && s.y_box)
    throw ValidationError("y_box: must be null without face manipulation (sample '" +
                          s.id + "')");
  if (s.y_box) {
    const BBox& b = *s.y_box;
    if (!(b.x1 >= 0 && b.y1 >= 0 && b.x2 <= 1 && b.y2 <= 1))
      throw ValidationError("y_box: coordinates outside [0,1] (sample '" + s.id + "')");
    if (!(b.x1 < b.x2 && b.y1 < b.y2))
      throw ValidationError("y_box: corners not strictly ordered (sample '" + s.id +
                            "')");
  }
}

}  // namespace amd
