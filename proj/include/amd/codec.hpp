#pragma once

#include "amd/types.hpp"
#include "amd/vocab.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace amd {

// Parsed model answer.
struct Prediction {
  char option = '?';  // 'A'..'F', or '?' when no option was recognized
  bool y_bin_pred = false;
  std::array<bool, 3> y_mul_pred = {false, false, false};
  std::optional<BBox> bbox_pred;
  std::string raw_text;

  bool has_option() const { return option >= 'A' && option <= 'F'; }
};

// The six answer option lines, indexed by ManipClass.
const std::string& option_line(ManipClass c);

// Human-side question text with the caption substituted. The grounding flag
// appends the face-localization instruction sentence.
std::string build_prompt_text(const std::string& text, bool grounding);

// build_prompt_text tokenized to byte ids. Empty text → contract error.
std::vector<int> build_prompt(const std::string& text, bool grounding);

// Assistant-side target: option line, optional bracketed location-token box,
// then EOS. Box presence must match the class.
std::vector<int> build_target(ManipClass c, const std::optional<BBox>& box);

// Total function over arbitrary model output; malformed input degrades to
// option '?' / missing box, never throws.
Prediction parse_answer(const std::string& text);

std::array<int, 4> quantize_bbox(const BBox& b);
BBox dequantize_bbox(const std::array<int, 4>& idx);

}  // namespace amd
