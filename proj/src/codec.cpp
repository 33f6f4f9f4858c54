#include "amd/codec.hpp"

#include <cmath>

namespace amd {

namespace vocab {

std::vector<int> encode_text(const std::string& text) {
  std::vector<int> out;
  out.reserve(text.size());
  for (unsigned char b : text) out.push_back(static_cast<int>(b));
  return out;
}

std::string decode_tokens(const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (id >= 0 && id < kBytes) {
      out.push_back(static_cast<char>(id));
    } else if (is_loc(id)) {
      out += "<loc_" + std::to_string(loc_bin(id)) + ">";
    } else if (id == kBos) {
      out += "<bos>";
    } else if (id == kEos) {
      out += "<eos>";
    } else if (id == kPad) {
      out += "<pad>";
    } else if (id == kSep) {
      out += "<sep>";
    } else {
      throw ContractError("decode_tokens: id outside vocabulary");
    }
  }
  return out;
}

}  // namespace vocab

namespace {

const std::string kOptionLines[kNumClasses] = {
    "A. No.",
    "B. Only face swap.",
    "C. Only face attribute.",
    "D. Only text swap.",
    "E. Both face swap and text fabrication.",
    "F. Both face attribute and text fabrication.",
};

const char* kQuestion =
    "The following are multiple choice questions about fake news detection. "
    "The text caption of the news is: <Text>. The identity and emotion of the "
    "face, and the semantic and sentiment of the text should not be "
    "manipulated. Question: Is there any face swap/attribute or text "
    "fabrication in the news?";

const char* kGroundingSentence =
    "If there is manipulation of a face, locate the one most likely "
    "manipulated face in the image and append the results to your selected "
    "option.";

const char* kAnswerCue = "The answer is:";
const char* kBoxPrefix = "[Manipulated face: ";

// A caption containing the literal substitution marker gets its '<' escaped
// so the assembled prompt holds exactly one marker expansion.
std::string escape_caption(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 6, "<Text>") == 0) {
      out += "\\<Text>";
      i += 6;
    } else {
      out.push_back(text[i]);
      ++i;
    }
  }
  return out;
}

}  // namespace

const std::string& option_line(ManipClass c) {
  return kOptionLines[static_cast<int>(c)];
}

std::string build_prompt_text(const std::string& text, bool grounding) {
  if (text.empty()) throw ContractError("build_prompt: text must be non-empty");
  std::string question = kQuestion;
  size_t at = question.find("<Text>");
  question.replace(at, 6, escape_caption(text));

  std::string out = "###Human:\n";
  out += question;
  out.push_back('\n');
  for (const auto& line : kOptionLines) {
    out += line;
    out.push_back('\n');
  }
  if (grounding) {
    out += kGroundingSentence;
    out.push_back('\n');
  }
  out += kAnswerCue;
  return out;
}

std::vector<int> build_prompt(const std::string& text, bool grounding) {
  return vocab::encode_text(build_prompt_text(text, grounding));
}

std::array<int, 4> quantize_bbox(const BBox& b) {
  if (!bbox_valid(b)) throw ContractError("quantize_bbox: invalid box");
  auto q = [](double v) { return static_cast<int>(std::lround(v * 999.0)); };
  return {q(b.x1), q(b.y1), q(b.x2), q(b.y2)};
}

BBox dequantize_bbox(const std::array<int, 4>& idx) {
  for (int v : idx)
    if (v < 0 || v > 999) throw ContractError("dequantize_bbox: index outside [0,999]");
  return BBox{idx[0] / 999.0, idx[1] / 999.0, idx[2] / 999.0, idx[3] / 999.0};
}

std::vector<int> build_target(ManipClass c, const std::optional<BBox>& box) {
  bool needs = class_to_labels(c).needs_box;
  if (needs && !box)
    throw ContractError("build_target: box required for option " +
                        std::string(1, option_letter(c)));
  if (!needs && box)
    throw ContractError("build_target: box not allowed for option " +
                        std::string(1, option_letter(c)));

  std::vector<int> out = vocab::encode_text(option_line(c));
  if (box) {
    auto idx = quantize_bbox(*box);
    for (int id : vocab::encode_text(kBoxPrefix)) out.push_back(id);
    for (int k : idx) out.push_back(vocab::loc_token(k));
    out.push_back(static_cast<int>(']'));
  }
  out.push_back(vocab::kEos);
  return out;
}

Prediction parse_answer(const std::string& text) {
  Prediction p;
  p.raw_text = text;

  // First capital A..F immediately followed by '.' selects the option.
  for (size_t i = 0; i + 1 < text.size(); ++i) {
    char c = text[i];
    if (c >= 'A' && c <= 'F' && text[i + 1] == '.') {
      p.option = c;
      break;
    }
  }
  if (!p.has_option()) return p;

  ClassLabels labels = class_to_labels(class_from_letter(p.option));
  p.y_bin_pred = labels.y_bin;
  p.y_mul_pred = labels.y_mul;

  // Boxes are only meaningful for face-manipulation options.
  if (!labels.needs_box) return p;

  // Scan "<loc_N>" occurrences; exactly four in-range tokens make a box.
  std::vector<int> bins;
  size_t i = 0;
  bool overflow = false;
  while (i < text.size()) {
    if (text.compare(i, 5, "<loc_") != 0) {
      ++i;
      continue;
    }
    size_t j = i + 5;
    long v = 0;
    bool has_digit = false, ok = true;
    while (j < text.size() && text[j] >= '0' && text[j] <= '9') {
      v = v * 10 + (text[j] - '0');
      has_digit = true;
      if (v > 9999) {
        ok = false;
        break;
      }
      ++j;
    }
    if (!ok || !has_digit || j >= text.size() || text[j] != '>') {
      ++i;
      continue;
    }
    if (v > 999) {
      overflow = true;  // out-of-range bin invalidates the box
      i = j + 1;
      continue;
    }
    if (bins.size() == 4) {
      overflow = true;  // more than four location tokens
      break;
    }
    bins.push_back(static_cast<int>(v));
    i = j + 1;
  }
  if (overflow || bins.size() != 4) return p;

  BBox b = dequantize_bbox({bins[0], bins[1], bins[2], bins[3]});
  if (b.x2 < b.x1 || b.y2 < b.y1) return p;  // disordered corners: no box
  p.bbox_pred = b;
  return p;
}

}  // namespace amd
