#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "amd/codec.hpp"
#include "amd/types.hpp"
#include "amd/vocab.hpp"

#include <string>

using namespace amd;

TEST_CASE("class labels round-trip for all six classes") {
  for (int c = 0; c < kNumClasses; ++c) {
    ManipClass cls = static_cast<ManipClass>(c);
    ClassLabels l = class_to_labels(cls);
    CHECK(labels_to_class(l.y_mul) == cls);
    CHECK(l.y_bin == (cls != ManipClass::REAL));
    CHECK(l.needs_box == (l.y_mul[kFS] || l.y_mul[kFA]));
    CHECK(class_from_letter(option_letter(cls)) == cls);
  }
  CHECK_THROWS_AS(class_from_letter('G'), ContractError);
  // FS and FA are mutually exclusive; that bit pattern has no class.
  CHECK_THROWS_AS(labels_to_class({true, true, false}), ContractError);
}

TEST_CASE("sample validation names the offending field") {
  MediaSample s;
  s.id = "x1";
  s.text = "caption";
  s.domain = "D1";
  s.y_bin = false;
  CHECK_NOTHROW(validate_sample(s));

  MediaSample bad = s;
  bad.y_bin = true;  // manipulated but no type set
  CHECK_THROWS_WITH_AS(validate_sample(bad),
                       doctest::Contains("y_bin"), ValidationError);

  bad = s;
  bad.y_mul = {true, false, false};  // type set but y_bin false
  CHECK_THROWS_WITH_AS(validate_sample(bad),
                       doctest::Contains("y_bin"), ValidationError);

  bad = s;
  bad.y_bin = true;
  bad.y_mul = {true, true, false};
  CHECK_THROWS_WITH_AS(validate_sample(bad),
                       doctest::Contains("y_mul"), ValidationError);

  bad = s;
  bad.y_bin = true;
  bad.y_mul = {true, false, false};  // FS needs a box
  CHECK_THROWS_WITH_AS(validate_sample(bad),
                       doctest::Contains("y_box"), ValidationError);

  bad = s;
  bad.y_box = BBox{0.6, 0.1, 0.4, 0.9};  // reversed x for a REAL sample
  CHECK_THROWS_WITH_AS(validate_sample(bad),
                       doctest::Contains("y_box"), ValidationError);

  bad = s;
  bad.id.clear();
  CHECK_THROWS_WITH_AS(validate_sample(bad), doctest::Contains("id"),
                       ValidationError);
}

TEST_CASE("bbox helpers") {
  BBox b{0.1, 0.2, 0.5, 0.8};
  CHECK(bbox_valid(b));
  CHECK(bbox_area(b) == doctest::Approx(0.4 * 0.6));
  CHECK_FALSE(bbox_valid(BBox{-0.1, 0, 1, 1}));
  CHECK_FALSE(bbox_valid(BBox{0.5, 0, 0.4, 1}));
  // Degenerate-but-ordered boxes are representable (zero area).
  CHECK(bbox_valid(BBox{0.5, 0.5, 0.5, 0.5}));
}

TEST_CASE("byte vocabulary layout") {
  CHECK(vocab::kSize == 256 + 4 + 1000);
  CHECK(vocab::is_loc(vocab::kLoc0));
  CHECK(vocab::is_loc(vocab::loc_token(999)));
  CHECK_FALSE(vocab::is_loc(vocab::kEos));
  CHECK(vocab::loc_bin(vocab::loc_token(123)) == 123);

  std::string text = "Hello, <Text> \xff\x01";
  std::vector<int> ids = vocab::encode_text(text);
  CHECK(ids.size() == text.size());
  CHECK(vocab::decode_tokens(ids) == text);
}

TEST_CASE("special tokens render as readable markers") {
  std::vector<int> ids = {static_cast<int>('h'), vocab::kEos, vocab::loc_token(7)};
  std::string s = vocab::decode_tokens(ids);
  CHECK(s.find('h') == 0);
  CHECK(s.find("<loc_7>") != std::string::npos);
}

TEST_CASE("prompt template carries the exact option lines and cue") {
  std::string p = build_prompt_text("a man at a rally.", true);
  CHECK(p.rfind("###Human:\n", 0) == 0);
  CHECK(p.find("The text caption of the news is: a man at a rally..") !=
        std::string::npos);
  CHECK(p.find("A. No.\n") != std::string::npos);
  CHECK(p.find("B. Only face swap.\n") != std::string::npos);
  CHECK(p.find("C. Only face attribute.\n") != std::string::npos);
  CHECK(p.find("D. Only text swap.\n") != std::string::npos);
  CHECK(p.find("E. Both face swap and text fabrication.\n") != std::string::npos);
  CHECK(p.find("F. Both face attribute and text fabrication.\n") != std::string::npos);
  CHECK(p.find("locate the one most likely manipulated face") != std::string::npos);
  CHECK(p.size() >= std::string("The answer is:").size());
  CHECK(p.substr(p.size() - 14) == "The answer is:");

  std::string no_ground = build_prompt_text("a man at a rally.", false);
  CHECK(no_ground.find("locate the one most likely") == std::string::npos);
  // Identical except for the grounding sentence.
  CHECK(no_ground.size() < p.size());

  CHECK_THROWS_AS(build_prompt_text("", true), ContractError);
}

TEST_CASE("prompt escapes an embedded substitution marker") {
  std::string p = build_prompt_text("evil <Text> injection", true);
  // The marker from the caption must not survive as a bare template slot.
  CHECK(p.find("\\<Text>") != std::string::npos);
  size_t first = p.find("evil \\<Text> injection");
  CHECK(first != std::string::npos);
}

TEST_CASE("prompt tokenization is deterministic") {
  std::vector<int> a = build_prompt("same caption", true);
  std::vector<int> b = build_prompt("same caption", true);
  CHECK(a == b);
}

TEST_CASE("quantization endpoints and rounding") {
  std::array<int, 4> q = quantize_bbox(BBox{0.0, 0.0, 1.0, 1.0});
  CHECK(q == std::array<int, 4>{0, 0, 999, 999});
  q = quantize_bbox(BBox{0.25, 0.25, 1.0, 1.0});
  CHECK(q[0] == 250);  // round(249.75)
  BBox d = dequantize_bbox({500, 0, 999, 999});
  CHECK(d.x1 == doctest::Approx(500.0 / 999).epsilon(1e-12));
  CHECK(std::abs(d.x1 - 0.5) <= 1.0 / 1998 + 1e-15);
  CHECK_THROWS_AS(dequantize_bbox({-1, 0, 0, 0}), ContractError);
  CHECK_THROWS_AS(dequantize_bbox({0, 0, 1000, 0}), ContractError);
}

TEST_CASE("target sequences follow the answer format") {
  std::vector<int> real = build_target(ManipClass::REAL, std::nullopt);
  CHECK(vocab::decode_tokens(real) == "A. No.<eos>");

  std::vector<int> e =
      build_target(ManipClass::FS_TF, BBox{0.0, 0.0, 1.0, 1.0});
  std::string text = vocab::decode_tokens(e);
  CHECK(text.find("E. Both face swap and text fabrication.") == 0);
  CHECK(text.find("[Manipulated face: <loc_0><loc_0><loc_999><loc_999>]") !=
        std::string::npos);
  CHECK(e.back() == vocab::kEos);

  CHECK_THROWS_AS(build_target(ManipClass::FS_TF, std::nullopt), ContractError);
  CHECK_THROWS_AS(build_target(ManipClass::REAL, BBox{0, 0, 1, 1}), ContractError);
  CHECK_THROWS_AS(build_target(ManipClass::TF, BBox{0, 0, 1, 1}), ContractError);
}

TEST_CASE("answers parse back to structured predictions") {
  Prediction p = parse_answer("A. No.");
  CHECK(p.option == 'A');
  CHECK_FALSE(p.y_bin_pred);
  CHECK_FALSE(p.bbox_pred.has_value());

  p = parse_answer(
      "E. Both face swap and text fabrication."
      "[Manipulated face: <loc_100><loc_200><loc_300><loc_400>]");
  CHECK(p.option == 'E');
  CHECK(p.y_bin_pred);
  CHECK(p.y_mul_pred[kFS]);
  CHECK_FALSE(p.y_mul_pred[kFA]);
  CHECK(p.y_mul_pred[kTF]);
  REQUIRE(p.bbox_pred.has_value());
  CHECK(p.bbox_pred->x1 == doctest::Approx(100.0 / 999));
  CHECK(p.bbox_pred->y2 == doctest::Approx(400.0 / 999));

  p = parse_answer("gibberish with no option");
  CHECK(p.option == '?');
  CHECK_FALSE(p.has_option());
  CHECK_FALSE(p.y_bin_pred);
  CHECK_FALSE(p.bbox_pred.has_value());
}

TEST_CASE("malformed boxes degrade to no box") {
  // Too few location tokens.
  Prediction p = parse_answer("B. Only face swap.[Manipulated face: <loc_1><loc_2>]");
  CHECK(p.option == 'B');
  CHECK_FALSE(p.bbox_pred.has_value());
  // Too many.
  p = parse_answer(
      "B. Only face swap.[Manipulated face: "
      "<loc_1><loc_2><loc_3><loc_4><loc_5>]");
  CHECK_FALSE(p.bbox_pred.has_value());
  // Out-of-range bin.
  p = parse_answer("B. Only face swap.[Manipulated face: <loc_1><loc_2><loc_3><loc_1400>]");
  CHECK_FALSE(p.bbox_pred.has_value());
  // Reversed corners.
  p = parse_answer(
      "B. Only face swap.[Manipulated face: <loc_500><loc_2><loc_3><loc_4>]");
  CHECK_FALSE(p.bbox_pred.has_value());
  // A box on a class that takes none is ignored.
  p = parse_answer("A. No.[Manipulated face: <loc_1><loc_2><loc_3><loc_4>]");
  CHECK(p.option == 'A');
  CHECK_FALSE(p.bbox_pred.has_value());
}

TEST_CASE("round-trip recovers class and box for every class") {
  Rng rng(42);
  for (int c = 0; c < kNumClasses; ++c) {
    ManipClass cls = static_cast<ManipClass>(c);
    bool needs_box = class_to_labels(cls).needs_box;
    for (int trial = 0; trial < 100; ++trial) {
      std::optional<BBox> box;
      if (needs_box) {
        double x1 = rng.uniform(0, 0.9), y1 = rng.uniform(0, 0.9);
        box = BBox{x1, y1, rng.uniform(x1, 1.0), rng.uniform(y1, 1.0)};
      }
      Prediction p = parse_answer(vocab::decode_tokens(build_target(cls, box)));
      REQUIRE(p.has_option());
      CHECK(class_from_letter(p.option) == cls);
      if (needs_box) {
        REQUIRE(p.bbox_pred.has_value());
        CHECK(std::abs(p.bbox_pred->x1 - box->x1) <= 1.0 / 1998 + 1e-12);
        CHECK(std::abs(p.bbox_pred->y1 - box->y1) <= 1.0 / 1998 + 1e-12);
        CHECK(std::abs(p.bbox_pred->x2 - box->x2) <= 1.0 / 1998 + 1e-12);
        CHECK(std::abs(p.bbox_pred->y2 - box->y2) <= 1.0 / 1998 + 1e-12);
      } else {
        CHECK_FALSE(p.bbox_pred.has_value());
      }
    }
  }
}

TEST_CASE("answer parsing survives byte fuzzing") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    int len = static_cast<int>(rng.uniform_int(0, 120));
    for (int k = 0; k < len; ++k)
      s.push_back(static_cast<char>(rng.uniform_int(0, 255)));
    CHECK_NOTHROW(parse_answer(s));
  }
  // Adversarial fragments around the box grammar.
  for (const char* s :
       {"E. [Manipulated face: <loc_", "B. x[Manipulated face: <loc_99999999999>]",
        "C. [Manipulated face: loc_1 <loc_>]", "F. [Manipulated face: <loc_1>",
        "<loc_5><loc_5><loc_5><loc_5>", "E. <loc_1><loc_2><loc_3><loc_4>"}) {
    CHECK_NOTHROW(parse_answer(s));
  }
}
