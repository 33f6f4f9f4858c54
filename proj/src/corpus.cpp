#include "amd/corpus.hpp"

#include "amd/image_io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace amd {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

const char* kKeys[] = {"id", "image", "text", "y_bin", "y_mul", "y_box", "domain"};

}  // namespace

std::string sample_to_jsonl(const MediaSample& s) {
  ordered_json j;
  j["id"] = s.id;
  j["image"] = s.image;
  j["text"] = s.text;
  j["y_bin"] = s.y_bin;
  j["y_mul"] = {s.y_mul[0] ? 1 : 0, s.y_mul[1] ? 1 : 0, s.y_mul[2] ? 1 : 0};
  if (s.y_box) {
    j["y_box"] = {s.y_box->x1, s.y_box->y1, s.y_box->x2, s.y_box->y2};
  } else {
    j["y_box"] = nullptr;
  }
  j["domain"] = s.domain;
  return j.dump();
}

MediaSample sample_from_jsonl(const std::string& line, int line_number) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("annotations line " + std::to_string(line_number) + ": " +
                     e.what());
  }
  if (!j.is_object())
    throw ParseError("annotations line " + std::to_string(line_number) +
                     ": record is not an object");

  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : kKeys) known |= (it.key() == k);
    if (!known)
      throw ValidationError("line " + std::to_string(line_number) + ": unknown key '" +
                            it.key() + "'");
  }
  for (const char* k : kKeys)
    if (!j.contains(k))
      throw ValidationError("line " + std::to_string(line_number) + ": missing key '" +
                            std::string(k) + "'");

  MediaSample s;
  try {
    s.id = j["id"].get<std::string>();
    s.image = j["image"].get<std::string>();
    s.text = j["text"].get<std::string>();
    s.y_bin = j["y_bin"].get<bool>();
    auto mul = j["y_mul"];
    if (!mul.is_array() || mul.size() != 3)
      throw ValidationError("y_mul: expected 3-element array");
    for (int i = 0; i < 3; ++i) {
      int v = mul[i].get<int>();
      if (v != 0 && v != 1) throw ValidationError("y_mul: entries must be 0 or 1");
      s.y_mul[i] = (v == 1);
    }
    auto box = j["y_box"];
    if (box.is_null()) {
      s.y_box.reset();
    } else if (box.is_array() && box.size() == 4) {
      s.y_box = BBox{box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
                     box[3].get<double>()};
    } else {
      throw ValidationError("y_box: expected null or 4-element array");
    }
    s.domain = j["domain"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("line " + std::to_string(line_number) + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line_number) + ": " + e.what());
  }

  try {
    validate_sample(s);
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line_number) + ": " + e.what());
  }
  return s;
}

Corpus load_corpus(const std::string& root) {
  fs::path ann = fs::path(root) / "annotations.jsonl";
  std::ifstream f(ann);
  if (!f) throw LoadError("load_corpus: cannot open '" + ann.string() + "'");

  Corpus corpus;
  corpus.root = root;
  std::string line;
  int line_number = 0;
  while (std::getline(f, line)) {
    ++line_number;
    if (line.empty()) continue;
    MediaSample s = sample_from_jsonl(line, line_number);
    fs::path img = fs::path(root) / s.image;
    if (!fs::exists(img))
      throw LoadError("load_corpus: missing image file for id '" + s.id + "' (" +
                      img.string() + ")");
    corpus.samples.push_back(std::move(s));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& root) {
  fs::create_directories(root);
  fs::path ann = fs::path(root) / "annotations.jsonl";
  std::ofstream f(ann, std::ios::binary);
  if (!f) throw LoadError("save_corpus: cannot open '" + ann.string() + "'");
  for (const auto& s : corpus.samples) f << sample_to_jsonl(s) << "\n";
  if (!f) throw LoadError("save_corpus: short write to '" + ann.string() + "'");
}

Image load_sample_image(const Corpus& corpus, const MediaSample& s) {
  fs::path img = fs::path(corpus.root) / s.image;
  try {
    return load_image_file(img.string());
  } catch (const LoadError&) {
    throw LoadError("load_sample_image: cannot load image for id '" + s.id + "' (" +
                    img.string() + ")");
  }
}

}  // namespace amd
