#pragma once

#include "amd/types.hpp"

#include <string>
#include <vector>

namespace amd {

struct Corpus {
  std::string root;  // directory holding annotations.jsonl and image files
  std::vector<MediaSample> samples;
};

// Reads root/annotations.jsonl, validates every record, and checks that each
// referenced image file exists. Order preserved.
Corpus load_corpus(const std::string& root);

// Writes root/annotations.jsonl in the canonical field order. Image files are
// written separately (datagen) and must already exist for a later load.
void save_corpus(const Corpus& corpus, const std::string& root);

// Canonical single-line serialization of one sample (no trailing newline).
std::string sample_to_jsonl(const MediaSample& s);
MediaSample sample_from_jsonl(const std::string& line, int line_number);

// root/relative image path → decoded pixels; LoadError names the sample id.
Image load_sample_image(const Corpus& corpus, const MediaSample& s);

}  // namespace amd
