#pragma once

#include "amd/config.hpp"
#include "amd/corpus.hpp"
#include "amd/types.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace amd {

// Everything needed to draw one scene deterministically. Manipulation fields
// describe the class-specific edits; a REAL counterpart renders from the same
// spec with manipulation switched off.
struct SceneSpec {
  int index = 0;
  ManipClass cls = ManipClass::REAL;
  std::string domain;
  int identity = 0;      // texture/name index of the pictured face
  int swap_identity = 0; // FS replacement identity
  int box_x = 0, box_y = 0, box_w = 0, box_h = 0;  // pixels
  uint64_t bg_seed = 0;  // pixel-noise key
  std::string real_caption;
  std::string caption;   // after any swap/fabrication edits
};

// Pure function of (cfg.seed, index).
SceneSpec scene_for(const GenConfig& cfg, int index);

// Draws the scene; with_manip=false gives the untouched REAL counterpart
// (same background, same blob position, original identity, no edits).
Image render_scene(const GenConfig& cfg, const SceneSpec& spec, bool with_manip);

// Annotation record for the scene: labels plus normalized bbox; the image
// path is img/<id>.png.
MediaSample sample_for(const GenConfig& cfg, const SceneSpec& spec);

// In-memory corpus (samples paired with pixels), for tests and small runs.
std::vector<std::pair<MediaSample, Image>> generate_corpus(const GenConfig& cfg);

// Streams PNGs plus annotations.jsonl into out_dir.
Corpus generate_corpus_to_dir(const GenConfig& cfg, const std::string& out_dir);

struct CorpusStats {
  std::map<std::string, int> per_class;
  std::map<std::string, int> per_domain;
  std::vector<int> area_hist;      // 10 bins over manipulated-area fraction (0,1]
  std::vector<double> area_fracs;  // one entry per boxed sample
};

CorpusStats corpus_stats(const std::vector<MediaSample>& samples);
std::string render_stats(const CorpusStats& stats);

}  // namespace amd
