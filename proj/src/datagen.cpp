#include "amd/datagen.hpp"

#include "amd/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace amd {

namespace fs = std::filesystem;

namespace {

struct Color {
  float r, g, b;
};

const char* kNames[] = {"arno", "bela", "cato", "dara", "eiko", "fynn", "gala", "hugo"};
constexpr int kNumIdentities = 8;

// Per-identity stripe textures: direction, period, two tones.
struct IdentityTexture {
  int ax, ay, period;
  Color tone_a, tone_b;
};

const IdentityTexture kTextures[kNumIdentities] = {
    {1, 0, 4, {0.85f, 0.62f, 0.48f}, {0.55f, 0.36f, 0.28f}},
    {0, 1, 4, {0.92f, 0.78f, 0.62f}, {0.45f, 0.30f, 0.22f}},
    {1, 1, 5, {0.74f, 0.56f, 0.42f}, {0.95f, 0.82f, 0.66f}},
    {1, -1, 5, {0.66f, 0.48f, 0.38f}, {0.88f, 0.70f, 0.55f}},
    {2, 1, 6, {0.80f, 0.66f, 0.52f}, {0.40f, 0.28f, 0.20f}},
    {1, 2, 6, {0.90f, 0.72f, 0.58f}, {0.60f, 0.44f, 0.34f}},
    {1, 0, 7, {0.70f, 0.52f, 0.40f}, {0.98f, 0.86f, 0.70f}},
    {0, 1, 7, {0.86f, 0.68f, 0.50f}, {0.50f, 0.34f, 0.24f}},
};

struct DomainStyle {
  Color base;
  Color accent;
  std::vector<const char*> events;
  std::vector<const char*> places;
};

const DomainStyle& domain_style(const std::string& name) {
  static const std::map<std::string, DomainStyle> kBuiltin = {
      {"D1",
       {{0.20f, 0.32f, 0.55f},
        {0.95f, 0.80f, 0.30f},
        {"summit", "rally", "debate"},
        {"geneva", "oslo", "vienna"}}},
      {"D2",
       {{0.16f, 0.45f, 0.28f},
        {0.85f, 0.35f, 0.30f},
        {"match", "regatta", "derby"},
        {"porto", "split", "bergen"}}},
      {"D3",
       {{0.55f, 0.42f, 0.20f},
        {0.30f, 0.70f, 0.85f},
        {"festival", "parade", "fair"},
        {"tunis", "adana", "rabat"}}},
      {"D4",
       {{0.40f, 0.24f, 0.48f},
        {0.40f, 0.90f, 0.55f},
        {"gala", "auction", "premiere"},
        {"lagos", "quito", "hanoi"}}},
      {"D5",
       {{0.30f, 0.30f, 0.34f},
        {0.95f, 0.55f, 0.75f},
        {"forum", "expo", "congress"},
        {"perth", "tartu", "osaka"}}},
  };
  auto it = kBuiltin.find(name);
  if (it != kBuiltin.end()) return it->second;
  // Unlisted domain names fall back to a hashed pick among the built-ins so
  // arbitrary labels still render.
  static std::vector<const DomainStyle*> order = [] {
    std::vector<const DomainStyle*> v;
    for (const auto& [k, s] : kBuiltin) v.push_back(&s);
    return v;
  }();
  uint64_t h = fnv1a64(name.data(), name.size());
  return *order[h % order.size()];
}

float hash_noise(uint64_t seed, int x, int y, int c) {
  uint64_t h = splitmix64(seed ^ (static_cast<uint64_t>(x) * 0x9e3779b97f4a7c15ull) ^
                          (static_cast<uint64_t>(y) * 0xbf58476d1ce4e5b9ull) ^
                          (static_cast<uint64_t>(c) * 0x94d049bb133111ebull));
  return static_cast<float>(h >> 40) * 0x1.0p-24f;  // [0,1)
}

void put(Image& img, int x, int y, const Color& c) {
  img.at(0, y, x) = c.r;
  img.at(1, y, x) = c.g;
  img.at(2, y, x) = c.b;
}

Color mix(const Color& a, const Color& b, float t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

std::string make_caption(const std::string& name, const std::string& event,
                         const std::string& place) {
  return name + " speaks at the " + event + " in " + place + ".";
}

std::string fabricate_caption(const std::string& name, const std::string& event,
                              const std::string& place) {
  return name + " exposed: the " + event + " in " + place + " is a hoax.";
}

std::vector<ManipClass> class_assignment(const GenConfig& cfg) {
  std::vector<ManipClass> out;
  if (cfg.class_mix.empty()) {
    for (int i = 0; i < cfg.per_class * 6; ++i)
      out.push_back(static_cast<ManipClass>(i % 6));
  } else {
    std::vector<int> left = cfg.class_mix;
    int remaining = 0;
    for (int n : left) remaining += n;
    int c = 0;
    while (remaining > 0) {
      if (left[c] > 0) {
        out.push_back(static_cast<ManipClass>(c));
        --left[c];
        --remaining;
      }
      c = (c + 1) % 6;
    }
  }
  return out;
}

}  // namespace

SceneSpec scene_for(const GenConfig& cfg, int index) {
  cfg.validate();
  std::vector<ManipClass> classes = class_assignment(cfg);
  if (index < 0 || index >= static_cast<int>(classes.size()))
    throw ContractError("scene_for: index outside corpus");

  SceneSpec s;
  s.index = index;
  s.cls = classes[index];
  s.domain = cfg.domains[(index / 6) % cfg.domains.size()];

  Rng rng(splitmix64(cfg.seed ^ splitmix64(0x5363656e65ull + index)));
  s.identity = static_cast<int>(rng.uniform_int(0, kNumIdentities - 1));
  s.swap_identity =
      (s.identity + 1 + static_cast<int>(rng.uniform_int(0, kNumIdentities - 2))) %
      kNumIdentities;
  s.box_w = static_cast<int>(rng.uniform_int(cfg.blob_min, cfg.blob_max));
  s.box_h = static_cast<int>(rng.uniform_int(cfg.blob_min, cfg.blob_max));
  s.box_x = static_cast<int>(rng.uniform_int(4, cfg.image_w - 4 - s.box_w));
  s.box_y = static_cast<int>(rng.uniform_int(4, cfg.image_h - 4 - s.box_h));
  s.bg_seed = rng.next_u64();

  const DomainStyle& style = domain_style(s.domain);
  const std::string event = style.events[rng.uniform_int(0, style.events.size() - 1)];
  const std::string place = style.places[rng.uniform_int(0, style.places.size() - 1)];

  s.real_caption = make_caption(kNames[s.identity], event, place);

  bool swapped = s.cls == ManipClass::FS || s.cls == ManipClass::FS_TF;
  bool fabricated = s.cls == ManipClass::TF || s.cls == ManipClass::FS_TF ||
                    s.cls == ManipClass::FA_TF;
  std::string name = kNames[swapped ? s.swap_identity : s.identity];
  s.caption = fabricated ? fabricate_caption(name, event, place)
                         : make_caption(name, event, place);
  return s;
}

Image render_scene(const GenConfig& cfg, const SceneSpec& spec, bool with_manip) {
  Image img(3, cfg.image_h, cfg.image_w);
  const DomainStyle& style = domain_style(spec.domain);

  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      float grad = 0.12f * static_cast<float>(y) / img.h;
      Color c;
      c.r = style.base.r + grad + 0.08f * (hash_noise(spec.bg_seed, x, y, 0) - 0.5f);
      c.g = style.base.g + grad + 0.08f * (hash_noise(spec.bg_seed, x, y, 1) - 0.5f);
      c.b = style.base.b + grad + 0.08f * (hash_noise(spec.bg_seed, x, y, 2) - 0.5f);
      put(img, x, y, c);
    }

  bool swapped =
      with_manip && (spec.cls == ManipClass::FS || spec.cls == ManipClass::FS_TF);
  bool perturbed =
      with_manip && (spec.cls == ManipClass::FA || spec.cls == ManipClass::FA_TF);
  const IdentityTexture& tex =
      kTextures[swapped ? spec.swap_identity : spec.identity];

  const double cx = spec.box_x + spec.box_w / 2.0;
  const double cy = spec.box_y + spec.box_h / 2.0;
  const double rx = spec.box_w / 2.0;
  const double ry = spec.box_h / 2.0;

  for (int y = spec.box_y; y < spec.box_y + spec.box_h; ++y)
    for (int x = spec.box_x; x < spec.box_x + spec.box_w; ++x) {
      double ex = (x + 0.5 - cx) / rx;
      double ey = (y + 0.5 - cy) / ry;
      double e = ex * ex + ey * ey;
      if (e > 1.0) continue;  // outside the face: background stays

      int px = x - spec.box_x, py = y - spec.box_y;
      int stripe = ((tex.ax * px + tex.ay * py) / tex.period) & 1;
      Color c = stripe ? tex.tone_a : tex.tone_b;

      // Eyes and mouth, placed relative to the box.
      double lex = (px + 0.5 - 0.34 * spec.box_w) / (0.09 * spec.box_w);
      double ley = (py + 0.5 - 0.38 * spec.box_h) / (0.09 * spec.box_h);
      double rex = (px + 0.5 - 0.66 * spec.box_w) / (0.09 * spec.box_w);
      if (lex * lex + ley * ley <= 1.0 || rex * rex + ley * ley <= 1.0)
        c = {0.08f, 0.08f, 0.10f};
      if (py >= static_cast<int>(0.70 * spec.box_h) &&
          py < static_cast<int>(0.78 * spec.box_h) &&
          px >= static_cast<int>(0.35 * spec.box_w) &&
          px < static_cast<int>(0.65 * spec.box_w))
        c = {0.30f, 0.12f, 0.12f};

      if (perturbed && (((px / 3) + (py / 3)) & 1))
        c = mix(c, style.accent, 0.55f);
      if (swapped && e >= 0.80)
        c = mix(c, {0.97f, 0.97f, 0.97f}, 0.65f);  // splice halo at the rim

      put(img, x, y, c);
    }
  return img;
}

MediaSample sample_for(const GenConfig& cfg, const SceneSpec& spec) {
  MediaSample s;
  std::ostringstream id;
  id << spec.domain << "-";
  id.width(6);
  id.fill('0');
  id << spec.index;
  s.id = id.str();
  s.image = "img/" + s.id + ".png";
  s.text = spec.caption;
  s.domain = spec.domain;

  ClassLabels labels = class_to_labels(spec.cls);
  s.y_bin = labels.y_bin;
  s.y_mul = labels.y_mul;
  if (labels.needs_box)
    s.y_box = BBox{static_cast<double>(spec.box_x) / cfg.image_w,
                   static_cast<double>(spec.box_y) / cfg.image_h,
                   static_cast<double>(spec.box_x + spec.box_w) / cfg.image_w,
                   static_cast<double>(spec.box_y + spec.box_h) / cfg.image_h};
  validate_sample(s);
  return s;
}

std::vector<std::pair<MediaSample, Image>> generate_corpus(const GenConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<MediaSample, Image>> out;
  int total = cfg.total_samples();
  out.reserve(total);
  for (int i = 0; i < total; ++i) {
    SceneSpec spec = scene_for(cfg, i);
    out.emplace_back(sample_for(cfg, spec), render_scene(cfg, spec, true));
  }
  return out;
}

Corpus generate_corpus_to_dir(const GenConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(fs::path(out_dir) / "img");
  Corpus corpus;
  corpus.root = out_dir;
  int total = cfg.total_samples();
  for (int i = 0; i < total; ++i) {
    SceneSpec spec = scene_for(cfg, i);
    MediaSample s = sample_for(cfg, spec);
    write_png((fs::path(out_dir) / s.image).string(), render_scene(cfg, spec, true));
    corpus.samples.push_back(std::move(s));
  }
  save_corpus(corpus, out_dir);
  return corpus;
}

CorpusStats corpus_stats(const std::vector<MediaSample>& samples) {
  if (samples.empty()) throw ContractError("corpus_stats: empty corpus");
  CorpusStats stats;
  stats.area_hist.assign(10, 0);
  for (const auto& s : samples) {
    stats.per_class[class_name(labels_to_class(s.y_mul))]++;
    stats.per_domain[s.domain]++;
    if (s.y_box) {
      double frac = bbox_area(*s.y_box);
      stats.area_fracs.push_back(frac);
      int bin = std::min(9, static_cast<int>(frac * 10.0));
      stats.area_hist[bin]++;
    }
  }
  return stats;
}

std::string render_stats(const CorpusStats& stats) {
  std::ostringstream out;
  out << "per-class counts:\n";
  for (const auto& [name, n] : stats.per_class) out << "  " << name << ": " << n << "\n";
  out << "per-domain counts:\n";
  for (const auto& [name, n] : stats.per_domain)
    out << "  " << name << ": " << n << "\n";
  out << "manipulated-area fraction histogram (10 bins over (0,1]):\n";
  for (size_t i = 0; i < stats.area_hist.size(); ++i) {
    out << "  [" << (i / 10.0) << "," << ((i + 1) / 10.0) << "): " << stats.area_hist[i]
        << "\n";
  }
  return out.str();
}

}  // namespace amd
