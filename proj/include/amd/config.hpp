#pragma once

#include "amd/common.hpp"

#include <map>
#include <string>
#include <vector>

namespace amd {

struct ModelConfig {
  int d = 64;
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 4;
  int patch = 32;
  int n_a = 4;
  int pool_hidden = 32;
  int ffn_mult = 4;
  int image_c = 3;
  int image_h = 96;
  int image_w = 96;
  int max_text = 1024;
  int max_target = 80;
  double ln_eps = 1e-5;
  uint64_t seed = 0;

  int n_v() const { return (image_h / patch) * (image_w / patch); }

  // Throws ValidationError naming the offending field; appends non-fatal
  // warnings (n_a > d) when a sink is given.
  void validate(std::vector<std::string>* warnings = nullptr) const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  int batch = 6;
  int steps = 2000;
  int warmup = 1000;
  bool warmup_explicit = false;  // set when warmup came from a file or flag
  double base_lr = 1e-7;
  double peak_lr = 1e-6;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  bool deterministic = false;
  bool flip_augment = true;
  ModelConfig model;

  void validate() const;
};

// Learning rate at a 0-based step: linear warmup base→peak over `warmup`
// steps, then cosine decay back to base over the remainder.
double lr_at(const TrainConfig& cfg, int step);

struct GenConfig {
  uint64_t seed = 0;
  int per_class = 16;
  int image_h = 96;
  int image_w = 96;
  int blob_min = 28;  // face-patch side range, pixels
  int blob_max = 52;
  std::vector<std::string> domains = {"D1", "D2", "D3"};
  std::vector<int> class_mix;  // absolute per-class counts; empty = balanced

  int total_samples() const;
  void validate() const;
};

// Flat key = value file with [section] headers; '#' comments. Used by the
// CLI; precedence there is flags > file > environment seed > defaults.
struct ConfigFile {
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback = "") const;
};

ConfigFile parse_config_file(const std::string& path);

void apply_model_section(const ConfigFile& f, ModelConfig* cfg);
void apply_train_section(const ConfigFile& f, TrainConfig* cfg);
void apply_gen_section(const ConfigFile& f, GenConfig* cfg);

}  // namespace amd
