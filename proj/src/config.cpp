#include "amd/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace amd {

using nlohmann::json;

void ModelConfig::validate(std::vector<std::string>* warnings) const {
  if (d <= 0) throw ValidationError("model.d: must be positive");
  if (enc_layers <= 0) throw ValidationError("model.enc_layers: must be positive");
  if (dec_layers <= 0) throw ValidationError("model.dec_layers: must be positive");
  if (heads <= 0 || d % heads != 0)
    throw ValidationError("model.heads: must be positive and divide d");
  if (patch <= 0 || image_h % patch != 0 || image_w % patch != 0)
    throw ValidationError("model.patch: must divide image height and width");
  if (n_a <= 0) throw ValidationError("model.n_a: must be positive");
  if (pool_hidden <= 0) throw ValidationError("model.pool_hidden: must be positive");
  if (ffn_mult <= 0) throw ValidationError("model.ffn_mult: must be positive");
  if (image_c != 1 && image_c != 3)
    throw ValidationError("model.image_c: must be 1 or 3");
  if (max_text <= 0) throw ValidationError("model.max_text: must be positive");
  if (max_target <= 0) throw ValidationError("model.max_target: must be positive");
  if (ln_eps <= 0) throw ValidationError("model.ln_eps: must be positive");
  if (n_a > d && warnings)
    warnings->push_back(
        "model.n_a exceeds d: pairwise row orthogonality is unattainable, the "
        "redundancy penalty cannot reach zero");
}

std::string ModelConfig::to_json() const {
  json j;
  j["version"] = 1;
  j["d"] = d;
  j["enc_layers"] = enc_layers;
  j["dec_layers"] = dec_layers;
  j["heads"] = heads;
  j["patch"] = patch;
  j["n_a"] = n_a;
  j["pool_hidden"] = pool_hidden;
  j["ffn_mult"] = ffn_mult;
  j["image_c"] = image_c;
  j["image_h"] = image_h;
  j["image_w"] = image_w;
  j["max_text"] = max_text;
  j["max_target"] = max_target;
  j["ln_eps"] = ln_eps;
  j["seed"] = seed;
  j["vocab"] = {{"bytes", 256}, {"bos", 256},  {"eos", 257},
                {"pad", 258},   {"sep", 259},  {"loc0", 260},
                {"num_loc", 1000}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  if (j.value("version", 0) != 1)
    throw ValidationError("model config: unsupported version");
  ModelConfig c;
  c.d = j.at("d").get<int>();
  c.enc_layers = j.at("enc_layers").get<int>();
  c.dec_layers = j.at("dec_layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.patch = j.at("patch").get<int>();
  c.n_a = j.at("n_a").get<int>();
  c.pool_hidden = j.at("pool_hidden").get<int>();
  c.ffn_mult = j.at("ffn_mult").get<int>();
  c.image_c = j.at("image_c").get<int>();
  c.image_h = j.at("image_h").get<int>();
  c.image_w = j.at("image_w").get<int>();
  c.max_text = j.at("max_text").get<int>();
  c.max_target = j.at("max_target").get<int>();
  c.ln_eps = j.at("ln_eps").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  if (batch <= 0) throw ValidationError("train.batch: must be positive");
  if (steps <= 0) throw ValidationError("train.steps: must be positive");
  if (warmup < 0) throw ValidationError("train.warmup: must be non-negative");
  if (warmup > steps) throw ValidationError("train.warmup: must not exceed steps");
  if (base_lr <= 0) throw ValidationError("train.base_lr: must be positive");
  if (peak_lr < base_lr)
    throw ValidationError("train.peak_lr: must be at least base_lr");
  if (weight_decay < 0) throw ValidationError("train.weight_decay: must be >= 0");
}

double lr_at(const TrainConfig& cfg, int step) {
  if (step <= 0) return cfg.base_lr;
  if (step < cfg.warmup)
    return cfg.base_lr +
           (cfg.peak_lr - cfg.base_lr) * (static_cast<double>(step) / cfg.warmup);
  if (step == cfg.warmup) return cfg.peak_lr;
  int tail = cfg.steps - cfg.warmup;
  if (step >= cfg.steps || tail <= 0) return cfg.base_lr;
  double t = static_cast<double>(step - cfg.warmup) / tail;
  return cfg.base_lr + 0.5 * (cfg.peak_lr - cfg.base_lr) * (1.0 + std::cos(M_PI * t));
}

int GenConfig::total_samples() const {
  if (!class_mix.empty()) {
    int total = 0;
    for (int n : class_mix) total += n;
    return total;
  }
  return per_class * 6;
}

void GenConfig::validate() const {
  if (per_class <= 0 && class_mix.empty())
    throw ValidationError("gen.per_class: must be positive");
  if (image_h <= 0 || image_w <= 0)
    throw ValidationError("gen.image_size: must be positive");
  if (blob_min <= 4) throw ValidationError("gen.blob_min: must exceed 4 pixels");
  if (blob_max < blob_min) throw ValidationError("gen.blob_max: must be >= blob_min");
  if (blob_max + 8 > image_h || blob_max + 8 > image_w)
    throw ValidationError("gen.blob_max: face patch must fit inside the image");
  if (domains.empty()) throw ValidationError("gen.domains: at least one required");
  if (!class_mix.empty() && class_mix.size() != 6)
    throw ValidationError("gen.class_mix: exactly 6 counts required");
  if (!class_mix.empty()) {
    bool any = false;
    for (int n : class_mix) {
      if (n < 0) throw ValidationError("gen.class_mix: counts must be >= 0");
      any |= n > 0;
    }
    if (!any) throw ValidationError("gen.class_mix: all counts are zero");
  }
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  auto s = sections.find(section);
  return s != sections.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
  auto s = sections.find(section);
  if (s == sections.end()) return fallback;
  auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int64_t to_int(const std::string& section, const std::string& key,
               const std::string& v) {
  try {
    size_t pos = 0;
    int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ValidationError(section + "." + key + ": not an integer ('" + v + "')");
  }
}

double to_double(const std::string& section, const std::string& key,
                 const std::string& v) {
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ValidationError(section + "." + key + ": not a number ('" + v + "')");
  }
}

bool to_bool(const std::string& section, const std::string& key,
             const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(section + "." + key + ": not a boolean ('" + v + "')");
}

std::vector<std::string> split_csv(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

}  // namespace

ConfigFile parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("config: cannot open '" + path + "'");
  ConfigFile out;
  std::string section = "";
  std::string line;
  int line_number = 0;
  while (std::getline(f, line)) {
    ++line_number;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ParseError("config line " + std::to_string(line_number) +
                         ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_number) +
                       ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ParseError("config line " + std::to_string(line_number) + ": empty key");
    out.sections[section][key] = value;
  }
  return out;
}

void apply_model_section(const ConfigFile& f, ModelConfig* cfg) {
  auto s = f.sections.find("model");
  if (s == f.sections.end()) return;
  for (const auto& [key, v] : s->second) {
    if (key == "d") cfg->d = static_cast<int>(to_int("model", key, v));
    else if (key == "enc_layers") cfg->enc_layers = static_cast<int>(to_int("model", key, v));
    else if (key == "dec_layers") cfg->dec_layers = static_cast<int>(to_int("model", key, v));
    else if (key == "heads") cfg->heads = static_cast<int>(to_int("model", key, v));
    else if (key == "patch") cfg->patch = static_cast<int>(to_int("model", key, v));
    else if (key == "n_a") cfg->n_a = static_cast<int>(to_int("model", key, v));
    else if (key == "pool_hidden") cfg->pool_hidden = static_cast<int>(to_int("model", key, v));
    else if (key == "ffn_mult") cfg->ffn_mult = static_cast<int>(to_int("model", key, v));
    else if (key == "image_c") cfg->image_c = static_cast<int>(to_int("model", key, v));
    else if (key == "image_h") cfg->image_h = static_cast<int>(to_int("model", key, v));
    else if (key == "image_w") cfg->image_w = static_cast<int>(to_int("model", key, v));
    else if (key == "max_text") cfg->max_text = static_cast<int>(to_int("model", key, v));
    else if (key == "max_target") cfg->max_target = static_cast<int>(to_int("model", key, v));
    else if (key == "ln_eps") cfg->ln_eps = to_double("model", key, v);
    else throw ValidationError("model." + key + ": unknown config key");
  }
}

void apply_train_section(const ConfigFile& f, TrainConfig* cfg) {
  auto s = f.sections.find("train");
  if (s == f.sections.end()) return;
  for (const auto& [key, v] : s->second) {
    if (key == "batch") cfg->batch = static_cast<int>(to_int("train", key, v));
    else if (key == "steps") cfg->steps = static_cast<int>(to_int("train", key, v));
    else if (key == "warmup") {
      cfg->warmup = static_cast<int>(to_int("train", key, v));
      cfg->warmup_explicit = true;
    } else if (key == "base_lr") cfg->base_lr = to_double("train", key, v);
    else if (key == "peak_lr") cfg->peak_lr = to_double("train", key, v);
    else if (key == "weight_decay") cfg->weight_decay = to_double("train", key, v);
    else if (key == "beta1") cfg->beta1 = to_double("train", key, v);
    else if (key == "beta2") cfg->beta2 = to_double("train", key, v);
    else if (key == "adam_eps") cfg->adam_eps = to_double("train", key, v);
    else if (key == "flip_augment") cfg->flip_augment = to_bool("train", key, v);
    else if (key == "deterministic") cfg->deterministic = to_bool("train", key, v);
    else if (key == "seed") {
      cfg->seed = static_cast<uint64_t>(to_int("train", key, v));
      cfg->model.seed = cfg->seed;
    } else throw ValidationError("train." + key + ": unknown config key");
  }
}

void apply_gen_section(const ConfigFile& f, GenConfig* cfg) {
  auto s = f.sections.find("gen");
  if (s == f.sections.end()) return;
  for (const auto& [key, v] : s->second) {
    if (key == "per_class") cfg->per_class = static_cast<int>(to_int("gen", key, v));
    else if (key == "image_h") cfg->image_h = static_cast<int>(to_int("gen", key, v));
    else if (key == "image_w") cfg->image_w = static_cast<int>(to_int("gen", key, v));
    else if (key == "blob_min") cfg->blob_min = static_cast<int>(to_int("gen", key, v));
    else if (key == "blob_max") cfg->blob_max = static_cast<int>(to_int("gen", key, v));
    else if (key == "seed") cfg->seed = static_cast<uint64_t>(to_int("gen", key, v));
    else if (key == "domains") cfg->domains = split_csv(v);
    else if (key == "class_mix") {
      cfg->class_mix.clear();
      for (const auto& part : split_csv(v))
        cfg->class_mix.push_back(static_cast<int>(to_int("gen", key, part)));
    } else throw ValidationError("gen." + key + ": unknown config key");
  }
}

}  // namespace amd
