#include "amd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace amd {

namespace {

constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& f, uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u16(std::ofstream& f, uint16_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& f, const std::string& path) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw ParseError("checkpoint: truncated file '" + path + "'");
  return v;
}

uint16_t read_u16(std::ifstream& f, const std::string& path) {
  uint16_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw ParseError("checkpoint: truncated file '" + path + "'");
  return v;
}

void check_config_match(const ModelConfig& got, const ModelConfig& want) {
  auto fail = [](const char* field) {
    throw ValidationError(std::string("checkpoint config mismatch: ") + field);
  };
  if (got.d != want.d) fail("d");
  if (got.enc_layers != want.enc_layers) fail("enc_layers");
  if (got.dec_layers != want.dec_layers) fail("dec_layers");
  if (got.heads != want.heads) fail("heads");
  if (got.patch != want.patch) fail("patch");
  if (got.n_a != want.n_a) fail("n_a");
  if (got.pool_hidden != want.pool_hidden) fail("pool_hidden");
  if (got.ffn_mult != want.ffn_mult) fail("ffn_mult");
  if (got.image_c != want.image_c) fail("image_c");
  if (got.image_h != want.image_h) fail("image_h");
  if (got.image_w != want.image_w) fail("image_w");
  if (got.max_text != want.max_text) fail("max_text");
  if (got.max_target != want.max_target) fail("max_target");
  if (got.ln_eps != want.ln_eps) fail("ln_eps");
}

}  // namespace

void save_checkpoint(const Model<float>& model, const std::string& path,
                     bool include_aux) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw LoadError("checkpoint: cannot open '" + path + "' for writing");

  f.write("AMDC", 4);
  write_u32(f, kVersion);
  std::string header = model.cfg.to_json();
  write_u32(f, static_cast<uint32_t>(header.size()));
  f.write(header.data(), static_cast<std::streamsize>(header.size()));

  uint32_t count = 0;
  for (const auto& name : model.params.names)
    if (include_aux || !Model<float>::aux_head_name(name)) ++count;
  write_u32(f, count);

  for (size_t i = 0; i < model.params.names.size(); ++i) {
    const std::string& name = model.params.names[i];
    if (!include_aux && Model<float>::aux_head_name(name)) continue;
    const MatF& t = model.params.tensors[i];
    write_u16(f, static_cast<uint16_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(f, static_cast<uint32_t>(t.rows()));
    write_u32(f, static_cast<uint32_t>(t.cols()));
    char dtype = 0;  // float32
    f.write(&dtype, 1);
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(sizeof(float) * t.size()));
  }
  if (!f) throw LoadError("checkpoint: short write to '" + path + "'");
}

Model<float> load_checkpoint(const std::string& path, const ModelConfig* expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("checkpoint: cannot open '" + path + "'");

  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "AMDC", 4) != 0)
    throw ParseError("checkpoint: bad magic in '" + path + "'");
  uint32_t version = read_u32(f, path);
  if (version != kVersion)
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));

  uint32_t header_len = read_u32(f, path);
  std::string header(header_len, '\0');
  f.read(header.data(), header_len);
  if (!f) throw ParseError("checkpoint: truncated header in '" + path + "'");
  ModelConfig cfg = ModelConfig::from_json(header);
  if (expected) check_config_match(cfg, *expected);

  Model<float> model(cfg);
  model.init(cfg.seed);  // aux heads keep deterministic init if stripped

  std::set<std::string> seen;
  uint32_t count = read_u32(f, path);
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t name_len = read_u16(f, path);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    uint32_t rows = read_u32(f, path);
    uint32_t cols = read_u32(f, path);
    char dtype = 0;
    f.read(&dtype, 1);
    if (!f) throw ParseError("checkpoint: truncated tensor header in '" + path + "'");
    if (dtype != 0)
      throw ValidationError("checkpoint: unsupported dtype for tensor '" + name + "'");
    if (!model.params.has(name))
      throw ValidationError("checkpoint: unknown tensor '" + name + "'");
    MatF& t = model.params.at(name);
    if (t.rows() != static_cast<int>(rows) || t.cols() != static_cast<int>(cols))
      throw ValidationError("checkpoint: shape mismatch for tensor '" + name + "'");
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(sizeof(float) * t.size()));
    if (!f) throw ParseError("checkpoint: truncated tensor data in '" + path + "'");
    seen.insert(name);
  }

  for (const auto& name : model.params.names)
    if (!seen.count(name) && !Model<float>::aux_head_name(name))
      throw ValidationError("checkpoint: missing tensor '" + name + "'");
  return model;
}

}  // namespace amd
