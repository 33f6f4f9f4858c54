#pragma once

#include "amd/autodiff.hpp"
#include "amd/config.hpp"
#include "amd/types.hpp"
#include "amd/vocab.hpp"

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

namespace amd {

// Named parameter tensors in a stable registration order (checkpoint and
// optimizer-state order both follow it).
template <typename S>
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Mat<S>> tensors;
  std::unordered_map<std::string, int> index;

  Mat<S>& add(const std::string& name, int rows, int cols) {
    if (index.count(name)) throw ContractError("ParamStore: duplicate name " + name);
    index[name] = static_cast<int>(names.size());
    names.push_back(name);
    tensors.emplace_back(Mat<S>::Zero(rows, cols));
    return tensors.back();
  }

  bool has(const std::string& name) const { return index.count(name) > 0; }

  const Mat<S>& get(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw ContractError("ParamStore: unknown name " + name);
    return tensors[it->second];
  }

  Mat<S>& at(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw ContractError("ParamStore: unknown name " + name);
    return tensors[it->second];
  }
};

// Row ranges of one assembled [visual; artifact; text] sequence.
struct Segments {
  int n_v = 0, n_a = 0, n_t = 0;
  int total() const { return n_v + n_a + n_t; }
  int a_begin() const { return n_v; }
  int t_begin() const { return n_v + n_a; }
};

// Binds named parameters onto one tape, once each, so reuse of a tensor in
// several places accumulates into a single gradient. Tensors under the frozen
// encoder prefix bind as constants: they take part in the forward pass and
// gradients flow through them, but none are accumulated for them.
template <typename S>
struct Bound {
  ad::Tape<S>* tape;
  const ParamStore<S>* store;
  std::unordered_map<std::string, ad::Var> used;

  Bound(ad::Tape<S>& t, const ParamStore<S>& p) : tape(&t), store(&p) {}

  static bool frozen_name(const std::string& name) {
    return name.rfind("enc_p/", 0) == 0;
  }

  ad::Var operator()(const std::string& name) {
    auto it = used.find(name);
    if (it != used.end()) return it->second;
    const Mat<S>& m = store->get(name);
    ad::Var v = frozen_name(name) ? tape->constant(m) : tape->leaf(m);
    used.emplace(name, v);
    return v;
  }
};

template <typename S>
class Model {
 public:
  ModelConfig cfg;
  ParamStore<S> params;

  static bool aux_head_name(const std::string& name) {
    static const char* prefixes[] = {"ape_pool/", "ape_cls/", "vaa_pool/",
                                     "vaa/",      "vaa_box/", "dbm/",
                                     "dbm_cls/"};
    for (const char* p : prefixes)
      if (name.rfind(p, 0) == 0) return true;
    return false;
  }

  static bool frozen_name(const std::string& name) {
    return Bound<S>::frozen_name(name);
  }

  bool trainable_name(const std::string& name) const { return !frozen_name(name); }

  explicit Model(const ModelConfig& config) : cfg(config) {
    cfg.validate();
    register_params();
  }

  // Deterministic initialization; the frozen encoder is a copy of the main
  // encoder's initial tensors.
  void init(uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0x616d64696e69745full));
    for (size_t i = 0; i < params.names.size(); ++i) {
      const std::string& name = params.names[i];
      if (frozen_name(name)) continue;  // filled by the copy below
      Mat<S>& t = params.tensors[i];
      fill_tensor(name, t, rng);
    }
    for (size_t i = 0; i < params.names.size(); ++i) {
      const std::string& name = params.names[i];
      if (!frozen_name(name)) continue;
      std::string live = "enc/" + name.substr(6);
      params.tensors[i] = params.get(live);
    }
  }

  uint64_t frozen_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < params.names.size(); ++i) {
      if (!frozen_name(params.names[i])) continue;
      h = fnv1a64(params.names[i].data(), params.names[i].size(), h);
      h = hash_matrix(params.tensors[i], h);
    }
    return h;
  }

  uint64_t params_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < params.names.size(); ++i) {
      h = fnv1a64(params.names[i].data(), params.names[i].size(), h);
      h = hash_matrix(params.tensors[i], h);
    }
    return h;
  }

  // ----- graph builders -----

  // Token-id rows looked up in the shared embedding table. No positions here;
  // those belong to the encoder/decoder that consumes the sequence.
  ad::Var embed_text(ad::Tape<S>& t, Bound<S>& B, const std::vector<int>& ids) const {
    for (int id : ids)
      if (id < 0 || id >= vocab::kSize)
        throw ContractError("embed_text: token id outside vocabulary");
    if (static_cast<int>(ids.size()) > cfg.max_text)
      throw ContractError("embed_text: sequence longer than max_text");
    if (ids.empty()) return t.constant(Mat<S>::Zero(0, cfg.d));
    return t.gather_rows(B("embed/tok"), ids);
  }

  // Non-overlapping patches, flattened channel-major, projected to d and
  // layer-normalized per token.
  ad::Var encode_image(ad::Tape<S>& t, Bound<S>& B, const Image& img) const {
    if (img.c != cfg.image_c || img.h != cfg.image_h || img.w != cfg.image_w)
      throw ContractError("encode_image: image shape mismatch");
    int P = cfg.patch;
    int gy = img.h / P, gx = img.w / P;
    Mat<S> patches(gy * gx, img.c * P * P);
    for (int py = 0; py < gy; ++py)
      for (int px = 0; px < gx; ++px) {
        int row = py * gx + px;
        int col = 0;
        for (int ch = 0; ch < img.c; ++ch)
          for (int y = 0; y < P; ++y)
            for (int x = 0; x < P; ++x)
              patches(row, col++) = static_cast<S>(img.at(ch, py * P + y, px * P + x));
      }
    ad::Var flat = t.constant(std::move(patches));
    ad::Var proj = t.add_rowvec(t.matmul(flat, B("patch/W")), B("patch/b"));
    return t.layer_norm_rows(proj, static_cast<S>(cfg.ln_eps));
  }

  ad::Var artifact_bank(ad::Tape<S>& t, Bound<S>& B) const { return B("bank/E_a"); }

  // Stacks (visual, artifact, text) rows.
  ad::Var assemble(ad::Tape<S>& t, ad::Var E_v, ad::Var E_a, ad::Var E_t,
                   Segments* seg) const {
    if (t.val(E_v).cols() != cfg.d || t.val(E_a).cols() != cfg.d ||
        (t.val(E_t).rows() > 0 && t.val(E_t).cols() != cfg.d))
      throw ContractError("assemble: embedding width mismatch");
    seg->n_v = static_cast<int>(t.val(E_v).rows());
    seg->n_a = static_cast<int>(t.val(E_a).rows());
    seg->n_t = static_cast<int>(t.val(E_t).rows());
    if (seg->n_t == 0) return t.concat_rows({E_v, E_a});
    return t.concat_rows({E_v, E_a, E_t});
  }

  // Pre-norm transformer encoder with learned per-segment positions and a
  // final layer norm. `which` is "enc" (main) or "enc_p" (frozen copy).
  ad::Var encode(ad::Tape<S>& t, Bound<S>& B, ad::Var seq, const Segments& seg,
                 const std::string& which) const {
    if (t.val(seq).rows() != seg.total())
      throw ContractError("encode: segment ranges do not cover the sequence");
    if (seg.n_t > cfg.max_text)
      throw ContractError("encode: text segment longer than max_text");

    std::vector<ad::Var> pos_parts;
    if (seg.n_v > 0) pos_parts.push_back(t.slice_rows(B(which + "/pos_v"), 0, seg.n_v));
    if (seg.n_a > 0) pos_parts.push_back(t.slice_rows(B(which + "/pos_a"), 0, seg.n_a));
    if (seg.n_t > 0) pos_parts.push_back(t.slice_rows(B(which + "/pos_t"), 0, seg.n_t));
    ad::Var x = t.add(seq, t.concat_rows(pos_parts));

    for (int l = 0; l < cfg.enc_layers; ++l) {
      std::string p = which + "/L" + std::to_string(l);
      ad::Var h = t.layer_norm_rows(x, static_cast<S>(cfg.ln_eps));
      x = t.add(x, attention(t, B, p + "/attn", h, h, nullptr));
      ad::Var f = t.layer_norm_rows(x, static_cast<S>(cfg.ln_eps));
      x = t.add(x, ffn(t, B, p + "/ffn", f));
    }
    return t.layer_norm_rows(x, static_cast<S>(cfg.ln_eps));
  }

  // Causal decoder over the target prefix with cross-attention into memory;
  // returns next-token logits for every prefix position.
  ad::Var decode(ad::Tape<S>& t, Bound<S>& B, ad::Var memory,
                 const std::vector<int>& prefix) const {
    if (prefix.empty()) throw ContractError("decode: empty prefix");
    if (static_cast<int>(prefix.size()) > cfg.max_target + 1)
      throw ContractError("decode: prefix longer than max_target");
    for (int id : prefix)
      if (id < 0 || id >= vocab::kSize)
        throw ContractError("decode: token id outside vocabulary");

    int n = static_cast<int>(prefix.size());
    ad::Var x = t.gather_rows(B("embed/tok"), prefix);
    x = t.add(x, t.slice_rows(B("dec/pos"), 0, n));

    Mat<S> mask = Mat<S>::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) mask(i, j) = static_cast<S>(-1e9);

    for (int l = 0; l < cfg.dec_layers; ++l) {
      std::string p = "dec/L" + std::to_string(l);
      ad::Var h = t.layer_norm_rows(x, static_cast<S>(cfg.ln_eps));
      x = t.add(x, attention(t, B, p + "/self", h, h, &mask));
      ad::Var q = t.layer_norm_rows(x, static_cast<S>(cfg.ln_eps));
      x = t.add(x, attention(t, B, p + "/cross", q, memory, nullptr));
      ad::Var f = t.layer_norm_rows(x, static_cast<S>(cfg.ln_eps));
      x = t.add(x, ffn(t, B, p + "/ffn", f));
    }
    x = t.layer_norm_rows(x, static_cast<S>(cfg.ln_eps));
    return t.add_rowvec(t.matmul(x, B("dec/out_W")), B("dec/out_b"));
  }

  // Greedy decoding against a fixed memory matrix; stops at EOS or max_target.
  std::vector<int> greedy_decode(const Mat<S>& memory) const {
    std::vector<int> prefix = {vocab::kBos};
    std::vector<int> out;
    for (int step = 0; step < cfg.max_target; ++step) {
      ad::Tape<S> t;
      Bound<S> B(t, params);
      ad::Var mem = t.constant(memory);
      ad::Var logits = decode(t, B, mem, prefix);
      const Mat<S>& L = t.val(logits);
      int best = 0;
      S best_v = L(L.rows() - 1, 0);
      for (int v = 1; v < L.cols(); ++v)
        if (L(L.rows() - 1, v) > best_v) {
          best_v = L(L.rows() - 1, v);
          best = v;
        }
      if (best == vocab::kEos) break;
      out.push_back(best);
      prefix.push_back(best);
    }
    return out;
  }

  // Multi-head scaled dot-product attention block with input projections and
  // an output projection. kv_in supplies keys and values (self-attention
  // passes q_in).
  ad::Var attention(ad::Tape<S>& t, Bound<S>& B, const std::string& p, ad::Var q_in,
                    ad::Var kv_in, const Mat<S>* causal_mask) const {
    int H = cfg.heads, dh = cfg.d / H;
    ad::Var Q = t.add_rowvec(t.matmul(q_in, B(p + "/Wq")), B(p + "/bq"));
    ad::Var K = t.add_rowvec(t.matmul(kv_in, B(p + "/Wk")), B(p + "/bk"));
    ad::Var V = t.add_rowvec(t.matmul(kv_in, B(p + "/Wv")), B(p + "/bv"));
    S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

    ad::Var mask_var;
    if (causal_mask) mask_var = t.constant(*causal_mask);

    std::vector<ad::Var> heads;
    heads.reserve(H);
    for (int h = 0; h < H; ++h) {
      ad::Var Qh = t.slice_cols(Q, h * dh, dh);
      ad::Var Kh = t.slice_cols(K, h * dh, dh);
      ad::Var Vh = t.slice_cols(V, h * dh, dh);
      ad::Var scores = t.scale(t.matmul(Qh, t.transpose(Kh)), scale);
      if (causal_mask) scores = t.add(scores, mask_var);
      heads.push_back(t.matmul(t.softmax_rows(scores), Vh));
    }
    ad::Var O = H == 1 ? heads[0] : t.concat_cols(heads);
    return t.add_rowvec(t.matmul(O, B(p + "/Wo")), B(p + "/bo"));
  }

  ad::Var ffn(ad::Tape<S>& t, Bound<S>& B, const std::string& p, ad::Var x) const {
    ad::Var h = t.relu(t.add_rowvec(t.matmul(x, B(p + "/W1")), B(p + "/b1")));
    return t.add_rowvec(t.matmul(h, B(p + "/W2")), B(p + "/b2"));
  }

 private:
  void register_attention(const std::string& p) {
    params.add(p + "/Wq", cfg.d, cfg.d);
    params.add(p + "/bq", 1, cfg.d);
    params.add(p + "/Wk", cfg.d, cfg.d);
    params.add(p + "/bk", 1, cfg.d);
    params.add(p + "/Wv", cfg.d, cfg.d);
    params.add(p + "/bv", 1, cfg.d);
    params.add(p + "/Wo", cfg.d, cfg.d);
    params.add(p + "/bo", 1, cfg.d);
  }

  void register_ffn(const std::string& p) {
    int f = cfg.d * cfg.ffn_mult;
    params.add(p + "/W1", cfg.d, f);
    params.add(p + "/b1", 1, f);
    params.add(p + "/W2", f, cfg.d);
    params.add(p + "/b2", 1, cfg.d);
  }

  void register_encoder(const std::string& e) {
    params.add(e + "/pos_v", cfg.n_v(), cfg.d);
    params.add(e + "/pos_a", cfg.n_a, cfg.d);
    params.add(e + "/pos_t", cfg.max_text, cfg.d);
    for (int l = 0; l < cfg.enc_layers; ++l) {
      std::string p = e + "/L" + std::to_string(l);
      register_attention(p + "/attn");
      register_ffn(p + "/ffn");
    }
  }

  void register_pool(const std::string& p) {
    params.add(p + "/M", cfg.pool_hidden, cfg.d);
    params.add(p + "/m", 1, cfg.pool_hidden);
    params.add(p + "/b", 1, cfg.pool_hidden);
  }

  void register_params() {
    params.add("embed/tok", vocab::kSize, cfg.d);
    params.add("patch/W", cfg.image_c * cfg.patch * cfg.patch, cfg.d);
    params.add("patch/b", 1, cfg.d);
    params.add("bank/E_a", cfg.n_a, cfg.d);

    register_encoder("enc");
    register_encoder("enc_p");

    params.add("dec/pos", cfg.max_target + 1, cfg.d);
    for (int l = 0; l < cfg.dec_layers; ++l) {
      std::string p = "dec/L" + std::to_string(l);
      register_attention(p + "/self");
      register_attention(p + "/cross");
      register_ffn(p + "/ffn");
    }
    params.add("dec/out_W", cfg.d, vocab::kSize);
    params.add("dec/out_b", 1, vocab::kSize);

    register_pool("ape_pool");
    params.add("ape_cls/W", cfg.d, 2);
    params.add("ape_cls/b", 1, 2);

    register_pool("vaa_pool");
    params.add("vaa/Wq", cfg.d, cfg.d);
    params.add("vaa/Wk", cfg.d, cfg.d);
    params.add("vaa/Wv", cfg.d, cfg.d);
    params.add("vaa_box/W1", cfg.d, cfg.d);
    params.add("vaa_box/b1", 1, cfg.d);
    params.add("vaa_box/W2", cfg.d, 4);
    params.add("vaa_box/b2", 1, 4);

    params.add("dbm/Wv_text", cfg.d, cfg.d);
    params.add("dbm/Wv_vis", cfg.d, cfg.d);
    params.add("dbm_cls/W", cfg.d, 2);
    params.add("dbm_cls/b", 1, 2);
  }

  void fill_tensor(const std::string& name, Mat<S>& t, Rng& rng) const {
    std::string last = name.substr(name.rfind('/') + 1);
    bool is_bias = t.rows() == 1 &&
                   (last == "b" || last == "bq" || last == "bk" || last == "bv" ||
                    last == "bo" || last == "b1" || last == "b2" || last == "out_b");
    if (is_bias) {
      t.setZero();
      return;
    }
    bool table = name == "embed/tok" || name.rfind("bank/", 0) == 0 ||
                 name.find("/pos") != std::string::npos;
    double sigma = table ? 0.02
                         : std::sqrt(2.0 / (static_cast<double>(t.rows()) + t.cols()));
    for (int r = 0; r < t.rows(); ++r)
      for (int c = 0; c < t.cols(); ++c)
        t(r, c) = static_cast<S>(rng.normal(0.0, sigma));
  }
};

}  // namespace amd
