#include "amd/trainer.hpp"

#include "amd/ape.hpp"
#include "amd/mor.hpp"
#include "amd/trp.hpp"
#include "amd/vocab.hpp"

#include <json.hpp>

#include <cmath>
#include <ostream>

namespace amd {

namespace {

Image flip_horizontal(const Image& in) {
  Image out(in.c, in.h, in.w);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x) out.at(c, y, x) = in.at(c, y, in.w - 1 - x);
  return out;
}

TrainItem flip_item(const TrainItem& in) {
  TrainItem out;
  out.meta = in.meta;
  out.image = flip_horizontal(in.image);
  if (in.meta.y_box)
    out.meta.y_box = BBox{1.0 - in.meta.y_box->x2, in.meta.y_box->y1,
                          1.0 - in.meta.y_box->x1, in.meta.y_box->y2};
  return out;
}

// Decoder input for a target sequence: shift right behind BOS.
std::vector<int> decoder_input(const std::vector<int>& target) {
  std::vector<int> in;
  in.reserve(target.size());
  in.push_back(vocab::kBos);
  in.insert(in.end(), target.begin(), target.end() - 1);
  return in;
}

const char* nonfinite_term(const LossBundle& b) {
  if (!std::isfinite(b.ape)) return "ape";
  if (!std::isfinite(b.img)) return "img";
  if (!std::isfinite(b.dbm)) return "dbm";
  if (!std::isfinite(b.trp)) return "trp";
  if (!std::isfinite(b.lm)) return "lm";
  if (!std::isfinite(b.total)) return "total";
  return nullptr;
}

}  // namespace

std::vector<TrainItem> load_items(const Corpus& corpus) {
  std::vector<TrainItem> items;
  items.reserve(corpus.samples.size());
  for (const auto& s : corpus.samples)
    items.push_back({s, load_sample_image(corpus, s)});
  return items;
}

template <typename S>
LossBundle forward_all(const Model<S>& model, const std::vector<TrainItem>& batch,
                       GradMap<S>* grads) {
  if (batch.empty()) throw ContractError("forward_all: empty batch");
  const int B_n = static_cast<int>(batch.size());

  // Targets are padded to the batch max so padded positions exist but carry
  // no loss; the per-term weights below need the global token and box counts
  // before any per-sample backward pass runs.
  std::vector<std::vector<int>> targets(batch.size());
  size_t max_len = 0;
  int n_box = 0;
  long n_tok = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const MediaSample& m = batch[i].meta;
    targets[i] = build_target(labels_to_class(m.y_mul), m.y_box);
    max_len = std::max(max_len, targets[i].size());
    if (m.y_box) ++n_box;
  }
  for (auto& tgt : targets) {
    n_tok += static_cast<long>(tgt.size());
    tgt.resize(max_len, vocab::kPad);
  }

  const S w_batch = S(1) / static_cast<S>(B_n);
  const S w_box = n_box > 0 ? S(1) / static_cast<S>(n_box) : S(0);
  const S w_tok = S(1) / static_cast<S>(n_tok);

  auto accumulate = [&](ad::Tape<S>& t, Bound<S>& Bv) {
    if (!grads) return;
    for (const auto& [name, var] : Bv.used) {
      if (Model<S>::frozen_name(name)) continue;
      Mat<S> g = t.grad(var);
      auto it = grads->find(name);
      if (it == grads->end())
        grads->emplace(name, std::move(g));
      else
        it->second += g;
    }
  };

  LossBundle bundle;
  for (size_t i = 0; i < batch.size(); ++i) {
    const MediaSample& m = batch[i].meta;
    ad::Tape<S> t;
    Bound<S> Bv(t, model.params);

    std::vector<int> prompt = build_prompt(m.text, true);
    ad::Var E_t = model.embed_text(t, Bv, prompt);
    ad::Var E_v = model.encode_image(t, Bv, batch[i].image);
    ad::Var E_a = Bv("bank/E_a");

    ApeForward<S> af = ape_forward(model, t, Bv, E_v, E_a, E_t);
    std::vector<int> y_fd = {m.y_bin ? 1 : 0};
    ad::Var l_ape = ape_loss(t, af.logits, y_fd);

    ad::Var E_m = model.encode(t, Bv, af.S_a, af.seg, "enc");
    ad::Var E_v_m = t.slice_rows(E_m, 0, af.seg.n_v);
    ad::Var E_a_m = t.slice_rows(E_m, af.seg.a_begin(), af.seg.n_a);
    ad::Var E_t_m = t.slice_rows(E_m, af.seg.t_begin(), af.seg.n_t);

    DualBranch<S> db = dual_branch(model, t, Bv, E_v_m, E_a_m, E_t_m);
    ad::Var l_dbm = dbm_loss(t, Bv, db.u_v, db.u_t, y_fd);

    ad::Var logits = model.decode(t, Bv, E_m, decoder_input(targets[i]));
    LmLoss<S> lm = lm_loss_sum(t, logits, targets[i]);

    ad::Var weighted = t.add(t.scale(l_ape, w_batch), t.scale(l_dbm, w_batch));
    weighted = t.add(weighted, t.scale(lm.ce_sum, w_tok));

    if (m.y_box) {
      ad::Var u_agg = vaa_aggregate(model, t, Bv, E_a_m, E_v_m);
      ad::Var l_img = grounding_loss(t, predict_bbox(t, Bv, u_agg), m.y_box);
      bundle.img += static_cast<double>(t.val(l_img)(0, 0)) / n_box;
      weighted = t.add(weighted, t.scale(l_img, w_box));
    }

    bundle.ape += static_cast<double>(t.val(l_ape)(0, 0)) / B_n;
    bundle.dbm += static_cast<double>(t.val(l_dbm)(0, 0)) / B_n;
    bundle.lm += static_cast<double>(t.val(lm.ce_sum)(0, 0)) / n_tok;

    if (grads) t.backward(weighted);
    accumulate(t, Bv);
  }

  // The token regularizer sees only the bank, so it runs once per batch on
  // its own small tape.
  {
    ad::Tape<S> t;
    Bound<S> Bv(t, model.params);
    ad::Var l_trp = trp_loss(t, Bv("bank/E_a"));
    bundle.trp = static_cast<double>(t.val(l_trp)(0, 0));
    if (grads) t.backward(l_trp);
    accumulate(t, Bv);
  }

  bundle.total = bundle.ape + bundle.img + bundle.dbm + bundle.trp + bundle.lm;
  return bundle;
}

template <typename S>
LossBundle train_step(Model<S>& model, const std::vector<TrainItem>& batch,
                      AdamW<S>& opt, const TrainConfig& cfg, int step) {
  GradMap<S> grads;
  LossBundle bundle = forward_all(model, batch, &grads);
  if (const char* term = nonfinite_term(bundle))
    throw TrainError("train_step: non-finite " + std::string(term) + " loss at step " +
                     std::to_string(step));

  const S lr = static_cast<S>(lr_at(cfg, step));
  const S wd = static_cast<S>(cfg.weight_decay);
  const S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
  const S eps = static_cast<S>(cfg.adam_eps);
  opt.t += 1;
  const S c1 = S(1) - static_cast<S>(std::pow(static_cast<double>(b1), opt.t));
  const S c2 = S(1) - static_cast<S>(std::pow(static_cast<double>(b2), opt.t));

  for (auto& [name, g] : grads) {
    if (Model<S>::frozen_name(name))
      throw ContractError("train_step: gradient on frozen tensor " + name);
    Mat<S>& p = model.params.at(name);
    auto& slot = opt.slots[name];
    if (slot.m.size() == 0) {
      slot.m = Mat<S>::Zero(p.rows(), p.cols());
      slot.v = Mat<S>::Zero(p.rows(), p.cols());
    }
    slot.m = b1 * slot.m + (S(1) - b1) * g;
    slot.v = b2 * slot.v + (S(1) - b2) * g.cwiseProduct(g);
    Mat<S> m_hat = slot.m / c1;
    Mat<S> v_hat = slot.v / c2;
    p -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
    p -= (lr * wd) * p;
  }
  return bundle;
}

TrainResult train(Model<float>& model, const std::vector<TrainItem>& items,
                  const TrainConfig& cfg, std::ostream* metrics_log) {
  cfg.validate();
  if (items.empty()) throw ContractError("train: empty corpus");

  Rng order_rng(splitmix64(cfg.seed ^ 0x6f72646572696e67ull));
  Rng flip_rng(splitmix64(cfg.seed ^ 0x666c6970636f696eull));
  const bool flip = cfg.flip_augment && !cfg.deterministic;

  std::vector<int> perm(items.size());
  size_t cursor = perm.size();  // forces a shuffle on first use
  auto next_index = [&]() {
    if (cursor >= perm.size()) {
      for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
      for (size_t i = perm.size() - 1; i > 0; --i) {
        size_t j = static_cast<size_t>(order_rng.uniform_int(0, static_cast<int64_t>(i)));
        std::swap(perm[i], perm[j]);
      }
      cursor = 0;
    }
    return perm[cursor++];
  };

  AdamW<float> opt;
  TrainResult result;
  result.history.reserve(cfg.steps);
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<TrainItem> batch;
    batch.reserve(cfg.batch);
    for (int b = 0; b < cfg.batch; ++b) {
      const TrainItem& item = items[next_index()];
      if (flip && flip_rng.uniform() < 0.5)
        batch.push_back(flip_item(item));
      else
        batch.push_back(item);
    }
    LossBundle bundle = train_step(model, batch, opt, cfg, step);
    if (metrics_log) {
      nlohmann::ordered_json rec;
      rec["step"] = step;
      rec["ape"] = bundle.ape;
      rec["img"] = bundle.img;
      rec["dbm"] = bundle.dbm;
      rec["trp"] = bundle.trp;
      rec["lm"] = bundle.lm;
      rec["total"] = bundle.total;
      rec["lr"] = lr_at(cfg, step);
      (*metrics_log) << rec.dump() << "\n";
    }
    result.history.push_back(bundle);
  }
  return result;
}

template <typename S>
InferResult infer(const Model<S>& model, const Image& image, const std::string& text) {
  ad::Tape<S> t;
  Bound<S> Bv(t, model.params);

  std::vector<int> prompt = build_prompt(text, true);
  ad::Var E_t = model.embed_text(t, Bv, prompt);
  ad::Var E_v = model.encode_image(t, Bv, image);
  ad::Var E_a = Bv("bank/E_a");

  // Artifact refinement through the frozen encoder, then the splice; the
  // presence classifier and pooling that train this pathway are not built.
  Segments seg;
  ad::Var S_in = model.assemble(t, E_v, E_a, E_t, &seg);
  ad::Var S_hat = model.encode(t, Bv, S_in, seg, "enc_p");
  ad::Var E_a_hat = t.slice_rows(S_hat, seg.a_begin(), seg.n_a);

  Segments seg2;
  ad::Var S_a = model.assemble(t, E_v, E_a_hat, E_t, &seg2);
  ad::Var E_m = model.encode(t, Bv, S_a, seg2, "enc");
  Mat<S> memory = t.val(E_m);

  InferResult out;
  // First-position next-token distribution, for per-type ranking scores.
  {
    ad::Tape<S> td;
    Bound<S> Bd(td, model.params);
    ad::Var logits = model.decode(td, Bd, td.constant(memory), {vocab::kBos});
    const Mat<S>& L = td.val(logits);
    double mx = L.row(0).template cast<double>().maxCoeff();
    double z = 0;
    std::array<double, 6> p{};
    for (int v = 0; v < L.cols(); ++v) z += std::exp(static_cast<double>(L(0, v)) - mx);
    for (int o = 0; o < 6; ++o)
      p[o] = std::exp(static_cast<double>(L(0, 'A' + o)) - mx) / z;
    out.type_scores[kFS] = p[1] + p[4];         // B, E
    out.type_scores[kFA] = p[2] + p[5];         // C, F
    out.type_scores[kTF] = p[3] + p[4] + p[5];  // D, E, F
    out.has_scores = true;
  }

  std::vector<int> tokens = model.greedy_decode(memory);
  out.pred = parse_answer(vocab::decode_tokens(tokens));
  return out;
}

template <typename S>
std::vector<SampleEval> evaluate(const Model<S>& model,
                                 const std::vector<TrainItem>& items) {
  std::vector<SampleEval> evals;
  evals.reserve(items.size());
  for (const auto& item : items) {
    InferResult r = infer(model, item.image, item.meta.text);
    SampleEval e;
    e.y_bin_gt = item.meta.y_bin;
    e.y_bin_pred = r.pred.y_bin_pred;
    e.y_mul_gt = item.meta.y_mul;
    e.y_mul_pred = r.pred.y_mul_pred;
    e.box_gt = item.meta.y_box;
    e.box_pred = r.pred.bbox_pred;
    e.type_scores = r.type_scores;
    e.has_scores = r.has_scores;
    evals.push_back(e);
  }
  return evals;
}

template LossBundle forward_all<float>(const Model<float>&,
                                       const std::vector<TrainItem>&, GradMap<float>*);
template LossBundle forward_all<double>(const Model<double>&,
                                        const std::vector<TrainItem>&,
                                        GradMap<double>*);
template LossBundle train_step<float>(Model<float>&, const std::vector<TrainItem>&,
                                      AdamW<float>&, const TrainConfig&, int);
template LossBundle train_step<double>(Model<double>&, const std::vector<TrainItem>&,
                                       AdamW<double>&, const TrainConfig&, int);
template InferResult infer<float>(const Model<float>&, const Image&,
                                  const std::string&);
template InferResult infer<double>(const Model<double>&, const Image&,
                                   const std::string&);
template std::vector<SampleEval> evaluate<float>(const Model<float>&,
                                                 const std::vector<TrainItem>&);
template std::vector<SampleEval> evaluate<double>(const Model<double>&,
                                                  const std::vector<TrainItem>&);

}  // namespace amd
