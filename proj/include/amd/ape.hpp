#pragma once

#include "amd/model.hpp"

namespace amd {

template <typename S>
struct PoolResult {
  ad::Var weights;  // 1 x n, sums to 1
  ad::Var pooled;   // 1 x d
};

// Token scores m'·ReLU(M·E' + b), b broadcast per column; softmax over tokens;
// pooled = weighted row sum.
template <typename S>
PoolResult<S> attention_pool(ad::Tape<S>& t, ad::Var E, ad::Var M, ad::Var m,
                             ad::Var b) {
  if (t.val(E).rows() < 1) throw ContractError("attention_pool: empty input");
  ad::Var pre = t.add_colvec(t.matmul(M, t.transpose(E)), t.transpose(b));
  ad::Var scores = t.matmul(m, t.relu(pre));  // 1 x n
  ad::Var weights = t.softmax_rows(scores);
  return {weights, t.matmul(weights, E)};
}

template <typename S>
PoolResult<S> attention_pool(ad::Tape<S>& t, Bound<S>& B, const std::string& name,
                             ad::Var E) {
  return attention_pool(t, E, B(name + "/M"), B(name + "/m"), B(name + "/b"));
}

// Mean softmax cross-entropy of logit rows against integer labels.
template <typename S>
ad::Var ce_rows(ad::Tape<S>& t, ad::Var logits, const std::vector<int>& labels) {
  int n = static_cast<int>(t.val(logits).rows());
  if (n == 0 || static_cast<int>(labels.size()) != n)
    throw ContractError("ce_rows: labels must match logit rows");
  std::vector<int> rows(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) rows[i] = static_cast<int>(i);
  ad::Var picked = t.pick(t.log_softmax_rows(logits), rows, labels);
  return t.scale(t.sum_all(picked), static_cast<S>(-1.0 / n));
}

template <typename S>
ad::Var ape_loss(ad::Tape<S>& t, ad::Var logits, const std::vector<int>& y_fd) {
  return ce_rows(t, logits, y_fd);
}

template <typename S>
struct ApeForward {
  ad::Var S_hat;    // frozen-encoder output over the full sequence
  ad::Var E_a_hat;  // its artifact segment
  ad::Var S_a;      // splice-back: original visual/text, encoded artifact rows
  ad::Var logits;   // 1 x 2 artifact-presence logits
  Segments seg;
};

// Pre-perception pass. The frozen encoder reads the visual and text rows as
// constants: the artifact loss must reach only the bank, the pooling
// parameters, and the classifier, never the vision projection or the token
// table.
template <typename S>
ApeForward<S> ape_forward(const Model<S>& model, ad::Tape<S>& t, Bound<S>& B,
                          ad::Var E_v, ad::Var E_a, ad::Var E_t) {
  ApeForward<S> out;
  ad::Var S_frozen_in =
      model.assemble(t, t.detach(E_v), E_a, t.detach(E_t), &out.seg);
  out.S_hat = model.encode(t, B, S_frozen_in, out.seg, "enc_p");
  out.E_a_hat = t.slice_rows(out.S_hat, out.seg.a_begin(), out.seg.n_a);

  PoolResult<S> pool = attention_pool(t, B, "ape_pool", out.E_a_hat);
  out.logits = t.add_rowvec(t.matmul(pool.pooled, B("ape_cls/W")), B("ape_cls/b"));

  Segments seg2;
  out.S_a = model.assemble(t, E_v, out.E_a_hat, E_t, &seg2);
  return out;
}

}  // namespace amd
