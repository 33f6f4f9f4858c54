#pragma once

#include "amd/ape.hpp"
#include "amd/model.hpp"

#include <optional>

namespace amd {

// Plain generalized IoU on ordered boxes; the zero-area enclosing box is
// defined as 0.
double giou(const BBox& a, const BBox& b);

// Single-query cross-attention: pooled artifact query reads visual tokens.
template <typename S>
ad::Var vaa_aggregate(const Model<S>& model, ad::Tape<S>& t, Bound<S>& B,
                      ad::Var E_a_m, ad::Var E_v_m) {
  if (t.val(E_v_m).rows() < 1) throw ContractError("vaa_aggregate: empty visual segment");
  PoolResult<S> pool = attention_pool(t, B, "vaa_pool", E_a_m);
  ad::Var Q = t.matmul(pool.pooled, B("vaa/Wq"));
  ad::Var K = t.matmul(E_v_m, B("vaa/Wk"));
  ad::Var V = t.matmul(E_v_m, B("vaa/Wv"));
  S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(model.cfg.d)));
  ad::Var weights = t.softmax_rows(t.scale(t.matmul(Q, t.transpose(K)), scale));
  return t.matmul(weights, V);
}

// Two-layer perceptron with sigmoid outputs in (0,1)^4.
template <typename S>
ad::Var predict_bbox(ad::Tape<S>& t, Bound<S>& B, ad::Var u_agg) {
  ad::Var h = t.relu(t.add_rowvec(t.matmul(u_agg, B("vaa_box/W1")), B("vaa_box/b1")));
  return t.sigmoid(t.add_rowvec(t.matmul(h, B("vaa_box/W2")), B("vaa_box/b2")));
}

// GIoU of a raw predicted 4-vector against a fixed ground-truth box. The
// prediction's corners carry no ordering guarantee, so each axis is
// canonicalized with min/max before the area arithmetic; ground truth must be
// a valid box (positive area), which keeps the union strictly positive.
template <typename S>
ad::Var giou_pred(ad::Tape<S>& t, ad::Var pred, const BBox& gt) {
  if (t.val(pred).rows() != 1 || t.val(pred).cols() != 4)
    throw ContractError("giou_pred: pred must be 1x4");
  if (!bbox_valid(gt) || bbox_area(gt) <= 0)
    throw ContractError("giou_pred: ground truth must have positive area");

  ad::Var px1 = t.slice_cols(pred, 0, 1), py1 = t.slice_cols(pred, 1, 1);
  ad::Var px2 = t.slice_cols(pred, 2, 1), py2 = t.slice_cols(pred, 3, 1);
  ad::Var ax1 = t.min_el(px1, px2), ax2 = t.max_el(px1, px2);
  ad::Var ay1 = t.min_el(py1, py2), ay2 = t.max_el(py1, py2);

  ad::Var bx1 = t.scalar(static_cast<S>(gt.x1)), by1 = t.scalar(static_cast<S>(gt.y1));
  ad::Var bx2 = t.scalar(static_cast<S>(gt.x2)), by2 = t.scalar(static_cast<S>(gt.y2));

  ad::Var iw = t.relu(t.sub(t.min_el(ax2, bx2), t.max_el(ax1, bx1)));
  ad::Var ih = t.relu(t.sub(t.min_el(ay2, by2), t.max_el(ay1, by1)));
  ad::Var inter = t.mul(iw, ih);

  ad::Var area_a = t.mul(t.sub(ax2, ax1), t.sub(ay2, ay1));
  ad::Var area_b = t.scalar(static_cast<S>(bbox_area(gt)));
  ad::Var uni = t.sub(t.add(area_a, area_b), inter);

  ad::Var cw = t.sub(t.max_el(ax2, bx2), t.min_el(ax1, bx1));
  ad::Var ch = t.sub(t.max_el(ay2, by2), t.min_el(ay1, by1));
  ad::Var cover = t.mul(cw, ch);

  ad::Var iou = t.div(inter, uni);
  return t.sub(iou, t.div(t.sub(cover, uni), cover));
}

// Mean-per-coordinate L1 plus (1 - GIoU) when a box is owed; masked to 0
// otherwise (REAL/TF samples define no target box).
template <typename S>
ad::Var grounding_loss(ad::Tape<S>& t, ad::Var pred, const std::optional<BBox>& gt) {
  if (!gt) return t.scalar(S(0));
  Mat<S> g(1, 4);
  g << static_cast<S>(gt->x1), static_cast<S>(gt->y1), static_cast<S>(gt->x2),
      static_cast<S>(gt->y2);
  ad::Var l1 = t.mean_all(t.abs(t.sub(pred, t.constant(g))));
  ad::Var one = t.scalar(S(1));
  return t.add(l1, t.sub(one, giou_pred(t, pred, *gt)));
}

template <typename S>
struct DualBranch {
  ad::Var u_v;  // 1 x d, image(+artifact) side attending text
  ad::Var u_t;  // 1 x d, text side attending image(+artifact)
};

// Plain scaled dot-product attention with a value projection on each branch,
// mean-pooled to a single vector per side.
template <typename S>
DualBranch<S> dual_branch(const Model<S>& model, ad::Tape<S>& t, Bound<S>& B,
                          ad::Var E_v_m, ad::Var E_a_m, ad::Var E_t_m) {
  if (t.val(E_t_m).rows() < 1) throw ContractError("dual_branch: empty text segment");
  ad::Var E_va = t.concat_rows({E_v_m, E_a_m});
  S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(model.cfg.d)));

  auto mean_rows = [&](ad::Var x) {
    int n = static_cast<int>(t.val(x).rows());
    Mat<S> w = Mat<S>::Constant(1, n, S(1) / static_cast<S>(n));
    return t.matmul(t.constant(w), x);
  };

  ad::Var attn_v = t.softmax_rows(t.scale(t.matmul(E_va, t.transpose(E_t_m)), scale));
  ad::Var u_v = mean_rows(t.matmul(attn_v, t.matmul(E_t_m, B("dbm/Wv_text"))));

  ad::Var attn_t = t.softmax_rows(t.scale(t.matmul(E_t_m, t.transpose(E_va)), scale));
  ad::Var u_t = mean_rows(t.matmul(attn_t, t.matmul(E_va, B("dbm/Wv_vis"))));

  return {u_v, u_t};
}

// Shared-classifier guidance loss: both branch vectors go through the same
// C_m; the two cross-entropies are summed.
template <typename S>
ad::Var dbm_loss(ad::Tape<S>& t, Bound<S>& B, ad::Var u_v, ad::Var u_t,
                 const std::vector<int>& y_fd) {
  ad::Var lv = ce_rows(t, t.add_rowvec(t.matmul(u_v, B("dbm_cls/W")), B("dbm_cls/b")),
                       y_fd);
  ad::Var lt = ce_rows(t, t.add_rowvec(t.matmul(u_t, B("dbm_cls/W")), B("dbm_cls/b")),
                       y_fd);
  return t.add(lv, lt);
}

template <typename S>
struct LmLoss {
  ad::Var ce_sum;  // summed cross-entropy over scored positions
  int tokens = 0;  // number of non-PAD target positions
};

// Teacher-forced cross-entropy; PAD targets are excluded from both the sum
// and the count.
template <typename S>
LmLoss<S> lm_loss_sum(ad::Tape<S>& t, ad::Var logits, const std::vector<int>& target) {
  if (static_cast<int>(target.size()) != t.val(logits).rows())
    throw ContractError("lm_loss: target length must match logit rows");
  std::vector<int> rows, cols;
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i] == vocab::kPad) continue;
    if (target[i] < 0 || target[i] >= vocab::kSize)
      throw ContractError("lm_loss: target token outside vocabulary");
    rows.push_back(static_cast<int>(i));
    cols.push_back(target[i]);
  }
  LmLoss<S> out;
  out.tokens = static_cast<int>(rows.size());
  if (out.tokens == 0) {
    out.ce_sum = t.scalar(S(0));
    return out;
  }
  ad::Var picked = t.pick(t.log_softmax_rows(logits), rows, cols);
  out.ce_sum = t.scale(t.sum_all(picked), S(-1));
  return out;
}

template <typename S>
ad::Var lm_loss(ad::Tape<S>& t, ad::Var logits, const std::vector<int>& target) {
  LmLoss<S> s = lm_loss_sum(t, logits, target);
  if (s.tokens == 0) return s.ce_sum;
  return t.scale(s.ce_sum, S(1) / static_cast<S>(s.tokens));
}

}  // namespace amd
