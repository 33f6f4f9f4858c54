#pragma once

#include "amd/autodiff.hpp"

#include <cmath>

namespace amd {

// Squared Frobenius norm of the Gram matrix E_a·E_a' with its diagonal
// zeroed: sum over i≠j of squared row inner products.
template <typename S>
ad::Var orth_loss(ad::Tape<S>& t, ad::Var E_a) {
  int n = static_cast<int>(t.val(E_a).rows());
  if (n < 1) throw ContractError("orth_loss: empty bank");
  ad::Var G = t.matmul(E_a, t.transpose(E_a));
  Mat<S> hollow = Mat<S>::Ones(n, n);
  for (int i = 0; i < n; ++i) hollow(i, i) = S(0);
  ad::Var off = t.mul(G, t.constant(std::move(hollow)));
  return t.sum_all(t.mul(off, off));
}

// Mean KL divergence of each row's squared-component distribution from
// uniform: (1/n_a)·Σ_t (Σ_i p log p + log d) with p = squared entries
// normalized per row. Scale-invariant in E_a.
template <typename S>
ad::Var mod_loss(ad::Tape<S>& t, ad::Var E_a) {
  const Mat<S>& v = t.val(E_a);
  int n = static_cast<int>(v.rows());
  int d = static_cast<int>(v.cols());
  if (n < 1) throw ContractError("mod_loss: empty bank");
  for (int r = 0; r < n; ++r)
    if (v.row(r).squaredNorm() == S(0))
      throw ContractError("mod_loss: zero row, distribution undefined");

  ad::Var sq = t.mul(E_a, E_a);
  ad::Var row_sum = t.matmul(sq, t.constant(Mat<S>::Ones(d, 1)));
  ad::Var p = t.div_colvec(sq, row_sum);
  ad::Var plogp = t.mul(p, t.log_eps(p, static_cast<S>(1e-12)));
  ad::Var entropy_sum = t.sum_all(plogp);
  return t.add_scalar(t.scale(entropy_sum, S(1) / static_cast<S>(n)),
                      static_cast<S>(std::log(static_cast<double>(d))));
}

template <typename S>
ad::Var trp_loss(ad::Tape<S>& t, ad::Var E_a) {
  return t.add(orth_loss(t, E_a), mod_loss(t, E_a));
}

}  // namespace amd
