#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "amd/trp.hpp"

#include <cmath>
#include <vector>

using namespace amd;

namespace {

Mat<double> random_mat(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat<double> m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, scale);
  return m;
}

// Straight-line double-loop oracle: sum over i != j of squared row dots.
double orth_oracle(const Mat<double>& E) {
  double total = 0;
  for (int i = 0; i < E.rows(); ++i)
    for (int j = 0; j < E.rows(); ++j) {
      if (i == j) continue;
      double dot = E.row(i).dot(E.row(j));
      total += dot * dot;
    }
  return total;
}

// Mean over rows of (sum_i p log p + log d), 0·log 0 := 0.
double mod_oracle(const Mat<double>& E) {
  double total = 0;
  for (int r = 0; r < E.rows(); ++r) {
    double norm = E.row(r).squaredNorm();
    double ent = 0;
    for (int c = 0; c < E.cols(); ++c) {
      double p = E(r, c) * E(r, c) / norm;
      if (p > 0) ent += p * std::log(p);
    }
    total += ent + std::log(double(E.cols()));
  }
  return total / E.rows();
}

double eval_orth(const Mat<double>& E) {
  ad::Tape<double> t;
  return t.val(orth_loss(t, t.constant(E)))(0, 0);
}

double eval_mod(const Mat<double>& E) {
  ad::Tape<double> t;
  return t.val(mod_loss(t, t.constant(E)))(0, 0);
}

}  // namespace

TEST_CASE("orthogonality penalty closed forms") {
  Mat<double> eye = Mat<double>::Identity(2, 2);
  CHECK(eval_orth(eye) == 0.0);

  Mat<double> dup(2, 2);
  dup << 1, 0, 1, 0;
  CHECK(eval_orth(dup) == doctest::Approx(2.0).epsilon(1e-12));

  Mat<double> hadamard(2, 2);
  hadamard << 1, 1, 1, -1;
  CHECK(eval_orth(hadamard) == 0.0);

  Mat<double> empty(0, 3);
  ad::Tape<double> t;
  CHECK_THROWS_AS(orth_loss(t, t.constant(empty)), ContractError);
}

TEST_CASE("orthogonality penalty matches the double-loop oracle and permutation symmetry") {
  Rng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    Mat<double> E = random_mat(rng, 4, 6);
    double got = eval_orth(E);
    CHECK(got == doctest::Approx(orth_oracle(E)).epsilon(1e-10));
    CHECK(got >= 0.0);

    Mat<double> perm(4, 6);
    perm << E.row(2), E.row(0), E.row(3), E.row(1);
    CHECK(eval_orth(perm) == doctest::Approx(got).epsilon(1e-10));
  }

  // Scaling rows by lambda scales the penalty by lambda^4.
  Mat<double> E = random_mat(rng, 3, 5);
  double base = eval_orth(E);
  for (double lam : {0.1, 2.0, 10.0})
    CHECK(eval_orth(lam * E) ==
          doctest::Approx(lam * lam * lam * lam * base).epsilon(1e-9));
}

TEST_CASE("modulation penalty closed forms") {
  Mat<double> flat(1, 4);
  flat << 3, 3, 3, 3;
  CHECK(eval_mod(flat) == doctest::Approx(0.0).epsilon(1e-9));

  Mat<double> onehot(1, 2);
  onehot << 1, 0;
  CHECK(eval_mod(onehot) == doctest::Approx(std::log(2.0)).epsilon(1e-6));

  Mat<double> half(1, 4);
  half << 1, 1, 0, 0;
  CHECK(eval_mod(half) == doctest::Approx(std::log(2.0)).epsilon(1e-6));

  Mat<double> zero_row(2, 3);
  zero_row << 1, 2, 3, 0, 0, 0;
  ad::Tape<double> t;
  CHECK_THROWS_AS(mod_loss(t, t.constant(zero_row)), ContractError);
  CHECK_THROWS_AS(mod_loss(t, t.constant(Mat<double>(0, 3))), ContractError);
}

TEST_CASE("modulation penalty matches the oracle and is scale-invariant") {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    Mat<double> E = random_mat(rng, 4, 6);
    double got = eval_mod(E);
    CHECK(got == doctest::Approx(mod_oracle(E)).epsilon(1e-9));
    CHECK(got >= 0.0);
    for (double lam : {0.1, 10.0, -3.0})
      CHECK(eval_mod(lam * E) == doctest::Approx(got).epsilon(1e-9));
  }
}

TEST_CASE("combined penalty adds the two terms with unit weights") {
  Mat<double> eye = Mat<double>::Identity(2, 2);
  ad::Tape<double> t;
  CHECK(t.val(trp_loss(t, t.constant(eye)))(0, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-6));

  // Scaled Hadamard rows: orthogonal AND evenly loaded, the global minimum.
  Mat<double> best(2, 2);
  double r = 1.0 / std::sqrt(2.0);
  best << r, r, r, -r;
  CHECK(t.val(trp_loss(t, t.constant(best)))(0, 0) ==
        doctest::Approx(0.0).epsilon(1e-9));

  Rng rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    Mat<double> E = random_mat(rng, 3, 4);
    double combined = t.val(trp_loss(t, t.constant(E)))(0, 0);
    CHECK(combined == doctest::Approx(orth_oracle(E) + mod_oracle(E)).epsilon(1e-9));
  }
}

TEST_CASE("penalty gradients match finite differences at generic points") {
  Rng rng(54);
  Mat<double> E0 = random_mat(rng, 3, 5);
  // Keep entries away from zero so the squared-probability surface is smooth.
  for (int r = 0; r < E0.rows(); ++r)
    for (int c = 0; c < E0.cols(); ++c)
      if (std::abs(E0(r, c)) < 0.1) E0(r, c) = E0(r, c) < 0 ? -0.1 : 0.1;

  auto eval = [&](auto&& build, const Mat<double>& E, Mat<double>* grad_out) {
    ad::Tape<double> t;
    ad::Var x = t.leaf(E);
    ad::Var loss = build(t, x);
    double v = t.val(loss)(0, 0);
    if (grad_out) {
      t.backward(loss);
      *grad_out = t.grad(x);
    }
    return v;
  };

  auto check_fd = [&](auto&& build) {
    Mat<double> analytic;
    eval(build, E0, &analytic);
    double max_rel = 0;
    for (int r = 0; r < E0.rows(); ++r)
      for (int c = 0; c < E0.cols(); ++c) {
        double h = 1e-6 * std::max(1.0, std::abs(E0(r, c)));
        Mat<double> hi = E0, lo = E0;
        hi(r, c) += h;
        lo(r, c) -= h;
        double fd = (eval(build, hi, nullptr) - eval(build, lo, nullptr)) / (2 * h);
        double denom = std::max({std::abs(fd), std::abs(analytic(r, c)), 1e-8});
        max_rel = std::max(max_rel, std::abs(fd - analytic(r, c)) / denom);
      }
    CHECK(max_rel < 1e-5);
  };

  check_fd([](ad::Tape<double>& t, ad::Var x) { return orth_loss(t, x); });
  check_fd([](ad::Tape<double>& t, ad::Var x) { return mod_loss(t, x); });
  check_fd([](ad::Tape<double>& t, ad::Var x) { return trp_loss(t, x); });
}
