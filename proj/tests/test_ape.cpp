#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "amd/ape.hpp"

#include <cmath>
#include <vector>

using namespace amd;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.d = 16;
  cfg.enc_layers = 2;
  cfg.dec_layers = 1;
  cfg.heads = 2;
  cfg.patch = 16;
  cfg.image_h = 32;
  cfg.image_w = 32;
  cfg.n_a = 2;
  cfg.pool_hidden = 8;
  cfg.ffn_mult = 2;
  cfg.max_text = 32;
  cfg.max_target = 8;
  return cfg;
}

Mat<double> random_mat(Rng& rng, int rows, int cols, double scale = 1.0) {
  Mat<double> m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, scale);
  return m;
}

// Straight-line reimplementation of the pooling pipeline on plain Eigen.
void pool_oracle(const Mat<double>& E, const Mat<double>& M, const Mat<double>& m,
                 const Mat<double>& b, Mat<double>* weights, Mat<double>* pooled) {
  int h = static_cast<int>(M.rows());
  int n = static_cast<int>(E.rows());
  Mat<double> pre = M * E.transpose();
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < n; ++j) pre(i, j) = std::max(0.0, pre(i, j) + b(0, i));
  Mat<double> scores = m * pre;  // 1 x n
  double mx = scores.maxCoeff();
  Mat<double> w(1, n);
  double sum = 0;
  for (int j = 0; j < n; ++j) {
    w(0, j) = std::exp(scores(0, j) - mx);
    sum += w(0, j);
  }
  w /= sum;
  *weights = w;
  *pooled = w * E;
}

}  // namespace

TEST_CASE("attention pooling matches a straight-line oracle") {
  Rng rng(31);
  Mat<double> E = random_mat(rng, 3, 4);
  Mat<double> M = random_mat(rng, 5, 4);
  Mat<double> m = random_mat(rng, 1, 5);
  Mat<double> b = random_mat(rng, 1, 5);

  ad::Tape<double> t;
  PoolResult<double> got = attention_pool(t, t.constant(E), t.constant(M),
                                          t.constant(m), t.constant(b));
  Mat<double> w_ref, p_ref;
  pool_oracle(E, M, m, b, &w_ref, &p_ref);

  CHECK((t.val(got.weights) - w_ref).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((t.val(got.pooled) - p_ref).cwiseAbs().maxCoeff() < 1e-12);

  // Weights form a probability simplex, so the pooled row is a convex
  // combination of the input rows.
  CHECK(t.val(got.weights).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.val(got.weights).minCoeff() > 0.0);
}

TEST_CASE("pooling a single row returns it with weight one") {
  Rng rng(32);
  Mat<double> E = random_mat(rng, 1, 6);
  ad::Tape<double> t;
  PoolResult<double> got =
      attention_pool(t, t.constant(E), t.constant(random_mat(rng, 4, 6)),
                     t.constant(random_mat(rng, 1, 4)),
                     t.constant(random_mat(rng, 1, 4)));
  CHECK(t.val(got.weights)(0, 0) == 1.0);
  CHECK(t.val(got.pooled) == E);
}

TEST_CASE("dead pre-activations give uniform weights and the row mean") {
  Rng rng(33);
  Mat<double> E = random_mat(rng, 5, 4);
  Mat<double> M = Mat<double>::Zero(3, 4);
  Mat<double> m = random_mat(rng, 1, 3);
  Mat<double> b = Mat<double>::Constant(1, 3, -1.0);  // every unit below zero

  ad::Tape<double> t;
  PoolResult<double> got = attention_pool(t, t.constant(E), t.constant(M),
                                          t.constant(m), t.constant(b));
  for (int j = 0; j < 5; ++j)
    CHECK(t.val(got.weights)(0, j) == doctest::Approx(0.2).epsilon(1e-12));
  Mat<double> mean = E.colwise().mean();
  CHECK((t.val(got.pooled) - mean).cwiseAbs().maxCoeff() < 1e-12);

  ad::Tape<double> t2;
  CHECK_THROWS_AS(attention_pool(t2, t2.constant(Mat<double>::Zero(0, 4)),
                                 t2.constant(M), t2.constant(m), t2.constant(b)),
                  ContractError);
}

TEST_CASE("artifact presence loss closed forms") {
  ad::Tape<double> t;

  Mat<double> zero = Mat<double>::Zero(1, 2);
  CHECK(t.val(ape_loss(t, t.constant(zero), {0}))(0, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(t.val(ape_loss(t, t.constant(zero), {1}))(0, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Mat<double> confident(1, 2);
  confident << 12.0, -12.0;
  CHECK(t.val(ape_loss(t, t.constant(confident), {0}))(0, 0) < 1e-9);
  CHECK(t.val(ape_loss(t, t.constant(confident), {0}))(0, 0) >= 0.0);

  // Two mirror-image mistakes average to the single-sample value.
  Mat<double> pair(2, 2);
  pair << 2.0, 0.0, 0.0, 2.0;
  double single = std::log(1.0 + std::exp(2.0));
  CHECK(t.val(ape_loss(t, t.constant(pair), {1, 0}))(0, 0) ==
        doctest::Approx(single).epsilon(1e-12));

  Rng rng(34);
  Mat<double> noisy = random_mat(rng, 6, 2, 3.0);
  std::vector<int> labels = {0, 1, 1, 0, 0, 1};
  CHECK(t.val(ape_loss(t, t.constant(noisy), labels))(0, 0) >= 0.0);

  CHECK_THROWS_AS(ape_loss(t, t.constant(pair), {1}), ContractError);
}

TEST_CASE("pre-perception splice keeps original visual and text rows") {
  Model<double> model(tiny_config());
  model.init(7);
  int d = model.cfg.d;

  Rng rng(35);
  Mat<double> ev = random_mat(rng, 4, d, 0.5);

  ad::Tape<double> t;
  Bound<double> B(t, model.params);
  ad::Var E_v = t.constant(ev);
  ad::Var E_t = model.embed_text(t, B, {104, 105, 33});
  ad::Var E_a = model.artifact_bank(t, B);

  ApeForward<double> af = ape_forward(model, t, B, E_v, E_a, E_t);
  REQUIRE(af.seg.n_v == 4);
  REQUIRE(af.seg.n_a == model.cfg.n_a);
  REQUIRE(af.seg.n_t == 3);

  const Mat<double>& S_a = t.val(af.S_a);
  CHECK(S_a.topRows(4) == ev);
  CHECK(S_a.bottomRows(3) == t.val(E_t));
  CHECK(S_a.middleRows(4, model.cfg.n_a) == t.val(af.E_a_hat));

  const Mat<double>& S_hat = t.val(af.S_hat);
  CHECK(S_hat.middleRows(4, model.cfg.n_a) == t.val(af.E_a_hat));
  // The encoded artifact rows are genuinely different from the raw bank.
  CHECK((t.val(af.E_a_hat) - t.val(E_a)).cwiseAbs().maxCoeff() > 1e-6);

  CHECK(t.val(af.logits).rows() == 1);
  CHECK(t.val(af.logits).cols() == 2);
}

TEST_CASE("artifact loss reaches only the bank, pooling, and classifier") {
  Model<double> model(tiny_config());
  model.init(8);

  Image img(3, 32, 32);
  Rng rng(36);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());

  ad::Tape<double> t;
  Bound<double> B(t, model.params);
  ad::Var E_v = model.encode_image(t, B, img);
  ad::Var E_t = model.embed_text(t, B, {110, 111});
  ad::Var E_a = model.artifact_bank(t, B);
  ApeForward<double> af = ape_forward(model, t, B, E_v, E_a, E_t);
  ad::Var loss = ape_loss(t, af.logits, {1});
  t.backward(loss);

  CHECK(!t.grad(B("bank/E_a")).isZero());
  CHECK(!t.grad(B("ape_pool/M")).isZero());
  CHECK(!t.grad(B("ape_pool/m")).isZero());
  CHECK(!t.grad(B("ape_cls/W")).isZero());
  CHECK(!t.grad(B("ape_cls/b")).isZero());

  // The vision projection and the token table feed the frozen pass through
  // detached copies, so nothing flows back into them.
  CHECK(t.grad(B("patch/W")).isZero());
  CHECK(t.grad(B("patch/b")).isZero());
  CHECK(t.grad(B("embed/tok")).isZero());

  // Frozen-encoder tensors bind as constants and accumulate nothing.
  CHECK(t.grad(B("enc_p/pos_a")).isZero());
  CHECK(t.grad(B("enc_p/L0/attn/Wq")).isZero());
  CHECK(t.grad(B("enc_p/L0/ffn/W1")).isZero());
}

TEST_CASE("artifact loss gradient w.r.t. the bank matches finite differences") {
  Model<double> model(tiny_config());
  model.init(9);
  int d = model.cfg.d;
  int n_a = model.cfg.n_a;

  Rng rng(37);
  Mat<double> ev = random_mat(rng, 4, d, 0.5);
  std::vector<int> ids = {101, 102, 103, 104};

  auto eval = [&](const Mat<double>& bank, Mat<double>* grad_out) {
    Model<double> m = model;
    m.params.at("bank/E_a") = bank;
    ad::Tape<double> t;
    Bound<double> B(t, m.params);
    ApeForward<double> af =
        ape_forward(m, t, B, t.constant(ev), m.artifact_bank(t, B),
                    m.embed_text(t, B, ids));
    ad::Var loss = ape_loss(t, af.logits, {1});
    double v = t.val(loss)(0, 0);
    if (grad_out) {
      t.backward(loss);
      *grad_out = t.grad(B("bank/E_a"));
    }
    return v;
  };

  Mat<double> bank0 = model.params.get("bank/E_a");
  Mat<double> analytic;
  eval(bank0, &analytic);

  double max_rel = 0;
  for (int r = 0; r < n_a; ++r)
    for (int c = 0; c < d; ++c) {
      double h = 1e-5 * std::max(1.0, std::abs(bank0(r, c)));
      Mat<double> hi = bank0, lo = bank0;
      hi(r, c) += h;
      lo(r, c) -= h;
      double fd = (eval(hi, nullptr) - eval(lo, nullptr)) / (2 * h);
      double denom = std::max({std::abs(fd), std::abs(analytic(r, c)), 1e-8});
      max_rel = std::max(max_rel, std::abs(fd - analytic(r, c)) / denom);
    }
  CHECK(max_rel < 1e-4);
}
