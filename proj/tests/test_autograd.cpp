#include "doctest.h"
#include "gradcheck.hpp"
#include "support.hpp"

#include "prosurv/autograd.hpp"

#include <random>

using namespace prosurv;
using ad::Matrix;
using ad::Var;
using testing::check_gradients;
using testing::randn;


TEST_CASE("matmul family gradients") {
  std::mt19937_64 rng(1);
  Var a = ad::parameter(randn(3, 4, rng));
  Var b = ad::parameter(randn(4, 2, rng));
  Var c = ad::parameter(randn(5, 4, rng));
  const Matrix w1 = randn(3, 2, rng), w2 = randn(3, 5, rng);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::matmul(a, b), w1); }, {a, b}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::matmul_nt(a, c), w2); }, {a, c}).rel_error < 1e-6);
}

TEST_CASE("elementwise and shape op gradients") {
  std::mt19937_64 rng(2);
  Var a = ad::parameter(randn(3, 4, rng));
  Var b = ad::parameter(randn(3, 4, rng));
  Var row = ad::parameter(randn(1, 4, rng));
  const Matrix w = randn(3, 4, rng), s = randn(3, 4, rng), o = randn(3, 4, rng);
  const Matrix w_cat = randn(3, 8, rng), w_slice = randn(3, 2, rng), w_mean = randn(1, 4, rng);

  CHECK(check_gradients([&] { return ad::weighted_sum(ad::add(a, b), w); }, {a, b}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::sub(a, b), w); }, {a, b}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::add_row(a, row), w); }, {a, row}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::scale(a, -1.7), w); }, {a}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::hadamard(a, b), w); }, {a, b}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::affine_const(a, s, o), w); }, {a}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::concat_cols({a, b}), w_cat); }, {a, b}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::slice_cols(a, 1, 2), w_slice); }, {a}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::mean_rows(a), w_mean); }, {a}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::squared_distance(a, b); }, {a, b}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::sum(a); }, {a}).rel_error < 1e-6);
}

TEST_CASE("nonlinearity gradients") {
  std::mt19937_64 rng(3);
  Var a = ad::parameter(randn(4, 5, rng, 2.0));
  const Matrix w = randn(4, 5, rng);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::sigmoid(a), w); }, {a}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::gelu(a), w); }, {a}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::selu(a), w); }, {a}).rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::softmax_rows(a), w); }, {a}).rel_error < 1e-6);
}

TEST_CASE("row transform gradients") {
  std::mt19937_64 rng(4);
  Var a = ad::parameter(randn(3, 6, rng));
  Var gamma = ad::parameter(randn(1, 6, rng));
  Var beta = ad::parameter(randn(1, 6, rng));
  Var q = ad::parameter(randn(1, 6, rng));
  const Matrix w = randn(3, 6, rng), wc = randn(1, 3, rng);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::layer_norm_rows(a, gamma, beta), w); }, {a, gamma, beta})
            .rel_error < 1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::minmax_normalize_rows(a, 1e-8), w); }, {a}).rel_error <
        1e-6);
  CHECK(check_gradients([&] { return ad::weighted_sum(ad::cosine_rows(q, a, 1e-8), wc); }, {q, a}).rel_error < 1e-6);
}

TEST_CASE("backward accumulates through shared subgraphs") {
  Var x = ad::parameter(Matrix::Constant(1, 1, 3.0));
  Var y = ad::hadamard(x, x);  // x^2
  Var z = ad::add(y, y);       // 2 x^2
  ad::backward(ad::sum(z));
  CHECK(x.grad()(0, 0) == doctest::Approx(12.0));
  CHECK(x.touched());
}

TEST_CASE("constants and detached values receive no gradient") {
  Var x = ad::parameter(Matrix::Constant(1, 2, 1.5));
  Var c = ad::constant(Matrix::Constant(1, 2, 2.0));
  ad::backward(ad::sum(ad::add(ad::detach(x), c)));
  CHECK_FALSE(x.touched());
  CHECK(x.grad().size() == 0);
  CHECK(c.grad().size() == 0);
}

TEST_CASE("no-grad guard records no graph") {
  Var x = ad::parameter(Matrix::Constant(2, 2, 1.0));
  {
    ad::NoGradGuard guard;
    CHECK_FALSE(ad::grad_enabled());
    Var y = ad::matmul(x, x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->inputs.empty());
  }
  CHECK(ad::grad_enabled());
}

TEST_CASE("backward requires a scalar root") {
  Var x = ad::parameter(Matrix::Ones(2, 2));
  CHECK_THROWS(ad::backward(ad::scale(x, 2.0)));
}
