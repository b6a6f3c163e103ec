#include "doctest.h"
#include "gradcheck.hpp"
#include "support.hpp"

#include "prosurv/errors.hpp"
#include "prosurv/prototype_bank.hpp"

#include <cmath>

using namespace prosurv;
using namespace prosurv::prototypes;
using survival::SurvivalLabel;
using testing::randn;
using testing::Rng;
using testing::uniform;
using testing::uniform_int;

namespace {

std::vector<double> minmax(const Eigen::RowVectorXd& v) {
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  std::vector<double> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = (v(i) - lo) / (hi - lo + kNormEps);
  return out;
}

std::vector<double> similarity_oracle(const Eigen::RowVectorXd& f, const Matrix& bank, int bins, int per_bin) {
  const auto nf = minmax(f);
  double norm_f = 0.0;
  for (double x : nf) norm_f += x * x;
  norm_f = std::sqrt(norm_f) + kNormEps;
  std::vector<double> w(static_cast<std::size_t>(bins), 0.0);
  for (int k = 0; k < bins; ++k) {
    for (int j = 0; j < per_bin; ++j) {
      const auto np = minmax(bank.row(k * per_bin + j));
      double dot = 0.0, norm_p = 0.0;
      for (std::size_t i = 0; i < np.size(); ++i) {
        dot += nf[i] * np[i];
        norm_p += np[i] * np[i];
      }
      w[static_cast<std::size_t>(k)] += dot / (norm_f * (std::sqrt(norm_p) + kNormEps)) / per_bin;
    }
  }
  return w;
}

// The contrastive loss written with 1-based bins b = bin + 1.
double contrastive_oracle(const std::vector<double>& w, int bin, int censored) {
  const int k_total = static_cast<int>(w.size());
  const int b = bin + 1;
  double loss = 0.0;
  if (censored == 0) {
    for (int k = 1; k <= k_total; ++k) {
      loss += k == b ? -w[static_cast<std::size_t>(k - 1)] : w[static_cast<std::size_t>(k - 1)] / (k_total - 1);
    }
    return loss;
  }
  for (int k = b; k <= k_total; ++k) loss -= w[static_cast<std::size_t>(k - 1)] / (k_total - b + 1);
  if (b > 1) {
    for (int k = 1; k < b; ++k) loss += w[static_cast<std::size_t>(k - 1)] / (b - 1);
  }
  return loss;
}

}  // namespace

TEST_CASE("init_bank is deterministic and has the configured shape") {
  const Matrix a = init_bank(4, 32, 256, 99);
  const Matrix b = init_bank(4, 32, 256, 99);
  CHECK(a.rows() == 4 * 32);
  CHECK(a.cols() == 256);
  CHECK(a == b);
  CHECK(a != init_bank(4, 32, 256, 100));
}

TEST_CASE("init_bank entries have standard deviation 1/sqrt(d)") {
  const Matrix a = init_bank(4, 32, 256, 3);
  const double mean = a.mean();
  const double sd = std::sqrt((a.array() - mean).square().sum() / static_cast<double>(a.size() - 1));
  CHECK(std::abs(sd - 1.0 / 16.0) < 0.1 / 16.0);
}

TEST_CASE("init_bank rejects non-positive dimensions") {
  CHECK_THROWS_AS(init_bank(1, 32, 8, 1), UsageError);
  CHECK_THROWS_AS(init_bank(4, 0, 8, 1), UsageError);
  CHECK_THROWS_AS(init_bank(4, 32, 0, 1), UsageError);
}

TEST_CASE("make_bank registers a trainable parameter per modality") {
  nn::ParamStore store;
  const auto p = make_bank(store, Modality::kPathology, 4, 2, 8, 1);
  const auto g = make_bank(store, Modality::kGenomics, 4, 2, 8, 2);
  CHECK(p.rows.requires_grad());
  CHECK(store.find("bank.pathology") != nullptr);
  CHECK(store.find("bank.genomics") != nullptr);
  CHECK(g.dim() == 8);
}

// Norm guards of 1e-8 put the ideal values off by O(1e-8).
TEST_CASE("bin_similarity examples") {
  SUBCASE("feature equal to every prototype of a bin") {
    Matrix bank(4, 3);
    bank << 0.2, 0.9, -0.4, 0.2, 0.9, -0.4, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
    const Var f = ad::constant(bank.row(0));
    const Matrix w = bin_similarity(f, ad::constant(bank), 2, 2).value();
    CHECK(w(0, 0) == doctest::Approx(1.0).epsilon(1e-7));
  }
  SUBCASE("orthogonal after normalization") {
    Matrix bank(2, 2);
    bank << 1.0, 0.0, 1.0, 0.0;
    Matrix f(1, 2);
    f << 0.0, 1.0;
    const Matrix w = bin_similarity(ad::constant(f), ad::constant(bank), 2, 1).value();
    CHECK(w(0, 0) == 0.0);
  }
  SUBCASE("two prototypes, one aligned and one orthogonal") {
    Matrix bank(4, 2);
    bank << 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0;
    Matrix f(1, 2);
    f << 0.0, 1.0;
    const Matrix w = bin_similarity(ad::constant(f), ad::constant(bank), 2, 2).value();
    CHECK(w(0, 0) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(w(0, 1) == doctest::Approx(1.0).epsilon(1e-7));
  }
  SUBCASE("constant feature is defined") {
    const Matrix bank = Matrix::Random(4, 3);
    const Matrix w = bin_similarity(ad::constant(Matrix::Constant(1, 3, 2.0)), ad::constant(bank), 2, 2).value();
    CHECK(w.allFinite());
    CHECK(w.cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("bin_similarity matches a scalar oracle and stays in [0, 1]") {
  Rng rng(21);
  for (int trial = 0; trial < 10000; ++trial) {
    const int bins = uniform_int(rng, 2, 5);
    const int per_bin = uniform_int(rng, 1, 4);
    const int d = uniform_int(rng, 2, 9);
    const double scale = std::pow(10.0, uniform(rng, -3, 3));
    const Matrix bank = randn(bins * per_bin, d, rng, scale);
    const Matrix f = randn(1, d, rng, scale);
    const Matrix w = bin_similarity(ad::constant(f), ad::constant(bank), bins, per_bin).value();
    REQUIRE(w.cols() == bins);
    for (int k = 0; k < bins; ++k) {
      REQUIRE(w(0, k) >= 0.0);
      REQUIRE(w(0, k) <= 1.0);
    }
    if (trial < 500) {
      const auto oracle = similarity_oracle(f.row(0), bank, bins, per_bin);
      for (int k = 0; k < bins; ++k) {
        CHECK(w(0, k) == doctest::Approx(oracle[static_cast<std::size_t>(k)]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("risk_contrastive_loss examples") {
  CHECK(risk_contrastive_loss(std::vector<double>{0, 1, 0, 0}, {1.0, 0, 1}) == doctest::Approx(-1.0));
  CHECK(risk_contrastive_loss(std::vector<double>{0.5, 0.5, 0.5, 0.5}, {1.0, 1, 0}) == doctest::Approx(-0.5));
  CHECK(risk_contrastive_loss(std::vector<double>{0.2, 0.4, 0.4, 0.4}, {1.0, 0, 0}) == doctest::Approx(0.2));
}

TEST_CASE("risk_contrastive_loss matches the one-based formula") {
  Rng rng(22);
  for (int trial = 0; trial < 2000; ++trial) {
    const int k = uniform_int(rng, 2, 8);
    std::vector<double> w(static_cast<std::size_t>(k));
    for (auto& v : w) v = uniform(rng);
    const SurvivalLabel label{1.0, uniform(rng) < 0.5 ? 1 : 0, uniform_int(rng, 0, k - 1)};
    const double expected = contrastive_oracle(w, label.bin, label.censorship);
    CHECK(risk_contrastive_loss(w, label) == doctest::Approx(expected).epsilon(1e-12));
    Matrix wm(1, k);
    for (int i = 0; i < k; ++i) wm(0, i) = w[static_cast<std::size_t>(i)];
    CHECK(risk_contrastive_loss(ad::constant(wm), label).scalar() == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("uncensored loss falls with the event-bin similarity and rises with all others") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = uniform_int(rng, 2, 6);
    Var w = ad::parameter(Matrix::Random(1, k).cwiseAbs());
    const SurvivalLabel label{1.0, 0, uniform_int(rng, 0, k - 1)};
    ad::backward(risk_contrastive_loss(w, label));
    for (int i = 0; i < k; ++i) {
      if (i == label.bin) {
        CHECK(w.grad()(0, i) < 0.0);
      } else {
        CHECK(w.grad()(0, i) > 0.0);
      }
    }
  }
}

TEST_CASE("contrastive loss gradients through bin_similarity match finite differences") {
  Rng rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const int bins = uniform_int(rng, 2, 4);
    const int per_bin = uniform_int(rng, 1, 3);
    const int d = uniform_int(rng, 3, 8);
    Var bank = ad::parameter(randn(bins * per_bin, d, rng));
    Var f = ad::parameter(randn(1, d, rng));
    const SurvivalLabel label{1.0, trial % 2, uniform_int(rng, 0, bins - 1)};
    const auto r = testing::check_gradients(
        [&] { return risk_contrastive_loss(bin_similarity(f, bank, bins, per_bin), label); }, {bank, f});
    CHECK(r.rel_error < 1e-4);
  }
}

TEST_CASE("combined_sim_loss sums the present modalities") {
  CHECK(combined_sim_loss(0.3, 0.5) == doctest::Approx(0.8));
  CHECK(combined_sim_loss(0.3, std::nullopt) == 0.3);
  CHECK(combined_sim_loss(std::nullopt, 0.5) == 0.5);
  CHECK_THROWS_AS(combined_sim_loss(std::optional<double>{}, std::optional<double>{}), UsageError);

  const Var p = ad::scalar_constant(0.3), g = ad::scalar_constant(0.5);
  CHECK(combined_sim_loss(std::optional<Var>(p), std::optional<Var>(g)).scalar() == doctest::Approx(0.8));
  CHECK(combined_sim_loss(std::optional<Var>(p), std::nullopt).scalar() == 0.3);
  CHECK_THROWS_AS(combined_sim_loss(std::optional<Var>{}, std::optional<Var>{}), UsageError);
}

TEST_CASE("contrastive coefficients") {
  const auto u = contrastive_coefficients({1.0, 0, 2}, 4);
  CHECK(u(2) == -1.0);
  CHECK(u(0) == doctest::Approx(1.0 / 3.0));
  const auto c0 = contrastive_coefficients({1.0, 1, 0}, 4);
  for (int k = 0; k < 4; ++k) CHECK(c0(k) == doctest::Approx(-0.25));
  const auto c2 = contrastive_coefficients({1.0, 1, 2}, 4);
  CHECK(c2(0) == doctest::Approx(0.5));
  CHECK(c2(1) == doctest::Approx(0.5));
  CHECK(c2(2) == doctest::Approx(-0.5));
  CHECK(c2(3) == doctest::Approx(-0.5));
}
