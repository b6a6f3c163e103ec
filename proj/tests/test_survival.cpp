#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

#include "prosurv/errors.hpp"
#include "prosurv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace prosurv;
using namespace prosurv::survival;
using testing::Rng;
using testing::uniform;
using testing::uniform_int;

namespace {

constexpr double kEps = kHazardEps;

// Linear interpolation between order statistics at position (n - 1) * p.
double quantile_type7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double nll_oracle(const std::vector<double>& h, int bin, int censored) {
  double loss = 0.0;
  for (int u = 0; u < bin; ++u) loss -= std::log(1.0 - h[static_cast<std::size_t>(u)]);
  const double hb = h[static_cast<std::size_t>(bin)];
  loss -= censored ? std::log(1.0 - hb) : std::log(hb);
  return loss;
}

}  // namespace

TEST_CASE("assign_bins: median edge on four uncensored times") {
  const std::vector<double> t{1, 2, 3, 4};
  const std::vector<int> c{0, 0, 0, 0};
  const auto b = assign_bins(t, c, 2);
  REQUIRE(b.edges.interior.size() == 1);
  CHECK(b.edges.interior[0] == doctest::Approx(quantile_type7(t, 0.5)));
  CHECK(b.edges.interior[0] == 2.5);
  CHECK(b.bins == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("assign_bins: constant times are degenerate") {
  const std::vector<double> t{10, 10, 10};
  const std::vector<int> c{0, 0, 0};
  CHECK_THROWS_WITH_AS(assign_bins(t, c, 2), doctest::Contains("degenerate binning"), DataError);
}

TEST_CASE("assign_bins: late censored sample lands in the open last interval") {
  const std::vector<double> t{1, 2, 3, 4, 100};
  const std::vector<int> c{0, 0, 0, 0, 1};
  const auto b = assign_bins(t, c, 2);
  CHECK(b.edges.interior[0] == 2.5);
  CHECK(b.bins.back() == 1);
}

TEST_CASE("assign_bins: rejects fewer than two bins") {
  const std::vector<double> t{1, 2, 3};
  const std::vector<int> c{0, 0, 0};
  CHECK_THROWS(assign_bins(t, c, 1));
}

TEST_CASE("assign_bins: edges are type-7 quantiles of uncensored times and bins partition the samples") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = uniform_int(rng, 2, 6);
    const int n = uniform_int(rng, 3 * k, 80);
    std::vector<double> t(static_cast<std::size_t>(n));
    std::vector<int> c(static_cast<std::size_t>(n));
    std::vector<double> uncensored;
    for (int i = 0; i < n; ++i) {
      t[static_cast<std::size_t>(i)] = uniform(rng, 0.5, 150.0);
      c[static_cast<std::size_t>(i)] = uniform(rng) < 0.3 ? 1 : 0;
      if (c[static_cast<std::size_t>(i)] == 0) uncensored.push_back(t[static_cast<std::size_t>(i)]);
    }
    if (static_cast<int>(uncensored.size()) < k) continue;
    const auto b = assign_bins(t, c, k);
    REQUIRE(b.edges.num_bins() == k);
    for (int e = 0; e < k - 1; ++e) {
      CHECK(b.edges.interior[static_cast<std::size_t>(e)] ==
            doctest::Approx(quantile_type7(uncensored, static_cast<double>(e + 1) / k)).epsilon(1e-12));
    }
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      const int bin = b.bins[static_cast<std::size_t>(i)];
      REQUIRE(bin >= 0);
      REQUIRE(bin < k);
      const double lo = bin == 0 ? -INFINITY : b.edges.interior[static_cast<std::size_t>(bin - 1)];
      const double hi = bin == k - 1 ? INFINITY : b.edges.interior[static_cast<std::size_t>(bin)];
      CHECK(lo <= t[static_cast<std::size_t>(i)]);
      CHECK(t[static_cast<std::size_t>(i)] < hi);
      if (c[static_cast<std::size_t>(i)] == 0) ++counts[static_cast<std::size_t>(bin)];
    }
    // Quantile cuts leave each uncensored bin within two samples of n_u / K.
    const double target = static_cast<double>(uncensored.size()) / k;
    for (int cnt : counts) CHECK(std::abs(cnt - target) <= 2.0);
  }
}

TEST_CASE("hazards_to_survival examples") {
  const auto s_low = hazards_to_survival(std::vector<double>{kEps, kEps, kEps, kEps});
  for (double v : s_low) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  const auto s_high = hazards_to_survival(std::vector<double>{1 - kEps, kEps, kEps, kEps});
  for (double v : s_high) CHECK(v < 1e-6);
  const auto s_half = hazards_to_survival(std::vector<double>{0.5, 0.5});
  CHECK(s_half[0] == 0.5);
  CHECK(s_half[1] == 0.25);
}

TEST_CASE("hazards_to_survival is monotone non-increasing and within (0, 1]") {
  Rng rng(12);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto h = testing::random_hazards(rng, uniform_int(rng, 2, 10));
    const auto s = hazards_to_survival(h);
    CHECK(s[0] == doctest::Approx(1.0 - std::clamp(h[0], kEps, 1 - kEps)));
    for (std::size_t k = 0; k < s.size(); ++k) {
      REQUIRE(s[k] > 0.0);
      REQUIRE(s[k] <= 1.0);
      if (k > 0) REQUIRE(s[k] <= s[k - 1]);
    }
  }
}

TEST_CASE("clamp_hazards bounds every entry") {
  const auto c = clamp_hazards(std::vector<double>{-1.0, 0.0, 0.3, 1.0, 2.0});
  CHECK(c == std::vector<double>{kEps, kEps, 0.3, 1 - kEps, 1 - kEps});
}

TEST_CASE("nll_loss examples") {
  CHECK(nll_loss(std::vector<double>{1 - kEps, kEps, kEps, kEps}, {1.0, 0, 0}) == doctest::Approx(0.0));
  CHECK(nll_loss(std::vector<double>{kEps, kEps, kEps, kEps}, {1.0, 1, 3}) == doctest::Approx(0.0));
  CHECK(std::abs(nll_loss(std::vector<double>{0.5, 0.5, 0.5, 0.5}, {1.0, 0, 1}) - 2.0 * std::log(2.0)) < 1e-9);
}

TEST_CASE("nll_loss matches the direct formula and its gradient matches finite differences") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = uniform_int(rng, 2, 8);
    std::vector<double> h(static_cast<std::size_t>(k));
    for (auto& v : h) v = uniform(rng, 0.02, 0.98);
    const SurvivalLabel label{1.0, uniform(rng) < 0.4 ? 1 : 0, uniform_int(rng, 0, k - 1)};
    CHECK(nll_loss(h, label) == doctest::Approx(nll_oracle(h, label.bin, label.censorship)).epsilon(1e-12));

    const auto g = nll_loss_grad(h, label);
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (int i = 0; i < k; ++i) {
      const double step = 1e-6;
      auto up = h, down = h;
      up[static_cast<std::size_t>(i)] += step;
      down[static_cast<std::size_t>(i)] -= step;
      const double numeric = (nll_loss(up, label) - nll_loss(down, label)) / (2 * step);
      const double a = g[static_cast<std::size_t>(i)];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    CHECK(std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-10}) < 1e-4);
  }
}

TEST_CASE("nll_loss_grad is zero where the clamp is active") {
  const auto g = nll_loss_grad(std::vector<double>{0.0, 1.0, 0.5}, {1.0, 0, 2});
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] != 0.0);
}

TEST_CASE("risk_score extremes") {
  CHECK(risk_score(std::vector<double>{kEps, kEps, kEps, kEps}) == doctest::Approx(-4.0).epsilon(1e-6));
  const double r = risk_score(std::vector<double>{1 - kEps, kEps, kEps, kEps});
  CHECK(r < 0.0);
  CHECK(r > -1e-5);
}

TEST_CASE("risk_score strictly increases with every hazard") {
  Rng rng(14);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = uniform_int(rng, 2, 8);
    std::vector<double> h(static_cast<std::size_t>(k));
    for (auto& v : h) v = uniform(rng, 0.01, 0.98);
    const auto idx = static_cast<std::size_t>(uniform_int(rng, 0, k - 1));
    auto bumped = h;
    bumped[idx] += 1e-3;
    CHECK(risk_score(bumped) > risk_score(h));
  }
}

TEST_CASE("concordance_index examples") {
  const std::vector<double> t{1, 2, 3};
  const std::vector<int> c{0, 0, 0};
  CHECK(concordance_index(std::vector<double>{3, 2, 1}, t, c) == 1.0);
  CHECK(concordance_index(std::vector<double>{1, 2, 3}, t, c) == 0.0);
  CHECK(concordance_index(std::vector<double>{1, 1, 1}, t, c) == 0.5);
}

TEST_CASE("concordance_index without comparable pairs is an error") {
  const std::vector<double> r{1, 2};
  const std::vector<double> t{1, 2};
  CHECK_THROWS_WITH_AS(concordance_index(r, t, std::vector<int>{1, 1}), doctest::Contains("no comparable pairs"),
                       DataError);
  CHECK_THROWS_AS(concordance_index(r, std::vector<double>{3, 3}, std::vector<int>{0, 0}), DataError);
}

TEST_CASE("concordance_index equals the brute-force oracle and obeys its symmetries") {
  Rng rng(15);
  int checked = 0;
  while (checked < 200) {
    const int n = uniform_int(rng, 2, 50);
    std::vector<double> risk(static_cast<std::size_t>(n)), t(static_cast<std::size_t>(n));
    std::vector<int> c(static_cast<std::size_t>(n));
    const bool tie_free = checked % 2 == 0;
    for (int i = 0; i < n; ++i) {
      // Coarse grids force tied times and tied risks on odd trials.
      risk[static_cast<std::size_t>(i)] = tie_free ? uniform(rng, -3, 3) : uniform_int(rng, 0, 5);
      t[static_cast<std::size_t>(i)] = tie_free ? uniform(rng, 1, 100) : uniform_int(rng, 1, 8);
      c[static_cast<std::size_t>(i)] = uniform(rng) < 0.35 ? 1 : 0;
    }
    bool comparable = false;
    for (int i = 0; i < n && !comparable; ++i) {
      for (int j = 0; j < n; ++j) {
        if (c[static_cast<std::size_t>(i)] == 0 && t[static_cast<std::size_t>(i)] < t[static_cast<std::size_t>(j)]) {
          comparable = true;
          break;
        }
      }
    }
    if (!comparable) continue;
    ++checked;
    const double ci = concordance_index(risk, t, c);
    CHECK(ci == testing::brute_force_cindex(risk, t, c));

    std::vector<double> cubed(risk.size()), negated(risk.size());
    std::transform(risk.begin(), risk.end(), cubed.begin(), [](double r) { return std::exp(r) + r * r * r; });
    std::transform(risk.begin(), risk.end(), negated.begin(), [](double r) { return -r; });
    CHECK(concordance_index(cubed, t, c) == ci);
    if (tie_free) CHECK(ci + concordance_index(negated, t, c) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("validate_label rejects out-of-range fields") {
  CHECK_NOTHROW(validate_label({3.0, 0, 1}, 4));
  CHECK_THROWS_AS(validate_label({0.0, 0, 1}, 4), DataError);
  CHECK_THROWS_AS(validate_label({3.0, 2, 1}, 4), DataError);
  CHECK_THROWS_AS(validate_label({3.0, 0, 4}, 4), DataError);
  CHECK_THROWS_AS(validate_label({3.0, 0, -1}, 4), DataError);
}

TEST_CASE("BinEdges::bin_of uses half-open intervals") {
  const BinEdges e{{2.0, 5.0}};
  CHECK(e.bin_of(1.9) == 0);
  CHECK(e.bin_of(2.0) == 1);
  CHECK(e.bin_of(4.99) == 1);
  CHECK(e.bin_of(5.0) == 2);
  CHECK(e.bin_of(1e9) == 2);
}
