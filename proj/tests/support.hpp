#pragma once

// Hand-rolled random generators shared by the property tests.

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace prosurv::testing {

using Rng = std::mt19937_64;

inline Eigen::MatrixXd randn(Eigen::Index rows, Eigen::Index cols, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::vector<double> random_hazards(Rng& rng, int k) {
  std::vector<double> h(static_cast<std::size_t>(k));
  for (auto& v : h) v = uniform(rng);
  return h;
}

}  // namespace prosurv::testing
