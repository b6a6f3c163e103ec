#pragma once

// Discrete-time survival mathematics over K intervals.
//
// Bin indices are 0-based everywhere in this library. Interval k covers
// [edges[k-1], edges[k]) with edges[-1] = -inf and edges[K-1] = +inf.

#include <span>
#include <vector>

namespace prosurv::survival {

inline constexpr double kHazardEps = 1e-7;

struct SurvivalLabel {
  double months = 0.0;
  int censorship = 0;  // 1 = censored
  int bin = 0;
};

struct BinEdges {
  std::vector<double> interior;  // K-1 strictly increasing cut points

  int num_bins() const { return static_cast<int>(interior.size()) + 1; }
  int bin_of(double months) const;
};

struct Binning {
  BinEdges edges;
  std::vector<int> bins;
};

/// Interior edges are the k/K quantiles (linear interpolation between order
/// statistics) of the uncensored event times; every sample, censored or not,
/// is then placed in the interval containing its time.
Binning assign_bins(std::span<const double> times, std::span<const int> censorships, int num_bins);

/// Clamps each hazard into [kHazardEps, 1 - kHazardEps].
std::vector<double> clamp_hazards(std::span<const double> hazards);

/// S(t_k) = prod_{u<=k} (1 - h_u), on clamped hazards.
std::vector<double> hazards_to_survival(std::span<const double> hazards);

/// Discrete-hazard negative log-likelihood on clamped hazards.
double nll_loss(std::span<const double> hazards, const SurvivalLabel& label);

/// d(nll_loss)/d(hazards) with respect to the pre-clamp hazards; entries
/// outside the clamp range receive zero.
std::vector<double> nll_loss_grad(std::span<const double> hazards, const SurvivalLabel& label);

/// -sum_k S(t_k). Higher means worse predicted survival.
double risk_score(std::span<const double> hazards);

/// Harrell's C-index. A pair (i, j) is comparable when times[i] < times[j]
/// and sample i is uncensored; tied risks earn half credit.
double concordance_index(std::span<const double> risks, std::span<const double> times,
                         std::span<const int> censorships);

/// Validates a label against K; throws DataError when invalid.
void validate_label(const SurvivalLabel& label, int num_bins);

}  // namespace prosurv::survival
