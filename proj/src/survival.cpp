#include "prosurv/survival.hpp"

#include "prosurv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace prosurv::survival {

int BinEdges::bin_of(double months) const {
  return static_cast<int>(std::upper_bound(interior.begin(), interior.end(), months) - interior.begin());
}

Binning assign_bins(std::span<const double> times, std::span<const int> censorships, int num_bins) {
  if (num_bins < 2) throw UsageError("assign_bins: K must be >= 2, got " + std::to_string(num_bins));
  if (times.size() != censorships.size()) throw UsageError("assign_bins: times/censorships length mismatch");

  std::vector<double> events;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (censorships[i] == 0) events.push_back(times[i]);
  }
  std::sort(events.begin(), events.end());
  std::vector<double> uniq = events;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (static_cast<int>(uniq.size()) < num_bins) throw DataError("degenerate binning");

  Binning out;
  const double last = static_cast<double>(events.size() - 1);
  for (int k = 1; k < num_bins; ++k) {
    const double h = last * static_cast<double>(k) / static_cast<double>(num_bins);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, events.size() - 1);
    const double edge = events[lo] + (h - static_cast<double>(lo)) * (events[hi] - events[lo]);
    if (!out.edges.interior.empty() && !(edge > out.edges.interior.back())) throw DataError("degenerate binning");
    out.edges.interior.push_back(edge);
  }
  out.bins.reserve(times.size());
  for (double t : times) out.bins.push_back(out.edges.bin_of(t));
  return out;
}

std::vector<double> clamp_hazards(std::span<const double> hazards) {
  std::vector<double> h(hazards.begin(), hazards.end());
  for (double& v : h) v = std::clamp(v, kHazardEps, 1.0 - kHazardEps);
  return h;
}

std::vector<double> hazards_to_survival(std::span<const double> hazards) {
  const auto h = clamp_hazards(hazards);
  std::vector<double> s(h.size());
  double running = 1.0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    running *= 1.0 - h[k];
    s[k] = running;
  }
  return s;
}

void validate_label(const SurvivalLabel& label, int num_bins) {
  if (!(label.months > 0.0) || !std::isfinite(label.months)) throw DataError("survival label: months must be positive");
  if (label.censorship != 0 && label.censorship != 1) {
    throw DataError("survival label: censorship must be 0 or 1");
  }
  if (label.bin < 0 || label.bin >= num_bins) {
    throw DataError("survival label: bin " + std::to_string(label.bin) + " outside [0, " +
                    std::to_string(num_bins) + ")");
  }
}

double nll_loss(std::span<const double> hazards, const SurvivalLabel& label) {
  validate_label(label, static_cast<int>(hazards.size()));
  const auto h = clamp_hazards(hazards);
  const auto b = static_cast<std::size_t>(label.bin);
  double loss = 0.0;
  for (std::size_t u = 0; u < b; ++u) loss -= std::log(1.0 - h[u]);
  if (label.censorship == 0) {
    loss -= std::log(h[b]);
  } else {
    loss -= std::log(1.0 - h[b]);
  }
  return loss;
}

std::vector<double> nll_loss_grad(std::span<const double> hazards, const SurvivalLabel& label) {
  validate_label(label, static_cast<int>(hazards.size()));
  const auto h = clamp_hazards(hazards);
  const auto b = static_cast<std::size_t>(label.bin);
  std::vector<double> g(h.size(), 0.0);
  for (std::size_t u = 0; u < b; ++u) g[u] = 1.0 / (1.0 - h[u]);
  g[b] = label.censorship == 0 ? -1.0 / h[b] : 1.0 / (1.0 - h[b]);
  for (std::size_t u = 0; u < h.size(); ++u) {
    if (hazards[u] < kHazardEps || hazards[u] > 1.0 - kHazardEps) g[u] = 0.0;
  }
  return g;
}

double risk_score(std::span<const double> hazards) {
  const auto s = hazards_to_survival(hazards);
  return -std::accumulate(s.begin(), s.end(), 0.0);
}

double concordance_index(std::span<const double> risks, std::span<const double> times,
                         std::span<const int> censorships) {
  const std::size_t n = risks.size();
  if (times.size() != n || censorships.size() != n) throw UsageError("concordance_index: length mismatch");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  // Half-credits are counted as integers to keep the sum exact.
  long long twice_concordant = 0;
  long long comparable = 0;
  std::size_t group_end = 0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    if (group_end <= pos) {
      group_end = pos;
      while (group_end < n && times[order[group_end]] == times[order[pos]]) ++group_end;
    }
    const std::size_t i = order[pos];
    if (censorships[i] != 0) continue;
    for (std::size_t later = group_end; later < n; ++later) {
      const std::size_t j = order[later];
      ++comparable;
      if (risks[i] > risks[j]) {
        twice_concordant += 2;
      } else if (risks[i] == risks[j]) {
        twice_concordant += 1;
      }
    }
  }
  if (comparable == 0) throw DataError("no comparable pairs");
  return static_cast<double>(twice_concordant) / (2.0 * static_cast<double>(comparable));
}

}  // namespace prosurv::survival
