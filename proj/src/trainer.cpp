#include "prosurv/trainer.hpp"

#include "prosurv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace prosurv::train {

using ad::Var;
using model::Scenario;
using nlohmann::json;

Adam::Adam(nn::ParamStore& store, double lr, double weight_decay, double beta1, double beta2, double eps)
    : store_(store), lr_(lr), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : store_.params()) {
    state_.push_back({Eigen::MatrixXd::Zero(p.var.rows(), p.var.cols()),
                      Eigen::MatrixXd::Zero(p.var.rows(), p.var.cols()), 0});
  }
}

void Adam::step() {
  for (std::size_t i = 0; i < store_.params().size(); ++i) {
    Var var = store_.params()[i].var;
    if (!var.touched()) continue;
    State& s = state_[i];
    Eigen::MatrixXd& w = var.mutable_value();
    Eigen::MatrixXd g = var.grad();
    if (weight_decay_ != 0.0) g += weight_decay_ * w;
    ++s.steps;
    s.m = beta1_ * s.m + (1.0 - beta1_) * g;
    s.v = beta2_ * s.v + (1.0 - beta2_) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.steps));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.steps));
    w.array() -= lr_ * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps_);
  }
}

namespace {

std::vector<double> times_of(const data::Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<double> t;
  t.reserve(idx.size());
  for (auto i : idx) t.push_back(ds.samples[i].months);
  return t;
}

std::vector<int> censorships_of(const data::Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<int> c;
  c.reserve(idx.size());
  for (auto i : idx) c.push_back(ds.samples[i].censorship);
  return c;
}

bool supports(const data::Sample& s, Scenario scenario) {
  switch (scenario) {
    case Scenario::kComplete:
      return s.has_pathology() && s.has_genomics();
    case Scenario::kPathologyOnly:
      return s.has_pathology();
    case Scenario::kGenomicsOnly:
      return s.has_genomics();
  }
  return false;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ad::Matrix subsample_rows(const ad::Matrix& patches, int max_rows, nn::Rng& rng) {
  if (patches.rows() <= max_rows) return patches;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(patches.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first max_rows entries are a uniform sample.
  for (int i = 0; i < max_rows; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), idx.size() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[pick(rng)]);
  }
  ad::Matrix out(max_rows, patches.cols());
  for (int i = 0; i < max_rows; ++i) out.row(i) = patches.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

Cohort apply_preprocessing(const data::Dataset& raw, const survival::BinEdges& edges,
                           const data::GeneNormalizer& normalizer) {
  Cohort c;
  c.dataset = raw;
  c.edges = edges;
  c.normalizer = normalizer;
  c.labels.reserve(raw.samples.size());
  for (auto& s : c.dataset.samples) {
    if (s.genes) s.genes = normalizer.apply(*s.genes);
    c.labels.push_back({s.months, s.censorship, edges.bin_of(s.months)});
  }
  return c;
}

Cohort prepare_cohort(const data::Dataset& raw, const std::vector<std::size_t>& train_indices, int bins) {
  const auto times = times_of(raw, train_indices);
  const auto cens = censorships_of(raw, train_indices);
  const auto binning = survival::assign_bins(times, cens, bins);
  return apply_preprocessing(raw, binning.edges, data::GeneNormalizer::fit(raw, train_indices));
}

double predict_risk(const model::ProSurvModel& model, const data::Sample& sample, Scenario scenario) {
  ad::NoGradGuard no_grad;
  std::optional<Var> patches, genes;
  if (scenario != Scenario::kGenomicsOnly) patches = ad::constant(*sample.patches);
  if (scenario != Scenario::kPathologyOnly) genes = ad::constant(ad::Matrix(*sample.genes));
  const auto out = model.forward(patches, genes);
  const Eigen::RowVectorXd h = out.hazards.value().row(0);
  return survival::risk_score(std::span<const double>(h.data(), static_cast<std::size_t>(h.size())));
}

EvalResult evaluate(const RiskFn& risk, const Cohort& cohort, const std::vector<std::size_t>& indices,
                    std::optional<Scenario> override_scenario) {
  std::vector<double> risks, times;
  std::vector<int> cens;
  for (auto i : indices) {
    const auto& s = cohort.dataset.samples.at(i);
    Scenario scenario;
    if (override_scenario) {
      if (!supports(s, *override_scenario)) continue;
      scenario = *override_scenario;
    } else {
      scenario = model::scenario_of(s.has_pathology(), s.has_genomics());
    }
    risks.push_back(risk(s, scenario));
    times.push_back(s.months);
    cens.push_back(s.censorship);
  }
  if (risks.empty()) {
    throw DataError("evaluate: no record carries the modalities required by scenario '" +
                    model::to_string(override_scenario.value_or(Scenario::kComplete)) + "'");
  }
  return {survival::concordance_index(risks, times, cens), risks.size()};
}

EvalResult evaluate(const model::ProSurvModel& model, const Cohort& cohort, const std::vector<std::size_t>& indices,
                    std::optional<Scenario> override_scenario) {
  return evaluate([&model](const data::Sample& s, Scenario sc) { return predict_risk(model, s, sc); }, cohort,
                  indices, override_scenario);
}

ScenarioScores evaluate_scenarios(const model::ProSurvModel& model, const Cohort& cohort,
                                  const std::vector<std::size_t>& indices) {
  ScenarioScores out;
  const auto attempt = [&](std::optional<Scenario> sc) -> std::optional<double> {
    try {
      return evaluate(model, cohort, indices, sc).cindex;
    } catch (const DataError&) {
      return std::nullopt;
    }
  };
  out.natural = attempt(std::nullopt);
  out.complete = attempt(Scenario::kComplete);
  out.pathology = attempt(Scenario::kPathologyOnly);
  out.genomics = attempt(Scenario::kGenomicsOnly);
  return out;
}

TrainResult train(const TrainConfig& cfg, const data::Dataset& raw, const data::FoldSplit& split, std::ostream* log) {
  cfg.validate();
  if (split.train.empty() || split.val.empty()) throw DataError("train: empty training or validation split");
  TrainResult result;
  result.cohort = prepare_cohort(raw, split.train, cfg.bins);
  const Cohort& cohort = result.cohort;
  const int d_in = std::max(raw.d_in, 1);
  const int genes = std::max(raw.genes, 1);

  result.model = std::make_unique<model::ProSurvModel>(cfg.model_config(d_in, genes));
  model::ProSurvModel& net = *result.model;
  Adam optimizer(net.params(), cfg.learning_rate, cfg.weight_decay);
  nn::Rng rng(mix_seed(cfg.seed, 101));
  const model::LossWeights weights = cfg.loss_weights();

  std::vector<std::size_t> order = split.train;
  std::vector<ad::Matrix> best = net.params().snapshot();
  result.best_val_cindex = -1.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog entry;
    entry.epoch = epoch;
    std::size_t sim_samples = 0;
    int pending = 0;
    net.params().zero_grad();
    for (auto idx : order) {
      const auto& s = cohort.dataset.samples[idx];
      std::optional<Var> patches, gene_in;
      if (s.patches) patches = ad::constant(subsample_rows(*s.patches, cfg.max_patches, rng));
      if (s.genes) gene_in = ad::constant(ad::Matrix(*s.genes));
      const auto out = net.forward(patches, gene_in, nn::ForwardMode{true, &rng});
      const auto br = model::total_loss(out, cohort.labels[idx], weights);
      const double total = br.total.scalar();
      if (!std::isfinite(total)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", sample " << s.patient_id << " (total=" << total
            << ", surv=" << br.surv << ", sim=" << br.sim << ", align=" << br.align << ")";
        throw NumericalError(msg.str());
      }
      entry.loss += total;
      entry.surv += br.surv;
      if (br.sim_terms > 0) {
        entry.sim += br.sim;
        ++sim_samples;
      }
      if (br.align_terms > 0) {
        entry.align += br.align;
        ++entry.align_samples;
      }
      ad::backward(cfg.grad_accum == 1 ? br.total : ad::scale(br.total, 1.0 / cfg.grad_accum));
      if (++pending == cfg.grad_accum) {
        optimizer.step();
        net.params().zero_grad();
        pending = 0;
      }
    }
    if (pending > 0) {
      optimizer.step();
      net.params().zero_grad();
    }
    const auto n = static_cast<double>(order.size());
    entry.loss /= n;
    entry.surv /= n;
    if (sim_samples > 0) entry.sim /= static_cast<double>(sim_samples);
    if (entry.align_samples > 0) entry.align /= static_cast<double>(entry.align_samples);
    entry.val_cindex = evaluate(net, cohort, split.val, std::nullopt).cindex;
    if (entry.val_cindex > result.best_val_cindex) {
      result.best_val_cindex = entry.val_cindex;
      result.best_epoch = epoch;
      best = net.params().snapshot();
    }
    if (log != nullptr) {
      *log << "epoch " << epoch << " loss " << entry.loss << " surv " << entry.surv << " sim " << entry.sim
           << " align " << entry.align << " val_cindex " << entry.val_cindex << '\n';
    }
    result.history.push_back(entry);
  }

  net.params().restore(best);
  result.test = evaluate_scenarios(net, cohort, split.test);
  result.checkpoint = make_checkpoint(net, cfg, d_in, genes, cohort.edges, cohort.normalizer, result.best_epoch,
                                      result.best_val_cindex);
  return result;
}

data::Dataset degrade_training_set(const data::Dataset& raw, const std::vector<std::size_t>& train, double rate,
                                   std::uint64_t seed, std::size_t* degraded) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw UsageError("missing rate must lie in [0, 1]");
  std::vector<std::size_t> complete;
  for (auto i : train) {
    const auto& s = raw.samples.at(i);
    if (s.has_pathology() && s.has_genomics()) complete.push_back(i);
  }
  const auto count = std::min(complete.size(), static_cast<std::size_t>(std::llround(rate * static_cast<double>(train.size()))));
  nn::Rng rng(mix_seed(seed, 202));
  std::shuffle(complete.begin(), complete.end(), rng);
  data::Dataset out = raw;
  for (std::size_t k = 0; k < count; ++k) {
    auto& s = out.samples[complete[k]];
    if (k % 2 == 0) {
      s.genes.reset();
    } else {
      s.patches.reset();
    }
  }
  if (degraded != nullptr) *degraded = count;
  return out;
}

std::vector<SweepRow> sweep_missing(const TrainConfig& cfg, const data::Dataset& raw, const data::FoldSplit& split,
                                    const std::vector<double>& rates, std::ostream* log) {
  std::vector<SweepRow> rows;
  for (double rate : rates) {
    SweepRow row;
    row.rate = rate;
    const auto ds = degrade_training_set(raw, split.train, rate, cfg.seed, &row.degraded);
    if (log != nullptr) *log << "sweep rate " << rate << ": " << row.degraded << " unimodal training patients\n";
    auto result = train(cfg, ds, split, log);
    row.best_epoch = result.best_epoch;
    row.best_val_cindex = result.best_val_cindex;
    row.test = result.test;
    rows.push_back(row);
  }
  return rows;
}

AlignmentReport alignment_report(const model::ProSurvModel& trained, const Cohort& cohort,
                                 const std::vector<std::size_t>& indices) {
  const model::ProSurvModel initial(trained.config());
  AlignmentReport report;
  ad::NoGradGuard no_grad;
  const auto accumulate = [&](const model::ProSurvModel& m, const data::Sample& s, AlignmentEntry& p2g,
                              AlignmentEntry& g2p, bool is_trained) {
    const auto out = m.forward(ad::constant(*s.patches), ad::constant(ad::Matrix(*s.genes)));
    const double a = translation::alignment_loss(Eigen::RowVectorXd(out.f_g->value().row(0)),
                                                 Eigen::RowVectorXd(out.f_p2g->value().row(0)));
    const double b = translation::alignment_loss(Eigen::RowVectorXd(out.f_p->value().row(0)),
                                                 Eigen::RowVectorXd(out.f_g2p->value().row(0)));
    (is_trained ? p2g.trained : p2g.initial) += a;
    (is_trained ? g2p.trained : g2p.initial) += b;
  };
  for (auto i : indices) {
    const auto& s = cohort.dataset.samples.at(i);
    if (!s.has_pathology() || !s.has_genomics()) continue;
    accumulate(trained, s, report.p2g, report.g2p, true);
    accumulate(initial, s, report.p2g, report.g2p, false);
    ++report.samples;
  }
  if (report.samples == 0) throw DataError("alignment report: split has no Complete records");
  const auto n = static_cast<double>(report.samples);
  for (auto* e : {&report.p2g, &report.g2p}) {
    e->trained /= n;
    e->initial /= n;
  }
  return report;
}

CrossValidation cross_validate(const TrainConfig& cfg, const data::Dataset& raw, std::ostream* log) {
  const auto splits = data::split_folds(raw.samples.size(), cfg.split_ratios, cfg.folds, cfg.seed);
  CrossValidation cv;
  std::vector<double> scores;
  for (int f = 0; f < cfg.folds; ++f) {
    if (log != nullptr) *log << "fold " << f << '\n';
    TrainConfig fold_cfg = cfg;
    fold_cfg.fold = f;
    cv.folds.push_back(train(fold_cfg, raw, splits[static_cast<std::size_t>(f)], log));
    if (cv.folds.back().test.natural) scores.push_back(*cv.folds.back().test.natural);
  }
  if (!scores.empty()) {
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    cv.mean_test_cindex = mean;
    cv.std_test_cindex = std::sqrt(var / static_cast<double>(scores.size()));
  }
  return cv;
}

json to_json(const ScenarioScores& s) {
  json j = json::object();
  const auto put = [&](const char* key, const std::optional<double>& v) { j[key] = v ? json(*v) : json(nullptr); };
  put("natural", s.natural);
  put("complete", s.complete);
  put("pathology", s.pathology);
  put("genomics", s.genomics);
  return j;
}

json to_json(const EpochLog& e) {
  return json{{"epoch", e.epoch},   {"loss", e.loss},   {"surv", e.surv},
              {"sim", e.sim},       {"align", e.align}, {"align_samples", e.align_samples},
              {"val_cindex", e.val_cindex}};
}

json metrics_json(const TrainResult& r) {
  json history = json::array();
  for (const auto& e : r.history) history.push_back(to_json(e));
  return json{{"fold", r.checkpoint.config.fold},
              {"best_epoch", r.best_epoch},
              {"best_val_cindex", r.best_val_cindex},
              {"test_cindex", to_json(r.test)},
              {"history", history}};
}

json to_json(const AlignmentReport& r) {
  const auto entry = [](const AlignmentEntry& e) {
    return json{{"trained_mse", e.trained},
                {"initial_mse", e.initial},
                {"ratio", e.initial > 0.0 ? json(e.trained / e.initial) : json(nullptr)}};
  };
  return json{{"samples", r.samples}, {"p2g", entry(r.p2g)}, {"g2p", entry(r.g2p)}};
}

json to_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back(json{{"rate", r.rate},
                       {"degraded", r.degraded},
                       {"best_epoch", r.best_epoch},
                       {"best_val_cindex", r.best_val_cindex},
                       {"test_cindex", to_json(r.test)}});
  }
  return out;
}

}  // namespace prosurv::train
