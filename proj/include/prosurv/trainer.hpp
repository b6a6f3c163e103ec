#pragma once

// Training, model selection, evaluation, missing-modality sweeps and the
// alignment report.

#include "prosurv/checkpoint.hpp"
#include "prosurv/config.hpp"
#include "prosurv/data_io.hpp"
#include "prosurv/model.hpp"
#include "prosurv/survival.hpp"

#include "json.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace prosurv::train {

// Adam with coupled L2 weight decay (decay added to the gradient). Parameters
// that received no gradient since the last zero_grad() are skipped.
class Adam {
 public:
  Adam(nn::ParamStore& store, double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step();

 private:
  struct State {
    Eigen::MatrixXd m;
    Eigen::MatrixXd v;
    long long steps = 0;
  };
  nn::ParamStore& store_;
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  std::vector<State> state_;
};

// A dataset after fold-specific preprocessing: genes min-max scaled with
// training statistics and times binned on training event times.
struct Cohort {
  data::Dataset dataset;
  std::vector<survival::SurvivalLabel> labels;
  survival::BinEdges edges;
  data::GeneNormalizer normalizer;
};

Cohort prepare_cohort(const data::Dataset& raw, const std::vector<std::size_t>& train_indices, int bins);
Cohort apply_preprocessing(const data::Dataset& raw, const survival::BinEdges& edges,
                           const data::GeneNormalizer& normalizer);

/// Risk for one sample under a concrete scenario.
using RiskFn = std::function<double(const data::Sample&, model::Scenario)>;

struct EvalResult {
  double cindex = 0.0;
  std::size_t samples = 0;
};

/// With an override, only samples carrying the required modalities are
/// scored and the other modality is ignored. Throws DataError when no
/// sample qualifies.
EvalResult evaluate(const RiskFn& risk, const Cohort& cohort, const std::vector<std::size_t>& indices,
                    std::optional<model::Scenario> override_scenario);
EvalResult evaluate(const model::ProSurvModel& model, const Cohort& cohort, const std::vector<std::size_t>& indices,
                    std::optional<model::Scenario> override_scenario);

double predict_risk(const model::ProSurvModel& model, const data::Sample& sample, model::Scenario scenario);

struct ScenarioScores {
  std::optional<double> natural, complete, pathology, genomics;
};

ScenarioScores evaluate_scenarios(const model::ProSurvModel& model, const Cohort& cohort,
                                  const std::vector<std::size_t>& indices);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;   // mean total loss
  double surv = 0.0;   // mean NLL
  double sim = 0.0;    // mean combined L_sim over samples that have one
  double align = 0.0;  // mean combined L_align over Complete samples
  std::size_t align_samples = 0;
  double val_cindex = 0.0;
};

struct TrainResult {
  std::unique_ptr<model::ProSurvModel> model;  // best-validation parameters
  Checkpoint checkpoint;
  std::vector<EpochLog> history;
  int best_epoch = 0;
  double best_val_cindex = 0.0;
  ScenarioScores test;
  Cohort cohort;
};

/// Trains on split.train, selects the epoch with the highest validation
/// C-index (earliest on ties), and scores the test split per scenario.
/// Throws NumericalError on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const data::Dataset& raw, const data::FoldSplit& split,
                  std::ostream* log = nullptr);

/// Reduces round(rate * |train|) training patients to one modality, half
/// pathology-only and half genomics-only, chosen deterministically from seed.
data::Dataset degrade_training_set(const data::Dataset& raw, const std::vector<std::size_t>& train, double rate,
                                   std::uint64_t seed, std::size_t* degraded = nullptr);

struct SweepRow {
  double rate = 0.0;
  std::size_t degraded = 0;
  int best_epoch = 0;
  double best_val_cindex = 0.0;
  ScenarioScores test;
};

std::vector<SweepRow> sweep_missing(const TrainConfig& cfg, const data::Dataset& raw, const data::FoldSplit& split,
                                    const std::vector<double>& rates, std::ostream* log = nullptr);

struct AlignmentEntry {
  double trained = 0.0;  // mean squared distance, trained model
  double initial = 0.0;  // same, freshly initialized model from the same seed
};

struct AlignmentReport {
  std::size_t samples = 0;
  AlignmentEntry p2g;  // ||F_g - F_p2g||^2
  AlignmentEntry g2p;  // ||F_p - F_g2p||^2
};

AlignmentReport alignment_report(const model::ProSurvModel& trained, const Cohort& cohort,
                                 const std::vector<std::size_t>& indices);

struct CrossValidation {
  std::vector<TrainResult> folds;
  double mean_test_cindex = 0.0;
  double std_test_cindex = 0.0;
};

CrossValidation cross_validate(const TrainConfig& cfg, const data::Dataset& raw, std::ostream* log = nullptr);

nlohmann::json to_json(const ScenarioScores& s);
nlohmann::json to_json(const EpochLog& e);
nlohmann::json metrics_json(const TrainResult& r);
nlohmann::json to_json(const AlignmentReport& r);
nlohmann::json to_json(const std::vector<SweepRow>& rows);

}  // namespace prosurv::train
