// Copyright 2026 The qhmm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qhmm/classifiers.hpp"
#include "qhmm/dataset.hpp"
#include "qhmm/hmm.hpp"
#include "qhmm/metrics.hpp"

namespace qhmm {

/// Generator parameters of the simulated readout. Emissions are isotropic
/// Gaussians with unit variance per segment; the mean separation is set so
/// that demodulating `window_segments` segments gives separation r_window.
struct SimulationSpec {
  double t1_eff_s = 14.46e-6;
  double gamma01_hz = 0.0;
  double dt_s = 80e-9;
  std::size_t n_segments = 243;
  /// Separation over the reference window. 0 selects the value whose ideal
  /// fidelity is 0.9914.
  double r_window = 0.0;
  std::size_t window_segments = 9;
  double pre_delay_s = 0.0;

  double resolved_r_window() const;
  double r_per_segment() const { return resolved_r_window() / static_cast<double>(window_segments); }
};

struct BootstrapConfig {
  std::size_t n_resamples = 100;
  std::size_t subset_size = 2000;  ///< records per class and resample
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t n_ground = 12500;
  std::size_t n_excited = 12500;
  std::size_t train_per_class = 2000;  ///< shots per class used to train classifiers
  std::vector<double> t1_grid_s;
  std::vector<double> readout_times_s;
  std::vector<double> start_times_s;
  std::vector<double> thresholds;
  BootstrapConfig bootstrap;
  std::size_t fit_bootstrap_draws = 20;  ///< resamples behind Gaussian-fit error bars
  double t_int_hmm_s = 0.0;              ///< 0 selects 10% of t1_eff
  double t_int_mvg_s = 0.0;              ///< 0 selects 5% of t1_eff
  std::size_t threads = 1;
  std::filesystem::path output_dir = ".";
  SimulationSpec sim;

  /// Throws InputError when a count is zero or a grid is not ascending.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys take their defaults, unknown keys are a SchemaError.
  static ExperimentConfig from_json(const nlohmann::json& doc);
};

struct Series {
  std::string name;
  std::vector<double> y;
  std::vector<double> err;  ///< empty or same length as y
};

struct SweepResult {
  std::string x_name = "x";
  std::vector<double> x;
  std::deque<Series> series;  // references stay valid across add_series
  nlohmann::json metadata = nlohmann::json::object();

  Series& add_series(std::string name, bool with_errors);
  const Series& get(const std::string& name) const;
  /// Throws InputError when a series length differs from x.
  void validate() const;
  /// Columns: x, each series, then <name>_err for series with errors.
  std::string to_csv() const;
};

/// Model whose emissions and transitions follow the simulation settings.
HmmModel simulation_model(const SimulationSpec& spec);
/// simulate_iq_dataset with cfg.n_ground, cfg.n_excited and cfg.seed.
Dataset simulate_experiment_dataset(const ExperimentConfig& cfg);

/// First `per_class` shots of each prepared label, in dataset order.
Dataset training_subset(const Dataset& data, std::size_t per_class);
/// Labeled-means Baum-Welch on data.
BaumWelchResult train_hmm(const Dataset& data, std::size_t threads = 1);

/// Index of the emission mean nearest to the mean first segment of shots
/// prepared with `label`.
std::size_t state_for_label(const HmmModel& model, const Dataset& data, int label);

// ---- bootstrap ----

struct BootstrapStats {
  std::size_t n_states = 0;
  std::size_t n_used = 0;
  std::size_t n_flagged = 0;  ///< resamples with an ambiguous state alignment
  bool degenerate = false;    ///< fewer than two usable resamples; stds are 0
  std::vector<double> trans_mean, trans_std;  ///< row-major n x n
  std::vector<double> means_mean, means_std;  ///< n x 2 (i, q)
  std::vector<double> priors_mean, priors_std;
  double mean_separation = 0.0;  ///< between reference states 0 and 1

  nlohmann::json to_json() const;
};

/// Trains one HMM per resample of cfg.bootstrap.subset_size records per class,
/// drawn with replacement. Resample states are aligned to `reference` by
/// nearest emission means.
BootstrapStats run_bootstrap(const Dataset& data, const ExperimentConfig& cfg, const HmmModel& reference);

// ---- T1 recovery ----

struct LinearFit {
  double slope = 0.0;
  double slope_se = 0.0;
};

/// Least squares y = m x with the standard error of m.
LinearFit fit_through_origin(const std::vector<double>& x, const std::vector<double>& y);

struct T1Sweep {
  SweepResult sweep;  ///< x = true T1, series "t1_learned"
  std::vector<bool> flagged;  ///< non-converged points, excluded from the fit
  LinearFit fit;
  double mean_diff_s = 0.0;
  double std_diff_s = 0.0;
  double std_rel_diff = 0.0;
};

/// For every T1 in cfg.t1_grid_s: simulate cfg.n_ground + cfg.n_excited shots,
/// train unsupervised, extract T1.
T1Sweep run_t1_sweep(const ExperimentConfig& cfg);

// ---- fidelity versus readout time ----

/// Series hmm_fidelity, mvg_fidelity, svm_fidelity (1 - P(0|1)) and
/// hmm_error, mvg_error, svm_error (total error), with bootstrap errors over
/// shots. MVG and SVM are retrained on `train` at every readout time.
SweepResult run_fidelity_vs_time(const Dataset& data, const Dataset& train, const HmmModel& model,
                                 const std::vector<double>& readout_times_s, const ExperimentConfig& cfg);

// ---- rejection ----

/// Efficiency and accepted-subset excited assignment fidelity per threshold,
/// over excited-prepared shots. Series hmm_efficiency, hmm_fidelity,
/// mvg_efficiency, mvg_fidelity; fidelity is NaN for an empty subset.
SweepResult run_efficiency_curve(const Dataset& data, const HmmModel& model, const MvgClassifier& mvg,
                                 const std::vector<double>& thresholds, double t_int_hmm_s, double t_int_mvg_s);

// ---- priors versus start time ----

struct ExponentialFit {
  double amplitude = 0.0;
  double tau_s = 0.0;
  double tau_se_s = 0.0;
};

/// Least squares y = A exp(-x / tau). Needs >= 3 points.
ExponentialFit fit_exponential(const std::vector<double>& x, const std::vector<double>& y);

struct PriorsSweep {
  SweepResult sweep;  ///< x = start time, series "pi_excited"
  ExponentialFit fit;
};

/// For every start time: drop the leading segments of the excited-prepared
/// shots, retrain from `warm_start` and record the learned excited prior.
PriorsSweep run_priors_start_sweep(const Dataset& data, const HmmModel& warm_start,
                                   const std::vector<double>& start_times_s, const ExperimentConfig& cfg);

// ---- filtered Gaussian fidelity ----

struct FilteredFidelityRow {
  double t_int_s = 0.0;
  ProjectedFit ideal;     ///< double-Gaussian fit of the unfiltered windows
  ProjectedFit filtered;  ///< single-Gaussian fit of the HMM-filtered windows
  FidelityUncertainty ideal_err;
  FidelityUncertainty filtered_err;
  std::size_t n_filtered_points = 0;
  std::size_t n_split_shots = 0;  ///< shots with a decoded transition
};

/// Compares the ideal fidelity of the raw windows against the fidelity of the
/// HMM-filtered windows, labeled by decoded state. Every constant run of the
/// decoded path is one filtered point; with include_split = false only shots
/// without a decoded transition contribute.
std::vector<FilteredFidelityRow> run_filtered_fidelity(const Dataset& data, const HmmModel& model,
                                                       const std::vector<double>& t_int_s,
                                                       const ExperimentConfig& cfg, bool include_split = true);

// ---- named experiments ----

std::vector<std::string> experiment_names();

/// Runs the named experiment on simulated data and writes config.json,
/// <name>.csv and summary.json to cfg.output_dir. Returns the summary.
/// Throws InputError listing the available names for an unknown name.
nlohmann::json run_named_experiment(const std::string& name, const ExperimentConfig& cfg);

void write_experiment_outputs(const std::filesystem::path& dir, const std::string& name,
                              const ExperimentConfig& cfg, const SweepResult& sweep, const nlohmann::json& summary);

}  // namespace qhmm
