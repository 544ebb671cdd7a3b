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

#include "qhmm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "qhmm/error.hpp"
#include "qhmm/file_util.hpp"
#include "qhmm/model_io.hpp"
#include "qhmm/parallel.hpp"
#include "qhmm/rng.hpp"
#include "qhmm/signal.hpp"

namespace qhmm {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool ascending(const std::vector<double>& v) { return std::is_sorted(v.begin(), v.end()); }

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

IqPoint window_mean(const ObservationSequence& obs, std::size_t n) {
  double si = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    si += obs[k].i;
    sq += obs[k].q;
  }
  return {si / static_cast<double>(n), sq / static_cast<double>(n)};
}

std::size_t shortest_shot(const Dataset& data) {
  std::size_t m = std::numeric_limits<std::size_t>::max();
  for (const auto& s : data.shots) m = std::min(m, s.obs.size());
  return data.shots.empty() ? 0 : m;
}

double dist_sq(IqPoint a, IqPoint b) { return (a.i - b.i) * (a.i - b.i) + (a.q - b.q) * (a.q - b.q); }

// Permutation that maps reference state k onto model state perm[k] with the
// smallest total squared distance between emission means. ambiguous is set
// when the runner-up assignment is equally good.
std::vector<std::size_t> align_states(const HmmModel& model, const HmmModel& reference, bool* ambiguous) {
  const std::size_t n = model.n_states();
  std::vector<std::size_t> perm(n), best;
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best_cost = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t k = 0; k < n; ++k) cost += dist_sq(model.emission(perm[k]).mean(), reference.emission(k).mean());
    if (cost < best_cost) {
      second = best_cost;
      best_cost = cost;
      best = perm;
    } else if (cost < second) {
      second = cost;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  *ambiguous = n > 1 && second - best_cost <= 1e-12 * std::max(1.0, best_cost);
  return best;
}

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& where) {
  if (!doc.is_object()) throw SchemaError(where + ": expected an object");
  for (const auto& [key, value] : doc.items()) {
    if (!allowed.count(key)) throw SchemaError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_key(const json& doc, const char* key, T& out, const std::string& where) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(where + "." + key + ": " + e.what());
  }
}

std::string csv_number(double v) { return std::isnan(v) ? "nan" : format_double(v); }

}  // namespace

double SimulationSpec::resolved_r_window() const {
  return r_window > 0.0 ? r_window : separation_for_fidelity(0.9914);
}

void ExperimentConfig::validate() const {
  if (n_ground == 0 || n_excited == 0) throw InputError("experiment config: shot counts must be > 0");
  if (bootstrap.n_resamples == 0 || bootstrap.subset_size == 0) {
    throw InputError("experiment config: bootstrap counts must be > 0");
  }
  if (sim.n_segments == 0 || sim.window_segments == 0) throw InputError("experiment config: segment counts must be > 0");
  if (!(sim.dt_s > 0.0) || !(sim.t1_eff_s > 0.0)) throw InputError("experiment config: dt and T1 must be positive");
  const std::pair<const char*, const std::vector<double>*> grids[] = {
      {"t1_grid_s", &t1_grid_s}, {"readout_times_s", &readout_times_s},
      {"start_times_s", &start_times_s}, {"thresholds", &thresholds}};
  for (const auto& [name, grid] : grids) {
    if (!ascending(*grid)) throw InputError(std::string("experiment config: ") + name + " must be sorted ascending");
  }
}

json ExperimentConfig::to_json() const {
  return {{"seed", seed},
          {"shot_counts", {{"ground", n_ground}, {"excited", n_excited}}},
          {"train_per_class", train_per_class},
          {"t1_grid_s", t1_grid_s},
          {"readout_times_s", readout_times_s},
          {"start_times_s", start_times_s},
          {"thresholds", thresholds},
          {"bootstrap", {{"n_resamples", bootstrap.n_resamples}, {"subset_size", bootstrap.subset_size}}},
          {"fit_bootstrap_draws", fit_bootstrap_draws},
          {"t_int_hmm_s", t_int_hmm_s},
          {"t_int_mvg_s", t_int_mvg_s},
          {"threads", threads},
          {"output_dir", output_dir.string()},
          {"simulation",
           {{"t1_eff_s", sim.t1_eff_s},
            {"gamma01_hz", sim.gamma01_hz},
            {"dt_s", sim.dt_s},
            {"n_segments", sim.n_segments},
            {"r_window", sim.r_window},
            {"window_segments", sim.window_segments},
            {"pre_delay_s", sim.pre_delay_s}}}};
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  ExperimentConfig cfg;
  const std::string where = "config";
  check_keys(doc,
             {"seed", "shot_counts", "train_per_class", "t1_grid_s", "readout_times_s", "start_times_s", "thresholds",
              "bootstrap", "fit_bootstrap_draws", "t_int_hmm_s", "t_int_mvg_s", "threads", "output_dir", "simulation"},
             where);
  read_key(doc, "seed", cfg.seed, where);
  if (doc.contains("shot_counts")) {
    const json& sc = doc.at("shot_counts");
    check_keys(sc, {"ground", "excited"}, where + ".shot_counts");
    read_key(sc, "ground", cfg.n_ground, where + ".shot_counts");
    read_key(sc, "excited", cfg.n_excited, where + ".shot_counts");
  }
  read_key(doc, "train_per_class", cfg.train_per_class, where);
  read_key(doc, "t1_grid_s", cfg.t1_grid_s, where);
  read_key(doc, "readout_times_s", cfg.readout_times_s, where);
  read_key(doc, "start_times_s", cfg.start_times_s, where);
  read_key(doc, "thresholds", cfg.thresholds, where);
  if (doc.contains("bootstrap")) {
    const json& b = doc.at("bootstrap");
    check_keys(b, {"n_resamples", "subset_size"}, where + ".bootstrap");
    read_key(b, "n_resamples", cfg.bootstrap.n_resamples, where + ".bootstrap");
    read_key(b, "subset_size", cfg.bootstrap.subset_size, where + ".bootstrap");
  }
  read_key(doc, "fit_bootstrap_draws", cfg.fit_bootstrap_draws, where);
  read_key(doc, "t_int_hmm_s", cfg.t_int_hmm_s, where);
  read_key(doc, "t_int_mvg_s", cfg.t_int_mvg_s, where);
  read_key(doc, "threads", cfg.threads, where);
  std::string out = cfg.output_dir.string();
  read_key(doc, "output_dir", out, where);
  cfg.output_dir = out;
  if (doc.contains("simulation")) {
    const json& s = doc.at("simulation");
    const std::string w = where + ".simulation";
    check_keys(s, {"t1_eff_s", "gamma01_hz", "dt_s", "n_segments", "r_window", "window_segments", "pre_delay_s"}, w);
    read_key(s, "t1_eff_s", cfg.sim.t1_eff_s, w);
    read_key(s, "gamma01_hz", cfg.sim.gamma01_hz, w);
    read_key(s, "dt_s", cfg.sim.dt_s, w);
    read_key(s, "n_segments", cfg.sim.n_segments, w);
    read_key(s, "r_window", cfg.sim.r_window, w);
    read_key(s, "window_segments", cfg.sim.window_segments, w);
    read_key(s, "pre_delay_s", cfg.sim.pre_delay_s, w);
  }
  cfg.validate();
  return cfg;
}

Series& SweepResult::add_series(std::string name, bool with_errors) {
  Series s;
  s.name = std::move(name);
  s.y.reserve(x.size());
  if (with_errors) s.err.reserve(x.size());
  series.push_back(std::move(s));
  return series.back();
}

const Series& SweepResult::get(const std::string& name) const {
  for (const auto& s : series) {
    if (s.name == name) return s;
  }
  throw InputError("SweepResult: no series named '" + name + "'");
}

void SweepResult::validate() const {
  for (const auto& s : series) {
    if (s.y.size() != x.size() || (!s.err.empty() && s.err.size() != x.size())) {
      throw InputError("SweepResult: series '" + s.name + "' length differs from x");
    }
  }
}

std::string SweepResult::to_csv() const {
  validate();
  std::ostringstream out;
  out << x_name;
  for (const auto& s : series) out << ',' << s.name;
  for (const auto& s : series) {
    if (!s.err.empty()) out << ',' << s.name << "_err";
  }
  out << '\n';
  for (std::size_t k = 0; k < x.size(); ++k) {
    out << csv_number(x[k]);
    for (const auto& s : series) out << ',' << csv_number(s.y[k]);
    for (const auto& s : series) {
      if (!s.err.empty()) out << ',' << csv_number(s.err[k]);
    }
    out << '\n';
  }
  return out.str();
}

HmmModel simulation_model(const SimulationSpec& spec) {
  const double d = std::sqrt(spec.r_per_segment());
  const double angle = std::numbers::pi / 3.0;
  const Gaussian2D ground({0.0, 0.0}, {1.0, 0.0, 1.0});
  const Gaussian2D excited({d * std::cos(angle), d * std::sin(angle)}, {1.0, 0.0, 1.0});
  return HmmModel::two_state(ground, excited, spec.t1_eff_s, spec.gamma01_hz, spec.dt_s);
}

Dataset simulate_experiment_dataset(const ExperimentConfig& cfg) {
  IqSimulation sim;
  sim.n_ground = cfg.n_ground;
  sim.n_excited = cfg.n_excited;
  sim.n_segments = cfg.sim.n_segments;
  sim.gamma01_hz = cfg.sim.gamma01_hz;
  sim.pre_delay_s = cfg.sim.pre_delay_s;
  sim.seed = cfg.seed;
  return simulate_iq_dataset(simulation_model(cfg.sim), sim);
}

Dataset training_subset(const Dataset& data, std::size_t per_class) {
  if (per_class == 0) return data;
  std::vector<std::size_t> idx;
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t k = 0; k < data.shots.size(); ++k) {
    std::size_t& n = data.shots[k].prepared_label == 0 ? n0 : n1;
    if (n < per_class) {
      idx.push_back(k);
      ++n;
    }
  }
  return data.subset(idx);
}

BaumWelchResult train_hmm(const Dataset& data, std::size_t threads) {
  BaumWelchOptions opts;
  opts.threads = threads;
  return baum_welch(data.sequences(), 2, InitStrategy::labeled(data.labels()), opts);
}

std::size_t state_for_label(const HmmModel& model, const Dataset& data, int label) {
  double si = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : data.shots) {
    if (s.prepared_label != label) continue;
    si += s.obs[0].i;
    sq += s.obs[0].q;
    ++n;
  }
  if (n == 0) throw InputError("state_for_label: no shots with label " + std::to_string(label));
  const IqPoint c{si / static_cast<double>(n), sq / static_cast<double>(n)};
  std::size_t best = 0;
  for (std::size_t d = 1; d < model.n_states(); ++d) {
    if (dist_sq(model.emission(d).mean(), c) < dist_sq(model.emission(best).mean(), c)) best = d;
  }
  return best;
}

json BootstrapStats::to_json() const {
  return {{"n_states", n_states},       {"n_used", n_used},           {"n_flagged", n_flagged},
          {"degenerate", degenerate},   {"trans_mean", trans_mean},   {"trans_std", trans_std},
          {"means_mean", means_mean},   {"means_std", means_std},     {"priors_mean", priors_mean},
          {"priors_std", priors_std},   {"mean_separation", mean_separation}};
}

BootstrapStats run_bootstrap(const Dataset& data, const ExperimentConfig& cfg, const HmmModel& reference) {
  std::vector<std::size_t> pool[2];
  for (std::size_t k = 0; k < data.shots.size(); ++k) {
    const int label = data.shots[k].prepared_label;
    if (label == 0 || label == 1) pool[label].push_back(k);
  }
  const std::size_t m = cfg.bootstrap.subset_size;
  if (pool[0].size() < m || pool[1].size() < m) {
    throw InputError("run_bootstrap: dataset has " + std::to_string(pool[0].size()) + " ground and " +
                     std::to_string(pool[1].size()) + " excited shots; subset size is " + std::to_string(m));
  }
  const std::size_t n_res = cfg.bootstrap.n_resamples;
  std::vector<std::optional<HmmModel>> models(n_res);
  std::vector<char> flagged(n_res, 0);
  parallel_for(n_res, cfg.threads, [&](std::size_t r) {
    Rng rng(cfg.seed, r);
    std::vector<std::size_t> idx;
    idx.reserve(2 * m);
    for (int c = 0; c < 2; ++c) {
      for (std::size_t j = 0; j < m; ++j) idx.push_back(pool[c][rng.uniform_index(pool[c].size())]);
    }
    const Dataset sub = data.subset(idx);
    const BaumWelchResult fit = train_hmm(sub, 1);
    bool ambiguous = false;
    const auto perm = align_states(fit.model, reference, &ambiguous);
    flagged[r] = ambiguous ? 1 : 0;
    models[r] = fit.model.permuted(perm);
  });

  BootstrapStats st;
  const std::size_t n = reference.n_states();
  st.n_states = n;
  std::vector<std::vector<double>> trans(n * n), means(n * 2), priors(n);
  for (std::size_t r = 0; r < n_res; ++r) {
    if (flagged[r]) {
      ++st.n_flagged;
      continue;
    }
    const HmmModel& mdl = *models[r];
    ++st.n_used;
    for (std::size_t a = 0; a < n; ++a) {
      priors[a].push_back(mdl.prior(a));
      means[2 * a].push_back(mdl.emission(a).mean().i);
      means[2 * a + 1].push_back(mdl.emission(a).mean().q);
      for (std::size_t b = 0; b < n; ++b) trans[a * n + b].push_back(mdl.trans(a, b));
    }
  }
  st.degenerate = st.n_used < 2;
  auto fill = [&](const std::vector<std::vector<double>>& v, std::vector<double>& mean, std::vector<double>& sd) {
    for (const auto& s : v) {
      mean.push_back(mean_of(s));
      sd.push_back(st.degenerate ? 0.0 : sample_std(s));
    }
  };
  fill(trans, st.trans_mean, st.trans_std);
  fill(means, st.means_mean, st.means_std);
  fill(priors, st.priors_mean, st.priors_std);
  if (n >= 2) st.mean_separation = std::sqrt(dist_sq(reference.emission(0).mean(), reference.emission(1).mean()));
  return st;
}

LinearFit fit_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("fit_through_origin: need >= 2 paired points");
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  if (!(sxx > 0.0)) throw DomainError("fit_through_origin: all x are zero");
  LinearFit fit;
  fit.slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) rss += (y[k] - fit.slope * x[k]) * (y[k] - fit.slope * x[k]);
  fit.slope_se = std::sqrt(rss / static_cast<double>(x.size() - 1) / sxx);
  return fit;
}

T1Sweep run_t1_sweep(const ExperimentConfig& cfg) {
  if (cfg.t1_grid_s.empty()) throw InputError("run_t1_sweep: empty T1 grid");
  for (double t : cfg.t1_grid_s) {
    if (!(t > 0.0)) throw InputError("run_t1_sweep: T1 grid values must be positive");
  }
  const std::size_t n_pts = cfg.t1_grid_s.size();
  std::vector<double> a11(n_pts), learned(n_pts);
  std::vector<char> bad(n_pts, 0);
  parallel_for(n_pts, cfg.threads, [&](std::size_t p) {
    ExperimentConfig local = cfg;
    local.sim.t1_eff_s = cfg.t1_grid_s[p];
    local.seed = derive_seed(cfg.seed, p);
    const Dataset data = simulate_experiment_dataset(local);
    const bool labeled = data.count_label(0) >= 3 && data.count_label(1) >= 3;
    const InitStrategy init = labeled ? InitStrategy::labeled(data.labels()) : InitStrategy::kmeans(local.seed);
    const BaumWelchResult fit = baum_welch(data.sequences(), 2, init);
    const std::size_t e = state_for_label(fit.model, data, 1);
    const std::size_t perm[2] = {1 - e, e};
    const HmmModel m = fit.model.permuted(perm);
    a11[p] = m.trans(1, 1);
    try {
      learned[p] = extract_t1_eff(m);
    } catch (const DomainError&) {
      learned[p] = std::numeric_limits<double>::infinity();
    }
    bad[p] = !fit.converged || !std::isfinite(learned[p]);
  });

  T1Sweep out;
  out.sweep.x_name = "t1_true_s";
  out.sweep.x = cfg.t1_grid_s;
  out.sweep.add_series("t1_learned_s", false).y = learned;
  out.sweep.add_series("a11", false).y = a11;
  std::vector<double> xs, ys, diff, rel;
  for (std::size_t p = 0; p < n_pts; ++p) {
    out.flagged.push_back(bad[p] != 0);
    if (bad[p]) continue;
    xs.push_back(cfg.t1_grid_s[p]);
    ys.push_back(learned[p]);
    diff.push_back(learned[p] - cfg.t1_grid_s[p]);
    rel.push_back(diff.back() / cfg.t1_grid_s[p]);
  }
  if (xs.size() >= 2) out.fit = fit_through_origin(xs, ys);
  out.mean_diff_s = mean_of(diff);
  out.std_diff_s = sample_std(diff);
  out.std_rel_diff = sample_std(rel);
  out.sweep.metadata = {{"flagged", out.flagged}, {"shots_ground", cfg.n_ground}, {"shots_excited", cfg.n_excited}};
  return out;
}

SweepResult run_fidelity_vs_time(const Dataset& data, const Dataset& train, const HmmModel& model,
                                 const std::vector<double>& readout_times_s, const ExperimentConfig& cfg) {
  if (!ascending(readout_times_s)) throw InputError("run_fidelity_vs_time: readout times must be ascending");
  const double dt = data.dt_seconds;
  const std::size_t max_len = std::min(shortest_shot(data), shortest_shot(train));
  json warnings = json::array();
  std::vector<double> times;
  std::vector<std::size_t> lengths;
  for (double t : readout_times_s) {
    const std::size_t n = segments_in(t, dt);
    if (n == 0) {
      warnings.push_back("readout time " + format_double(t) + " s is shorter than one segment; skipped");
      continue;
    }
    if (n > max_len) throw InputError("run_fidelity_vs_time: readout time exceeds the shot duration");
    times.push_back(t);
    lengths.push_back(n);
  }

  const HmmClassifier hmm(model);
  const std::size_t n_shots = data.shots.size();
  const std::size_t n_t = times.size();
  constexpr int kClassifiers = 3;
  const char* names[kClassifiers] = {"hmm", "mvg", "svm"};
  // wrong[t][c][shot] = 1 when classifier c mislabels the shot at time t.
  std::vector<std::vector<std::vector<char>>> wrong(n_t, std::vector<std::vector<char>>(kClassifiers));
  std::vector<std::vector<ConfusionMatrix>> cms(n_t, std::vector<ConfusionMatrix>(kClassifiers, ConfusionMatrix(2)));

  parallel_for(n_t, cfg.threads, [&](std::size_t ti) {
    const std::size_t n = lengths[ti];
    std::vector<LabeledPoint> pts;
    pts.reserve(train.shots.size());
    for (const auto& s : train.shots) pts.push_back({window_mean(s.obs, n), s.prepared_label});
    const MvgClassifier mvg = mvg_train(pts);
    const SvmClassifier svm = svm_train(pts);
    for (auto& w : wrong[ti]) w.assign(n_shots, 0);
    for (std::size_t k = 0; k < n_shots; ++k) {
      const ShotRecord& s = data.shots[k];
      const IqPoint p = window_mean(s.obs, n);
      const int labels[kClassifiers] = {static_cast<int>(hmm.classify(s.obs, times[ti]).assigned_label),
                                        mvg_classify(mvg, p).label, svm_classify(svm, p).label};
      for (int c = 0; c < kClassifiers; ++c) {
        cms[ti][c].add(static_cast<std::size_t>(s.prepared_label), static_cast<std::size_t>(labels[c]));
        wrong[ti][c][k] = labels[c] != s.prepared_label;
      }
    }
  });

  std::vector<std::size_t> pool[2];
  for (std::size_t k = 0; k < n_shots; ++k) pool[data.shots[k].prepared_label == 0 ? 0 : 1].push_back(k);
  const std::size_t draws = cfg.bootstrap.n_resamples;

  SweepResult out;
  out.x_name = "readout_time_s";
  out.x = times;
  for (int c = 0; c < kClassifiers; ++c) out.add_series(std::string(names[c]) + "_fidelity", true);
  for (int c = 0; c < kClassifiers; ++c) out.add_series(std::string(names[c]) + "_error", true);
  json counts = json::array();
  for (std::size_t ti = 0; ti < n_t; ++ti) {
    std::vector<double> fid[kClassifiers], err[kClassifiers];
    for (std::size_t d = 0; d < draws; ++d) {
      Rng rng(derive_seed(cfg.seed, ti), d);
      std::size_t miss[kClassifiers][2] = {};
      for (int label = 0; label < 2; ++label) {
        for (std::size_t j = 0; j < pool[label].size(); ++j) {
          const std::size_t k = pool[label][rng.uniform_index(pool[label].size())];
          for (int c = 0; c < kClassifiers; ++c) miss[c][label] += static_cast<std::size_t>(wrong[ti][c][k]);
        }
      }
      for (int c = 0; c < kClassifiers; ++c) {
        const double p10 = static_cast<double>(miss[c][0]) / static_cast<double>(pool[0].size());
        const double p01 = static_cast<double>(miss[c][1]) / static_cast<double>(pool[1].size());
        fid[c].push_back(1.0 - p01);
        err[c].push_back(0.5 * (p01 + p10));
      }
    }
    json row = {{"readout_time_s", times[ti]}, {"segments", lengths[ti]}};
    for (int c = 0; c < kClassifiers; ++c) {
      Series& f = out.series[c];
      Series& e = out.series[kClassifiers + c];
      f.y.push_back(excited_assignment_fidelity(cms[ti][c]));
      f.err.push_back(sample_std(fid[c]));
      e.y.push_back(total_classification_error(cms[ti][c]));
      e.err.push_back(sample_std(err[c]));
      row[names[c]] = cms[ti][c].to_json();
    }
    counts.push_back(row);
  }
  out.metadata = {{"counts", counts},
                  {"warnings", warnings},
                  {"error_bars", "bootstrap standard deviation over shots, " + std::to_string(draws) + " draws"},
                  {"shots_ground", pool[0].size()},
                  {"shots_excited", pool[1].size()}};
  return out;
}

SweepResult run_efficiency_curve(const Dataset& data, const HmmModel& model, const MvgClassifier& mvg,
                                 const std::vector<double>& thresholds, double t_int_hmm_s, double t_int_mvg_s) {
  if (!ascending(thresholds)) throw InputError("run_efficiency_curve: thresholds must be ascending");
  const std::size_t n_mvg = segments_in(t_int_mvg_s, data.dt_seconds);
  if (n_mvg == 0 || segments_in(t_int_hmm_s, data.dt_seconds) == 0) {
    throw InputError("run_efficiency_curve: integration time shorter than one segment");
  }
  if (n_mvg > shortest_shot(data)) throw InputError("run_efficiency_curve: MVG window exceeds the shot duration");
  const HmmClassifier hmm(model);
  std::vector<double> conf[2];
  std::vector<char> correct[2];
  for (const auto& s : data.shots) {
    if (s.prepared_label != 1) continue;
    const ShotClassification h = hmm.classify(s.obs, t_int_hmm_s);
    conf[0].push_back(h.start_probability);
    correct[0].push_back(h.assigned_label == 1);
    const MvgDecision m = mvg_classify(mvg, window_mean(s.obs, n_mvg));
    conf[1].push_back(m.posterior);
    correct[1].push_back(m.label == 1);
  }
  if (conf[0].empty()) throw InputError("run_efficiency_curve: no excited-prepared shots");

  SweepResult out;
  out.x_name = "threshold";
  out.x = thresholds;
  const char* names[2] = {"hmm", "mvg"};
  for (int c = 0; c < 2; ++c) {
    Series& eff = out.add_series(std::string(names[c]) + "_efficiency", false);
    Series& fid = out.add_series(std::string(names[c]) + "_fidelity", true);
    for (double th : thresholds) {
      const Rejection r = reject_low_probability(conf[c], th);
      eff.y.push_back(r.efficiency);
      if (r.accepted.empty()) {
        fid.y.push_back(kNaN);
        fid.err.push_back(kNaN);
        continue;
      }
      std::size_t ok = 0;
      for (std::size_t k : r.accepted) ok += static_cast<std::size_t>(correct[c][k]);
      const double f = static_cast<double>(ok) / static_cast<double>(r.accepted.size());
      fid.y.push_back(f);
      fid.err.push_back(std::sqrt(f * (1.0 - f) / static_cast<double>(r.accepted.size())));
    }
  }
  out.metadata = {{"t_int_hmm_s", t_int_hmm_s},
                  {"t_int_mvg_s", t_int_mvg_s},
                  {"shots_excited", conf[0].size()},
                  {"population", "excited-prepared shots"},
                  {"error_bars", "binomial standard error of the accepted subset"}};
  return out;
}

ExponentialFit fit_exponential(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) throw InputError("fit_exponential: need >= 3 paired points");
  // Start from the log-linear fit of the positive points.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(y[k] > 0.0)) continue;
    const double ly = std::log(y[k]);
    sx += x[k];
    sy += ly;
    sxx += x[k] * x[k];
    sxy += x[k] * ly;
    ++n_pos;
  }
  if (n_pos < 2) throw DomainError("fit_exponential: need >= 2 positive values");
  const double np = static_cast<double>(n_pos);
  const double denom = np * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0)) throw DomainError("fit_exponential: x values are all equal");
  double rate = -(np * sxy - sx * sy) / denom;
  double amp = std::exp((sy + rate * sx) / np);

  // Gauss-Newton on (amp, rate).
  double jtj[2][2] = {}, rss = 0.0;
  for (int it = 0; it < 100; ++it) {
    double g[2] = {0.0, 0.0};
    jtj[0][0] = jtj[0][1] = jtj[1][1] = 0.0;
    rss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double e = std::exp(-rate * x[k]);
      const double r = y[k] - amp * e;
      const double j0 = e, j1 = -amp * x[k] * e;
      jtj[0][0] += j0 * j0;
      jtj[0][1] += j0 * j1;
      jtj[1][1] += j1 * j1;
      g[0] += j0 * r;
      g[1] += j1 * r;
      rss += r * r;
    }
    const double det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[0][1];
    if (!(det > 0.0)) break;
    const double d0 = (jtj[1][1] * g[0] - jtj[0][1] * g[1]) / det;
    const double d1 = (jtj[0][0] * g[1] - jtj[0][1] * g[0]) / det;
    amp += d0;
    rate += d1;
    if (std::abs(d0) <= 1e-14 * std::abs(amp) && std::abs(d1) <= 1e-14 * std::abs(rate)) break;
  }
  if (!(rate > 0.0)) throw DomainError("fit_exponential: fitted decay rate is not positive");
  const double det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[0][1];
  const double s2 = x.size() > 2 ? rss / static_cast<double>(x.size() - 2) : 0.0;
  const double var_rate = det > 0.0 ? s2 * jtj[0][0] / det : kNaN;
  ExponentialFit fit;
  fit.amplitude = amp;
  fit.tau_s = 1.0 / rate;
  fit.tau_se_s = std::sqrt(var_rate) / (rate * rate);
  return fit;
}

PriorsSweep run_priors_start_sweep(const Dataset& data, const HmmModel& warm_start,
                                   const std::vector<double>& start_times_s, const ExperimentConfig& cfg) {
  if (!ascending(start_times_s)) throw InputError("run_priors_start_sweep: start times must be ascending");
  if (start_times_s.size() < 3) throw InputError("run_priors_start_sweep: need >= 3 start times for the fit");
  std::vector<std::size_t> excited;
  for (std::size_t k = 0; k < data.shots.size(); ++k) {
    if (data.shots[k].prepared_label == 1) excited.push_back(k);
  }
  const Dataset ex = data.subset(excited);
  const std::size_t len = shortest_shot(ex);
  const std::size_t e_state = state_for_label(warm_start, data, 1);
  const HmmModel start = warm_start.with_uniform_priors();
  const std::size_t n_pts = start_times_s.size();
  std::vector<double> x(n_pts), pi(n_pts);
  std::vector<char> ok(n_pts, 0);
  for (std::size_t p = 0; p < n_pts; ++p) {
    const std::size_t drop = segments_in(start_times_s[p], data.dt_seconds);
    if (drop + 2 > len) throw InputError("run_priors_start_sweep: start time beyond the shot duration");
    x[p] = static_cast<double>(drop) * data.dt_seconds;
  }
  parallel_for(n_pts, cfg.threads, [&](std::size_t p) {
    const std::size_t drop = segments_in(start_times_s[p], data.dt_seconds);
    const Dataset cut = ex.dropped_front(drop);
    const BaumWelchResult fit = baum_welch(cut.sequences(), start.n_states(), InitStrategy::from(start));
    pi[p] = fit.model.prior(e_state);
    ok[p] = fit.converged;
  });
  PriorsSweep out;
  out.sweep.x_name = "start_time_s";
  out.sweep.x = x;
  out.sweep.add_series("pi_excited", false).y = pi;
  out.fit = fit_exponential(x, pi);
  std::vector<bool> conv(ok.begin(), ok.end());
  out.sweep.metadata = {{"converged", conv}, {"shots_excited", ex.shots.size()}};
  return out;
}

std::vector<FilteredFidelityRow> run_filtered_fidelity(const Dataset& data, const HmmModel& model,
                                                       const std::vector<double>& t_int_s,
                                                       const ExperimentConfig& cfg, bool include_split) {
  const HmmModel uniform = model.with_uniform_priors();
  const std::size_t len = shortest_shot(data);
  std::vector<FilteredFidelityRow> rows(t_int_s.size());
  for (std::size_t r = 0; r < t_int_s.size(); ++r) {
    const std::size_t n = segments_in(t_int_s[r], data.dt_seconds);
    if (n == 0 || n > len) throw InputError("run_filtered_fidelity: integration time outside the shot");
    std::vector<IqPoint> raw[2], filt[2];
    std::size_t split = 0;
    for (const auto& s : data.shots) {
      const ObservationSequence win = s.obs.prefix(n);
      raw[s.prepared_label == 0 ? 0 : 1].push_back(window_mean(win, n));
      const StatePosterior post = forward_backward(uniform, win);
      const auto sections = hmm_filtered_demodulate(win, post);
      if (sections.size() != 1) ++split;
      if (sections.size() != 1 && !include_split) continue;
      for (const auto& sec : sections) {
        if (sec.state <= 1) filt[sec.state].push_back(sec.mean);
      }
    }
    FilteredFidelityRow& row = rows[r];
    row.t_int_s = t_int_s[r];
    row.n_split_shots = split;
    row.n_filtered_points = filt[0].size() + filt[1].size();
    const Projection pr = project_onto_centroid_axis(raw[0], raw[1]);
    const Projection pf = project_onto_centroid_axis(filt[0], filt[1]);
    row.ideal = fit_equal_variance_gaussians(pr.s0, pr.s1, FitMode::kDouble);
    row.filtered = fit_equal_variance_gaussians(pf.s0, pf.s1, FitMode::kSingle);
    if (cfg.fit_bootstrap_draws >= 2) {
      const std::uint64_t seed = derive_seed(cfg.seed, r);
      row.ideal_err = bootstrap_fit_fidelity(pr.s0, pr.s1, FitMode::kDouble, cfg.fit_bootstrap_draws, seed);
      row.filtered_err = bootstrap_fit_fidelity(pf.s0, pf.s1, FitMode::kSingle, cfg.fit_bootstrap_draws, seed + 1);
    }
  }
  return rows;
}

std::vector<std::string> experiment_names() {
  return {"bootstrap", "efficiency", "fidelity-vs-time", "filtered-fidelity", "priors-sweep", "t1-sweep"};
}

void write_experiment_outputs(const std::filesystem::path& dir, const std::string& name, const ExperimentConfig& cfg,
                              const SweepResult& sweep, const json& summary) {
  write_file_atomic(dir / "config.json", dump_json(cfg.to_json()));
  write_file_atomic(dir / (name + ".csv"), sweep.to_csv());
  write_file_atomic(dir / "summary.json", dump_json(summary));
}

namespace {

std::vector<double> scaled(std::initializer_list<double> factors, double unit) {
  std::vector<double> v;
  for (double f : factors) v.push_back(f * unit);
  return v;
}

json fit_json(const ProjectedFit& fit, const FidelityUncertainty& err) {
  return {{"fidelity", fit.fidelity()},   {"fidelity_std", err.fidelity_std}, {"r_value", fit.r_value},
          {"mu0", fit.mu0},               {"mu1", fit.mu1},                   {"sigma", fit.sigma},
          {"weights", {{fit.weights[0][0], fit.weights[0][1]}, {fit.weights[1][0], fit.weights[1][1]}}},
          {"weight_clamped", fit.weight_clamped}, {"pooled_variance", fit.pooled_variance},
          {"r_value_pooled", fit.r_value_pooled}};
}

}  // namespace

json run_named_experiment(const std::string& name, const ExperimentConfig& config) {
  const auto names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw InputError("unknown experiment '" + name + "'; available: " + list);
  }
  ExperimentConfig cfg = config;
  const double t1 = cfg.sim.t1_eff_s;
  if (cfg.t_int_hmm_s <= 0.0) cfg.t_int_hmm_s = 0.10 * t1;
  if (cfg.t_int_mvg_s <= 0.0) cfg.t_int_mvg_s = 0.05 * t1;
  cfg.validate();

  SweepResult sweep;
  json summary = {{"experiment", name}, {"seed", cfg.seed}};

  if (name == "t1-sweep") {
    if (cfg.t1_grid_s.empty()) cfg.t1_grid_s = scaled({2, 4, 6, 8, 10, 12, 14, 16}, 1e-6);
    const T1Sweep res = run_t1_sweep(cfg);
    sweep = res.sweep;
    summary["slope"] = res.fit.slope;
    summary["slope_se"] = res.fit.slope_se;
    summary["mean_diff_s"] = res.mean_diff_s;
    summary["std_diff_s"] = res.std_diff_s;
    summary["std_rel_diff"] = res.std_rel_diff;
    summary["n_flagged"] = std::count(res.flagged.begin(), res.flagged.end(), true);
  } else {
    const Dataset data = simulate_experiment_dataset(cfg);
    const Dataset train = training_subset(data, cfg.train_per_class);
    if (name == "bootstrap") {
      const BaumWelchResult ref = train_hmm(train, cfg.threads);
      const BootstrapStats st = run_bootstrap(data, cfg, ref.model);
      sweep.x_name = "parameter_index";
      json labels = json::array();
      Series mean{"mean", {}, {}}, sd{"std", {}, {}};
      auto push = [&](const std::string& label, const std::vector<double>& m, const std::vector<double>& s, std::size_t k) {
        labels.push_back(label);
        sweep.x.push_back(static_cast<double>(sweep.x.size()));
        mean.y.push_back(m[k]);
        sd.y.push_back(s[k]);
      };
      const std::size_t n = st.n_states;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
          push("a" + std::to_string(a) + std::to_string(b), st.trans_mean, st.trans_std, a * n + b);
        }
      }
      for (std::size_t a = 0; a < n; ++a) {
        push("mean_i_" + std::to_string(a), st.means_mean, st.means_std, 2 * a);
        push("mean_q_" + std::to_string(a), st.means_mean, st.means_std, 2 * a + 1);
      }
      for (std::size_t a = 0; a < n; ++a) push("prior_" + std::to_string(a), st.priors_mean, st.priors_std, a);
      sweep.series = {mean, sd};
      sweep.metadata = {{"parameters", labels}};
      summary["stats"] = st.to_json();
      summary["max_trans_std"] = *std::max_element(st.trans_std.begin(), st.trans_std.end());
      summary["max_mean_std_over_separation"] =
          *std::max_element(st.means_std.begin(), st.means_std.end()) / st.mean_separation;
    } else if (name == "fidelity-vs-time") {
      if (cfg.readout_times_s.empty()) {
        cfg.readout_times_s = scaled({1, 2, 3, 4, 6, 9, 12, 18, 27, 40, 60, 90, 120, 150, 180, 210, 240}, cfg.sim.dt_s);
      }
      const BaumWelchResult model = train_hmm(train, cfg.threads);
      sweep = run_fidelity_vs_time(data, train, model.model, cfg.readout_times_s, cfg);
      const Series& he = sweep.get("hmm_error");
      std::vector<double> plateau;
      double spread_lo = 1.0, spread_hi = 0.0;
      for (std::size_t k = 0; k < sweep.x.size(); ++k) {
        if (sweep.x[k] >= 0.1 * t1 && sweep.x[k] <= 1.3 * t1) plateau.push_back(he.y[k]);
        if (sweep.x[k] >= 1e-6) {
          spread_lo = std::min(spread_lo, he.y[k]);
          spread_hi = std::max(spread_hi, he.y[k]);
        }
      }
      std::sort(plateau.begin(), plateau.end());
      summary["hmm_error_plateau"] = plateau.empty() ? kNaN : plateau[plateau.size() / 2];
      summary["hmm_error_spread_beyond_1us"] = spread_hi >= spread_lo ? spread_hi - spread_lo : kNaN;
      for (const char* c : {"mvg", "svm"}) {
        const Series& e = sweep.get(std::string(c) + "_error");
        const auto it = std::min_element(e.y.begin(), e.y.end());
        summary[std::string(c) + "_error_min"] = *it;
        summary[std::string(c) + "_error_min_time_s"] = sweep.x[static_cast<std::size_t>(it - e.y.begin())];
      }
      summary["error_bars"] = sweep.metadata["error_bars"];
    } else if (name == "efficiency") {
      if (cfg.thresholds.empty()) cfg.thresholds = {0.0, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.995, 0.999};
      const BaumWelchResult model = train_hmm(train, cfg.threads);
      const std::size_t n_mvg = segments_in(cfg.t_int_mvg_s, data.dt_seconds);
      std::vector<LabeledPoint> pts;
      for (const auto& s : train.shots) pts.push_back({window_mean(s.obs, n_mvg), s.prepared_label});
      const MvgClassifier mvg = mvg_train(pts);
      sweep = run_efficiency_curve(data, model.model, mvg, cfg.thresholds, cfg.t_int_hmm_s, cfg.t_int_mvg_s);
      summary["t_int_hmm_s"] = cfg.t_int_hmm_s;
      summary["t_int_mvg_s"] = cfg.t_int_mvg_s;
      summary["hmm_fidelity_at_zero"] = sweep.get("hmm_fidelity").y.front();
      summary["mvg_fidelity_at_zero"] = sweep.get("mvg_fidelity").y.front();
    } else if (name == "priors-sweep") {
      if (cfg.start_times_s.empty()) cfg.start_times_s = scaled({0, 1, 2, 3, 4, 5, 6, 7, 8}, 1e-6);
      const BaumWelchResult model = train_hmm(train, cfg.threads);
      const PriorsSweep res = run_priors_start_sweep(data, model.model, cfg.start_times_s, cfg);
      sweep = res.sweep;
      summary["t1_eff_fit_s"] = res.fit.tau_s;
      summary["t1_eff_fit_se_s"] = res.fit.tau_se_s;
      summary["amplitude"] = res.fit.amplitude;
      summary["t1_eff_generator_s"] = t1;
    } else {  // filtered-fidelity
      if (cfg.readout_times_s.empty()) cfg.readout_times_s = {0.72e-6, 1.2e-6, 2.16e-6};
      const BaumWelchResult model = train_hmm(train, cfg.threads);
      const auto rows = run_filtered_fidelity(data, model.model, cfg.readout_times_s, cfg);
      sweep.x_name = "t_int_s";
      Series& ideal = sweep.add_series("ideal_fidelity", true);
      Series& filt = sweep.add_series("hmm_filtered_fidelity", true);
      json detail = json::array();
      for (const auto& r : rows) {
        sweep.x.push_back(r.t_int_s);
        ideal.y.push_back(r.ideal.fidelity());
        ideal.err.push_back(r.ideal_err.fidelity_std);
        filt.y.push_back(r.filtered.fidelity());
        filt.err.push_back(r.filtered_err.fidelity_std);
        detail.push_back({{"t_int_s", r.t_int_s},
                          {"ideal", fit_json(r.ideal, r.ideal_err)},
                          {"hmm_filtered", fit_json(r.filtered, r.filtered_err)},
                          {"n_filtered_points", r.n_filtered_points},
                          {"n_split_shots", r.n_split_shots}});
      }
      summary["rows"] = detail;
    }
  }
  summary["outputs"] = {"config.json", name + ".csv", "summary.json"};
  write_experiment_outputs(cfg.output_dir, name, cfg, sweep, summary);
  return summary;
}

}  // namespace qhmm
