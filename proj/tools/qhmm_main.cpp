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

// qhmm: simulate, train, classify, evaluate and run experiments.
//
// Exit codes: 0 ok, 2 usage, 3 input or schema error, 4 numerical failure.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qhmm/classifiers.hpp"
#include "qhmm/dataset.hpp"
#include "qhmm/error.hpp"
#include "qhmm/experiments.hpp"
#include "qhmm/file_util.hpp"
#include "qhmm/metrics.hpp"
#include "qhmm/model_io.hpp"
#include "qhmm/rng.hpp"
#include "qhmm/signal.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> dt;
  std::optional<double> t_int;
  std::size_t n_states = 2;
  std::string init = "labeled-means";
  std::size_t threads = 1;
  std::string data;
  std::string model;
  std::string classifier = "hmm";
  std::string experiment;
  std::size_t traces = 0;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw qhmm::InputError(std::string("missing ") + what + " path");
  if (!fs::is_regular_file(path)) throw qhmm::InputError(std::string(what) + " not found: " + path);
}

void require_output_file(const std::string& path) {
  if (path.empty()) throw qhmm::InputError("missing --out path");
  const fs::path parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent)) throw qhmm::InputError("output directory does not exist: " + parent.string());
}

fs::path prepare_output_dir(const std::string& path) {
  if (path.empty()) throw qhmm::InputError("missing --out directory");
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec || !fs::is_directory(path)) throw qhmm::InputError("cannot create output directory: " + path);
  return path;
}

qhmm::ExperimentConfig load_config(const Options& opt) {
  json doc = json::object();
  if (!opt.config.empty()) doc = qhmm::parse_json(qhmm::read_file(opt.config), opt.config);
  qhmm::ExperimentConfig cfg = qhmm::ExperimentConfig::from_json(doc);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.dt) cfg.sim.dt_s = *opt.dt;
  cfg.threads = opt.threads;
  cfg.validate();
  return cfg;
}

qhmm::Dataset load_data(const Options& opt) {
  qhmm::Dataset data = qhmm::load_dataset(opt.data);
  if (opt.dt && std::abs(*opt.dt - data.dt_seconds) > 1e-9 * data.dt_seconds) {
    throw qhmm::InputError("dataset segment duration " + qhmm::format_double(data.dt_seconds) +
                           " s differs from --dt " + qhmm::format_double(*opt.dt) + " s");
  }
  return data;
}

std::string counts_table(const std::vector<std::size_t>& rows) {
  std::ostringstream out;
  out << "prepared_label,ground,excited,transition\n";
  for (int label = 0; label < 2; ++label) {
    out << label << ',' << rows[3 * label] << ',' << rows[3 * label + 1] << ',' << rows[3 * label + 2] << '\n';
  }
  return out.str();
}

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  fs::path p = path;
  p.replace_extension();
  p += suffix;
  return p;
}

int cmd_simulate(const Options& opt) {
  if (!opt.config.empty()) require_file(opt.config, "config");
  const qhmm::ExperimentConfig cfg = load_config(opt);
  const fs::path dir = prepare_output_dir(opt.out);
  qhmm::Dataset data = qhmm::simulate_experiment_dataset(cfg);
  qhmm::write_file_atomic(dir / "config.json", qhmm::dump_json(cfg.to_json()));
  if (opt.traces > 0) {
    const qhmm::HmmModel model = qhmm::simulation_model(cfg.sim);
    qhmm::TraceParams tp;
    tp.sample_rate_hz = data.sample_rate_hz;
    tp.if_freq_hz = data.if_freq_hz;
    tp.duration_s = static_cast<double>(cfg.sim.n_segments) * cfg.sim.dt_s;
    for (const auto& g : model.emissions()) {
      tp.tones.push_back({std::hypot(g.mean().i, g.mean().q), -std::atan2(g.mean().q, g.mean().i)});
    }
    // Per-sample noise that demodulates to unit variance per segment.
    const double m = cfg.sim.dt_s * tp.sample_rate_hz;
    tp.noise_sigma = std::sqrt(m / 2.0);
    const fs::path trace_dir = prepare_output_dir((dir / "traces").string());
    const std::size_t n = std::min(opt.traces, data.shots.size());
    for (std::size_t k = 0; k < n; ++k) {
      tp.seed = qhmm::derive_seed(cfg.seed ^ 0x7472616365ULL, k);
      const qhmm::RawTrace trace = qhmm::synthesize_trace(tp, data.shots[k].true_states, cfg.sim.dt_s);
      qhmm::save_raw_trace(trace_dir / ("shot_" + std::to_string(data.shots[k].shot_id) + ".qrt"), trace);
    }
  }
  qhmm::save_dataset(dir / "dataset.csv", data);
  std::cout << "wrote " << data.shots.size() << " shots x " << cfg.sim.n_segments << " segments to "
            << (dir / "dataset.csv").string() << "\n";
  return kExitOk;
}

int cmd_train(const Options& opt) {
  require_file(opt.data, "dataset");
  require_output_file(opt.out);
  const qhmm::Dataset data = load_data(opt);

  if (opt.classifier != "hmm") {
    if (!opt.t_int) throw qhmm::InputError("--t-int is required for mvg and svm classifiers");
    std::vector<qhmm::LabeledPoint> pts;
    pts.reserve(data.shots.size());
    for (const auto& s : data.shots) pts.push_back({qhmm::demodulate_window(s.obs, *opt.t_int), s.prepared_label});
    const qhmm::AnyClassifier clf =
        opt.classifier == "mvg" ? qhmm::AnyClassifier(qhmm::mvg_train(pts)) : qhmm::AnyClassifier(qhmm::svm_train(pts));
    qhmm::save_classifier(opt.out, clf);
    std::cout << "trained " << opt.classifier << " on " << pts.size() << " windows of "
              << qhmm::format_double(*opt.t_int) << " s\n";
    return kExitOk;
  }

  qhmm::InitStrategy init;
  if (opt.init == "labeled-means") {
    init = qhmm::InitStrategy::labeled(data.labels());
  } else {
    init = qhmm::InitStrategy::kmeans(opt.seed.value_or(0));
  }
  qhmm::BaumWelchOptions bw;
  bw.threads = opt.threads;
  const qhmm::BaumWelchResult res = qhmm::baum_welch(data.sequences(), opt.n_states, init, bw);

  std::ostringstream log;
  log << "iteration,log_likelihood,covariance_clamped\n";
  for (const auto& r : res.log) {
    if (!std::isfinite(r.log_likelihood)) throw qhmm::NumericalError("non-finite log-likelihood during training");
    log << r.iteration << ',' << qhmm::format_double(r.log_likelihood) << ',' << (r.covariance_clamped ? 1 : 0)
        << '\n';
  }
  qhmm::write_file_atomic(with_suffix(opt.out, ".log.csv"), log.str());
  qhmm::save_model(opt.out, res.model);

  std::cout << "iterations " << res.log.size() << ", converged " << (res.converged ? "yes" : "no")
            << ", log-likelihood " << qhmm::format_double(res.log.back().log_likelihood) << "\n";
  if (res.model.n_states() == 2 && res.model.trans(1, 1) > 0.0 && res.model.trans(1, 1) < 1.0) {
    std::cout << "T1_eff " << qhmm::format_double(qhmm::extract_t1_eff(res.model)) << " s, excitation rate "
              << qhmm::format_double(qhmm::extract_excitation_rate(res.model)) << " Hz\n";
  }
  return res.converged ? kExitOk : kExitNumerical;
}

struct Assignment {
  std::size_t label = 0;
  double confidence = 0.0;
  bool transition = false;
  std::optional<std::size_t> transition_index;
};

std::vector<Assignment> classify_all(const qhmm::AnyClassifier& clf, const qhmm::Dataset& data, double t_int) {
  std::vector<Assignment> out;
  out.reserve(data.shots.size());
  if (const auto* model = std::get_if<qhmm::HmmModel>(&clf)) {
    const qhmm::HmmClassifier hmm(*model);
    for (const auto& s : data.shots) {
      const qhmm::ShotClassification c = hmm.classify(s.obs, t_int);
      out.push_back({c.assigned_label, c.start_probability, c.transition_detected, c.transition_index});
    }
  } else if (const auto* mvg = std::get_if<qhmm::MvgClassifier>(&clf)) {
    for (const auto& s : data.shots) {
      const qhmm::MvgDecision d = qhmm::mvg_classify(*mvg, qhmm::demodulate_window(s.obs, t_int));
      out.push_back({static_cast<std::size_t>(d.label), d.posterior, false, std::nullopt});
    }
  } else {
    const auto& svm = std::get<qhmm::SvmClassifier>(clf);
    for (const auto& s : data.shots) {
      const qhmm::SvmDecision d = qhmm::svm_classify(svm, qhmm::demodulate_window(s.obs, t_int));
      out.push_back({static_cast<std::size_t>(d.label), d.margin, false, std::nullopt});
    }
  }
  return out;
}

double resolve_t_int(const Options& opt, const qhmm::Dataset& data) {
  double shortest = std::numeric_limits<double>::infinity();
  for (const auto& s : data.shots) shortest = std::min(shortest, s.obs.duration_seconds());
  const double t_int = opt.t_int.value_or(shortest);
  const std::size_t n = qhmm::segments_in(t_int, data.dt_seconds);
  if (n == 0) throw qhmm::InputError("--t-int is shorter than one segment");
  if (n == 1) std::cerr << "warning: --t-int covers a single segment; classification uses minimal information\n";
  return t_int;
}

int cmd_classify(const Options& opt) {
  require_file(opt.model, "model");
  require_file(opt.data, "dataset");
  require_output_file(opt.out);
  const qhmm::AnyClassifier clf = qhmm::load_classifier(opt.model);
  const qhmm::Dataset data = load_data(opt);
  const double t_int = resolve_t_int(opt, data);
  const std::vector<Assignment> res = classify_all(clf, data, t_int);

  std::ostringstream csv;
  csv << "shot_id,prepared_label,assigned_label,confidence,transition_detected,transition_index\n";
  std::vector<std::size_t> table(6, 0);
  for (std::size_t k = 0; k < res.size(); ++k) {
    const auto& s = data.shots[k];
    const auto& a = res[k];
    csv << s.shot_id << ',' << s.prepared_label << ',' << a.label << ',' << qhmm::format_double(a.confidence) << ','
        << (a.transition ? 1 : 0) << ',';
    if (a.transition_index) csv << *a.transition_index;
    csv << '\n';
    if (s.prepared_label == 0 || s.prepared_label == 1) {
      const std::size_t column = a.transition ? 2 : std::min<std::size_t>(a.label, 1);
      ++table[3 * static_cast<std::size_t>(s.prepared_label) + column];
    }
  }
  const std::string counts = counts_table(table);
  qhmm::write_file_atomic(opt.out, csv.str());
  qhmm::write_file_atomic(with_suffix(opt.out, ".counts.csv"), counts);
  std::cout << counts;
  return kExitOk;
}

int cmd_evaluate(const Options& opt) {
  require_file(opt.model, "model");
  require_file(opt.data, "dataset");
  require_output_file(opt.out);
  const qhmm::AnyClassifier clf = qhmm::load_classifier(opt.model);
  const qhmm::Dataset data = load_data(opt);
  const double t_int = resolve_t_int(opt, data);
  const std::vector<Assignment> res = classify_all(clf, data, t_int);

  qhmm::ConfusionMatrix cm(2);
  std::vector<qhmm::IqPoint> windows[2];
  for (std::size_t k = 0; k < res.size(); ++k) {
    const auto& s = data.shots[k];
    if (s.prepared_label != 0 && s.prepared_label != 1) continue;
    cm.add(static_cast<std::size_t>(s.prepared_label), std::min<std::size_t>(res[k].label, 1));
    windows[s.prepared_label].push_back(qhmm::demodulate_window(s.obs, t_int));
  }
  std::optional<qhmm::ProjectedFit> fit;
  if (windows[0].size() >= 10 && windows[1].size() >= 10) {
    const qhmm::Projection pr = qhmm::project_onto_centroid_axis(windows[0], windows[1]);
    fit = qhmm::fit_equal_variance_gaussians(pr.s0, pr.s1, qhmm::FitMode::kDouble);
  }
  const json errors = {{"p_0_given_1", cm.probability(0, 1)},
                       {"p_1_given_0", cm.probability(1, 0)},
                       {"total_error", qhmm::total_classification_error(cm)},
                       {"excited_fidelity", qhmm::excited_assignment_fidelity(cm)}};
  json report = qhmm::metrics_report(cm, fit, errors);
  report["t_int_s"] = t_int;
  qhmm::write_file_atomic(opt.out, qhmm::dump_json(report));
  std::cout << "assignment fidelity " << qhmm::format_double(qhmm::assignment_fidelity(cm)) << "\n";
  return kExitOk;
}

int cmd_experiment(const Options& opt) {
  if (!opt.config.empty()) require_file(opt.config, "config");
  qhmm::ExperimentConfig cfg = load_config(opt);
  const auto names = qhmm::experiment_names();
  if (std::find(names.begin(), names.end(), opt.experiment) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw qhmm::InputError("unknown experiment '" + opt.experiment + "'; available: " + list);
  }
  cfg.output_dir = prepare_output_dir(opt.out);
  const json summary = qhmm::run_named_experiment(opt.experiment, cfg);
  std::cout << qhmm::dump_json(summary);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden Markov model qubit readout: simulate, train, classify, evaluate, experiment"};
  app.require_subcommand(1);
  Options opt;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", opt.seed, "Random seed; overrides the config seed");
  };
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", opt.threads, "Worker threads, 0 = all cores; results do not depend on it")
        ->capture_default_str();
  };

  auto* sim = app.add_subcommand("simulate", "Simulate a labeled IQ dataset");
  sim->add_option("--config", opt.config, "Experiment config JSON (seed, shot_counts, simulation)");
  sim->add_option("--out", opt.out, "Output directory")->required();
  sim->add_option("--dt", opt.dt, "Segment duration in seconds (default 80e-9)");
  sim->add_option("--traces", opt.traces, "Also write raw digitizer traces for the first N shots")
      ->capture_default_str();
  add_seed(sim);

  auto* train = app.add_subcommand("train", "Train a classifier; Baum-Welch for hmm");
  train->add_option("--data", opt.data, "Dataset CSV (sidecar JSON next to it)")->required();
  train->add_option("--out", opt.out, "Output model JSON")->required();
  train->add_option("--n-states", opt.n_states, "Hidden states")->capture_default_str()->check(CLI::Range(2, 16));
  train->add_option("--init", opt.init, "Initialization: labeled-means or kmeans")
      ->capture_default_str()
      ->check(CLI::IsMember({"labeled-means", "kmeans"}));
  train->add_option("--classifier", opt.classifier, "hmm, mvg or svm")
      ->capture_default_str()
      ->check(CLI::IsMember({"hmm", "mvg", "svm"}));
  train->add_option("--t-int", opt.t_int, "Integration time in seconds (mvg and svm)");
  train->add_option("--dt", opt.dt, "Expected segment duration in seconds");
  add_seed(train);
  add_threads(train);

  auto* cls = app.add_subcommand("classify", "Classify every shot of a dataset");
  cls->add_option("--model", opt.model, "Classifier JSON (hmm, mvg or svm)")->required();
  cls->add_option("--data", opt.data, "Dataset CSV")->required();
  cls->add_option("--out", opt.out, "Output classification CSV")->required();
  cls->add_option("--t-int", opt.t_int, "Integration time in seconds (default: whole shot)");
  cls->add_option("--dt", opt.dt, "Expected segment duration in seconds");

  auto* eval = app.add_subcommand("evaluate", "Confusion matrix and fidelities of a classifier");
  eval->add_option("--model", opt.model, "Classifier JSON")->required();
  eval->add_option("--data", opt.data, "Dataset CSV")->required();
  eval->add_option("--out", opt.out, "Output metrics JSON")->required();
  eval->add_option("--t-int", opt.t_int, "Integration time in seconds (default: whole shot)");
  eval->add_option("--dt", opt.dt, "Expected segment duration in seconds");

  auto* exp = app.add_subcommand("experiment", "Run a named experiment on simulated data");
  exp->add_option("name", opt.experiment,
                  "bootstrap, efficiency, fidelity-vs-time, filtered-fidelity, priors-sweep or t1-sweep")
      ->required();
  exp->add_option("--config", opt.config, "Experiment config JSON");
  exp->add_option("--out", opt.out, "Output directory")->required();
  exp->add_option("--dt", opt.dt, "Segment duration in seconds");
  add_seed(exp);
  add_threads(exp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim) return cmd_simulate(opt);
    if (*train) return cmd_train(opt);
    if (*cls) return cmd_classify(opt);
    if (*eval) return cmd_evaluate(opt);
    return cmd_experiment(opt);
  } catch (const qhmm::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitInput;
  } catch (const qhmm::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const qhmm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const qhmm::DomainError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
