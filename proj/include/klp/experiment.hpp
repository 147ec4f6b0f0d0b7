#pragma once

#include "klp/core.hpp"
#include "klp/dataset.hpp"
#include "klp/graphs.hpp"
#include "klp/inductive.hpp"
#include "klp/kernel_lp.hpp"
#include "klp/labels.hpp"
#include "klp/model_io.hpp"
#include "klp/pnlp.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace klp {

enum class Method { kernel_lp, pnlp };

inline std::string to_string(Method m) { return m == Method::kernel_lp ? "kernel_lp" : "pnlp"; }

inline Method method_from_string(const std::string& s) {
  if (s == "kernel_lp") return Method::kernel_lp;
  if (s == "pnlp") return Method::pnlp;
  throw ConfigError("unknown method '" + s + "' (expected kernel_lp or pnlp)");
}

/// One benchmark protocol. Every field has a default; see README for the
/// JSON keys.
struct ExperimentConfig {
  Method method = Method::kernel_lp;
  KernelSpec kernel = KernelSpec::rbf(1e3);
  SolverConfig solver;
  PnlpConfig pnlp;
  InductiveConfig inductive;
  // Test-time rbf width for recons predictions; the model keeps its own
  // width unless recons_retrain asks for a second fit at this width.
  std::optional<double> recons_width = 1e2;
  bool recons_retrain = false;
  int labels_per_class = 2;
  std::optional<int> unlabeled_per_class;
  double test_fraction = 0.0;
  int runs = 15;
  std::uint64_t seed = 0;
  Normalization normalize = Normalization::minmax;
  // Aggregate only the best k runs (by transductive accuracy) when set.
  std::optional<int> best_k_of;
  // Candidate rbf widths; when non-empty `bench` picks the one with the best
  // mean transductive accuracy.
  std::vector<double> width_grid;
  // Sweep axes; empty axes fall back to the single configured value.
  std::vector<double> sweep_alpha;
  std::vector<double> sweep_beta;
  std::vector<double> sweep_width;

  void validate() const {
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (labels_per_class < 1) throw ConfigError("labels_per_class must be >= 1");
    if (unlabeled_per_class && *unlabeled_per_class < 0) throw ConfigError("unlabeled_per_class must be >= 0");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in [0, 1)");
    if (best_k_of && (*best_k_of < 1 || *best_k_of > runs)) throw ConfigError("best_k_of must lie in [1, runs]");
    if (inductive.k < 1) throw ConfigError("inductive.k must be >= 1");
    if (recons_width && !(*recons_width > 0.0)) throw ConfigError("recons_width must be positive");
    for (double w : width_grid)
      if (!(w > 0.0)) throw ConfigError("width_grid entries must be positive");
    try {
      kernel.validate();
      solver.validate();
      pnlp.validate();
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
  }
};

inline void to_json(nlohmann::json& j, const InductiveConfig& c) {
  j = nlohmann::json{{"scheme", to_string(c.scheme)}, {"k", c.k}};
  if (c.kernel_width_override) j["kernel_width_override"] = *c.kernel_width_override;
}

inline void from_json(const nlohmann::json& j, InductiveConfig& c) {
  if (j.contains("scheme")) c.scheme = inductive_scheme_from_string(j.at("scheme").get<std::string>());
  c.k = j.value("k", c.k);
  if (j.contains("kernel_width_override") && !j.at("kernel_width_override").is_null())
    c.kernel_width_override = j.at("kernel_width_override").get<double>();
}

inline void to_json(nlohmann::json& j, const PnlpConfig& c) {
  j = nlohmann::json{{"mu", c.mu}, {"mu1", c.mu1}, {"mu2", c.mu2}, {"neighbors", c.neighbors}};
}

inline void from_json(const nlohmann::json& j, PnlpConfig& c) {
  c.mu = j.value("mu", c.mu);
  c.mu1 = j.value("mu1", c.mu1);
  c.mu2 = j.value("mu2", c.mu2);
  c.neighbors = j.value("neighbors", c.neighbors);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"method", to_string(c.method)},
                     {"kernel", c.kernel},
                     {"solver", c.solver},
                     {"pnlp", c.pnlp},
                     {"inductive", c.inductive},
                     {"recons_retrain", c.recons_retrain},
                     {"labels_per_class", c.labels_per_class},
                     {"test_fraction", c.test_fraction},
                     {"runs", c.runs},
                     {"seed", c.seed},
                     {"normalize", to_string(c.normalize)},
                     {"width_grid", c.width_grid},
                     {"sweep_alpha", c.sweep_alpha},
                     {"sweep_beta", c.sweep_beta},
                     {"sweep_width", c.sweep_width}};
  j["unlabeled_per_class"] = c.unlabeled_per_class ? nlohmann::json(*c.unlabeled_per_class) : nlohmann::json();
  j["best_k_of"] = c.best_k_of ? nlohmann::json(*c.best_k_of) : nlohmann::json();
  j["recons_width"] = c.recons_width ? nlohmann::json(*c.recons_width) : nlohmann::json();
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  static const char* known[] = {"method", "kernel", "solver", "pnlp", "inductive", "labels_per_class",
                                "unlabeled_per_class", "test_fraction", "runs", "seed", "normalize",
                                "best_k_of", "width_grid", "sweep_alpha", "sweep_beta", "sweep_width",
                                "recons_width", "recons_retrain"};
  for (const auto& item : j.items())
    if (std::find(std::begin(known), std::end(known), item.key()) == std::end(known))
      throw ConfigError("unknown config key '" + item.key() + "'");
  try {
    if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("kernel")) c.kernel = j.at("kernel").get<KernelSpec>();
    if (j.contains("solver")) from_json(j.at("solver"), c.solver);
    if (j.contains("pnlp")) from_json(j.at("pnlp"), c.pnlp);
    if (j.contains("inductive")) from_json(j.at("inductive"), c.inductive);
    c.labels_per_class = j.value("labels_per_class", c.labels_per_class);
    if (j.contains("unlabeled_per_class") && !j.at("unlabeled_per_class").is_null())
      c.unlabeled_per_class = j.at("unlabeled_per_class").get<int>();
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    c.runs = j.value("runs", c.runs);
    c.seed = j.value("seed", c.seed);
    if (j.contains("normalize")) c.normalize = normalization_from_string(j.at("normalize").get<std::string>());
    if (j.contains("best_k_of") && !j.at("best_k_of").is_null()) c.best_k_of = j.at("best_k_of").get<int>();
    if (j.contains("recons_width"))
      c.recons_width = j.at("recons_width").is_null() ? std::nullopt
                                                      : std::optional<double>(j.at("recons_width").get<double>());
    c.recons_retrain = j.value("recons_retrain", c.recons_retrain);
    c.width_grid = j.value("width_grid", c.width_grid);
    c.sweep_alpha = j.value("sweep_alpha", c.sweep_alpha);
    c.sweep_beta = j.value("sweep_beta", c.sweep_beta);
    c.sweep_width = j.value("sweep_width", c.sweep_width);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  c.validate();
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return j.get<ExperimentConfig>();
}

// ---------------------------------------------------------------------------
// Splitting

struct Split {
  LabelSet labels;  // over the training part
  Matrix X_train;
  Matrix X_test;
  std::vector<int> y_train;  // ground truth of training samples (kUnlabeled if unknown)
  std::vector<int> y_test;
  std::vector<Index> train_index;  // dataset indices
  std::vector<Index> test_index;
  std::vector<Index> labeled_index;  // dataset indices of the labeled samples
};

inline std::mt19937_64 run_rng(std::uint64_t seed, int run_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run_index), 0x6b6c70u};
  return std::mt19937_64(seq);
}

/// Random test hold-out, then per-class labeled/unlabeled sampling of the
/// rest. Samples without ground truth always stay in the unlabeled pool.
inline Split split(const Dataset& ds, const ExperimentConfig& cfg, int run_index) {
  cfg.validate();
  if (!ds.has_labels()) throw ConfigError("dataset has no label column to sample supervision from");
  const Index N = ds.samples();
  const int c = ds.classes();
  auto rng = run_rng(cfg.seed, run_index);

  std::vector<Index> known, unknown;
  for (Index j = 0; j < N; ++j) (ds.y[static_cast<size_t>(j)] >= 0 ? known : unknown).push_back(j);
  std::shuffle(known.begin(), known.end(), rng);
  const auto n_test = static_cast<size_t>(std::llround(cfg.test_fraction * static_cast<double>(N)));
  if (n_test > known.size()) throw ConfigError("test_fraction asks for more samples than have labels");

  Split s;
  s.test_index.assign(known.begin(), known.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::vector<Index>> by_class(static_cast<size_t>(c));
  for (size_t t = n_test; t < known.size(); ++t)
    by_class[static_cast<size_t>(ds.y[static_cast<size_t>(known[t])])].push_back(known[t]);

  std::vector<std::pair<Index, int>> train;  // (dataset index, assigned label)
  for (int k = 0; k < c; ++k) {
    const auto& pool = by_class[static_cast<size_t>(k)];
    if (static_cast<int>(pool.size()) < cfg.labels_per_class)
      throw ConfigError("class '" + ds.class_names[static_cast<size_t>(k)] + "' has " +
                        std::to_string(pool.size()) + " training samples, fewer than labels_per_class = " +
                        std::to_string(cfg.labels_per_class));
    size_t take = pool.size();
    if (cfg.unlabeled_per_class)
      take = std::min(take, static_cast<size_t>(cfg.labels_per_class + *cfg.unlabeled_per_class));
    for (size_t t = 0; t < take; ++t) {
      const bool labeled = static_cast<int>(t) < cfg.labels_per_class;
      train.emplace_back(pool[t], labeled ? k : LabelSet::kUnlabeled);
      if (labeled) s.labeled_index.push_back(pool[t]);
    }
  }
  for (Index j : unknown) train.emplace_back(j, LabelSet::kUnlabeled);
  std::sort(train.begin(), train.end());
  std::sort(s.test_index.begin(), s.test_index.end());
  std::sort(s.labeled_index.begin(), s.labeled_index.end());

  s.labels.class_count = c;
  s.X_train.resize(ds.features(), static_cast<Index>(train.size()));
  for (size_t t = 0; t < train.size(); ++t) {
    s.train_index.push_back(train[t].first);
    s.labels.assignments.push_back(train[t].second);
    s.y_train.push_back(ds.y[static_cast<size_t>(train[t].first)]);
    s.X_train.col(static_cast<Index>(t)) = ds.X.col(train[t].first);
  }
  s.X_test.resize(ds.features(), static_cast<Index>(s.test_index.size()));
  for (size_t t = 0; t < s.test_index.size(); ++t) {
    s.X_test.col(static_cast<Index>(t)) = ds.X.col(s.test_index[t]);
    s.y_test.push_back(ds.y[static_cast<size_t>(s.test_index[t])]);
  }
  const auto scaler = FeatureScaler::fit(s.X_train, cfg.normalize);
  s.X_train = scaler.apply(s.X_train);
  if (s.X_test.cols() > 0) s.X_test = scaler.apply(s.X_test);
  return s;
}

// ---------------------------------------------------------------------------
// Runs and reports

struct RunRecord {
  int run = 0;
  bool ok = false;
  std::string error;
  double transductive = 0.0;
  std::optional<double> inductive_map;
  std::optional<double> inductive_recons;
  double fit_ms = 0.0;
  double iter_ms = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
  double best = 0.0;
  int count = 0;
};

struct RunReport {
  std::string method;
  ExperimentConfig config;
  std::vector<std::string> class_names;
  std::vector<RunRecord> runs;
  MetricSummary transductive;
  std::optional<MetricSummary> inductive_map;
  std::optional<MetricSummary> inductive_recons;
  double fit_ms_mean = 0.0;
  double iter_ms_mean = 0.0;
  double iterations_mean = 0.0;
  int failed = 0;
};

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

// Accuracy over positions whose truth is known and which are selected.
inline double masked_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                              const std::vector<bool>& use) {
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!use[i] || truth[i] < 0) continue;
    ++total;
    hits += pred[i] == truth[i];
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

inline MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary m;
  m.count = static_cast<int>(values.size());
  if (values.empty()) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(values.size()));
  m.best = *std::max_element(values.begin(), values.end());
  return m;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// One seeded repetition. Solver and input errors are caught and recorded.
inline RunRecord run_once(const ExperimentConfig& cfg, const Dataset& ds, int run_index) {
  RunRecord rec;
  rec.run = run_index;
  const Split s = split(ds, cfg, run_index);
  std::vector<bool> unlabeled(s.y_train.size());
  for (size_t i = 0; i < unlabeled.size(); ++i)
    unlabeled[i] = s.labels.assignments[i] == LabelSet::kUnlabeled;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.method == Method::kernel_lp) {
      const TrainedModel model = fit(s.X_train, s.labels, cfg.kernel, cfg.solver);
      rec.fit_ms = detail::elapsed_ms(t0);
      rec.iterations = model.iterations;
      rec.converged = model.converged;
      rec.iter_ms = model.iterations > 0 ? rec.fit_ms / model.iterations : 0.0;
      rec.transductive = detail::masked_accuracy(model.F_train.hard, s.y_train, unlabeled);
      if (s.X_test.cols() > 0) {
        rec.inductive_map = accuracy(predict_map(model, s.X_test).hard, s.y_test);
        const Index k = std::min(cfg.inductive.k, model.samples());
        const bool rbf = cfg.kernel.kind == KernelKind::rbf;
        const auto width = rbf ? cfg.recons_width : std::nullopt;
        if (width && cfg.recons_retrain) {
          const TrainedModel second = fit(s.X_train, s.labels, KernelSpec::rbf(*width), cfg.solver);
          rec.inductive_recons = accuracy(predict_recons(second, s.X_test, k).hard, s.y_test);
        } else {
          rec.inductive_recons = accuracy(predict_recons(model, s.X_test, k, width).hard, s.y_test);
        }
      }
    } else {
      const auto nbr = knn(s.X_train, std::min(cfg.pnlp.neighbors, s.X_train.cols() - 1));
      const auto S = symmetrize_normalize(gaussian_weights(s.X_train, nbr));
      const auto F = pnlp_solve(S, encode_labels(s.labels), cfg.pnlp);
      rec.fit_ms = detail::elapsed_ms(t0);
      rec.iter_ms = rec.fit_ms;
      rec.iterations = 1;
      rec.converged = true;
      rec.transductive = detail::masked_accuracy(F.hard, s.y_train, unlabeled);
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

/// Aggregates over successful runs (sorted by run index first, so the order
/// runs finished in does not matter).
inline void aggregate(RunReport& report) {
  std::sort(report.runs.begin(), report.runs.end(),
            [](const RunRecord& a, const RunRecord& b) { return a.run < b.run; });
  std::vector<const RunRecord*> ok;
  for (const auto& r : report.runs)
    if (r.ok) ok.push_back(&r);
  report.failed = static_cast<int>(report.runs.size() - ok.size());
  if (report.config.best_k_of && static_cast<int>(ok.size()) > *report.config.best_k_of) {
    std::stable_sort(ok.begin(), ok.end(), [](const RunRecord* a, const RunRecord* b) {
      return a->transductive > b->transductive;
    });
    ok.resize(static_cast<size_t>(*report.config.best_k_of));
  }
  std::vector<double> tr, mp, rc, fit_ms, iter_ms, its;
  for (const auto* r : ok) {
    tr.push_back(r->transductive);
    if (r->inductive_map) mp.push_back(*r->inductive_map);
    if (r->inductive_recons) rc.push_back(*r->inductive_recons);
    fit_ms.push_back(r->fit_ms);
    iter_ms.push_back(r->iter_ms);
    its.push_back(r->iterations);
  }
  report.transductive = detail::summarize(tr);
  report.inductive_map = mp.empty() ? std::nullopt : std::optional(detail::summarize(mp));
  report.inductive_recons = rc.empty() ? std::nullopt : std::optional(detail::summarize(rc));
  report.fit_ms_mean = detail::summarize(fit_ms).mean;
  report.iter_ms_mean = detail::summarize(iter_ms).mean;
  report.iterations_mean = detail::summarize(its).mean;
}

inline RunReport run_experiment(const ExperimentConfig& cfg, const Dataset& ds) {
  cfg.validate();
  RunReport report;
  report.method = to_string(cfg.method);
  report.config = cfg;
  report.class_names = ds.class_names;
  for (int r = 0; r < cfg.runs; ++r) report.runs.push_back(run_once(cfg, ds, r));
  aggregate(report);
  return report;
}

struct WidthSearch {
  double width = 0.0;
  RunReport best;
  std::vector<std::pair<double, MetricSummary>> by_width;  // transductive summary per width
};

/// Runs the experiment once per rbf width and keeps the best mean
/// transductive accuracy (ties to the earlier width).
inline WidthSearch tune_width(ExperimentConfig cfg, const Dataset& ds) {
  if (cfg.width_grid.empty()) throw ConfigError("width_grid is empty");
  if (cfg.kernel.kind != KernelKind::rbf) throw ConfigError("width_grid requires an rbf kernel");
  WidthSearch out;
  bool first = true;
  for (double w : cfg.width_grid) {
    cfg.kernel.width = w;
    RunReport r = run_experiment(cfg, ds);
    out.by_width.emplace_back(w, r.transductive);
    if (first || r.transductive.mean > out.best.transductive.mean) {
      out.width = w;
      out.best = std::move(r);
      first = false;
    }
  }
  return out;
}

inline nlohmann::json summary_to_json(const MetricSummary& m) {
  return {{"mean", m.mean}, {"std", m.std}, {"best", m.best}, {"count", m.count}};
}

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& x : r.runs) {
    nlohmann::json j{{"run", x.run},           {"ok", x.ok},
                     {"transductive", x.transductive}, {"fit_ms", x.fit_ms},
                     {"iter_ms", x.iter_ms},   {"iterations", x.iterations},
                     {"converged", x.converged}};
    j["inductive_map"] = x.inductive_map ? nlohmann::json(*x.inductive_map) : nlohmann::json();
    j["inductive_recons"] = x.inductive_recons ? nlohmann::json(*x.inductive_recons) : nlohmann::json();
    if (!x.ok) j["error"] = x.error;
    runs.push_back(std::move(j));
  }
  nlohmann::json summary{{"transductive", summary_to_json(r.transductive)},
                         {"fit_ms", r.fit_ms_mean},
                         {"iter_ms", r.iter_ms_mean},
                         {"iterations", r.iterations_mean},
                         {"failed", r.failed}};
  summary["inductive_map"] = r.inductive_map ? summary_to_json(*r.inductive_map) : nlohmann::json();
  summary["inductive_recons"] = r.inductive_recons ? summary_to_json(*r.inductive_recons) : nlohmann::json();
  return {{"schema_version", kReportSchemaVersion},
          {"method", r.method},
          {"config", r.config},
          {"class_names", r.class_names},
          {"runs", std::move(runs)},
          {"summary", std::move(summary)}};
}

/// Drops every object key ending in "_ms", recursively.
inline nlohmann::json strip_timing(nlohmann::json j) {
  if (j.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (auto& [k, v] : j.items())
      if (!(k.size() >= 3 && k.compare(k.size() - 3, 3, "_ms") == 0)) out[k] = strip_timing(v);
    return out;
  }
  if (j.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (auto& v : j) out.push_back(strip_timing(v));
    return out;
  }
  return j;
}

/// Mean / Best / Time table, accuracies in percent.
inline std::string format_table(const RunReport& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-14s %9s %9s %9s %12s\n", "Method", "Setting", "Mean(%)",
                "Std(%)", "Best(%)", "Time(ms)");
  os << line;
  auto row = [&](const char* setting, const MetricSummary& m, double ms) {
    std::snprintf(line, sizeof line, "%-12s %-14s %9.2f %9.2f %9.2f %12.3f\n", r.method.c_str(), setting,
                  100.0 * m.mean, 100.0 * m.std, 100.0 * m.best, ms);
    os << line;
  };
  row("transductive", r.transductive, r.iter_ms_mean);
  if (r.inductive_map) row("map", *r.inductive_map, r.iter_ms_mean);
  if (r.inductive_recons) row("recons", *r.inductive_recons, r.iter_ms_mean);
  std::snprintf(line, sizeof line, "runs: %d ok, %d failed; mean iterations %.1f; Time is per iteration\n",
                static_cast<int>(r.runs.size()) - r.failed, r.failed, r.iterations_mean);
  os << line;
  return os.str();
}

/// Grid over alpha x beta x width; one CSV row per combination.
inline std::string sweep(const ExperimentConfig& base, const Dataset& ds) {
  const auto axis = [](const std::vector<double>& v, double fallback) {
    return v.empty() ? std::vector<double>{fallback} : v;
  };
  std::ostringstream os;
  os.precision(17);
  os << "alpha,beta,width,mean_transductive,std_transductive,mean_map,failed\n";
  for (double a : axis(base.sweep_alpha, base.solver.alpha))
    for (double b : axis(base.sweep_beta, base.solver.beta))
      for (double w : axis(base.sweep_width, base.kernel.width)) {
        ExperimentConfig cfg = base;
        cfg.solver.alpha = a;
        cfg.solver.beta = b;
        cfg.kernel.width = w;
        const RunReport r = run_experiment(cfg, ds);
        os << a << ',' << b << ',' << w << ',' << r.transductive.mean << ',' << r.transductive.std << ',';
        if (r.inductive_map) os << r.inductive_map->mean;
        os << ',' << r.failed << '\n';
      }
  return os.str();
}

}  // namespace klp
