// klp: command-line front end for fitting, prediction, benchmarks and the
// segmentation service.

#include "klp/klp.hpp"
#include "klp/service.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using klp::Dataset;
using klp::ExperimentConfig;

// Extra keys stored next to the model so `predict` can undo preprocessing.
nlohmann::json scaler_json(const klp::FeatureScaler& s, klp::Normalization kind) {
  return {{"kind", klp::to_string(kind)},
          {"shift", std::vector<double>(s.shift.data(), s.shift.data() + s.shift.size())},
          {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
}

klp::FeatureScaler scaler_from_json(const nlohmann::json& j) {
  klp::FeatureScaler s;
  const auto shift = j.at("shift").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  s.shift = Eigen::Map<const klp::Vector>(shift.data(), static_cast<klp::Index>(shift.size()));
  s.scale = Eigen::Map<const klp::Vector>(scale.data(), static_cast<klp::Index>(scale.size()));
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw klp::InputError("cannot open " + path + " for writing");
  f << text;
}

struct DataSource {
  std::string csv;
  std::string gen = "moons";
  klp::Index n = 300;
  double noise = 0.08;
  int classes = 3;
  double spread = 1.0;
  std::uint64_t seed = 7;

  void add(CLI::App* app) {
    app->add_option("--data", csv, "dataset CSV (default: generate one)");
    app->add_option("--gen", gen, "generator when --data is absent")->check(CLI::IsMember({"moons", "blobs"}));
    app->add_option("--n", n, "generated sample count");
    app->add_option("--noise", noise, "two-moons noise");
    app->add_option("--classes", classes, "blob classes");
    app->add_option("--spread", spread, "blob spread");
    app->add_option("--data-seed", seed, "generator seed");
  }

  Dataset load() const {
    if (!csv.empty()) return klp::load_csv(csv);
    return gen == "moons" ? klp::make_two_moons(n, noise, seed) : klp::make_blobs(n, classes, spread, seed);
  }
};

struct Overrides {
  std::string config;
  std::optional<std::string> method;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::optional<double> width;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<int> labels_per_class;
  std::optional<double> test_fraction;
  std::optional<std::string> normalize;

  void add(CLI::App* app) {
    app->add_option("--config", config, "experiment config JSON");
    app->add_option("--method", method, "kernel_lp or pnlp");
    app->add_option("--runs", runs);
    app->add_option("--seed", seed);
    app->add_option("--width", width, "rbf width");
    app->add_option("--alpha", alpha);
    app->add_option("--beta", beta);
    app->add_option("--labels-per-class", labels_per_class);
    app->add_option("--test-fraction", test_fraction);
    app->add_option("--normalize", normalize, "none, minmax or zscore");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : klp::load_config(config);
    if (method) cfg.method = klp::method_from_string(*method);
    if (runs) cfg.runs = *runs;
    if (seed) cfg.seed = *seed;
    if (width) {
      cfg.kernel.width = *width;
      cfg.width_grid.clear();
    }
    if (alpha) cfg.solver.alpha = *alpha;
    if (beta) cfg.solver.beta = *beta;
    if (labels_per_class) cfg.labels_per_class = *labels_per_class;
    if (test_fraction) cfg.test_fraction = *test_fraction;
    if (normalize) cfg.normalize = klp::normalization_from_string(*normalize);
    cfg.validate();
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel label propagation toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "write a synthetic dataset as CSV");
  DataSource gen_src;
  std::string gen_out = "-";
  gen->add_option("--kind", gen_src.gen)->check(CLI::IsMember({"moons", "blobs"}));
  gen->add_option("--n", gen_src.n);
  gen->add_option("--noise", gen_src.noise);
  gen->add_option("--classes", gen_src.classes);
  gen->add_option("--spread", gen_src.spread);
  gen->add_option("--seed", gen_src.seed);
  gen->add_option("-o,--out", gen_out);

  // fit
  auto* fitc = app.add_subcommand("fit", "train on a labeled/unlabeled CSV and save a model");
  std::string fit_data, fit_out, fit_kernel = "rbf", fit_norm = "minmax", fit_solver;
  double fit_width = 1e3;
  int fit_degree = 3;
  std::optional<double> fit_alpha, fit_beta;
  std::optional<int> fit_iter;
  bool fit_no_weights = false;
  fitc->add_option("--data", fit_data, "CSV; empty label cells are unlabeled")->required();
  fitc->add_option("-o,--out", fit_out, "model archive (JSON)")->required();
  fitc->add_option("--kernel", fit_kernel)->check(CLI::IsMember({"rbf", "gaussian", "linear", "quadratic", "polynomial"}));
  fitc->add_option("--width", fit_width);
  fitc->add_option("--degree", fit_degree);
  fitc->add_option("--normalize", fit_norm);
  fitc->add_option("--solver", fit_solver, "solver config JSON");
  fitc->add_option("--alpha", fit_alpha);
  fitc->add_option("--beta", fit_beta);
  fitc->add_option("--max-iter", fit_iter);
  fitc->add_flag("--no-weights", fit_no_weights, "omit W from the archive");

  // predict
  auto* pred = app.add_subcommand("predict", "label a CSV with a saved model");
  std::string pred_model, pred_data, pred_out = "-", pred_scheme = "map";
  klp::Index pred_k = 7;
  std::optional<double> pred_width;
  pred->add_option("--model", pred_model)->required();
  pred->add_option("--data", pred_data)->required();
  pred->add_option("-o,--out", pred_out);
  pred->add_option("--scheme", pred_scheme)->check(CLI::IsMember({"map", "recons"}));
  pred->add_option("--k", pred_k, "neighbours for recons");
  pred->add_option("--width-override", pred_width);

  // bench
  auto* bench = app.add_subcommand("bench", "seeded repeated runs; JSON report plus table");
  DataSource bench_src;
  Overrides bench_ov;
  std::string bench_out;
  bool bench_no_timing = false;
  bench_src.add(bench);
  bench_ov.add(bench);
  bench->add_option("-o,--out", bench_out, "report JSON path");
  bench->add_flag("--strip-timing", bench_no_timing, "omit *_ms fields from the JSON");

  // sweep
  auto* sw = app.add_subcommand("sweep", "grid over alpha, beta and width; CSV output");
  DataSource sweep_src;
  Overrides sweep_ov;
  std::string sweep_out = "-";
  std::vector<double> sw_alpha, sw_beta, sw_width;
  sweep_src.add(sw);
  sweep_ov.add(sw);
  sw->add_option("--alphas", sw_alpha)->delimiter(',');
  sw->add_option("--betas", sw_beta)->delimiter(',');
  sw->add_option("--widths", sw_width)->delimiter(',');
  sw->add_option("-o,--out", sweep_out);

  // graph-export
  auto* gx = app.add_subcommand("graph-export", "write a model's W as CSV and/or PGM");
  std::string gx_model, gx_csv, gx_pgm;
  gx->add_option("--model", gx_model)->required();
  gx->add_option("--csv", gx_csv);
  gx->add_option("--pgm", gx_pgm);

  // serve
  auto* serve = app.add_subcommand("serve", "run the segmentation HTTP service");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const Dataset ds = gen_src.gen == "moons" ? klp::make_two_moons(gen_src.n, gen_src.noise, gen_src.seed)
                                                : klp::make_blobs(gen_src.n, gen_src.classes, gen_src.spread, gen_src.seed);
      std::ostringstream os;
      klp::write_csv(os, ds);
      write_text(gen_out, os.str());
    } else if (*fitc) {
      const Dataset ds = klp::load_csv(fit_data);
      if (!ds.has_labels()) throw klp::InputError("fit: dataset has no label column");
      klp::SolverConfig solver;
      if (!fit_solver.empty()) {
        std::ifstream f(fit_solver);
        if (!f) throw klp::InputError("cannot open " + fit_solver);
        solver = nlohmann::json::parse(f).get<klp::SolverConfig>();
      }
      if (fit_alpha) solver.alpha = *fit_alpha;
      if (fit_beta) solver.beta = *fit_beta;
      if (fit_iter) solver.max_iter = *fit_iter;
      klp::KernelSpec kernel;
      switch (klp::kernel_kind_from_string(fit_kernel)) {
        case klp::KernelKind::rbf: kernel = klp::KernelSpec::rbf(fit_width); break;
        case klp::KernelKind::linear: kernel = klp::KernelSpec::linear(); break;
        case klp::KernelKind::quadratic: kernel = klp::KernelSpec::quadratic(); break;
        case klp::KernelKind::polynomial: kernel = klp::KernelSpec::polynomial(fit_degree, 1.0); break;
      }
      const auto norm = klp::normalization_from_string(fit_norm);
      const auto scaler = klp::FeatureScaler::fit(ds.X, norm);
      const auto model = klp::fit(scaler.apply(ds.X), ds.label_set(), kernel, solver);
      for (const auto& w : model.warnings) std::cerr << "warning: " << w << '\n';
      auto j = klp::model_to_json(model, !fit_no_weights);
      j["scaler"] = scaler_json(scaler, norm);
      j["class_names"] = ds.class_names;
      write_text(fit_out, j.dump());
      std::cerr << "fit: " << model.samples() << " samples, " << model.iterations << " iterations"
                << (model.converged ? "" : " (not converged)") << '\n';
    } else if (*pred) {
      std::ifstream f(pred_model);
      if (!f) throw klp::InputError("cannot open model archive " + pred_model);
      const auto j = nlohmann::json::parse(f);
      const auto model = klp::model_from_json(j);
      const Dataset ds = klp::load_csv(pred_data);
      klp::Matrix X = ds.X;
      if (j.contains("scaler")) X = scaler_from_json(j.at("scaler")).apply(X);
      klp::InductiveConfig ic;
      ic.scheme = klp::inductive_scheme_from_string(pred_scheme);
      ic.k = pred_k;
      ic.kernel_width_override = pred_width;
      const auto out = klp::predict(model, X, ic);
      const auto names = j.value("class_names", std::vector<std::string>{});
      std::ostringstream os;
      os.precision(17);
      os << "index,id,label";
      for (klp::Index c = 0; c < out.entries.rows(); ++c) os << ",score" << c;
      os << '\n';
      for (size_t i = 0; i < out.hard.size(); ++i) {
        const int c = out.hard[i];
        os << i << ',' << (ds.ids.empty() ? "" : ds.ids[i]) << ','
           << (static_cast<size_t>(c) < names.size() ? names[static_cast<size_t>(c)] : std::to_string(c));
        for (klp::Index r = 0; r < out.entries.rows(); ++r) os << ',' << out.entries(r, static_cast<klp::Index>(i));
        os << '\n';
      }
      write_text(pred_out, os.str());
    } else if (*bench) {
      const auto cfg = bench_ov.resolve();
      const Dataset ds = bench_src.load();
      klp::RunReport report;
      nlohmann::json extra;
      if (!cfg.width_grid.empty()) {
        auto ws = klp::tune_width(cfg, ds);
        report = std::move(ws.best);
        extra["selected_width"] = ws.width;
        for (const auto& [w, m] : ws.by_width)
          extra["width_search"].push_back({{"width", w}, {"transductive", klp::summary_to_json(m)}});
      } else {
        report = klp::run_experiment(cfg, ds);
      }
      auto j = klp::report_to_json(report);
      for (auto& [k, v] : extra.items()) j[k] = v;
      if (bench_no_timing) j = klp::strip_timing(j);
      if (!bench_out.empty()) write_text(bench_out, j.dump(2) + "\n");
      std::cout << klp::format_table(report);
    } else if (*sw) {
      auto cfg = sweep_ov.resolve();
      if (!sw_alpha.empty()) cfg.sweep_alpha = sw_alpha;
      if (!sw_beta.empty()) cfg.sweep_beta = sw_beta;
      if (!sw_width.empty()) cfg.sweep_width = sw_width;
      write_text(sweep_out, klp::sweep(cfg, sweep_src.load()));
    } else if (*gx) {
      const auto model = klp::load_model(gx_model);
      if (model.W.size() == 0) throw klp::InputError("model archive has no weights (saved with --no-weights)");
      if (gx_csv.empty() && gx_pgm.empty()) throw klp::InputError("graph-export: give --csv and/or --pgm");
      klp::export_weights(model.W, gx_csv, gx_pgm);
    } else if (*serve) {
      httplib::Server server;
      klp::SessionStore store;
      klp::register_routes(server, store);
      std::cerr << "listening on http://" << host << ':' << port << '\n';
      if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
    }
  } catch (const klp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
