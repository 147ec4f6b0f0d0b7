// Prints one PASS/FAIL line per acceptance criterion. Exit status is
// non-zero when any gating criterion fails.
#include "klp/dataset.hpp"
#include "klp/experiment.hpp"
#include "klp/graphs.hpp"
#include "klp/inductive.hpp"
#include "klp/kernel_lp.hpp"
#include "klp/pnlp.hpp"
#include "klp/segmentation.hpp"
#include "seg_fixture.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace klp;
using Clock = std::chrono::steady_clock;

namespace {

int g_failed = 0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(const char* name, bool pass, const std::string& detail, bool gating = true) {
  std::printf("[%s] %-26s %s%s\n", pass ? "PASS" : "FAIL", name, detail.c_str(), gating ? "" : " (informational)");
  std::fflush(stdout);
  if (!pass && gating) ++g_failed;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double mean_nn_distance(const Matrix& X) {
  const auto nbr = knn(X, 1);
  double s = 0.0;
  for (Index i = 0; i < X.cols(); ++i) s += (X.col(i) - X.col(nbr.neighbors[static_cast<size_t>(i)][0])).norm();
  return s / static_cast<double>(X.cols());
}

// Blob instance for the monotonicity / convergence criteria: 50 points,
// 3 classes, 2 labels per class, rbf width = mean nearest-neighbor distance.
struct BlobInstance {
  Matrix X;
  LabelSet labels;
  double width;
};

BlobInstance blob_instance(int s) {
  const auto ds = make_blobs(50, 3, 1.0, 1000 + static_cast<std::uint64_t>(s));
  BlobInstance in;
  in.X = ds.X;
  in.labels.class_count = 3;
  in.labels.assignments.assign(50, LabelSet::kUnlabeled);
  const auto order = klp::testing::permutation(50, static_cast<std::uint64_t>(s));
  std::vector<int> count(3, 0);
  for (Index j : order) {
    const int c = ds.y[static_cast<size_t>(j)];
    if (count[static_cast<size_t>(c)] < 2) {
      in.labels.assignments[static_cast<size_t>(j)] = c;
      ++count[static_cast<size_t>(c)];
    }
  }
  in.width = mean_nn_distance(ds.X);
  return in;
}

void monotonicity_and_convergence() {
  const auto t0 = Clock::now();
  int increases = 0, unexplained = 0, converged = 0;
  double worst_rel = 0.0;
  std::vector<int> iterations;
  std::vector<double> final_delta;
  for (int s = 0; s < 20; ++s) {
    const auto in = blob_instance(s);
    const auto m = fit(in.X, in.labels, KernelSpec::rbf(in.width));
    for (const auto& tr : m.trace) {
      const double rel = (tr.surrogate_after - tr.surrogate_before) / std::max(std::abs(tr.surrogate_before), 1e-300);
      if (!tr.increased) continue;
      ++increases;
      if (!tr.explained_by_projection) {
        ++unexplained;
        worst_rel = std::max(worst_rel, rel);
      }
    }
    iterations.push_back(m.iterations);
    converged += m.converged;
    final_delta.push_back(m.q_delta_history.back());
  }
  const double secs = seconds_since(t0);
  report("monotonicity", unexplained == 0 && secs < 10.0,
         fmt("20 instances: %d increases > 1e-8 rel, all from W projection: %s, unexplained %d "
             "(worst %.2e); %.2f s (limit 10 s)",
             increases, unexplained == 0 ? "yes" : "no", unexplained, worst_rel, secs));

  std::vector<int> sorted = iterations;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[9] + sorted[10]);
  const double worst_delta = *std::max_element(final_delta.begin(), final_delta.end());
  report("convergence", converged == 20 && median <= 25.0,
         fmt("%d/20 reach |dQ|_F <= 1e-5 within 50 iterations (need 20); median iterations %.1f (need <= 25); "
             "largest final |dQ|_F %.2e",
             converged, median, worst_delta));
}

// -- stationarity -------------------------------------------------------------

struct SmallInstance {
  Matrix K;
  LabelMatrices Y;
  ConfidenceWeights conf;
  Matrix W;
  Vector v;
};

SmallInstance small_instance(std::uint64_t seed) {
  SmallInstance in;
  in.K = gram(KernelSpec::rbf(1.0), klp::testing::random_matrix(2, 10, seed)).entries;
  const auto L = klp::testing::random_labels(10, 3, 4, seed + 1);
  in.Y = encode_labels(L);
  in.conf = build_confidence(L);
  in.W = project_weights(0.2 * klp::testing::random_matrix(10, 10, seed + 2).cwiseAbs());
  in.v = klp::testing::random_matrix(10, 1, seed + 3).col(0).cwiseAbs().array() + 0.5;
  return in;
}

// Q part of the objective with V fixed, accumulated sample by sample.
double q_objective(const SmallInstance& in, const Matrix& Q, const SolverConfig& cfg) {
  double J = 0.0;
  for (Index j = 0; j < 10; ++j) {
    const Vector f = Q.transpose() * in.K.col(j);
    J += in.conf.u_pos(j) * (f - in.Y.y_pos.col(j)).squaredNorm() - in.conf.u_neg(j) * (f - in.Y.y_neg.col(j)).squaredNorm();
    Vector r = f;
    for (Index i = 0; i < 10; ++i) r -= in.W(i, j) * (Q.transpose() * in.K.col(i));
    J += cfg.alpha * r.squaredNorm() + cfg.beta * in.v(j) * Q.row(j).squaredNorm();
  }
  return J;
}

Matrix q_gradient(const SmallInstance& in, const Matrix& Q, const SolverConfig& cfg) {
  const Matrix B = in.K - in.K * in.W;
  Matrix G = cfg.alpha * B * B.transpose() * Q + cfg.beta * in.v.asDiagonal() * Q;
  for (Index j = 0; j < 10; ++j) {
    const Vector f = Q.transpose() * in.K.col(j);
    G += in.K.col(j) * (in.conf.u_pos(j) * (f - in.Y.y_pos.col(j)) - in.conf.u_neg(j) * (f - in.Y.y_neg.col(j))).transpose();
  }
  return 2.0 * G;
}

double w_objective(const Matrix& K, const Matrix& Q, const Matrix& W) {
  double recon = 0.0;
  for (Index j = 0; j < K.rows(); ++j) {
    double s = K(j, j);
    for (Index i = 0; i < K.rows(); ++i) {
      s -= 2.0 * W(i, j) * K(i, j);
      for (Index l = 0; l < K.rows(); ++l) s += W(i, j) * W(l, j) * K(i, l);
    }
    recon += s;
  }
  const Matrix F = Q.transpose() * K;
  return recon + (F - F * W).squaredNorm() + W.squaredNorm();
}

void stationarity() {
  const SolverConfig cfg;
  double q_res = 0.0, w_res = 0.0, q_fd = 0.0, w_fd = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto in = small_instance(seed);
    const Matrix Q = update_Q(GramMatrix{in.K, KernelSpec::rbf(1.0)}, in.W, in.v, in.Y, in.conf, cfg);
    const Matrix rhs = q_gradient(in, Matrix::Zero(10, 3), cfg);
    q_res = std::max(q_res, q_gradient(in, Q, cfg).norm() / rhs.norm());

    const Matrix Wu = solve_weights_unprojected(in.K, Q);
    const Matrix M = in.K + in.K * Q * Q.transpose() * in.K;
    w_res = std::max(w_res, ((M + Matrix::Identity(10, 10)) * Wu - M).norm() / M.norm());

    const Matrix Qp = klp::testing::random_matrix(10, 3, seed + 40, 0.3);
    const Matrix fdq = klp::testing::finite_difference([&](const Matrix& P) { return q_objective(in, P, cfg); }, Qp, 1e-6);
    q_fd = std::max(q_fd, (q_gradient(in, Qp, cfg) - fdq).norm() / fdq.norm());

    const Matrix Wp = 0.1 * klp::testing::random_matrix(10, 10, seed + 50);
    const Matrix fdw = klp::testing::finite_difference([&](const Matrix& P) { return w_objective(in.K, Qp, P); }, Wp, 1e-6);
    const Matrix Mp = in.K + in.K * Qp * Qp.transpose() * in.K;
    const Matrix gw = 2.0 * ((Mp + Matrix::Identity(10, 10)) * Wp - Mp);
    w_fd = std::max(w_fd, (gw - fdw).norm() / fdw.norm());
  }
  report("stationarity", q_res <= 1e-8 && w_res <= 1e-8 && q_fd <= 1e-4 && w_fd <= 1e-4,
         fmt("Q-step residual %.2e, W-step residual %.2e (limit 1e-8); finite-difference gap Q %.2e, W %.2e "
             "(limit 1e-4)",
             q_res, w_res, q_fd, w_fd));
}

// -- PN-LP ------------------------------------------------------------------

void pnlp_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  const PnlpConfig cfg;
  const double a = cfg.mu * cfg.mu1, b = cfg.mu * cfg.mu2;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix X = klp::testing::random_matrix(2, 10, seed);
    const auto S = symmetrize_normalize(gaussian_weights(X, knn(X, 3)));
    const auto Y = encode_labels(klp::testing::random_labels(10, 3, 4, seed));
    const auto F = pnlp_solve(S, Y, cfg);
    const Matrix L = Matrix::Identity(10, 10) - S.entries;
    Matrix G = Matrix::Zero(3, 10);
    const double step = 1.0 / (2.0 + a - b);
    for (int t = 0; t < 5000; ++t) G -= step * (G * L + a * (G - Y.y_pos) - b * (G - Y.y_neg));
    worst = std::max(worst, (F.entries - G).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  report("pnlp_oracle", worst <= 1e-6 && secs < 5.0,
         fmt("10 instances, closed form vs 5000-step gradient descent max-abs %.2e (limit 1e-6); %.3f s", worst, secs));
}

// -- inductive / init -------------------------------------------------------

void inductive_consistency() {
  double map_gap = 0.0;
  bool recons_exact = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ds = make_two_moons(80, 0.08, seed);
    SolverConfig cfg;
    cfg.max_iter = 10;
    const auto m = fit(ds.X, klp::testing::random_labels(80, 2, 4, seed), KernelSpec::rbf(0.3), cfg);
    const auto F = predict_map(m, m.X_train);
    map_gap = std::max(map_gap, (F.entries - m.F_train.entries).cwiseAbs().maxCoeff());
    const Matrix T = make_two_moons(30, 0.1, seed + 100).X;
    const auto R = predict_recons(m, T, 1);
    for (Index t = 0; t < T.cols(); ++t) {
      Index best = 0;
      for (Index i = 1; i < m.samples(); ++i)
        if ((m.X_train.col(i) - T.col(t)).squaredNorm() < (m.X_train.col(best) - T.col(t)).squaredNorm()) best = i;
      recons_exact &= R.entries.col(t) == m.F_train.entries.col(best);
    }
  }
  report("inductive_consistency", map_gap <= 1e-12 && recons_exact,
         fmt("map on training points max-abs %.2e (limit 1e-12); recons k=1 equals nearest soft label: %s", map_gap,
             recons_exact ? "yes" : "no"));
}

void init_identity() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto K = gram(KernelSpec::rbf(0.8), klp::testing::random_matrix(3, 40, seed));
    const auto s = init_state(K, 3);
    Matrix direct = (K.entries + Matrix::Identity(40, 40)).fullPivLu().solve(K.entries).cwiseMax(0.0);
    direct.diagonal().setZero();
    worst = std::max(worst, (s.W - direct).cwiseAbs().maxCoeff());
  }
  report("init_identity", worst <= 1e-12, fmt("W0 vs direct solve max-abs %.2e (limit 1e-12)", worst));
}

// -- benchmarks -------------------------------------------------------------

void two_moons() {
  const auto t0 = Clock::now();
  const auto ds = make_two_moons(300, 0.08, 7);
  ExperimentConfig cfg;
  cfg.test_fraction = 1.0 / 3.0;
  cfg.labels_per_class = 2;
  cfg.runs = 15;
  cfg.seed = 2024;
  cfg.normalize = Normalization::minmax;
  cfg.width_grid = {0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
  const auto w = tune_width(cfg, ds);
  const double secs = seconds_since(t0);
  const double tr = w.best.transductive.mean;
  const double mp = w.best.inductive_map ? w.best.inductive_map->mean : 0.0;
  const auto n_train = split(ds, cfg, 0).X_train.cols();
  report("two_moons", tr >= 0.95 && mp >= 0.90 && secs < 30.0,
         fmt("N=%lld train + %lld held out, width %.2f: transductive %.4f (need 0.95), map %.4f (need 0.90), "
             "%d failed runs; %.1f s (limit 30 s)",
             static_cast<long long>(n_train), static_cast<long long>(ds.samples() - n_train), w.width, tr, mp,
             w.best.failed, secs));
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void determinism(const std::string& klp_bin, const std::string& work) {
  if (klp_bin.empty()) {
    // library path only
    const auto ds = make_two_moons(90, 0.08, 3);
    ExperimentConfig cfg;
    cfg.runs = 3;
    cfg.kernel = KernelSpec::rbf(0.1);
    cfg.test_fraction = 0.2;
    const auto a = strip_timing(report_to_json(run_experiment(cfg, ds))).dump();
    const auto b = strip_timing(report_to_json(run_experiment(cfg, ds))).dump();
    report("determinism", a == b, fmt("library reports equal modulo timing: %s", a == b ? "yes" : "no"));
    return;
  }
  const std::string cmd = klp_bin + " bench --gen moons --n 120 --runs 3 --width 0.1 --test-fraction 0.25 --seed 5 --strip-timing -o ";
  const std::string p1 = work + "/acc_bench_1.json", p2 = work + "/acc_bench_2.json";
  const int r1 = std::system((cmd + p1 + " > /dev/null").c_str());
  const int r2 = std::system((cmd + p2 + " > /dev/null").c_str());
  const std::string a = slurp(p1), b = slurp(p2);
  const bool ok = r1 == 0 && r2 == 0 && !a.empty() && a == b;
  report("determinism", ok,
         fmt("klp bench twice (exit %d/%d): %zu-byte reports byte-identical modulo timing: %s", r1, r2, a.size(),
             a == b ? "yes" : "no"));
}

void complexity() {
  std::vector<double> ns, ts;
  SolverConfig cfg;
  cfg.max_iter = 10;
  cfg.eps = 1e-300;  // fixed iteration count
  for (Index n : {100, 200, 400}) {
    const auto ds = make_two_moons(n, 0.08, 1);
    const auto L = klp::testing::random_labels(n, 2, 4, 1);
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      (void)fit(ds.X, L, KernelSpec::rbf(0.3), cfg);
      best = std::min(best, seconds_since(t0));
    }
    ns.push_back(std::log(static_cast<double>(n)));
    ts.push_back(std::log(best));
  }
  const double mx = (ns[0] + ns[1] + ns[2]) / 3.0, my = (ts[0] + ts[1] + ts[2]) / 3.0;
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < 3; ++i) {
    sxy += (ns[static_cast<size_t>(i)] - mx) * (ts[static_cast<size_t>(i)] - my);
    sxx += (ns[static_cast<size_t>(i)] - mx) * (ns[static_cast<size_t>(i)] - mx);
  }
  const double slope = sxy / sxx;
  report("complexity", slope >= 2.3 && slope <= 3.7,
         fmt("log-log slope of fit time over N = 100, 200, 400: %.2f (band 2.3..3.7); times %.1f / %.1f / %.1f ms",
             slope, 1e3 * std::exp(ts[0]), 1e3 * std::exp(ts[1]), 1e3 * std::exp(ts[2])),
         false);
}

void segmentation() {
  const auto img = klp::testing::half_plane_image();
  SegmentationSession session("acceptance", img);
  session.add_strokes(klp::testing::half_plane_strokes());
  const auto t0 = Clock::now();
  const auto& r = session.segment();
  const double secs = seconds_since(t0);
  const double acc = klp::testing::mask_accuracy(r.mask, klp::testing::half_plane_truth());
  report("segmentation", acc >= 0.99 && secs < 3.0,
         fmt("64x64 half-plane, budget 1500 (n_train %lld, %d iterations): pixel accuracy %.4f (need 0.99), "
             "latency %.2f s (limit 3 s)",
             static_cast<long long>(r.stats.n_train), r.stats.iterations, acc, secs));
}

}  // namespace

int main(int argc, char** argv) {
  std::string klp_bin, work = ".";
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--klp") klp_bin = argv[i + 1];
    if (flag == "--work") work = argv[i + 1];
  }
  monotonicity_and_convergence();
  stationarity();
  pnlp_oracle();
  inductive_consistency();
  init_identity();
  two_moons();
  determinism(klp_bin, work);
  complexity();
  segmentation();
  std::printf("%d gating criteria failed\n", g_failed);
  return g_failed == 0 ? 0 : 1;
}
