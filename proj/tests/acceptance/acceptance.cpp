// One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.
//   acceptance [--only 1,2,...] [--work DIR] [--report FILE]

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "../unit/oracles.hpp"
#include "cpr/core/graph.hpp"
#include "cpr/data/checkpoint.hpp"
#include "cpr/data/errors.hpp"
#include "cpr/data/sequence.hpp"
#include "cpr/geom/pcgeom.hpp"
#include "cpr/harness/ablate.hpp"
#include "cpr/harness/gen_data.hpp"
#include "cpr/harness/gradcheck.hpp"
#include "cpr/harness/pretrain.hpp"
#include "cpr/harness/probe.hpp"
#include "cpr/model/model.hpp"

namespace fs = std::filesystem;
using namespace cpr;
using geom::PointSet;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120;
constexpr int kKernelInstances = 200;
constexpr std::size_t kKernelMaxN = 256;
constexpr double kChamferTol = 1e-10;
constexpr double kWeightSumTol = 1e-9;
constexpr int kInfoNceInstances = 100;
constexpr double kInfoNceTol = 1e-10;
constexpr double kUniformTol = 1e-12;
constexpr double kColorTol = 1e-12;
constexpr double kLossRatio = 0.7;
constexpr double kTrainSeconds = 600;
constexpr double kProbeMargin = 0.10;
constexpr int kSeeds[3] = {1, 2, 3};
constexpr int kNeededSeeds = 2;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Optional copy of the criterion lines, since ctest hides passing output.
std::ofstream g_report;

void report(int id, bool pass, const std::string& detail) {
  char head[32];
  std::snprintf(head, sizeof head, "CRITERION %d %s  ", id, pass ? "PASS" : "FAIL");
  std::printf("%s%s\n", head, detail.c_str());
  std::fflush(stdout);
  if (g_report.is_open()) g_report << head << detail << std::endl;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

PointSet<double> random_points(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> c(n * dim);
  for (auto& v : c) v = u(rng);
  return PointSet<double>(dim, std::move(c));
}

// Brute force: every source sorted by (distance, index).
std::vector<std::pair<double, std::size_t>> ranked(const PointSet<double>& q, std::size_t i,
                                                   const PointSet<double>& s) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t j = 0; j < s.size(); ++j) all.emplace_back(oracle::dist2(q, i, s, j), j);
  std::sort(all.begin(), all.end());
  return all;
}

// ---------------------------------------------------------------- criterion 1
void criterion_gradcheck() {
  const auto t0 = Clock::now();
  harness::GradcheckOptions opts;
  opts.threshold = kGradTol;
  const auto parts = harness::run_gradcheck(opts);
  const double secs = seconds_since(t0);
  bool ok = secs < kGradSeconds;
  std::string detail;
  for (const auto& p : parts) {
    ok = ok && p.report.max_rel_error < kGradTol;
    detail += p.name + "=" + fmt("%.2e", p.report.max_rel_error) + " ";
  }
  report(1, ok, detail + "(tol " + fmt("%.0e", kGradTol) + ", " + fmt("%.0f", secs) + " s < " +
                    fmt("%.0f", kGradSeconds) + " s)");
}

// ---------------------------------------------------------------- criterion 2
void criterion_kernels() {
  std::mt19937_64 rng(2024);
  int fps_bad = 0, knn_bad = 0, ball_bad = 0, chamfer_bad = 0, weight_bad = 0;
  double chamfer_err = 0, weight_err = 0;
  for (int it = 0; it < kKernelInstances; ++it) {
    const std::size_t n = 2 + rng() % (kKernelMaxN - 1);
    const std::size_t m = 1 + rng() % n;
    const auto pts = random_points(n, 3, rng);
    const std::size_t start = rng() % n;
    if (geom::farthest_point_sample(pts, m, start) != oracle::fps(pts, m, start)) ++fps_bad;

    const auto queries = random_points(1 + rng() % 32, 3, rng);
    const std::size_t k = 1 + rng() % std::min<std::size_t>(n, 16);
    const auto nn = geom::knn(queries, pts, k);
    const double radius = 0.1 + 0.5 * std::uniform_real_distribution<double>()(rng);
    const auto ball = geom::ball_query(queries, pts, radius, k);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto all = ranked(queries, q, pts);
      for (std::size_t j = 0; j < k; ++j) knn_bad += nn.index(q, j) != all[j].second;
      std::vector<std::size_t> inside;
      for (const auto& [d2, idx] : all) {
        if (d2 <= radius * radius && inside.size() < k) inside.push_back(idx);
      }
      if (inside.empty()) inside.push_back(all[0].second);
      const std::size_t valid = inside.size();
      while (inside.size() < k) inside.push_back(inside[0]);
      bool same = ball.valid_counts[q] == valid;
      for (std::size_t j = 0; j < k; ++j) same = same && ball.index(q, j) == inside[j];
      ball_bad += !same;
    }

    const auto other = random_points(1 + rng() % 64, 3, rng);
    const double ab = geom::chamfer_distance(pts, other);
    const double ba = geom::chamfer_distance(other, pts);
    const double ref = oracle::chamfer(pts, other);
    chamfer_err = std::max({chamfer_err, std::abs(ab - ref), std::abs(ba - ab)});
    if (std::abs(ab - ref) > kChamferTol || std::abs(ab - ba) > kChamferTol ||
        geom::chamfer_distance(pts, pts) != 0.0) {
      ++chamfer_bad;
    }

    const auto w = geom::interpolation_weights(queries, pts, std::min<std::size_t>(3, n));
    for (std::size_t q = 0; q < w.queries; ++q) {
      double s = 0;
      for (std::size_t j = 0; j < w.k; ++j) s += w.weights[q * w.k + j];
      weight_err = std::max(weight_err, std::abs(s - 1.0));
      weight_bad += std::abs(s - 1.0) > kWeightSumTol;
    }
  }
  const bool ok = fps_bad + knn_bad + ball_bad + chamfer_bad + weight_bad == 0;
  report(2, ok,
         std::to_string(kKernelInstances) + " instances: fps/knn/ball mismatches " +
             std::to_string(fps_bad) + "/" + std::to_string(knn_bad) + "/" +
             std::to_string(ball_bad) + ", chamfer max err " + fmt("%.1e", chamfer_err) +
             " (tol " + fmt("%.0e", kChamferTol) + "), weight-sum max err " +
             fmt("%.1e", weight_err) + " (tol " + fmt("%.0e", kWeightSumTol) + ")");
}

// ---------------------------------------------------------------- criterion 3
core::Tensor<double> random_unit_rows(core::Shape shape, std::mt19937_64& rng) {
  core::Tensor<double> t(shape);
  std::normal_distribution<double> g;
  const std::size_t p = shape.back();
  for (std::size_t r = 0; r < t.size() / p; ++r) {
    double n = 0;
    for (std::size_t i = 0; i < p; ++i) n += (t[r * p + i] = g(rng)) * t[r * p + i];
    for (std::size_t i = 0; i < p; ++i) t[r * p + i] /= std::sqrt(n);
  }
  return t;
}

double eval_local(const core::Tensor<double>& z, const core::Tensor<double>& q,
                  const core::Tensor<double>* hard, double tau) {
  core::Graph<double> g;
  std::optional<core::Var<double>> h;
  if (hard) h = g.constant(*hard);
  return model::local_infonce(g.constant(z), g.constant(q), h, tau, false).value()[0];
}

void criterion_infonce() {
  std::mt19937_64 rng(77);
  double local_err = 0, global_err = 0, uniform_err = 0;
  for (int it = 0; it < kInfoNceInstances; ++it) {
    const std::size_t B = 1 + rng() % 8, n = 1 + rng() % 6, hcount = rng() % 9, p = 1 + rng() % 8;
    const double tau = 0.05 + std::uniform_real_distribution<double>()(rng);
    if (n + hcount >= 2) {
      const auto z = random_unit_rows({B, n, p}, rng);
      const auto q = random_unit_rows({B, n, p}, rng);
      const auto hard = random_unit_rows({B, hcount, p}, rng);
      const core::Tensor<double>* hp = hcount > 0 ? &hard : nullptr;
      local_err = std::max(local_err, std::abs(eval_local(z, q, hp, tau) -
                                               oracle::local_infonce(z, q, hp, tau, false)));
      // Uniform logits: every row identical, so every similarity is equal.
      core::Tensor<double> same({B, n, p});
      core::Tensor<double> same_hard({B, hcount, p});
      for (std::size_t i = 0; i < same.size(); ++i) same[i] = z[i % p];
      for (std::size_t i = 0; i < same_hard.size(); ++i) same_hard[i] = z[i % p];
      const double uniform = eval_local(same, same, hcount > 0 ? &same_hard : nullptr, tau);
      uniform_err = std::max(uniform_err, std::abs(uniform - std::log(double(n + hcount))));
    }
    if (B >= 2) {
      const auto h = random_unit_rows({B, p}, rng);
      const auto gv = random_unit_rows({B, p}, rng);
      core::Graph<double> g;
      const double got = model::global_infonce(g.constant(h), g.constant(gv), tau).value()[0];
      global_err = std::max(global_err, std::abs(got - oracle::global_infonce(h, gv, tau)));
    }
  }
  const bool ok = local_err <= kInfoNceTol && global_err <= kInfoNceTol && uniform_err <= kUniformTol;
  report(3, ok,
         "local max err " + fmt("%.1e", local_err) + ", global max err " + fmt("%.1e", global_err) +
             " (tol " + fmt("%.0e", kInfoNceTol) + "), uniform vs ln(1+|Psi|) max err " +
             fmt("%.1e", uniform_err) + " (tol " + fmt("%.0e", kUniformTol) + ")");
}

// ---------------------------------------------------------------- criterion 4
void criterion_colorization() {
  bool ends = true;
  for (std::size_t M = 2; M <= 12; ++M) {
    core::Tensor<double> seg({M, 2, 3});
    const auto col = geom::colorize_segment(seg);
    for (std::size_t i = 0; i < 2; ++i) {
      const double* first = col.data() + i * 6 + 3;
      const double* last = col.data() + ((M - 1) * 2 + i) * 6 + 3;
      ends = ends && first[0] == 1.0 && first[1] == 0.0 && first[2] == 0.0;
      ends = ends && last[0] == 0.0 && last[1] == 0.0 && last[2] == 1.0;
    }
  }
  const double expect[4][3] = {{1, 0, 0}, {1.0 / 3, 2.0 / 3, 0}, {0, 2.0 / 3, 1.0 / 3}, {0, 0, 1}};
  core::Tensor<double> seg({4, 3, 3});
  const auto col = geom::colorize_segment(seg);
  double err = 0;
  for (std::size_t f = 0; f < 4; ++f) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (int c = 0; c < 3; ++c) {
        err = std::max(err, std::abs(col[(f * 3 + i) * 6 + 3 + c] - expect[f][c]));
      }
    }
  }
  report(4, ends && err <= kColorTol,
         std::string("endpoints exact for M=2..12: ") + (ends ? "yes" : "no") +
             ", M=4 max err " + fmt("%.1e", err) + " (tol " + fmt("%.0e", kColorTol) + ")");
}

// ---------------------------------------------------------- criteria 5, 6, 7
struct Experiments {
  fs::path work;
  harness::Dataset data;
  harness::RunConfig base = harness::default_run_config();
  bool loaded = false;

  void ensure_data() {
    if (loaded) return;
    harness::GenDataOptions g;  // 8 classes x 32 sequences
    const auto dir = work / "data";
    fs::remove_all(dir);
    harness::generate_dataset(dir.string(), g);
    data = harness::load_dataset(dir.string(), base);
    loaded = true;
  }
};

struct SeedRun {
  double ratio = 0;
  double seconds = 0;
  double pretrained_acc = 0;
  double random_acc = 0;
  core::ParamSet<float> params;
};

double window_mean(const std::vector<harness::MetricsRow>& rows, std::size_t first, std::size_t last) {
  double s = 0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.step >= first && r.step <= last) {
      s += r.total;
      ++n;
    }
  }
  return n == 0 ? std::nan("") : s / static_cast<double>(n);
}

std::map<int, SeedRun> full_runs;

SeedRun& full_run(Experiments& ex, int seed) {
  auto it = full_runs.find(seed);
  if (it != full_runs.end()) return it->second;
  ex.ensure_data();
  auto cfg = ex.base;
  cfg.seed = seed;
  SeedRun run;
  const auto t0 = Clock::now();
  const auto res = harness::pretrain(cfg, ex.data.train, (ex.work / ("full_seed" + std::to_string(seed))).string());
  run.seconds = seconds_since(t0);
  run.ratio = window_mean(res.rows, 190, 200) / window_mean(res.rows, 1, 10);
  run.params = res.params;
  return full_runs.emplace(seed, std::move(run)).first->second;
}

void criterion_training(Experiments& ex) {
  int passed = 0;
  std::string detail;
  for (int seed : kSeeds) {
    auto& run = full_run(ex, seed);
    const bool ok = run.ratio <= kLossRatio && run.seconds < kTrainSeconds;
    passed += ok;
    detail += "seed " + std::to_string(seed) + ": ratio " + fmt("%.3f", run.ratio) + " in " +
              fmt("%.0f", run.seconds) + " s " + (ok ? "ok" : "no") + "; ";
  }
  report(5, passed >= kNeededSeeds,
         detail + "need ratio <= " + fmt("%.1f", kLossRatio) + " and < " +
             fmt("%.0f", kTrainSeconds) + " s in >= 2 of 3 seeds");
}

void criterion_probe(Experiments& ex) {
  int passed = 0;
  std::string detail;
  for (int seed : kSeeds) {
    auto& run = full_run(ex, seed);
    auto cfg = ex.base;
    cfg.seed = seed;
    run.pretrained_acc = harness::linear_probe(run.params, cfg, ex.data.train, ex.data.val).val_accuracy;
    run.random_acc = harness::linear_probe(model::init_params(cfg.model, seed), cfg, ex.data.train,
                                           ex.data.val)
                         .val_accuracy;
    const bool ok = run.pretrained_acc - run.random_acc >= kProbeMargin - 1e-12;
    passed += ok;
    detail += "seed " + std::to_string(seed) + ": " + fmt("%.3f", run.pretrained_acc) + " vs random " +
              fmt("%.3f", run.random_acc) + (ok ? " ok" : " no") + "; ";
  }
  report(6, passed >= kNeededSeeds,
         detail + "need +" + fmt("%.2f", kProbeMargin) + " in >= 2 of 3 seeds");
}

void criterion_ablation(Experiments& ex) {
  int passed = 0;
  std::string detail;
  for (int seed : kSeeds) {
    auto& full = full_run(ex, seed);
    auto cfg = ex.base;
    cfg.seed = seed;
    if (full.pretrained_acc == 0) {
      full.pretrained_acc = harness::linear_probe(full.params, cfg, ex.data.train, ex.data.val).val_accuracy;
    }
    const auto local_cfg = harness::apply_combo(cfg, harness::parse_combo("local"));
    const auto local = harness::pretrain(local_cfg, ex.data.train,
                                         (ex.work / ("local_seed" + std::to_string(seed))).string());
    const double local_acc =
        harness::linear_probe(local.params, local_cfg, ex.data.train, ex.data.val).val_accuracy;
    const bool ok = full.pretrained_acc >= local_acc;
    passed += ok;
    detail += "seed " + std::to_string(seed) + ": full " + fmt("%.3f", full.pretrained_acc) +
              " vs local-only " + fmt("%.3f", local_acc) + (ok ? " ok" : " no") + "; ";
  }
  report(7, passed >= kNeededSeeds, detail + "need full >= local-only in >= 2 of 3 seeds");
}

// ---------------------------------------------------------------- criterion 8
std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename E>
bool raises(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

void criterion_serialization(const fs::path& work) {
  const auto dir = work / "serialization";
  fs::create_directories(dir);
  const auto seq = data::generate_synthetic({4, data::ShapeKind::CubeSurface, 1.0, 0.01, 9}, 24, 256);
  const auto a = dir / "a.pcsq", b = dir / "b.pcsq";
  data::save_sequence(seq, a.string());
  data::save_sequence(data::load_sequence(a.string()), b.string());
  const bool pcsq_same = slurp(a) == slurp(b);

  data::Checkpoint ck;
  ck.config_json = harness::to_json(harness::default_run_config());
  ck.params = model::init_params(harness::default_run_config().model, 5);
  ck.rng_state = "42";
  ck.step = 200;
  const auto ca = dir / "a.ckpt", cb = dir / "b.ckpt";
  data::save_checkpoint(ck, ca.string());
  data::save_checkpoint(data::load_checkpoint(ca.string()), cb.string());
  const bool ckpt_same = slurp(ca) == slurp(cb);

  const auto good_seq = slurp(a);
  const auto good_ck = slurp(ca);
  const auto bad = dir / "bad";
  int classes_ok = 0, fixtures = 0;
  auto fixture = [&](const std::vector<char>& bytes, bool is_seq, auto tag) {
    using E = typename decltype(tag)::type;
    spit(bad, bytes);
    ++fixtures;
    classes_ok += is_seq ? raises<E>([&] { data::load_sequence(bad.string()); })
                         : raises<E>([&] { data::load_checkpoint(bad.string()); });
  };
  auto with = [](std::vector<char> v, std::size_t at, char c) {
    v[at] = c;
    return v;
  };
  auto cut = [](std::vector<char> v, std::size_t n) {
    v.resize(n);
    return v;
  };
  fixture(with(good_seq, 0, 'Q'), true, std::type_identity<data::BadMagicError>{});
  fixture(with(good_seq, 4, 2), true, std::type_identity<data::VersionError>{});
  fixture(cut(good_seq, good_seq.size() - 1), true, std::type_identity<data::TruncatedError>{});
  fixture(cut(good_seq, 12), true, std::type_identity<data::TruncatedError>{});
  fixture(with(good_seq, 16, 3), true, std::type_identity<data::CorruptHeaderError>{});
  fixture(with(good_ck, 0, 'X'), false, std::type_identity<data::BadMagicError>{});
  fixture(with(good_ck, 4, 7), false, std::type_identity<data::VersionError>{});
  fixture(cut(good_ck, good_ck.size() / 2), false, std::type_identity<data::TruncatedError>{});
  // Distinct classes: no error type is an ancestor of another.
  const bool distinct =
      !raises<data::BadMagicError>([] { throw data::VersionError("p", 0, "x"); }) &&
      !raises<data::VersionError>([] { throw data::TruncatedError("p", 0, "x"); }) &&
      !raises<data::TruncatedError>([] { throw data::CorruptHeaderError("p", 0, "x"); }) &&
      !raises<data::CorruptHeaderError>([] { throw data::BadMagicError("p", 0, "x"); });
  report(8, pcsq_same && ckpt_same && classes_ok == fixtures && distinct,
         std::string(".pcsq roundtrip ") + (pcsq_same ? "identical" : "differs") + ", checkpoint roundtrip " +
             (ckpt_same ? "identical" : "differs") + ", corrupt fixtures with expected class " +
             std::to_string(classes_ok) + "/" + std::to_string(fixtures) +
             (distinct ? ", classes distinct" : ", classes overlap"));
}

// ---------------------------------------------------------------- criterion 9
void criterion_determinism(Experiments& ex) {
  ex.ensure_data();
  auto cfg = ex.base;
  cfg.seed = 11;
  cfg.epochs = 1;
  const auto a = ex.work / "det_a", b = ex.work / "det_b";
  harness::pretrain(cfg, ex.data.train, a.string());
  harness::pretrain(cfg, ex.data.train, b.string());
  const auto ma = slurp(a / "metrics.csv");
  const bool same = ma == slurp(b / "metrics.csv");
  const bool ck_same = slurp(a / "final.ckpt") == slurp(b / "final.ckpt");
  const auto lines = std::count(ma.begin(), ma.end(), '\n');
  report(9, same && lines > 1,
         std::string("metrics.csv (") + std::to_string(lines - 1) + " steps) " +
             (same ? "bit-identical" : "differs") + ", final checkpoint " +
             (ck_same ? "bit-identical" : "differs"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string only, report_path, work = (fs::temp_directory_path() / "cpr_acceptance").string();
  app.add_option("--only", only, "Comma-separated criterion numbers");
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--report", report_path, "Also write the criterion lines to this file");
  CLI11_PARSE(app, argc, argv);
  if (!report_path.empty()) {
    g_report.open(report_path);
    if (!g_report) {
      std::printf("acceptance aborted: cannot write %s\n", report_path.c_str());
      return 1;
    }
  }

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (!tok.empty()) selected.insert(std::stoi(tok));
  }
  auto want = [&](int id) { return selected.empty() || selected.count(id) != 0; };

  Experiments ex;
  ex.work = work;
  fs::create_directories(ex.work);

  try {
    if (want(1)) criterion_gradcheck();
    if (want(2)) criterion_kernels();
    if (want(3)) criterion_infonce();
    if (want(4)) criterion_colorization();
    if (want(8)) criterion_serialization(ex.work);
    if (want(9)) criterion_determinism(ex);
    if (want(5)) criterion_training(ex);
    if (want(6)) criterion_probe(ex);
    if (want(7)) criterion_ablation(ex);
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    if (g_report.is_open()) g_report << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
