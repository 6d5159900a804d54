#include "cpr/harness/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cpr/data/checkpoint.hpp"
#include "cpr/data/manifest.hpp"
#include "cpr/geom/pcgeom.hpp"
#include "cpr/model/model.hpp"

namespace cpr::harness {

namespace fs = std::filesystem;

Dataset load_dataset(const std::string& dir, const RunConfig& cfg, std::ostream* log) {
  const auto manifest = data::build_manifest(dir, cfg.split_seed);
  if (manifest.skipped > 0 && log) {
    *log << "warning: skipped " << manifest.skipped << " unreadable file(s) in " << dir << "\n";
  }
  if (manifest.entries.empty()) throw DataError("no .pcsq files in " + dir);
  const std::size_t span = (cfg.model.T - 1) * cfg.frame_stride + 1;
  Dataset ds;
  for (const auto& e : manifest.entries) {
    if (e.N != cfg.model.N) {
      throw DataError(e.path + ": " + std::to_string(e.N) + " points per frame, config N = " +
                      std::to_string(cfg.model.N));
    }
    if (e.T < span) {
      throw DataError(e.path + ": " + std::to_string(e.T) + " frames, a crop of T = " +
                      std::to_string(cfg.model.T) + " at stride " +
                      std::to_string(cfg.frame_stride) + " spans " + std::to_string(span));
    }
    auto seq = data::load_sequence(e.path);
    (e.split == data::Split::Train ? ds.train : ds.val).push_back(std::move(seq));
  }
  return ds;
}

std::size_t max_crop_start(const data::PointCloudSequence& seq, const RunConfig& cfg) {
  const std::size_t span = (cfg.model.T - 1) * cfg.frame_stride + 1;
  if (seq.length() < span) throw DataError(seq.source_id + ": sequence shorter than one crop");
  return seq.length() - span;
}

core::Tensor<float> crop(const data::PointCloudSequence& seq, std::size_t start, std::size_t T,
                         std::size_t stride) {
  const std::size_t N = seq.points();
  if (start + (T - 1) * stride >= seq.length()) throw DataError("crop: out of range");
  core::Tensor<float> out({T, N, 3});
  for (std::size_t t = 0; t < T; ++t) {
    const float* src = seq.frames.data() + (start + t * stride) * N * 3;
    std::copy(src, src + N * 3, out.data() + t * N * 3);
  }
  return geom::normalize_sequence(out).frames;
}

double cosine_lr(double lr, double lr_min, std::size_t step, std::size_t total_steps) {
  if (total_steps <= 1) return lr;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return lr_min + 0.5 * (lr - lr_min) * (1.0 + std::cos(std::acos(-1.0) * progress));
}

void Adam::step(core::ParamSet<float>& params, const core::ParamSet<float>& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, entry] : params.entries()) {
    if (!entry.trainable || !grads.contains(name)) continue;
    const auto& g = grads.at(name);
    auto& m = m_[name];
    auto& v = v_[name];
    m.resize(g.size(), 0.0);
    v.resize(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g[i];
      m[i] = beta1_ * m[i] + (1 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1 - beta2_) * gi * gi;
      const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      entry.value[i] = static_cast<float>(entry.value[i] - update);
    }
  }
}

std::string metrics_line(const MetricsRow& row) {
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", *v);
    return std::string(buf);
  };
  return std::to_string(row.step) + "," + num(row.local) + "," + num(row.global) + "," +
         num(row.recon) + "," + num(row.total) + "," + num(row.lr);
}

namespace {

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

void write_checkpoint(const fs::path& path, const RunConfig& cfg, const core::ParamSet<float>& params,
                      const std::mt19937_64& rng, std::size_t step) {
  data::Checkpoint ck;
  ck.config_json = to_json(cfg);
  ck.params = params;
  ck.rng_state = rng_state(rng);
  ck.step = step;
  data::save_checkpoint(ck, path.string());
}

}  // namespace

PretrainResult pretrain(const RunConfig& cfg, const std::vector<data::PointCloudSequence>& train,
                        const std::string& out_dir, std::ostream* log) {
  cfg.validate();
  if (train.empty()) throw DataError("pretrain: empty training split");
  const auto& mc = cfg.model;
  for (const auto& s : train) {
    if (s.points() != mc.N) throw DataError(s.source_id + ": point count differs from config N");
    max_crop_start(s, cfg);
  }
  PretrainResult result;
  result.params = model::init_params(mc, cfg.seed);
  result.steps_per_epoch = train.size() / cfg.batch;
  if (result.steps_per_epoch == 0 && cfg.epochs > 0) {
    throw ConfigError("pretrain: batch " + std::to_string(cfg.batch) + " exceeds the " +
                      std::to_string(train.size()) + " training sequences");
  }
  const std::size_t total = cfg.epochs * result.steps_per_epoch;

  std::ofstream metrics, timing;
  fs::path out;
  if (!out_dir.empty()) {
    out = out_dir;
    fs::create_directories(out);
    std::ofstream(out / "config.json") << to_json(cfg) << "\n";
    metrics.open(out / "metrics.csv", std::ios::binary);
    timing.open(out / "timing.csv", std::ios::binary);
    if (!metrics || !timing) throw DataError("cannot write metrics under " + out_dir);
    metrics << kMetricsHeader << "\n";
    timing << "step,wall_ms\n";
  }

  std::mt19937_64 rng(cfg.seed ^ 0x5eedc0ffee123457ULL);
  Adam adam;
  std::vector<std::size_t> order(train.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < result.steps_per_epoch; ++b) {
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<core::Tensor<float>> seqs;
      for (std::size_t i = 0; i < cfg.batch; ++i) {
        const auto& s = train[order[b * cfg.batch + i]];
        const std::size_t start =
            std::uniform_int_distribution<std::size_t>(0, max_crop_start(s, cfg))(rng);
        seqs.push_back(crop(s, start, mc.T, cfg.frame_stride));
      }
      const auto batch = model::prepare_batch(seqs, mc);
      core::Graph<float> graph;
      core::ParamScope<float> scope(graph, result.params);
      const auto losses = model::compute_losses(batch, scope, mc);

      MetricsRow row;
      row.step = ++step;
      if (losses.local) row.local = losses.local->value()[0];
      if (losses.global) row.global = losses.global->value()[0];
      if (losses.recon) row.recon = losses.recon->value()[0];
      row.total = losses.total.value()[0];
      row.lr = cosine_lr(cfg.lr, cfg.lr_min, step - 1, total);
      if (!std::isfinite(row.total)) {
        throw NumericError("non-finite loss at step " + std::to_string(step) + ": " +
                           metrics_line(row));
      }

      graph.backward(losses.total);
      core::ParamSet<float> grads;
      for (const auto& [name, var] : scope.bound()) {
        if (const auto* g = graph.grad(var)) grads.add(name, *g);
      }
      adam.step(result.params, grads, row.lr);
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
      if (metrics.is_open()) {
        metrics << metrics_line(row) << "\n";
        timing << row.step << "," << static_cast<long long>(std::llround(row.wall_ms)) << "\n";
      }
      if (log) *log << metrics_line(row) << "  (" << std::llround(row.wall_ms) << " ms)\n";
      result.rows.push_back(row);
    }
    if (!out_dir.empty()) {
      write_checkpoint(out / ("epoch_" + std::to_string(epoch + 1) + ".ckpt"), cfg, result.params,
                       rng, step);
      metrics.flush();
      timing.flush();
    }
  }
  if (!out_dir.empty()) write_checkpoint(out / "final.ckpt", cfg, result.params, rng, step);
  return result;
}

}  // namespace cpr::harness
