#include "cpr/harness/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cpr/harness/pretrain.hpp"
#include "cpr/model/model.hpp"

namespace cpr::harness {

namespace {

constexpr std::size_t kFeatureBatch = 16;

std::vector<int> labels_of(const std::vector<data::PointCloudSequence>& seqs) {
  std::vector<int> out;
  for (const auto& s : seqs) {
    if (!s.label) throw DataError("linear probe: " + s.source_id + " has no label");
    out.push_back(*s.label);
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> extract_features(const core::ParamSet<float>& params,
                                                  const RunConfig& cfg,
                                                  const std::vector<data::PointCloudSequence>& seqs) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < seqs.size(); i += kFeatureBatch) {
    std::vector<core::Tensor<float>> crops;
    for (std::size_t j = i; j < std::min(seqs.size(), i + kFeatureBatch); ++j) {
      crops.push_back(crop(seqs[j], max_crop_start(seqs[j], cfg) / 2, cfg.model.T, cfg.frame_stride));
    }
    const auto feats =
        model::sequence_features(model::prepare_batch(crops, cfg.model), params, cfg.model);
    const std::size_t c = feats.dim(1);
    for (std::size_t b = 0; b < crops.size(); ++b) {
      out.emplace_back(feats.data() + b * c, feats.data() + (b + 1) * c);
    }
  }
  return out;
}

ProbeResult fit_linear_probe(const std::vector<std::vector<double>>& train_x,
                             const std::vector<int>& train_y,
                             const std::vector<std::vector<double>>& val_x,
                             const std::vector<int>& val_y, const ProbeConfig& cfg,
                             std::uint64_t seed) {
  if (train_x.empty()) throw DataError("linear probe: empty training split");
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size()) {
    throw ShapeError("linear probe: feature and label counts differ");
  }
  const std::size_t D = train_x[0].size();
  int max_label = 0;
  for (int y : train_y) {
    if (y < 0) throw DataError("linear probe: negative label");
    max_label = std::max(max_label, y);
  }
  for (int y : val_y) max_label = std::max(max_label, y);
  const std::size_t C = static_cast<std::size_t>(max_label) + 1;

  std::vector<double> mean(D, 0.0), inv_std(D, 0.0);
  for (const auto& x : train_x) {
    for (std::size_t d = 0; d < D; ++d) mean[d] += x[d];
  }
  for (auto& m : mean) m /= static_cast<double>(train_x.size());
  for (const auto& x : train_x) {
    for (std::size_t d = 0; d < D; ++d) inv_std[d] += (x[d] - mean[d]) * (x[d] - mean[d]);
  }
  for (auto& s : inv_std) {
    const double sd = std::sqrt(s / static_cast<double>(train_x.size()));
    s = sd > 1e-12 ? 1.0 / sd : 0.0;
  }
  auto standardize = [&](const std::vector<std::vector<double>>& xs) {
    auto out = xs;
    for (auto& x : out) {
      for (std::size_t d = 0; d < D; ++d) x[d] = (x[d] - mean[d]) * inv_std[d];
    }
    return out;
  };
  const auto tx = standardize(train_x);
  const auto vx = standardize(val_x);

  std::vector<double> W(C * (D + 1), 0.0), vel(W.size(), 0.0), grad(W.size());
  std::vector<double> logits(C);
  auto scores = [&](const std::vector<double>& x) {
    for (std::size_t k = 0; k < C; ++k) {
      const double* w = W.data() + k * (D + 1);
      double s = w[D];
      for (std::size_t d = 0; d < D; ++d) s += w[d] * x[d];
      logits[k] = s;
    }
  };
  auto accuracy = [&](const std::vector<std::vector<double>>& xs, const std::vector<int>& ys) {
    if (xs.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      scores(xs[i]);
      const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
      hit += best == ys[i];
    }
    return static_cast<double>(hit) / static_cast<double>(xs.size());
  };

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(tx.size());
  const std::size_t per_epoch = (tx.size() + cfg.batch - 1) / cfg.batch;
  const std::size_t total = per_epoch * cfg.epochs;
  const std::size_t warmup = per_epoch * std::min(cfg.warmup_epochs, cfg.epochs);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch, ++step) {
      double lr;
      if (step < warmup) {
        lr = cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
      } else {
        lr = cosine_lr(cfg.lr, 0.0, step - warmup, total - warmup);
      }
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& x = tx[order[i]];
        scores(x);
        const double top = *std::max_element(logits.begin(), logits.end());
        double z = 0;
        for (auto& v : logits) z += (v = std::exp(v - top));
        for (std::size_t k = 0; k < C; ++k) {
          const double g = logits[k] / z - (static_cast<int>(k) == train_y[order[i]] ? 1.0 : 0.0);
          double* gw = grad.data() + k * (D + 1);
          for (std::size_t d = 0; d < D; ++d) gw[d] += g * x[d];
          gw[D] += g;
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = 0; i < W.size(); ++i) {
        const bool bias = i % (D + 1) == D;
        const double g = grad[i] * inv + (bias ? 0.0 : cfg.weight_decay * W[i]);
        vel[i] = cfg.momentum * vel[i] + g;
        W[i] -= lr * vel[i];
      }
    }
  }
  ProbeResult r;
  r.classes = C;
  r.train_accuracy = accuracy(tx, train_y);
  r.val_accuracy = accuracy(vx, val_y);
  return r;
}

ProbeResult linear_probe(const core::ParamSet<float>& params, const RunConfig& cfg,
                         const std::vector<data::PointCloudSequence>& train,
                         const std::vector<data::PointCloudSequence>& val) {
  const auto train_y = labels_of(train);
  const auto val_y = labels_of(val);
  return fit_linear_probe(extract_features(params, cfg, train), train_y,
                          extract_features(params, cfg, val), val_y, cfg.probe, cfg.seed);
}

}  // namespace cpr::harness
