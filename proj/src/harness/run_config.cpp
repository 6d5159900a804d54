#include "cpr/harness/run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cpr/core/error.hpp"

namespace cpr::harness {

using nlohmann::ordered_json;

namespace {

class Reader {
 public:
  Reader(const ordered_json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
    for (const auto& [key, value] : obj_.items()) unseen_.push_back(key);
  }

  template <typename V>
  void get(const char* key, V& out) {
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    std::erase(unseen_, std::string(key));
    const auto& v = *it;
    if constexpr (std::is_same_v<V, bool>) {
      if (!v.is_boolean()) fail(key, "a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<V>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<V> && v.get<std::int64_t>() < 0)) {
        fail(key, "a non-negative integer");
      }
      out = v.get<V>();
    } else {
      if (!v.is_number()) fail(key, "a number");
      out = v.get<V>();
    }
  }

  Reader child(const char* key) {
    std::erase(unseen_, std::string(key));
    const auto it = obj_.find(key);
    static const ordered_json empty = ordered_json::object();
    return Reader(it == obj_.end() ? empty : *it, where_ + "." + key);
  }

  void finish() const {
    if (!unseen_.empty()) throw ConfigError(where_ + ": unknown key '" + unseen_.front() + "'");
  }

 private:
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError(where_ + "." + key + ": expected " + what);
  }

  const ordered_json& obj_;
  std::string where_;
  std::vector<std::string> unseen_;
};

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (batch < 2) throw ConfigError("batch must be at least 2 (negatives come from the batch)");
  if (frame_stride == 0) throw ConfigError("frame_stride must be positive");
  if (!(lr > 0) || !(lr_min >= 0) || lr_min > lr) {
    throw ConfigError("need 0 <= lr_min <= lr and lr > 0");
  }
  if (probe.batch == 0 || !(probe.lr > 0) || probe.momentum < 0 || probe.momentum >= 1) {
    throw ConfigError("probe: need batch > 0, lr > 0 and momentum in [0, 1)");
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  auto& m = c.model;
  Reader r(j, "config");
  r.get("T", m.T);
  r.get("frame_stride", c.frame_stride);
  r.get("N", m.N);
  r.get("S", m.S);
  {
    auto e = r.child("encoder");
    e.get("r_anchors", m.encoder.r_anchors);
    e.get("radius", m.encoder.radius);
    e.get("k_neighbors", m.encoder.k_neighbors);
    e.get("temporal_kernel", m.encoder.temporal_kernel);
    e.get("temporal_stride", m.encoder.temporal_stride);
    e.get("c_out", m.encoder.c_out);
    e.get("l_out", m.encoder.l_out);
    e.get("spatial_hidden", m.encoder.spatial_hidden);
    e.finish();
  }
  {
    auto t = r.child("transformer");
    t.get("layers", m.transformer.layers);
    t.get("heads", m.transformer.heads);
    t.get("c", m.transformer.c);
    t.get("ffn_mult", m.transformer.ffn_mult);
    t.finish();
  }
  r.get("tau", m.tau);
  r.get("lambda", m.lambda);
  r.get("N_prime", m.N_prime);
  r.get("projection_dim", m.projection_dim);
  r.get("decoder_hidden", m.decoder_hidden);
  r.get("time_weight", m.time_weight);
  r.get("batch", c.batch);
  r.get("lr", c.lr);
  r.get("lr_min", c.lr_min);
  r.get("epochs", c.epochs);
  r.get("seed", c.seed);
  r.get("split_seed", c.split_seed);
  {
    auto t = r.child("toggles");
    t.get("local_on", m.toggles.local_on);
    t.get("global_on", m.toggles.global_on);
    t.get("recon_on", m.toggles.recon_on);
    t.get("hard_negatives_on", m.toggles.hard_negatives_on);
    t.get("colorize_on", m.toggles.colorize_on);
    t.get("cross_batch_local", m.toggles.cross_batch_local);
    t.finish();
  }
  {
    auto p = r.child("probe");
    p.get("epochs", c.probe.epochs);
    p.get("warmup_epochs", c.probe.warmup_epochs);
    p.get("batch", c.probe.batch);
    p.get("lr", c.probe.lr);
    p.get("momentum", c.probe.momentum);
    p.get("weight_decay", c.probe.weight_decay);
    p.finish();
  }
  r.finish();
  m.encoder.n_points = m.N;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_json(const RunConfig& c) {
  const auto& m = c.model;
  ordered_json j;
  j["T"] = m.T;
  j["frame_stride"] = c.frame_stride;
  j["N"] = m.N;
  j["S"] = m.S;
  j["encoder"] = {{"r_anchors", m.encoder.r_anchors},
                  {"radius", m.encoder.radius},
                  {"k_neighbors", m.encoder.k_neighbors},
                  {"temporal_kernel", m.encoder.temporal_kernel},
                  {"temporal_stride", m.encoder.temporal_stride},
                  {"c_out", m.encoder.c_out},
                  {"l_out", m.encoder.l_out},
                  {"spatial_hidden", m.encoder.spatial_hidden}};
  j["transformer"] = {{"layers", m.transformer.layers},
                      {"heads", m.transformer.heads},
                      {"c", m.transformer.c},
                      {"ffn_mult", m.transformer.ffn_mult}};
  j["tau"] = m.tau;
  j["lambda"] = m.lambda;
  j["N_prime"] = m.N_prime;
  j["projection_dim"] = m.projection_dim;
  j["decoder_hidden"] = m.decoder_hidden;
  j["time_weight"] = m.time_weight;
  j["batch"] = c.batch;
  j["lr"] = c.lr;
  j["lr_min"] = c.lr_min;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["split_seed"] = c.split_seed;
  j["toggles"] = {{"local_on", m.toggles.local_on},
                  {"global_on", m.toggles.global_on},
                  {"recon_on", m.toggles.recon_on},
                  {"hard_negatives_on", m.toggles.hard_negatives_on},
                  {"colorize_on", m.toggles.colorize_on},
                  {"cross_batch_local", m.toggles.cross_batch_local}};
  j["probe"] = {{"epochs", c.probe.epochs},
                {"warmup_epochs", c.probe.warmup_epochs},
                {"batch", c.probe.batch},
                {"lr", c.probe.lr},
                {"momentum", c.probe.momentum},
                {"weight_decay", c.probe.weight_decay}};
  return j.dump(2);
}

RunConfig default_run_config() {
  RunConfig c;
  c.model.encoder.n_points = c.model.N;
  return c;
}

}  // namespace cpr::harness
