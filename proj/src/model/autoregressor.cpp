#include "cpr/model/autoregressor.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "cpr/core/ops.hpp"
#include "cpr/model/init.hpp"

namespace cpr::model {

using namespace core;

namespace {

std::vector<std::size_t> iota(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

template <typename T>
Var<T> affine_norm(Var<T> x, ParamScope<T>& scope, const std::string& prefix) {
  return layer_norm(x) * scope(prefix + ".gamma") + scope(prefix + ".beta");
}

template <typename T>
Var<T> attention(Var<T> x, ParamScope<T>& scope, const std::string& prefix, std::size_t heads,
                 std::vector<Tensor<T>>* weights) {
  const std::size_t B = x.shape()[0];
  const std::size_t n = x.shape()[1];
  const std::size_t c = x.shape()[2];
  const std::size_t dh = c / heads;
  auto split_heads = [&](Var<T> v) {
    return reshape(permute(reshape(v, {B, n, heads, dh}), {0, 2, 1, 3}), {B * heads, n, dh});
  };
  Var<T> q = split_heads(linear(x, scope(prefix + ".wq"), scope(prefix + ".bq")));
  // No key bias: it adds a per-query constant to the scores, which softmax cancels.
  Var<T> k = split_heads(matmul(x, scope(prefix + ".wk")));
  Var<T> v = split_heads(linear(x, scope(prefix + ".wv"), scope(prefix + ".bv")));
  Var<T> a = softmax(scale(matmul(q, transpose(k)), static_cast<T>(1.0 / std::sqrt(double(dh)))));
  if (weights) weights->push_back(a.value());
  Var<T> o = reshape(permute(reshape(matmul(a, v), {B, heads, n, dh}), {0, 2, 1, 3}), {B, n, c});
  return linear(o, scope(prefix + ".wo"), scope(prefix + ".bo"));
}

}  // namespace

template <typename T>
Var<T> positional_embed(Var<T> coords, ParamScope<T>& scope) {
  if (coords.shape().empty() || coords.shape().back() != 4) {
    throw ShapeError("positional_embed: expected (..., 4) coordinates, got " +
                     shape_str(coords.shape()));
  }
  return linear(coords, scope("autoregressor.pos.w"), scope("autoregressor.pos.b"));
}

template <typename T>
Tensor<T> normalize_positions(Tensor<T> coords, std::size_t frames) {
  const T denom = frames > 1 ? static_cast<T>(frames - 1) : T(0);
  for (std::size_t i = 3; i < coords.size(); i += 4) {
    coords[i] = denom > 0 ? coords[i] / denom : T(0);
  }
  return coords;
}

template <typename T>
TokenSequence<T> build_token_sequence(Var<T> prefix_feats, const Tensor<T>& prefix_coords,
                                      const Tensor<T>& target_stats, ParamScope<T>& scope) {
  const Shape& fs = prefix_feats.shape();
  if (fs.size() != 5) {
    throw ShapeError("build_token_sequence: expected (B, P, l, r, c) features, got " +
                     shape_str(fs));
  }
  const std::size_t B = fs[0], P = fs[1], l = fs[2], r = fs[3], c = fs[4];
  if (P == 0) throw ShapeError("build_token_sequence: empty prefix");
  if (prefix_coords.shape() != Shape{B, P, l, r, 4}) {
    throw ShapeError("build_token_sequence: coordinates " + shape_str(prefix_coords.shape()) +
                     " do not match features " + shape_str(fs));
  }
  if (target_stats.shape() != Shape{B, 4}) {
    throw ShapeError("build_token_sequence: target stats must be (B, 4), got " +
                     shape_str(target_stats.shape()));
  }
  const std::size_t m = P * l * r;
  Var<T> x = reshape(prefix_feats, {B, m, c});
  Var<T> coords = scope.constant(prefix_coords.reshaped({B, m, 4}));
  Var<T> tokens = x + positional_embed(coords, scope);
  Var<T> cls = reshape(scope("autoregressor.class_token"), {1, 1, c}) +
               reshape(positional_embed(scope.constant(target_stats), scope), {B, 1, c});

  TokenSequence<T> seq;
  seq.tokens = concat<T>({cls, tokens}, 1);
  seq.positions = Tensor<T>({B, m + 1, 4});
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(target_stats.data() + b * 4, 4, seq.positions.data() + b * (m + 1) * 4);
    std::copy_n(prefix_coords.data() + b * m * 4, m * 4,
                seq.positions.data() + (b * (m + 1) + 1) * 4);
  }
  seq.segment_of_token.push_back(-1);
  for (std::size_t s = 0; s < P; ++s) {
    for (std::size_t i = 0; i < l * r; ++i) seq.segment_of_token.push_back(static_cast<int>(s));
  }
  return seq;
}

template <typename T>
TokenSequence<T> build_token_sequence(const std::vector<SegmentEmbedding<T>>& prefix,
                                      const Tensor<T>& target_stats, std::size_t frames,
                                      ParamScope<T>& scope) {
  if (prefix.empty()) throw ShapeError("build_token_sequence: empty prefix");
  std::vector<Var<T>> feats;
  std::vector<T> coords;
  for (const auto& seg : prefix) {
    feats.push_back(seg.feats);
    const auto norm = normalize_positions(seg.anchor_coords, frames);
    coords.insert(coords.end(), norm.vec().begin(), norm.vec().end());
  }
  const Shape& s = prefix.front().feats.shape();
  const std::size_t P = prefix.size();
  Var<T> stacked = reshape(concat(feats, 0), {1, P, s[0], s[1], s[2]});
  return build_token_sequence(stacked, Tensor<T>({1, P, s[0], s[1], 4}, std::move(coords)),
                              target_stats.reshaped({1, 4}), scope);
}

template <typename T>
Var<T> transformer_forward(Var<T> tokens, ParamScope<T>& scope, const TransformerConfig& cfg,
                           std::vector<Tensor<T>>* attention_weights) {
  const Shape& s = tokens.shape();
  if (s.size() != 3 || s[2] != cfg.c) {
    throw ConfigError("transformer_forward: tokens " + shape_str(s) +
                      " do not match model width " + std::to_string(cfg.c));
  }
  if (cfg.heads == 0 || cfg.c % cfg.heads != 0) {
    throw ConfigError("transformer_forward: width not divisible by heads");
  }
  Var<T> x = tokens;
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    const std::string p = "autoregressor.layer" + std::to_string(i);
    x = x + attention(affine_norm(x, scope, p + ".ln1"), scope, p + ".attn", cfg.heads,
                      attention_weights);
    Var<T> h = gelu(linear(affine_norm(x, scope, p + ".ln2"), scope(p + ".ffn.w1"),
                           scope(p + ".ffn.b1")));
    x = x + linear(h, scope(p + ".ffn.w2"), scope(p + ".ffn.b2"));
  }
  return x;
}

template <typename T>
SplitOutputs<T> split_outputs(Var<T> outputs, std::size_t prefix_segments,
                              std::size_t tokens_per_segment) {
  const Shape& s = outputs.shape();
  if (s.size() != 3 || prefix_segments == 0 ||
      s[1] != prefix_segments * tokens_per_segment + 1) {
    throw ShapeError("split_outputs: " + shape_str(s) + " does not hold a class token and " +
                     std::to_string(prefix_segments) + " segments of " +
                     std::to_string(tokens_per_segment) + " tokens");
  }
  const std::size_t B = s[0];
  const std::size_t c = s[2];
  const std::size_t last = 1 + (prefix_segments - 1) * tokens_per_segment;
  SplitOutputs<T> out;
  out.class_embed = reshape(gather(outputs, {0}, 1), {B, c});
  out.Q = gather(outputs, iota(last, last + tokens_per_segment), 1);
  if (prefix_segments > 1) out.hard_pool = gather(outputs, iota(1, last), 1);
  return out;
}

void add_autoregressor_params(ParamSet<float>& params, const TransformerConfig& cfg,
                              std::mt19937_64& rng) {
  const std::size_t c = cfg.c;
  params.add("autoregressor.class_token", normal_init({c}, 0.02, rng));
  add_dense(params, "autoregressor.pos.w", "autoregressor.pos.b", 4, c, rng);
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    const std::string p = "autoregressor.layer" + std::to_string(i);
    for (const char* ln : {".ln1", ".ln2"}) {
      params.add(p + ln + ".gamma", Tensor<float>::full({c}, 1.0f));
      params.add(p + ln + ".beta", Tensor<float>({c}));
    }
    for (const char* m : {"q", "k", "v", "o"}) {
      if (*m == 'k') {
        params.add(p + ".attn.wk", uniform_init({c, c}, c, rng));
      } else {
        add_dense(params, p + ".attn.w" + m, p + ".attn.b" + m, c, c, rng);
      }
    }
    add_dense(params, p + ".ffn.w1", p + ".ffn.b1", c, c * cfg.ffn_mult, rng);
    add_dense(params, p + ".ffn.w2", p + ".ffn.b2", c * cfg.ffn_mult, c, rng);
  }
}

#define CPR_INSTANTIATE_AR(T)                                                                  \
  template Var<T> positional_embed(Var<T>, ParamScope<T>&);                                   \
  template Tensor<T> normalize_positions(Tensor<T>, std::size_t);                             \
  template TokenSequence<T> build_token_sequence(Var<T>, const Tensor<T>&, const Tensor<T>&,  \
                                                 ParamScope<T>&);                             \
  template TokenSequence<T> build_token_sequence(const std::vector<SegmentEmbedding<T>>&,     \
                                                 const Tensor<T>&, std::size_t,               \
                                                 ParamScope<T>&);                             \
  template Var<T> transformer_forward(Var<T>, ParamScope<T>&, const TransformerConfig&,       \
                                      std::vector<Tensor<T>>*);                               \
  template SplitOutputs<T> split_outputs(Var<T>, std::size_t, std::size_t);

CPR_INSTANTIATE_AR(float)
CPR_INSTANTIATE_AR(double)
CPR_INSTANTIATE_AR(long double)

}  // namespace cpr::model
