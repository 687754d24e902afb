#include "nico/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nico/error.hpp"
#include "nico/rng.hpp"

namespace nico {

using nn::Matrix;

namespace {

constexpr std::size_t kScalarFeatures = feature_col::kCount - 4;  // everything after u/v coords
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

void PolicyConfig::validate() const {
  if (layers == 0 || dim == 0 || hidden == 0 || heads == 0) {
    throw ConfigError("policy dimensions must be positive");
  }
  if (dim % heads != 0) {
    throw ConfigError("dim " + std::to_string(dim) + " is not divisible by heads " +
                      std::to_string(heads));
  }
  if (!(logit_clip > 0.0)) throw ConfigError("logit_clip must be > 0");
  if (history_capacity == 0) throw ConfigError("history_capacity must be positive");
  if (recency_mask > history_capacity) {
    throw ConfigError("recency_mask cannot exceed history_capacity");
  }
}

std::string to_string(Pooling pooling) { return pooling == Pooling::kMean ? "mean" : "max"; }
std::string to_string(nn::NormKind norm) { return norm == nn::NormKind::kRms ? "rms" : "layer"; }

Pooling parse_pooling(const std::string& text) {
  if (text == "mean") return Pooling::kMean;
  if (text == "max") return Pooling::kMax;
  throw ConfigError("unknown pooling '" + text + "' (expected mean|max)");
}

nn::NormKind parse_norm(const std::string& text) {
  if (text == "rms") return nn::NormKind::kRms;
  if (text == "layer") return nn::NormKind::kLayer;
  throw ConfigError("unknown norm '" + text + "' (expected rms|layer)");
}

Policy::Policy(const PolicyConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng = Rng::keyed(seed, {0x90'11'c1ULL});
  const std::size_t d = config_.dim;
  coord_embed_ = nn::Parameter("coord_embed", 2, d);
  nn::init_uniform(coord_embed_, 2, rng);
  token_proj_ = nn::Linear("token_proj", 2 * d + kScalarFeatures, d, true, rng);
  mix_ = nn::FeedForward("cycle_mix", 3 * d, config_.hidden, d, rng);
  gate_ = nn::Parameter("cycle_mix.gate", 1, 1);
  gate_.value.data[0] = 0.1;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string name = "block" + std::to_string(l);
    blocks_.push_back({nn::MultiHeadAttention(name + ".attn", d, config_.heads, rng),
                       nn::FeedForward(name + ".ffn", d, config_.hidden, d, rng)});
  }
  local_ = nn::Linear("context.local", d, d, false, rng);
  global_ = nn::Linear("context.global", d, d, false, rng);
  query_ = nn::Linear("decoder.query", d, config_.effective_key_dim(), false, rng);
  key_ = nn::Linear("decoder.key", d, config_.effective_key_dim(), false, rng);
}

std::vector<nn::Parameter*> Policy::parameters() {
  std::vector<nn::Parameter*> out{&coord_embed_};
  token_proj_.collect(out);
  mix_.collect(out);
  out.push_back(&gate_);
  for (auto& block : blocks_) {
    block.attention.collect(out);
    block.ffn.collect(out);
  }
  local_.collect(out);
  global_.collect(out);
  query_.collect(out);
  key_.collect(out);
  return out;
}

std::vector<const nn::Parameter*> Policy::parameters() const {
  auto mutable_params = const_cast<Policy*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t Policy::parameter_count() const {
  std::size_t total = 0;
  for (const auto* p : parameters()) total += p->count();
  return total;
}

void Policy::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

Matrix Policy::embed_forward(const Matrix& features, PolicyCache* cache) const {
  if (features.cols != feature_col::kCount) {
    throw ShapeError("expected " + std::to_string(feature_col::kCount) +
                     " feature columns, got " + features.shape());
  }
  const std::size_t n = features.rows;
  const std::size_t d = config_.dim;
  Matrix cu(n, 2), cv(n, 2);
  for (std::size_t k = 0; k < n; ++k) {
    cu(k, 0) = features(k, feature_col::kUx);
    cu(k, 1) = features(k, feature_col::kUy);
    cv(k, 0) = features(k, feature_col::kVx);
    cv(k, 1) = features(k, feature_col::kVy);
  }
  const Matrix eu = nn::matmul(cu, coord_embed_.value);
  const Matrix ev = nn::matmul(cv, coord_embed_.value);
  Matrix z(n, 2 * d + kScalarFeatures);
  for (std::size_t k = 0; k < n; ++k) {
    double* zr = z.row(k);
    std::copy(eu.row(k), eu.row(k) + d, zr);
    std::copy(ev.row(k), ev.row(k) + d, zr + d);
    for (std::size_t s = 0; s < kScalarFeatures; ++s) zr[2 * d + s] = features(k, 4 + s);
    if (!config_.use_history_feature) zr[2 * d + (feature_col::kHistory - 4)] = 0.0;
  }
  Matrix h = token_proj_.forward(z);
  if (cache) {
    cache->features = features;
    cache->coords_u = std::move(cu);
    cache->coords_v = std::move(cv);
    cache->embed_input = std::move(z);
    cache->h0 = h;
  }
  return h;
}

Matrix Policy::mix_forward(const Matrix& h, PolicyCache* cache) const {
  const std::size_t n = h.rows;
  const std::size_t d = h.cols;
  Matrix concat(n, 3 * d);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t prev = (k + n - 1) % n;
    const std::size_t next = (k + 1) % n;
    double* row = concat.row(k);
    std::copy(h.row(prev), h.row(prev) + d, row);
    std::copy(h.row(k), h.row(k) + d, row + d);
    std::copy(h.row(next), h.row(next) + d, row + 2 * d);
  }
  nn::FeedForward::Cache ffn_cache;
  Matrix mixed = mix_.forward(concat, cache ? &ffn_cache : nullptr);
  Matrix out = h;
  nn::add_inplace(out, mixed, gate_.value.data[0]);
  if (cache) {
    cache->mix_input = std::move(concat);
    cache->mix_ffn = std::move(ffn_cache);
    cache->mix_out = std::move(mixed);
  }
  return out;
}

Matrix Policy::encode_forward(const Matrix& input, PolicyCache* cache) const {
  Matrix h = input;
  if (cache) cache->blocks.assign(blocks_.size(), {});
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& block = blocks_[l];
    PolicyCache::Block* bc = cache ? &cache->blocks[l] : nullptr;
    Matrix r1 = h;
    nn::add_inplace(r1, block.attention.forward(h, bc ? &bc->attention : nullptr));
    h = nn::norm_forward(r1, config_.norm, bc ? &bc->norm1 : nullptr);
    Matrix r2 = h;
    nn::add_inplace(r2, block.ffn.forward(h, bc ? &bc->ffn : nullptr));
    h = nn::norm_forward(r2, config_.norm, bc ? &bc->norm2 : nullptr);
  }
  if (cache) cache->encoded = h;
  return h;
}

Matrix Policy::context_forward(const Matrix& h, PolicyCache* cache) const {
  const std::size_t n = h.rows;
  const std::size_t d = h.cols;
  Matrix pooled(1, d);
  std::vector<std::size_t> argmax(d, 0);
  if (config_.pooling == Pooling::kMean) {
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t c = 0; c < d; ++c) pooled(0, c) += h(k, c);
    for (std::size_t c = 0; c < d; ++c) pooled(0, c) /= static_cast<double>(n);
  } else {
    for (std::size_t c = 0; c < d; ++c) {
      double best = h(0, c);
      for (std::size_t k = 1; k < n; ++k) {
        if (h(k, c) > best) {
          best = h(k, c);
          argmax[c] = k;
        }
      }
      pooled(0, c) = best;
    }
  }
  Matrix fused = local_.forward(h);
  const Matrix glob = global_.forward(pooled);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t c = 0; c < fused.cols; ++c) fused(k, c) += glob(0, c);
  if (cache) {
    cache->pooled = std::move(pooled);
    cache->pool_argmax = std::move(argmax);
    cache->fused = fused;
  }
  return fused;
}

Matrix Policy::decode_forward(const Matrix& fused, PolicyCache* cache) const {
  const std::size_t n = fused.rows;
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.effective_key_dim()));
  Matrix q = query_.forward(fused);
  Matrix k = key_.forward(fused);
  Matrix t = nn::matmul_a_bt(q, k);
  for (double& v : t.data) v = std::tanh(v * scale);
  Matrix logits(n, n);
  const double c = config_.logit_clip;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double s = 0.5 * (c * t(i, j) + c * t(j, i));
      logits(i, j) = s;
      logits(j, i) = s;
    }
  }
  if (cache) {
    cache->query = std::move(q);
    cache->key = std::move(k);
    cache->tanh_raw = std::move(t);
  }
  return logits;
}

Matrix Policy::embed_tokens(const Matrix& features) const { return embed_forward(features, nullptr); }
Matrix Policy::cycle_mix(const Matrix& h) const { return mix_forward(h, nullptr); }
Matrix Policy::encode(const Matrix& h) const { return encode_forward(h, nullptr); }
Matrix Policy::global_context(const Matrix& h) const { return context_forward(h, nullptr); }
Matrix Policy::pairwise_logits(const Matrix& fused) const { return decode_forward(fused, nullptr); }

Matrix Policy::logits(const Matrix& features) const {
  return decode_forward(context_forward(encode_forward(mix_forward(embed_forward(features, nullptr),
                                                                   nullptr),
                                                       nullptr),
                                        nullptr),
                        nullptr);
}

Matrix Policy::forward(const Matrix& features, PolicyCache& cache) const {
  Matrix h = embed_forward(features, &cache);
  h = mix_forward(h, &cache);
  h = encode_forward(h, &cache);
  h = context_forward(h, &cache);
  return decode_forward(h, &cache);
}

void Policy::backward(const PolicyCache& cache, const Matrix& dlogits) {
  const std::size_t n = dlogits.rows;
  const std::size_t d = config_.dim;

  // Decoder: symmetrize, tanh clip, scaled dot product.
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.effective_key_dim()));
  const double c = config_.logit_clip;
  Matrix draw(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dclipped = 0.5 * (dlogits(i, j) + dlogits(j, i));
      const double t = cache.tanh_raw(i, j);
      draw(i, j) = dclipped * c * (1.0 - t * t) * scale;
    }
  }
  const Matrix dq = nn::matmul(draw, cache.key);
  const Matrix dk = nn::matmul_at_b(draw, cache.query);
  Matrix dfused = query_.backward(cache.fused, dq);
  nn::add_inplace(dfused, key_.backward(cache.fused, dk));

  // Global context.
  Matrix dh = local_.backward(cache.encoded, dfused);
  Matrix dglob(1, dfused.cols);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t col = 0; col < dfused.cols; ++col) dglob(0, col) += dfused(k, col);
  const Matrix dpooled = global_.backward(cache.pooled, dglob);
  if (config_.pooling == Pooling::kMean) {
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t col = 0; col < d; ++col) dh(k, col) += dpooled(0, col) / static_cast<double>(n);
  } else {
    for (std::size_t col = 0; col < d; ++col) dh(cache.pool_argmax[col], col) += dpooled(0, col);
  }

  // Encoder blocks in reverse.
  for (std::size_t l = blocks_.size(); l-- > 0;) {
    Block& block = blocks_[l];
    const PolicyCache::Block& bc = cache.blocks[l];
    Matrix dr2 = nn::norm_backward(bc.norm2, config_.norm, dh);
    Matrix dh1 = dr2;
    nn::add_inplace(dh1, block.ffn.backward(bc.ffn, dr2));
    Matrix dr1 = nn::norm_backward(bc.norm1, config_.norm, dh1);
    dh = dr1;
    nn::add_inplace(dh, block.attention.backward(bc.attention, dr1));
  }

  // Cycle mixing: out = h + gate * mix([prev, h, next]).
  const double alpha = gate_.value.data[0];
  double dalpha = 0.0;
  for (std::size_t k = 0; k < dh.data.size(); ++k) dalpha += dh.data[k] * cache.mix_out.data[k];
  gate_.grad.data[0] += dalpha;
  Matrix dmixed = dh;
  for (double& v : dmixed.data) v *= alpha;
  const Matrix dconcat = mix_.backward(cache.mix_ffn, dmixed);
  Matrix dh0 = dh;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t prev = (k + n - 1) % n;
    const std::size_t next = (k + 1) % n;
    const double* row = dconcat.row(k);
    for (std::size_t col = 0; col < d; ++col) {
      dh0(prev, col) += row[col];
      dh0(k, col) += row[d + col];
      dh0(next, col) += row[2 * d + col];
    }
  }

  // Token embedding.
  const Matrix dz = token_proj_.backward(cache.embed_input, dh0);
  Matrix deu(n, d), dev(n, d);
  for (std::size_t k = 0; k < n; ++k) {
    std::copy(dz.row(k), dz.row(k) + d, deu.row(k));
    std::copy(dz.row(k) + d, dz.row(k) + 2 * d, dev.row(k));
  }
  nn::add_inplace(coord_embed_.grad, nn::matmul_at_b(cache.coords_u, deu));
  nn::add_inplace(coord_embed_.grad, nn::matmul_at_b(cache.coords_v, dev));
}

double PolicyOutput::prob(TwoOptMove m) const {
  const double lp = log_prob(m);
  return lp == kNegInf ? 0.0 : std::exp(lp);
}

std::vector<std::uint8_t> action_mask(std::size_t n, const HistoryBuffer& history,
                                      std::size_t recency_length) {
  std::vector<std::uint8_t> mask(n * n, 0);
  for (const TwoOptMove& m : feasible_moves(n)) mask[m.i * n + m.j] = 1;
  if (recency_length > 0) {
    for (const TwoOptMove& m : history.recent(recency_length)) {
      if (!m.valid() || static_cast<std::size_t>(std::max(m.i, m.j)) >= n) continue;
      mask[m.i * n + m.j] = 0;
      mask[m.j * n + m.i] = 0;
    }
  }
  return mask;
}

PolicyOutput action_distribution(const Matrix& logits, const HistoryBuffer& history,
                                 std::size_t recency_length) {
  const std::size_t n = logits.rows;
  if (n < 4 || logits.cols != n) {
    throw InvalidInput("action_distribution needs a square logit matrix with n >= 4, got " +
                       logits.shape());
  }
  PolicyOutput out;
  out.logits = logits;
  out.mask = action_mask(n, history, recency_length);
  out.log_probs = Matrix(n, n, kNegInf);

  double hi = kNegInf;
  for (std::size_t k = 0; k < n * n; ++k) {
    if (!out.mask[k]) continue;
    ++out.live_count;
    hi = std::max(hi, logits.data[k]);
  }
  if (out.live_count == 0) {
    throw NoActionError("every 2-opt move is masked (n = " + std::to_string(n) +
                        ", recency mask = " + std::to_string(recency_length) + ")");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < n * n; ++k) {
    if (out.mask[k]) total += std::exp(logits.data[k] - hi);
  }
  const double lse = hi + std::log(total);
  for (std::size_t k = 0; k < n * n; ++k) {
    if (out.mask[k]) out.log_probs.data[k] = logits.data[k] - lse;
  }
  return out;
}

SampledAction sample_action(const PolicyOutput& output, Rng& rng, bool greedy) {
  const std::size_t n = output.n();
  if (output.live_count == 0) throw NoActionError("no live action to sample");
  std::size_t chosen = n * n;
  if (greedy) {
    double best = kNegInf;
    for (std::size_t k = 0; k < n * n; ++k) {
      if (output.mask[k] && (chosen == n * n || output.logits.data[k] > best)) {
        best = output.logits.data[k];
        chosen = k;
      }
    }
  } else {
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::size_t last_live = n * n;
    for (std::size_t k = 0; k < n * n; ++k) {
      if (!output.mask[k]) continue;
      last_live = k;
      cumulative += std::exp(output.log_probs.data[k]);
      if (u < cumulative) {
        chosen = k;
        break;
      }
    }
    if (chosen == n * n) chosen = last_live;  // rounding left a sliver at the top
  }
  const TwoOptMove move{static_cast<int>(chosen / n), static_cast<int>(chosen % n)};
  return {move, output.log_probs.data[chosen]};
}

Matrix log_prob_gradient(const PolicyOutput& output, TwoOptMove move) {
  const std::size_t n = output.n();
  Matrix grad(n, n);
  for (std::size_t k = 0; k < n * n; ++k) {
    if (output.mask[k]) grad.data[k] = -std::exp(output.log_probs.data[k]);
  }
  grad(move.i, move.j) += 1.0;
  return grad;
}

LogMass negative_log_mass(const PolicyOutput& output, const std::vector<TwoOptMove>& targets) {
  const std::size_t n = output.n();
  std::vector<std::uint8_t> in_set(n * n, 0);
  double hi = kNegInf;
  for (const TwoOptMove& m : targets) {
    const std::size_t k = m.i * n + m.j;
    if (!output.mask[k] || in_set[k]) continue;
    in_set[k] = 1;
    hi = std::max(hi, output.log_probs.data[k]);
  }
  LogMass result;
  result.grad = Matrix(n, n);
  if (hi == kNegInf) {
    result.loss = std::numeric_limits<double>::infinity();
    return result;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < n * n; ++k) {
    if (in_set[k]) total += std::exp(output.log_probs.data[k] - hi);
  }
  const double log_mass = hi + std::log(total);
  result.loss = -log_mass;
  for (std::size_t k = 0; k < n * n; ++k) {
    if (!output.mask[k]) continue;
    const double p = std::exp(output.log_probs.data[k]);
    const double q = in_set[k] ? std::exp(output.log_probs.data[k] - log_mass) : 0.0;
    result.grad.data[k] = p - q;
  }
  return result;
}

PolicyOutput evaluate_policy(const Policy& policy, const Instance& instance,
                             std::span<const int> tour, const HistoryBuffer& history,
                             std::size_t recency_length, PolicyCache* cache) {
  const Matrix features = compute_features(instance, tour, history);
  const Matrix logits = cache ? policy.forward(features, *cache) : policy.logits(features);
  return action_distribution(logits, history, recency_length);
}

}  // namespace nico
