#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nico/features.hpp"
#include "nico/nn.hpp"
#include "nico/tsp.hpp"

namespace nico {

class Rng;

enum class Pooling { kMean, kMax };

struct PolicyConfig {
  std::size_t layers = 3;
  std::size_t dim = 128;
  std::size_t hidden = 128;
  std::size_t heads = 8;
  double logit_clip = 10.0;
  std::size_t history_capacity = 16;
  std::size_t recency_mask = 8;
  std::size_t key_dim = 0;  // 0 means key_dim == dim
  bool use_history_feature = true;
  bool use_recency_mask = true;
  Pooling pooling = Pooling::kMean;
  nn::NormKind norm = nn::NormKind::kRms;

  std::size_t effective_key_dim() const { return key_dim == 0 ? dim : key_dim; }
  // Recency mask length used at rollout/evaluation time (0 when disabled).
  std::size_t active_recency_mask() const { return use_recency_mask ? recency_mask : 0; }
  void validate() const;
  bool operator==(const PolicyConfig& o) const {
    return layers == o.layers && dim == o.dim && hidden == o.hidden && heads == o.heads &&
           logit_clip == o.logit_clip && history_capacity == o.history_capacity &&
           recency_mask == o.recency_mask && effective_key_dim() == o.effective_key_dim() &&
           use_history_feature == o.use_history_feature &&
           use_recency_mask == o.use_recency_mask && pooling == o.pooling && norm == o.norm;
  }
};

std::string to_string(Pooling pooling);
std::string to_string(nn::NormKind norm);
Pooling parse_pooling(const std::string& text);
nn::NormKind parse_norm(const std::string& text);

// Intermediate values of one forward pass, consumed by Policy::backward.
struct PolicyCache {
  nn::Matrix features;
  nn::Matrix embed_input;  // [emb_u, emb_v, scalar features]
  nn::Matrix coords_u;
  nn::Matrix coords_v;
  nn::Matrix h0;
  nn::Matrix mix_input;
  nn::FeedForward::Cache mix_ffn;
  nn::Matrix mix_out;  // neighbor mix before gating
  struct Block {
    nn::MultiHeadAttention::Cache attention;
    nn::NormCache norm1;
    nn::FeedForward::Cache ffn;
    nn::NormCache norm2;
  };
  std::vector<Block> blocks;
  nn::Matrix encoded;
  std::vector<std::size_t> pool_argmax;  // per column, max pooling only
  nn::Matrix pooled;
  nn::Matrix fused;
  nn::Matrix query;
  nn::Matrix key;
  nn::Matrix tanh_raw;
};

// Edge-attention encoder-decoder scoring every (i, j) pair of tour edges.
class Policy {
 public:
  Policy() = default;
  Policy(const PolicyConfig& config, std::uint64_t seed);

  const PolicyConfig& config() const { return config_; }

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

  nn::Parameter& gate() { return gate_; }

  // Individual stages.
  nn::Matrix embed_tokens(const nn::Matrix& features) const;
  nn::Matrix cycle_mix(const nn::Matrix& h) const;
  nn::Matrix encode(const nn::Matrix& h) const;
  nn::Matrix global_context(const nn::Matrix& h) const;
  nn::Matrix pairwise_logits(const nn::Matrix& fused) const;

  // n x n logits (clipped, symmetrized, unmasked).
  nn::Matrix logits(const nn::Matrix& features) const;
  nn::Matrix forward(const nn::Matrix& features, PolicyCache& cache) const;
  // Accumulates parameter gradients for the upstream dL/dlogits.
  void backward(const PolicyCache& cache, const nn::Matrix& dlogits);

 private:
  nn::Matrix embed_forward(const nn::Matrix& features, PolicyCache* cache) const;
  nn::Matrix mix_forward(const nn::Matrix& h, PolicyCache* cache) const;
  nn::Matrix encode_forward(const nn::Matrix& h, PolicyCache* cache) const;
  nn::Matrix context_forward(const nn::Matrix& h, PolicyCache* cache) const;
  nn::Matrix decode_forward(const nn::Matrix& fused, PolicyCache* cache) const;

  PolicyConfig config_;
  nn::Parameter coord_embed_;  // 2 x D
  nn::Linear token_proj_;      // (2D + 10) -> D
  nn::FeedForward mix_;        // 3D -> H -> D
  nn::Parameter gate_;         // alpha, 1 x 1
  struct Block {
    nn::MultiHeadAttention attention;
    nn::FeedForward ffn;
  };
  std::vector<Block> blocks_;
  nn::Linear local_;
  nn::Linear global_;
  nn::Linear query_;
  nn::Linear key_;
};

// Masked action distribution over canonical (i < j) cells.
struct PolicyOutput {
  nn::Matrix logits;
  std::vector<std::uint8_t> mask;  // 1 = live
  nn::Matrix log_probs;            // -inf on masked cells
  std::size_t live_count = 0;

  std::size_t n() const { return logits.rows; }
  bool live(TwoOptMove m) const { return mask[m.i * logits.cols + m.j] != 0; }
  double log_prob(TwoOptMove m) const { return log_probs(m.i, m.j); }
  double prob(TwoOptMove m) const;
};

// Feasibility mask plus removal of the last `recency_length` executed moves.
std::vector<std::uint8_t> action_mask(std::size_t n, const HistoryBuffer& history,
                                      std::size_t recency_length);

PolicyOutput action_distribution(const nn::Matrix& logits, const HistoryBuffer& history,
                                 std::size_t recency_length);

struct SampledAction {
  TwoOptMove move;
  double log_prob = 0.0;
};

// Samples proportionally to probability, or argmax with lexicographic (i, j)
// tie-break when `greedy` is set.
SampledAction sample_action(const PolicyOutput& output, Rng& rng, bool greedy = false);

// d log p(move) / d logits.
nn::Matrix log_prob_gradient(const PolicyOutput& output, TwoOptMove move);

// -log sum_{a in targets} p(a) and its gradient w.r.t. the logits.
struct LogMass {
  double loss = 0.0;
  nn::Matrix grad;
};
LogMass negative_log_mass(const PolicyOutput& output, const std::vector<TwoOptMove>& targets);

// Convenience: features -> logits -> distribution for one search state.
PolicyOutput evaluate_policy(const Policy& policy, const Instance& instance,
                             std::span<const int> tour, const HistoryBuffer& history,
                             std::size_t recency_length, PolicyCache* cache = nullptr);

}  // namespace nico
