#include "nico/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "nico/error.hpp"
#include "nico/io.hpp"
#include "nico/parallel.hpp"
#include "nico/rng.hpp"

namespace nico {

using nlohmann::json;

namespace {

constexpr double kTieEps = 1e-12;

std::uint64_t stage_key(Stage stage) { return stage == Stage::kIL ? 0x11ULL : 0x22ULL; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long parsed = std::stoll(v, &used);
    if (used != v.size() || parsed < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(parsed);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

}  // namespace

std::string to_string(Stage stage) { return stage == Stage::kIL ? "IL" : "RL"; }

Stage parse_stage(const std::string& text) {
  if (text == "IL" || text == "il") return Stage::kIL;
  if (text == "RL" || text == "rl") return Stage::kRL;
  throw ConfigError("unknown stage '" + text + "' (expected IL|RL)");
}

TrainConfig TrainConfig::defaults(Stage stage) {
  TrainConfig c;
  c.stage = stage;
  if (stage == Stage::kIL) {
    c.epochs = 100;
    c.n_low = 20;
    c.n_high = 50;
    c.behavior_refresh = 1;
  } else {
    c.epochs = 200;
    c.n_low = 20;
    c.n_high = 100;
    c.behavior_refresh = 20;
  }
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  optimizer.validate();
  if (n_low < 4 || n_high < n_low) throw ConfigError("need 4 <= n_low <= n_high");
  if (batch == 0 || batches_per_epoch == 0) throw ConfigError("batch sizes must be positive");
  if (depth == 0) throw ConfigError("depth must be >= 1");
  if (horizon == 0) throw ConfigError("horizon T must be >= 1");
  if (stage == Stage::kRL && group < 2) throw ConfigError("group size G must be >= 2 for RL");
  if (!(ppo_clip > 0.0 && ppo_clip < 1.0)) throw ConfigError("ppo_clip must be in (0, 1)");
  if (behavior_refresh == 0) throw ConfigError("behavior_refresh must be >= 1");
}

TrainConfig parse_train_config(const std::string& text) {
  // The stage key decides which defaults the remaining keys override.
  Stage stage = Stage::kIL;
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream stream(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "stage") stage = parse_stage(value);
    entries.emplace_back(key, value);
  }

  TrainConfig c = TrainConfig::defaults(stage);
  for (const auto& [key, v] : entries) {
    if (key == "stage") continue;
    if (key.rfind("model.", 0) == 0) c.model_overridden = true;
    if (key == "epochs") c.epochs = parse_size(key, v);
    else if (key == "batches_per_epoch") c.batches_per_epoch = parse_size(key, v);
    else if (key == "batch") c.batch = parse_size(key, v);
    else if (key == "n_low") c.n_low = parse_size(key, v);
    else if (key == "n_high") c.n_high = parse_size(key, v);
    else if (key == "depth") c.depth = parse_size(key, v);
    else if (key == "group") c.group = parse_size(key, v);
    else if (key == "horizon") c.horizon = parse_size(key, v);
    else if (key == "ppo_clip") c.ppo_clip = parse_real(key, v);
    else if (key == "behavior_refresh") c.behavior_refresh = parse_size(key, v);
    else if (key == "seed") c.seed = parse_size(key, v);
    else if (key == "model_seed") c.model_seed = parse_size(key, v);
    else if (key == "threads") c.threads = parse_size(key, v);
    else if (key == "lr") c.optimizer.learning_rate = parse_real(key, v);
    else if (key == "weight_decay") c.optimizer.weight_decay = parse_real(key, v);
    else if (key == "beta1") c.optimizer.beta1 = parse_real(key, v);
    else if (key == "beta2") c.optimizer.beta2 = parse_real(key, v);
    else if (key == "adam_eps") c.optimizer.eps = parse_real(key, v);
    else if (key == "clip_norm") c.optimizer.clip_norm = parse_real(key, v);
    else if (key == "lr_decay") c.optimizer.lr_decay_per_epoch = parse_real(key, v);
    else if (key == "model.layers") c.model.layers = parse_size(key, v);
    else if (key == "model.dim") c.model.dim = parse_size(key, v);
    else if (key == "model.hidden") c.model.hidden = parse_size(key, v);
    else if (key == "model.heads") c.model.heads = parse_size(key, v);
    else if (key == "model.logit_clip") c.model.logit_clip = parse_real(key, v);
    else if (key == "model.history") c.model.history_capacity = parse_size(key, v);
    else if (key == "model.recency_mask") c.model.recency_mask = parse_size(key, v);
    else if (key == "model.key_dim") c.model.key_dim = parse_size(key, v);
    else if (key == "model.use_history_feature") c.model.use_history_feature = parse_bool(key, v);
    else if (key == "model.use_recency_mask") c.model.use_recency_mask = parse_bool(key, v);
    else if (key == "model.pooling") c.model.pooling = parse_pooling(v);
    else if (key == "model.norm") c.model.norm = parse_norm(v);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(read_file(path));
}

namespace {

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

}  // namespace

std::string to_config_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "stage = " << to_string(c.stage) << "\n"
      << "epochs = " << c.epochs << "\n"
      << "batches_per_epoch = " << c.batches_per_epoch << "\n"
      << "batch = " << c.batch << "\n"
      << "n_low = " << c.n_low << "\n"
      << "n_high = " << c.n_high << "\n"
      << "depth = " << c.depth << "\n"
      << "group = " << c.group << "\n"
      << "horizon = " << c.horizon << "\n"
      << "ppo_clip = " << shortest(c.ppo_clip) << "\n"
      << "behavior_refresh = " << c.behavior_refresh << "\n"
      << "seed = " << c.seed << "\n"
      << "model_seed = " << c.model_seed << "\n"
      << "threads = " << c.threads << "\n"
      << "lr = " << shortest(c.optimizer.learning_rate) << "\n"
      << "weight_decay = " << shortest(c.optimizer.weight_decay) << "\n"
      << "beta1 = " << shortest(c.optimizer.beta1) << "\n"
      << "beta2 = " << shortest(c.optimizer.beta2) << "\n"
      << "adam_eps = " << shortest(c.optimizer.eps) << "\n"
      << "clip_norm = " << shortest(c.optimizer.clip_norm) << "\n"
      << "lr_decay = " << shortest(c.optimizer.lr_decay_per_epoch) << "\n"
      << "model.layers = " << c.model.layers << "\n"
      << "model.dim = " << c.model.dim << "\n"
      << "model.hidden = " << c.model.hidden << "\n"
      << "model.heads = " << c.model.heads << "\n"
      << "model.logit_clip = " << shortest(c.model.logit_clip) << "\n"
      << "model.history = " << c.model.history_capacity << "\n"
      << "model.recency_mask = " << c.model.recency_mask << "\n"
      << "model.key_dim = " << c.model.effective_key_dim() << "\n"
      << "model.use_history_feature = " << (c.model.use_history_feature ? "true" : "false") << "\n"
      << "model.use_recency_mask = " << (c.model.use_recency_mask ? "true" : "false") << "\n"
      << "model.pooling = " << to_string(c.model.pooling) << "\n"
      << "model.norm = " << to_string(c.model.norm) << "\n";
  return out.str();
}

WarmupResult warmup_state(const Instance& instance, const Policy& behavior, Rng& rng) {
  const auto steps = static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(instance.size())));
  return warmup_state(instance, behavior, rng, steps);
}

WarmupResult warmup_state(const Instance& instance, const Policy& behavior, Rng& rng,
                          std::size_t warmup_steps) {
  WarmupResult result;
  result.state = SearchState(instance, random_tour(instance.size(), rng),
                             behavior.config().history_capacity);
  result.reference_cost = result.state.cost;
  result.steps = warmup_steps;
  const std::size_t recency = behavior.config().active_recency_mask();
  for (std::size_t t = 0; t < warmup_steps; ++t) {
    const PolicyOutput out =
        evaluate_policy(behavior, instance, result.state.tour, result.state.history, recency);
    result.state.apply(sample_action(out, rng).move);
    result.reference_cost = std::min(result.reference_cost, result.state.cost);
  }
  return result;
}

double imitation_loss(Policy& policy, const Instance& instance,
                      const std::vector<ImitationExample>& examples, double weight,
                      bool accumulate_grad) {
  double total = 0.0;
  for (const auto& example : examples) {
    PolicyCache cache;
    const PolicyOutput out =
        evaluate_policy(policy, instance, example.tour, example.history, 0, &cache);
    LogMass mass = negative_log_mass(out, example.targets);
    total += mass.loss;
    if (accumulate_grad && std::isfinite(mass.loss)) {
      for (double& g : mass.grad.data) g *= weight;
      policy.backward(cache, mass.grad);
    }
  }
  return total;
}

GroupBatch collect_group_rollouts(const Instance& instance, const SearchState& start,
                                  double reference_cost, const Policy& behavior,
                                  std::size_t group, std::size_t horizon, std::uint64_t seed,
                                  std::initializer_list<std::uint64_t> stream, bool greedy) {
  GroupBatch batch;
  batch.instance = instance;
  batch.reference_cost = reference_cost;
  batch.recency_length = behavior.config().active_recency_mask();
  batch.members.resize(group);
  const std::vector<std::uint64_t> base(stream);
  for (std::size_t g = 0; g < group; ++g) {
    std::vector<std::uint64_t> key = base;
    key.push_back(g);
    Rng rng = Rng::keyed(seed, key);
    GroupMember& member = batch.members[g];
    SearchState state = start;
    state.instance = &batch.instance;
    member.costs.push_back(state.cost);
    for (std::size_t t = 0; t < horizon; ++t) {
      const PolicyOutput out = evaluate_policy(behavior, batch.instance, state.tour,
                                               state.history, batch.recency_length);
      const SampledAction action = sample_action(out, rng, greedy);
      member.tours.push_back(state.tour);
      member.histories.push_back(state.history);
      member.actions.push_back(action.move);
      member.behavior_log_probs.push_back(action.log_prob);
      state.apply(action.move);
      member.costs.push_back(state.cost);
    }
  }
  return batch;
}

void compute_rewards_and_advantages(GroupBatch& batch) {
  if (!(batch.reference_cost > 0.0)) {
    throw InvalidInput("reference cost must be positive to normalize rewards");
  }
  if (batch.members.empty()) return;
  double group_best = std::numeric_limits<double>::infinity();
  for (const auto& m : batch.members)
    for (double c : m.costs) group_best = std::min(group_best, c);

  std::size_t winner_step = std::numeric_limits<std::size_t>::max();
  for (const auto& m : batch.members) {
    for (std::size_t t = 0; t < m.costs.size() && t < winner_step; ++t) {
      if (m.costs[t] <= group_best + kTieEps) {
        winner_step = t;
        break;
      }
    }
  }
  batch.winner_step = winner_step;

  double mean_reward = 0.0;
  for (auto& m : batch.members) {
    m.best_cost = *std::min_element(m.costs.begin(), m.costs.begin() + winner_step + 1);
    m.reward = std::max(batch.reference_cost - m.best_cost, 0.0) / batch.reference_cost;
    mean_reward += m.reward;
  }
  mean_reward /= static_cast<double>(batch.members.size());
  for (auto& m : batch.members) {
    m.advantage = m.reward - mean_reward;
    m.step_advantages.assign(m.actions.size(), 0.0);
    for (std::size_t t = 0; t < m.actions.size() && t <= winner_step; ++t) {
      m.step_advantages[t] = m.advantage;
    }
  }
}

double normalize_advantages(std::vector<GroupBatch>& batches) {
  double sum = 0.0;
  double sq = 0.0;
  std::size_t count = 0;
  for (const auto& b : batches)
    for (const auto& m : b.members)
      for (double a : m.step_advantages)
        if (a != 0.0) {
          sum += a;
          sq += a * a;
          ++count;
        }
  if (count == 0) return 0.0;
  const double mean = sum / static_cast<double>(count);
  const double std = std::sqrt(std::max(sq / static_cast<double>(count) - mean * mean, 0.0));
  if (std < 1e-8) return 0.0;
  for (auto& b : batches)
    for (auto& m : b.members)
      for (double& a : m.step_advantages)
        if (a != 0.0) a /= std;
  return std;
}

PpoStats ppo_loss(Policy& policy, const std::vector<GroupBatch>& batches, double clip,
                  bool accumulate_grad) {
  PpoStats stats;
  for (const auto& b : batches)
    for (const auto& m : b.members) stats.terms += m.actions.size();
  if (stats.terms == 0) return stats;
  const double inv_terms = 1.0 / static_cast<double>(stats.terms);

  for (const auto& b : batches) {
    for (const auto& m : b.members) {
      for (std::size_t t = 0; t < m.actions.size(); ++t) {
        const double adv = m.step_advantages.empty() ? 0.0 : m.step_advantages[t];
        if (adv == 0.0) continue;  // contributes exactly zero loss and gradient
        PolicyCache cache;
        const PolicyOutput out =
            evaluate_policy(policy, b.instance, m.tours[t], m.histories[t], b.recency_length,
                            accumulate_grad ? &cache : nullptr);
        const double log_prob = out.log_prob(m.actions[t]);
        const double ratio = std::exp(log_prob - m.behavior_log_probs[t]);
        if (!std::isfinite(ratio)) {
          ++stats.dropped_terms;
          continue;
        }
        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
        stats.loss -= std::min(unclipped, clipped) * inv_terms;
        if (clipped < unclipped) {
          ++stats.clipped_terms;
          continue;  // the clipped branch is constant in theta
        }
        if (accumulate_grad) {
          nn::Matrix grad = log_prob_gradient(out, m.actions[t]);
          const double coef = -ratio * adv * inv_terms;
          for (double& g : grad.data) g *= coef;
          policy.backward(cache, grad);
        }
      }
    }
  }
  return stats;
}

PpoStats ppo_update(Policy& policy, nn::AdamW& optimizer, const std::vector<GroupBatch>& batches,
                    double clip) {
  policy.zero_grad();
  PpoStats stats = ppo_loss(policy, batches, clip, true);
  const auto params = policy.parameters();
  optimizer.step(params);
  return stats;
}

std::vector<double> importance_ratios(const Policy& policy, const std::vector<GroupBatch>& batches) {
  std::vector<double> ratios;
  for (const auto& b : batches) {
    for (const auto& m : b.members) {
      for (std::size_t t = 0; t < m.actions.size(); ++t) {
        const PolicyOutput out =
            evaluate_policy(policy, b.instance, m.tours[t], m.histories[t], b.recency_length);
        ratios.push_back(std::exp(out.log_prob(m.actions[t]) - m.behavior_log_probs[t]));
      }
    }
  }
  return ratios;
}

json EpochMetrics::to_json() const {
  return json{{"stage", to_string(stage)},
              {"epoch", epoch},
              {"loss", loss},
              {"mean_reward", mean_reward},
              {"mean_best_cost", mean_best_cost},
              {"zero_signal_fraction", zero_signal_fraction},
              {"lr", learning_rate},
              {"optimizer_steps", optimizer_steps},
              {"skipped_updates", skipped_updates},
              {"skipped_episodes", skipped_episodes},
              {"dropped_terms", dropped_terms}};
}

Trainer::Trainer(TrainConfig config, Logger logger)
    : config_(std::move(config)),
      logger_(std::move(logger)),
      policy_(config_.model, config_.model_seed),
      behavior_(policy_),
      optimizer_(config_.optimizer) {
  config_.validate();
}

Trainer::Trainer(TrainConfig config, const Checkpoint& checkpoint, Logger logger)
    : config_(std::move(config)), logger_(std::move(logger)), optimizer_(config_.optimizer) {
  if (config_.model_overridden && !(config_.model == checkpoint.model)) {
    throw CheckpointError("config model.* settings do not match the checkpoint's model_config");
  }
  config_.model = checkpoint.model;
  config_.validate();
  policy_ = Policy(config_.model, config_.model_seed);
  const bool has_moments = checkpoint.find("adam.m/" + policy_.parameters().front()->name) != nullptr;
  restore_policy(checkpoint, policy_, "", has_moments);

  if (checkpoint.extra.contains("optimizer")) {
    const json& opt = checkpoint.extra["optimizer"];
    optimizer_.set_learning_rate(opt.at("learning_rate").get<double>());
    optimizer_.set_step_count(opt.at("steps").get<std::uint64_t>());
    optimizer_.set_skipped_steps(opt.at("skipped").get<std::uint64_t>());
  }

  const bool same_stage = checkpoint.stage == to_string(config_.stage);
  behavior_ = policy_;
  if (same_stage) {
    epoch_ = checkpoint.epoch;
    if (checkpoint.find("behavior/" + policy_.parameters().front()->name)) {
      restore_policy(checkpoint, behavior_, "behavior/");
    }
    updates_since_refresh_ = checkpoint.extra.value("updates_since_refresh", std::size_t{0});
  }
}

void Trainer::log(const std::string& message) const {
  if (logger_) logger_(message);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.model = config_.model;
  ck.stage = to_string(config_.stage);
  ck.epoch = epoch_;
  ck.extra = json{{"optimizer",
                   {{"learning_rate", optimizer_.learning_rate()},
                    {"steps", optimizer_.step_count()},
                    {"skipped", optimizer_.skipped_steps()}}},
                  {"updates_since_refresh", updates_since_refresh_},
                  {"seed", config_.seed}};
  append_policy_blocks(ck, policy_, "", true);
  append_policy_blocks(ck, behavior_, "behavior/", false);
  return ck;
}

double Trainer::run_il_update(std::size_t batch_index, std::size_t& skipped) {
  const std::uint64_t sk = stage_key(config_.stage);
  Rng size_rng = Rng::keyed(config_.seed, {sk, epoch_, batch_index, 0x517eULL});
  const auto n = static_cast<std::size_t>(size_rng.between(
      static_cast<std::int64_t>(config_.n_low), static_cast<std::int64_t>(config_.n_high)));

  struct Episode {
    Instance instance;
    std::vector<ImitationExample> examples;
    bool ok = false;
  };
  std::vector<Episode> episodes(config_.batch);
  parallel_for(config_.batch, config_.threads, [&](std::size_t b) {
    Episode& ep = episodes[b];
    const std::uint64_t instance_seed = Rng::keyed(config_.seed, {sk, epoch_, batch_index, b, 1}).next();
    ep.instance = generate_uniform(n, instance_seed);
    Rng rng = Rng::keyed(config_.seed, {sk, epoch_, batch_index, b, 2});
    WarmupResult warm = warmup_state(ep.instance, behavior_, rng);
    try {
      for (auto& step : oracle_rollout(warm.state, config_.depth, config_.depth)) {
        ep.examples.push_back({std::move(step.tour), std::move(step.history),
                               std::move(step.optimal_actions)});
      }
      ep.ok = true;
    } catch (const SizeLimitError&) {
      ep.ok = false;
    }
  });

  std::size_t valid = 0;
  for (const auto& ep : episodes) valid += ep.ok ? 1 : 0;
  skipped += config_.batch - valid;
  if (valid < config_.batch) {
    log("warning: " + std::to_string(config_.batch - valid) +
        " imitation episodes skipped (oracle size limit at n = " + std::to_string(n) + ")");
  }
  if (valid == 0) return 0.0;

  policy_.zero_grad();
  const double weight = 1.0 / static_cast<double>(valid);
  double total = 0.0;
  for (const auto& ep : episodes) {
    if (ep.ok) total += imitation_loss(policy_, ep.instance, ep.examples, weight);
  }
  const auto params = policy_.parameters();
  optimizer_.step(params);
  return total / static_cast<double>(valid);
}

double Trainer::run_rl_update(std::size_t batch_index, EpochMetrics& metrics, std::size_t& groups,
                              std::size_t& zero_groups, double& reward_sum, double& best_sum) {
  const std::uint64_t sk = stage_key(config_.stage);
  Rng size_rng = Rng::keyed(config_.seed, {sk, epoch_, batch_index, 0x517eULL});
  const auto n = static_cast<std::size_t>(size_rng.between(
      static_cast<std::int64_t>(config_.n_low), static_cast<std::int64_t>(config_.n_high)));

  std::vector<GroupBatch> batches(config_.batch);
  parallel_for(config_.batch, config_.threads, [&](std::size_t b) {
    const std::uint64_t instance_seed = Rng::keyed(config_.seed, {sk, epoch_, batch_index, b, 1}).next();
    const Instance instance = generate_uniform(n, instance_seed);
    Rng rng = Rng::keyed(config_.seed, {sk, epoch_, batch_index, b, 2});
    const WarmupResult warm = warmup_state(instance, behavior_, rng);
    batches[b] = collect_group_rollouts(instance, warm.state, warm.reference_cost, behavior_,
                                        config_.group, config_.horizon, config_.seed,
                                        {sk, epoch_, batch_index, b});
    compute_rewards_and_advantages(batches[b]);
  });

  for (const auto& b : batches) {
    ++groups;
    bool any = false;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : b.members) {
      reward_sum += m.reward;
      any = any || m.reward > 0.0;
      best = std::min(best, *std::min_element(m.costs.begin(), m.costs.end()));
    }
    best_sum += best;
    if (!any) ++zero_groups;
  }
  normalize_advantages(batches);
  const PpoStats stats = ppo_update(policy_, optimizer_, batches, config_.ppo_clip);
  metrics.dropped_terms += stats.dropped_terms;
  return stats.loss;
}

EpochMetrics Trainer::run_epoch() {
  EpochMetrics metrics;
  metrics.stage = config_.stage;
  double loss_sum = 0.0;
  std::size_t groups = 0, zero_groups = 0;
  double reward_sum = 0.0, best_sum = 0.0;
  for (std::size_t b = 0; b < config_.batches_per_epoch; ++b) {
    if (config_.stage == Stage::kIL) {
      loss_sum += run_il_update(b, metrics.skipped_episodes);
    } else {
      loss_sum += run_rl_update(b, metrics, groups, zero_groups, reward_sum, best_sum);
    }
    if (++updates_since_refresh_ >= config_.behavior_refresh) {
      behavior_ = policy_;
      updates_since_refresh_ = 0;
    }
  }
  ++epoch_;
  optimizer_.decay_learning_rate();

  metrics.epoch = epoch_;
  metrics.loss = loss_sum / static_cast<double>(config_.batches_per_epoch);
  if (groups > 0) {
    metrics.mean_reward = reward_sum / static_cast<double>(groups * config_.group);
    metrics.mean_best_cost = best_sum / static_cast<double>(groups);
    metrics.zero_signal_fraction = static_cast<double>(zero_groups) / static_cast<double>(groups);
  }
  metrics.learning_rate = optimizer_.learning_rate();
  metrics.optimizer_steps = optimizer_.step_count();
  metrics.skipped_updates = optimizer_.skipped_steps();
  return metrics;
}

Checkpoint train(const TrainConfig& config, const std::optional<Checkpoint>& start,
                 const std::filesystem::path& out_dir, Trainer::Logger logger) {
  Trainer trainer = start ? Trainer(config, *start, logger) : Trainer(config, logger);
  std::filesystem::create_directories(out_dir);
  const auto metrics_path = out_dir / "metrics.jsonl";
  while (trainer.epochs_done() < trainer.config().epochs) {
    const EpochMetrics metrics = trainer.run_epoch();
    {
      std::ofstream out(metrics_path, std::ios::app);
      out << metrics.to_json().dump() << "\n";
    }
    if (logger) logger(metrics.to_json().dump());
    const Checkpoint ck = trainer.checkpoint();
    save_checkpoint(out_dir / (to_string(config.stage) + "_epoch" + std::to_string(ck.epoch) + ".ckpt"), ck);
    save_checkpoint(out_dir / "last.ckpt", ck);
  }
  return trainer.checkpoint();
}

}  // namespace nico
