#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nico/checkpoint.hpp"
#include "nico/nn.hpp"
#include "nico/oracle.hpp"
#include "nico/policy.hpp"
#include "nico/state.hpp"

namespace nico {

class Rng;

enum class Stage { kIL, kRL };
std::string to_string(Stage stage);
Stage parse_stage(const std::string& text);

struct TrainConfig {
  Stage stage = Stage::kIL;
  std::size_t epochs = 100;
  std::size_t batches_per_epoch = 10;
  std::size_t batch = 32;  // instances per optimizer update
  std::size_t n_low = 20;
  std::size_t n_high = 50;
  std::size_t depth = 2;     // oracle lookahead K
  std::size_t group = 20;    // G
  std::size_t horizon = 32;  // T
  double ppo_clip = 0.2;
  std::size_t behavior_refresh = 1;  // updates between behavior snapshots
  std::uint64_t seed = 0;
  std::uint64_t model_seed = 0;
  std::size_t threads = 1;
  PolicyConfig model;
  bool model_overridden = false;  // set when a config file names model.* keys
  nn::OptimizerConfig optimizer;

  // Stage defaults: IL 100 epochs on n in [20, 50], refresh every update;
  // RL 200 epochs on n in [20, 100], refresh every 20 updates.
  static TrainConfig defaults(Stage stage);
  void validate() const;
};

// Parses `key = value` lines ('#' starts a comment) on top of the stage defaults.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string to_config_text(const TrainConfig& config);

struct WarmupResult {
  SearchState state;
  double reference_cost = 0.0;  // best cost seen during warmup, start tour included
  std::size_t steps = 0;
};

// Random start tour followed by t0 ~ Unif{0..n} sampled behavior-policy steps.
// The instance must outlive the returned state.
WarmupResult warmup_state(const Instance& instance, const Policy& behavior, Rng& rng);
WarmupResult warmup_state(const Instance& instance, const Policy& behavior, Rng& rng,
                          std::size_t warmup_steps);

// One supervised state: the tour/history and the oracle-optimal first moves.
struct ImitationExample {
  Tour tour;
  HistoryBuffer history;
  std::vector<TwoOptMove> targets;
};

// Negative log-mass summed over the examples; gradients scaled by `weight`
// are accumulated into the policy. The recency mask is off during imitation.
double imitation_loss(Policy& policy, const Instance& instance,
                      const std::vector<ImitationExample>& examples, double weight,
                      bool accumulate_grad = true);

struct GroupMember {
  std::vector<TwoOptMove> actions;            // a_0..a_{T-1}
  std::vector<double> behavior_log_probs;     // log p_ref(a_t | s_t)
  std::vector<double> costs;                  // C(pi_0)..C(pi_T)
  std::vector<Tour> tours;                    // pi_0..pi_{T-1}
  std::vector<HistoryBuffer> histories;       // history before a_t
  double best_cost = 0.0;                     // within the cutoff
  double reward = 0.0;
  double advantage = 0.0;                     // centered, before normalization
  std::vector<double> step_advantages;        // per action, zero after the winner step
};

struct GroupBatch {
  Instance instance;
  double reference_cost = 0.0;
  std::size_t winner_step = 0;
  std::size_t recency_length = 0;
  std::vector<GroupMember> members;
};

// G rollouts of exactly T steps from one shared start state. Member g draws
// from Rng::keyed(seed, {stream..., g}).
GroupBatch collect_group_rollouts(const Instance& instance, const SearchState& start,
                                  double reference_cost, const Policy& behavior,
                                  std::size_t group, std::size_t horizon, std::uint64_t seed,
                                  std::initializer_list<std::uint64_t> stream, bool greedy = false);

// Fills winner_step, best costs, rewards, centered advantages and per-step advantages.
void compute_rewards_and_advantages(GroupBatch& batch);

// Divides nonzero per-step advantages across all batches by their population
// standard deviation. Returns the divisor, or 0 when skipped.
double normalize_advantages(std::vector<GroupBatch>& batches);

struct PpoStats {
  double loss = 0.0;
  std::size_t terms = 0;
  std::size_t dropped_terms = 0;
  std::size_t clipped_terms = 0;
};

// Clipped surrogate loss averaged over every (b, g, t); accumulates gradients.
PpoStats ppo_loss(Policy& policy, const std::vector<GroupBatch>& batches, double clip,
                  bool accumulate_grad = true);

// Zeroes gradients, computes the loss and applies one AdamW step.
PpoStats ppo_update(Policy& policy, nn::AdamW& optimizer, const std::vector<GroupBatch>& batches,
                    double clip);

// p_theta / p_ref for every stored action, in (b, g, t) order.
std::vector<double> importance_ratios(const Policy& policy, const std::vector<GroupBatch>& batches);

struct EpochMetrics {
  Stage stage = Stage::kIL;
  std::size_t epoch = 0;  // 1-based count of completed epochs in this stage
  double loss = 0.0;
  double mean_reward = 0.0;
  double mean_best_cost = 0.0;
  double zero_signal_fraction = 0.0;
  double learning_rate = 0.0;
  std::uint64_t optimizer_steps = 0;
  std::uint64_t skipped_updates = 0;
  std::size_t skipped_episodes = 0;
  std::size_t dropped_terms = 0;

  nlohmann::json to_json() const;
};

class Trainer {
 public:
  using Logger = std::function<void(const std::string&)>;

  explicit Trainer(TrainConfig config, Logger logger = {});
  // Resumes the same stage, or starts the next stage from an earlier one while
  // keeping optimizer moments, step count and learning rate.
  Trainer(TrainConfig config, const Checkpoint& checkpoint, Logger logger = {});

  EpochMetrics run_epoch();
  Checkpoint checkpoint() const;

  const TrainConfig& config() const { return config_; }
  Policy& policy() { return policy_; }
  const Policy& behavior() const { return behavior_; }
  nn::AdamW& optimizer() { return optimizer_; }
  std::size_t epochs_done() const { return epoch_; }

 private:
  double run_il_update(std::size_t batch_index, std::size_t& skipped);
  double run_rl_update(std::size_t batch_index, EpochMetrics& metrics, std::size_t& groups,
                       std::size_t& zero_groups, double& reward_sum, double& best_sum);
  void log(const std::string& message) const;

  TrainConfig config_;
  Logger logger_;
  Policy policy_;
  Policy behavior_;
  nn::AdamW optimizer_;
  std::size_t epoch_ = 0;
  std::size_t updates_since_refresh_ = 0;
};

// Runs the configured number of epochs, writing a checkpoint per epoch and one
// metrics line per epoch to <out>/metrics.jsonl.
Checkpoint train(const TrainConfig& config, const std::optional<Checkpoint>& start,
                 const std::filesystem::path& out_dir, Trainer::Logger logger = {});

}  // namespace nico
