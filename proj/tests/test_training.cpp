#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "nico/checkpoint.hpp"
#include "nico/error.hpp"
#include "nico/rng.hpp"
#include "nico/training.hpp"

using namespace nico;
using nn::Matrix;

namespace {

PolicyConfig tiny_model() {
  PolicyConfig c;
  c.layers = 1;
  c.dim = 8;
  c.hidden = 8;
  c.heads = 2;
  return c;
}

void make_uniform(Policy& policy) {
  for (auto* p : policy.parameters())
    if (p->name == "decoder.query.weight") std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
}

GroupMember member_with_costs(std::vector<double> costs) {
  GroupMember m;
  m.costs = std::move(costs);
  m.actions.assign(m.costs.size() - 1, TwoOptMove{0, 2});
  return m;
}

double grad_norm(Policy& policy) {
  auto params = policy.parameters();
  return nn::global_grad_norm(params);
}

TrainConfig tiny_train(Stage stage) {
  TrainConfig c = TrainConfig::defaults(stage);
  c.model = tiny_model();
  c.epochs = 2;
  c.batches_per_epoch = 2;
  c.batch = 2;
  c.n_low = 8;
  c.n_high = 9;
  c.group = 4;
  c.horizon = 4;
  c.behavior_refresh = stage == Stage::kIL ? 1 : 3;
  c.seed = 5;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nico_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config defaults and parsing") {
  const TrainConfig il = TrainConfig::defaults(Stage::kIL);
  CHECK(il.epochs == 100);
  CHECK(il.n_low == 20);
  CHECK(il.n_high == 50);
  CHECK(il.behavior_refresh == 1);
  const TrainConfig rl = TrainConfig::defaults(Stage::kRL);
  CHECK(rl.epochs == 200);
  CHECK(rl.n_high == 100);
  CHECK(rl.behavior_refresh == 20);
  CHECK(rl.group == 20);
  CHECK(rl.horizon == 32);
  CHECK(rl.depth == 2);
  CHECK(rl.ppo_clip == 0.2);

  const TrainConfig parsed = parse_train_config(
      "# comment\nstage = RL\nepochs = 3\nmodel.dim = 32\nmodel.heads = 4\nmodel.pooling = max\nlr = 0.001\n");
  CHECK(parsed.stage == Stage::kRL);
  CHECK(parsed.epochs == 3);
  CHECK(parsed.behavior_refresh == 20);
  CHECK(parsed.model.dim == 32);
  CHECK(parsed.model.pooling == Pooling::kMax);
  CHECK(parsed.model_overridden);
  CHECK(parsed.optimizer.learning_rate == 0.001);

  const TrainConfig back = parse_train_config(to_config_text(parsed));
  CHECK(back.model == parsed.model);
  CHECK(back.epochs == parsed.epochs);
  CHECK(back.optimizer.learning_rate == parsed.optimizer.learning_rate);

  CHECK_THROWS_AS(parse_train_config("bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("epochs = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("stage = RL\ngroup = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("ppo_clip = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("horizon = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("no equals sign\n"), ConfigError);
}

TEST_CASE("warmup") {
  const Policy behavior(tiny_model(), 1);
  const Instance inst = generate_uniform(20, 1);
  Rng rng(1);
  const WarmupResult zero = warmup_state(inst, behavior, rng, 0);
  CHECK(zero.state.history.empty());
  CHECK(zero.reference_cost == zero.state.cost);
  CHECK(std::abs(zero.state.cost - tour_cost(inst, zero.state.tour)) < 1e-12);

  std::vector<int> counts(21, 0);
  const int runs = 1000;
  for (int k = 0; k < runs; ++k) {
    Rng r = Rng::keyed(2, {static_cast<std::uint64_t>(k)});
    Rng copy = r;
    copy.between(0, 20);
    const Tour start = random_tour(20, copy);
    const WarmupResult w = warmup_state(inst, behavior, r);
    CHECK(w.reference_cost <= tour_cost(inst, start) + 1e-12);
    CHECK(w.reference_cost <= w.state.cost + 1e-12);
    CHECK(w.state.history.valid_count() == std::min<std::size_t>(w.steps, 16));
    ++counts[w.steps];
  }
  const double p = 1.0 / 21;
  const double sigma = std::sqrt(runs * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - runs * p) <= 3.0 * sigma);
}

TEST_CASE("imitation loss of a uniform policy") {
  Policy policy(tiny_model(), 2);
  make_uniform(policy);
  const Instance inst = generate_uniform(10, 2);
  const SearchState start(inst, random_tour(10, 2));
  std::vector<ImitationExample> examples;
  for (auto& step : oracle_rollout(start, 2, 2)) {
    examples.push_back({step.tour, step.history, {step.optimal_actions.front()}});
  }
  REQUIRE(examples.size() == 2);
  const double loss = imitation_loss(policy, inst, examples, 1.0, false);
  CHECK(loss == doctest::Approx(2.0 * std::log(35.0)).epsilon(1e-12));
}

TEST_CASE("imitation loss falls as mass moves onto the oracle set") {
  Rng rng(3);
  Matrix logits(9, 9);
  for (double& v : logits.data) v = rng.uniform();
  const std::vector<TwoOptMove> targets{{1, 5}, {2, 6}};
  const double base = negative_log_mass(action_distribution(logits, HistoryBuffer{}, 0), targets).loss;
  Matrix toward = logits, away = logits;
  for (const auto& m : targets) {
    toward(m.i, m.j) += 0.5;
    away(m.i, m.j) -= 0.5;
  }
  CHECK(negative_log_mass(action_distribution(toward, HistoryBuffer{}, 0), targets).loss < base);
  CHECK(negative_log_mass(action_distribution(away, HistoryBuffer{}, 0), targets).loss > base);
  CHECK(std::isfinite(base));
}

TEST_CASE("rewards and centered advantages") {
  GroupBatch b;
  b.reference_cost = 10.0;
  b.members = {member_with_costs({10, 8, 9}), member_with_costs({10, 6, 9}), member_with_costs({10, 4, 9})};
  compute_rewards_and_advantages(b);
  CHECK(b.winner_step == 1);
  CHECK(b.members[0].reward == doctest::Approx(0.2));
  CHECK(b.members[1].reward == doctest::Approx(0.4));
  CHECK(b.members[2].reward == doctest::Approx(0.6));
  CHECK(b.members[0].advantage == doctest::Approx(-0.2));
  CHECK(b.members[1].advantage == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(b.members[2].advantage == doctest::Approx(0.2));
  double sum = 0.0;
  for (const auto& m : b.members) sum += m.advantage;
  CHECK(std::abs(sum) < 1e-9);

  GroupBatch single;
  single.reference_cost = 10.0;
  single.members = {member_with_costs({10, 9, 9.5})};
  compute_rewards_and_advantages(single);
  CHECK(single.members[0].reward == doctest::Approx(0.1));
  CHECK(single.members[0].advantage == 0.0);

  GroupBatch none;
  none.reference_cost = 5.0;
  none.members = {member_with_costs({6, 7, 5.5}), member_with_costs({6, 6.5, 8})};
  compute_rewards_and_advantages(none);
  for (const auto& m : none.members) {
    CHECK(m.reward == 0.0);
    CHECK(m.advantage == 0.0);
    for (double a : m.step_advantages) CHECK(a == 0.0);
  }

  GroupBatch bad;
  bad.reference_cost = 0.0;
  bad.members = {member_with_costs({1, 1})};
  CHECK_THROWS_AS(compute_rewards_and_advantages(bad), InvalidInput);
}

TEST_CASE("winner timestamp cutoff") {
  GroupBatch b;
  b.reference_cost = 10.0;
  // Member 0 reaches the group best 5 at step 3, member 1 at step 2.
  b.members = {member_with_costs({10, 9, 7, 5, 5, 6}), member_with_costs({10, 8, 5, 7, 9, 9})};
  compute_rewards_and_advantages(b);
  CHECK(b.winner_step == 2);
  CHECK(b.members[0].best_cost == 7.0);
  CHECK(b.members[1].best_cost == 5.0);
  for (const auto& m : b.members) {
    REQUIRE(m.step_advantages.size() == 5);
    for (std::size_t t = 0; t < 5; ++t) {
      if (t <= b.winner_step) CHECK(m.step_advantages[t] == m.advantage);
      else CHECK(m.step_advantages[t] == 0.0);
    }
  }
}

TEST_CASE("advantage normalization over nonzero entries") {
  std::vector<GroupBatch> batches(1);
  batches[0].members.resize(2);
  batches[0].members[0].step_advantages = {1.0, 0.0, 3.0};
  batches[0].members[1].step_advantages = {-1.0, 0.0, 0.0};
  const double mean = 1.0;
  const double sd = std::sqrt(((1 - mean) * (1 - mean) + (3 - mean) * (3 - mean) + (-1 - mean) * (-1 - mean)) / 3.0);
  CHECK(normalize_advantages(batches) == doctest::Approx(sd));
  CHECK(batches[0].members[0].step_advantages[0] == doctest::Approx(1.0 / sd));
  CHECK(batches[0].members[0].step_advantages[1] == 0.0);
  CHECK(batches[0].members[1].step_advantages[0] == doctest::Approx(-1.0 / sd));

  std::vector<GroupBatch> zeros(1);
  zeros[0].members.resize(1);
  zeros[0].members[0].step_advantages = {0.0, 0.0};
  CHECK(normalize_advantages(zeros) == 0.0);
}

TEST_CASE("group rollouts share the start state") {
  const Policy behavior(tiny_model(), 4);
  const Instance inst = generate_uniform(12, 4);
  Rng rng(4);
  const WarmupResult w = warmup_state(inst, behavior, rng, 3);
  GroupBatch b = collect_group_rollouts(inst, w.state, w.reference_cost, behavior, 5, 6, 9, {1, 2});
  REQUIRE(b.members.size() == 5);
  for (const auto& m : b.members) {
    CHECK(m.tours.front() == w.state.tour);
    CHECK(m.histories.front().entries() == w.state.history.entries());
    CHECK(m.costs.front() == w.state.cost);
    CHECK(m.actions.size() == 6);
    CHECK(m.costs.size() == 7);
    Tour t = w.state.tour;
    for (std::size_t s = 0; s < 6; ++s) {
      apply_two_opt_inplace(t, m.actions[s]);
      CHECK(std::abs(tour_cost(inst, t) - m.costs[s + 1]) < 1e-9);
    }
  }
  CHECK(b.reference_cost == w.reference_cost);
  // Same key, same rollouts.
  GroupBatch again = collect_group_rollouts(inst, w.state, w.reference_cost, behavior, 5, 6, 9, {1, 2});
  for (std::size_t g = 0; g < 5; ++g) CHECK(again.members[g].actions == b.members[g].actions);

  GroupBatch greedy = collect_group_rollouts(inst, w.state, w.reference_cost, behavior, 4, 6, 9, {1, 3}, true);
  compute_rewards_and_advantages(greedy);
  for (const auto& m : greedy.members) {
    CHECK(m.actions == greedy.members.front().actions);
    CHECK(m.advantage == 0.0);
  }
}

TEST_CASE("PPO at the behavior parameters") {
  Policy policy(tiny_model(), 5);
  const Policy behavior = policy;
  std::vector<GroupBatch> batches;
  for (std::uint64_t k = 0; k < 2; ++k) {
    const Instance inst = generate_uniform(10, 50 + k);
    Rng rng(k);
    const WarmupResult w = warmup_state(inst, behavior, rng, 2);
    batches.push_back(collect_group_rollouts(inst, w.state, w.reference_cost, behavior, 4, 5, 7, {k}));
    compute_rewards_and_advantages(batches.back());
  }
  normalize_advantages(batches);

  for (double r : importance_ratios(policy, batches)) CHECK(std::abs(r - 1.0) < 1e-9);

  double sum_a = 0.0;
  std::size_t terms = 0;
  for (const auto& b : batches)
    for (const auto& m : b.members)
      for (double a : m.step_advantages) {
        sum_a += a;
        ++terms;
      }
  policy.zero_grad();
  const PpoStats stats = ppo_loss(policy, batches, 0.2, true);
  CHECK(stats.terms == terms);
  CHECK(stats.clipped_terms == 0);
  CHECK(std::abs(stats.loss + sum_a / terms) < 1e-9);

  // Vanilla policy gradient: -(1/N) sum of advantage times grad log p.
  Policy vanilla = behavior;
  vanilla.zero_grad();
  for (const auto& b : batches)
    for (const auto& m : b.members)
      for (std::size_t t = 0; t < m.actions.size(); ++t) {
        PolicyCache cache;
        const PolicyOutput out = evaluate_policy(vanilla, b.instance, m.tours[t], m.histories[t], b.recency_length, &cache);
        Matrix g = log_prob_gradient(out, m.actions[t]);
        for (double& v : g.data) v *= -m.step_advantages[t] / static_cast<double>(terms);
        vanilla.backward(cache, g);
      }
  const auto pa = policy.parameters();
  const auto pb = vanilla.parameters();
  double worst = 0.0;
  for (std::size_t k = 0; k < pa.size(); ++k)
    for (std::size_t e = 0; e < pa[k]->grad.data.size(); ++e)
      worst = std::max(worst, std::abs(pa[k]->grad.data[e] - pb[k]->grad.data[e]));
  CHECK(worst < 1e-9);
}

TEST_CASE("PPO clipping arithmetic") {
  Policy policy(tiny_model(), 6);
  const Instance inst = generate_uniform(8, 6);
  const SearchState start(inst, random_tour(8, 6));
  std::vector<GroupBatch> batches{collect_group_rollouts(inst, start, start.cost, policy, 2, 1, 1, {0})};
  auto& m = batches[0].members[0];
  m.behavior_log_probs[0] -= std::log(1.5);  // ratio 1.5
  m.step_advantages = {1.0};
  batches[0].members[1].step_advantages = {0.0};
  policy.zero_grad();
  const PpoStats stats = ppo_loss(policy, batches, 0.2, true);
  CHECK(stats.terms == 2);
  CHECK(stats.clipped_terms == 1);
  CHECK(stats.loss == doctest::Approx(-1.2 / 2.0));
  CHECK(grad_norm(policy) == 0.0);

  m.behavior_log_probs[0] = -INFINITY;  // infinite ratio
  const PpoStats dropped = ppo_loss(policy, batches, 0.2, false);
  CHECK(dropped.dropped_terms == 1);
}

TEST_CASE("zero-signal groups contribute no gradient") {
  Policy policy(tiny_model(), 7);
  const Instance inst = generate_uniform(10, 7);
  const SearchState start(inst, random_tour(10, 7));
  // Reference far below anything reachable: nobody improves on it.
  std::vector<GroupBatch> batches{collect_group_rollouts(inst, start, 1e-3, policy, 4, 5, 3, {0})};
  compute_rewards_and_advantages(batches[0]);
  normalize_advantages(batches);
  policy.zero_grad();
  const PpoStats stats = ppo_loss(policy, batches, 0.2, true);
  CHECK(stats.loss == 0.0);
  CHECK(grad_norm(policy) < 1e-12);
}

TEST_CASE("learning-rate schedule and IL to RL hand-off") {
  const auto dir = temp_dir("stages");
  TrainConfig il = tiny_train(Stage::kIL);
  il.optimizer.learning_rate = 1e-4;
  const Checkpoint il_ckpt = train(il, std::nullopt, dir / "il");
  CHECK(il_ckpt.epoch == 2);
  CHECK(il_ckpt.stage == "IL");
  CHECK(il_ckpt.extra["optimizer"]["learning_rate"].get<double>() == doctest::Approx(1e-4 * std::pow(0.99, 2)).epsilon(1e-12));
  CHECK(std::filesystem::exists(dir / "il" / "IL_epoch1.ckpt"));
  CHECK(std::filesystem::exists(dir / "il" / "metrics.jsonl"));

  Trainer rl(tiny_train(Stage::kRL), load_checkpoint(dir / "il" / "last.ckpt"));
  CHECK(rl.epochs_done() == 0);
  CHECK(rl.optimizer().step_count() == 4);
  double moment_mass = 0.0;
  for (const auto* p : rl.policy().parameters())
    for (double v : p->second_moment.data) moment_mass += v;
  CHECK(moment_mass > 0.0);
  const EpochMetrics m = rl.run_epoch();
  CHECK(m.optimizer_steps == 6);
  CHECK(m.learning_rate == doctest::Approx(1e-4 * std::pow(0.99, 3)).epsilon(1e-12));
  CHECK(m.zero_signal_fraction >= 0.0);
  CHECK(m.zero_signal_fraction <= 1.0);

  TrainConfig mismatch = tiny_train(Stage::kRL);
  mismatch.model.dim = 16;
  mismatch.model.heads = 2;
  mismatch.model_overridden = true;
  CHECK_THROWS_AS(Trainer(mismatch, il_ckpt), CheckpointError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("resumed training reproduces the next epoch") {
  const auto dir = temp_dir("resume");
  for (Stage stage : {Stage::kIL, Stage::kRL}) {
    TrainConfig cfg = tiny_train(stage);
    cfg.epochs = 3;
    Trainer full(cfg);
    full.run_epoch();
    const Checkpoint mid = full.checkpoint();
    save_checkpoint(dir / "mid.ckpt", mid);
    const EpochMetrics expected = full.run_epoch();

    Trainer resumed(cfg, load_checkpoint(dir / "mid.ckpt"));
    CHECK(resumed.epochs_done() == 1);
    const EpochMetrics got = resumed.run_epoch();
    CHECK(got.to_json() == expected.to_json());
    const auto a = full.policy().parameters();
    const auto b = resumed.policy().parameters();
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k]->value == b[k]->value);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint round trip") {
  Policy policy(tiny_model(), 8);
  auto params = policy.parameters();
  for (auto* p : params)
    for (std::size_t k = 0; k < p->first_moment.data.size(); ++k) p->first_moment.data[k] = 0.25 * k;
  Checkpoint ck;
  ck.model = policy.config();
  ck.stage = "IL";
  ck.epoch = 7;
  ck.extra = {{"note", "x"}};
  append_policy_blocks(ck, policy, "", true);
  const std::string bytes = serialize_checkpoint(ck);
  CHECK(bytes.substr(0, 8) == "NICOCKPT");
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.blocks == ck.blocks);
  CHECK(back.model == ck.model);
  CHECK(back.epoch == 7);
  CHECK(back.extra == ck.extra);
  CHECK(serialize_checkpoint(back) == bytes);
  const Policy restored = policy_from_checkpoint(back);
  CHECK(restored.parameters().front()->value == params.front()->value);

  std::string corrupt = bytes;
  corrupt[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(corrupt), CheckpointError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);

  PolicyConfig other = tiny_model();
  other.hidden = 16;
  Policy wrong(other, 1);
  CHECK_THROWS_AS(restore_policy(back, wrong), CheckpointError);
}
