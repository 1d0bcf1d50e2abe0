#include "support.hpp"

#include "givenet/sampling.hpp"

namespace givenet::testing {

Counter quick_counter(int length, int dim, std::uint64_t seed) {
  CounterConfig cfg;
  cfg.length = length;
  cfg.embedding_dim = dim;
  cfg.min_steps = 0;
  cfg.check_every = 500;
  RngStream rng(seed);
  Counter c(cfg, rng);
  if (!pretrain_counter(c, cfg, rng).success) throw std::runtime_error("quick_counter: pre-training failed");
  return c;
}

RunSettings tiny_settings(int counter_length, int counter_dim) {
  RunSettings s;
  s.env.length = 12;
  s.env.extra_objects = 3;
  s.env.max_objects = 10;
  s.env.select_ones_min = 3;
  s.env.select_ones_max = 10;
  s.env.select_ones_steps = 5;
  s.env.give_n_max_steps = 12;
  s.agent.object_dim = 12;
  s.agent.num_actions = 13;
  s.agent.embedding_dim = counter_dim;
  s.agent.hidden = 8;
  s.agent.key_dim = 4;
  s.agent.heads = 2;
  s.agent.mlp_hidden = 8;
  s.train.total_episodes = 1000;
  s.train.step1_episodes = 200;
  s.train.lr = 1e-3;
  s.train.checkpoint_interval = 100;
  s.train.n_max_cap = 4;
  s.eval.test_episodes = 5;
  s.eval.train_max = 4;
  s.eval.extrap_min = 5;
  s.eval.extrap_max = counter_length;
  return s;
}

double bandit_better_arm_probability(std::uint64_t seed, int episodes, double lr) {
  Parameter logits("bandit.logits", 2, 1);
  const ParamList params{&logits};
  RngStream rng(seed);
  for (int e = 0; e < episodes; ++e) {
    EpisodeRun run;
    run.tape = std::make_unique<Tape>();
    Tape& tape = *run.tape;
    const Var lp = tape.log_softmax(tape.leaf(logits));
    const int arm = categorical_sample(tape.value(lp).array().exp().matrix(), rng);
    run.chosen_log_probs.push_back(tape.pick(lp, arm));
    run.step_log_probs.push_back(lp);
    run.trace.actions = {arm};
    run.trace.log_probs = {tape.value(lp)(arm)};
    run.trace.rewards = {arm == 1 ? 1.0 : 0.0};
    run.trace.complete = true;
    reinforce_update(run, params, lr);
  }
  return softmax(Vec(logits.value.col(0)))(1);
}

}  // namespace givenet::testing
