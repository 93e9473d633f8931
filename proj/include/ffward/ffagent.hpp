#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "ffward/error.hpp"
#include "ffward/features.hpp"
#include "ffward/mlp.hpp"
#include "ffward/rng.hpp"

namespace ffward {

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

enum class Strategy : uint8_t { slow = 0, normal = 1, fast = 2 };

// Action-space size per pace. Action a in [1, A] skips exactly a frames.
inline int action_space(Strategy s) {
  switch (s) {
    case Strategy::slow: return 15;
    case Strategy::normal: return 25;
    case Strategy::fast: return 35;
  }
  fail(errc::out_of_range, "bad strategy code");
}

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::slow: return "slow";
    case Strategy::normal: return "normal";
    case Strategy::fast: return "fast";
  }
  return "?";
}

inline Strategy strategy_from_name(const std::string& name) {
  if (name == "slow") return Strategy::slow;
  if (name == "normal") return Strategy::normal;
  if (name == "fast") return Strategy::fast;
  fail(errc::unknown_method, "unknown strategy: " + name);
}

struct RewardParams {
  double beta = 0.8;      // trade-off between skipping important vs unimportant
  int hit_window = 4;     // w, frames
  double hit_sigma = 1.0; // sigma of the landing bump
  double gamma = 0.8;     // discount
  int t_skip = 25;        // largest skippable frame count; equals A of the strategy

  void validate() const {
    require(beta >= 0.0 && beta <= 1.0, errc::invalid_config, "beta must be in [0,1]");
    require(hit_window >= 1, errc::invalid_config, "hit_window must be >= 1");
    require(hit_sigma > 0.0, errc::invalid_config, "hit_sigma must be > 0");
    require(gamma >= 0.0 && gamma <= 1.0, errc::invalid_config, "gamma must be in [0,1]");
    require(t_skip >= 1, errc::invalid_config, "t_skip must be >= 1");
  }

  static RewardParams for_strategy(Strategy s) {
    RewardParams p;
    p.t_skip = action_space(s);
    return p;
  }
};

// ---------------------------------------------------------------------------
// Reward pieces
// ---------------------------------------------------------------------------

// Penalty for a skipped interval: (#important - beta * #unimportant) / t_skip.
// Negative values mean the skip was a good idea.
inline double skip_penalty(std::span<const uint8_t> labels_in_interval, double beta, int t_skip) {
  require(!labels_in_interval.empty(), errc::empty_input, "skip_penalty: empty interval");
  require(static_cast<int>(labels_in_interval.size()) <= t_skip, errc::out_of_range,
          "interval longer than t_skip");
  int important = 0;
  for (uint8_t l : labels_in_interval) important += l ? 1 : 0;
  const int unimportant = static_cast<int>(labels_in_interval.size()) - important;
  return (important - beta * unimportant) / static_cast<double>(t_skip);
}

// Reward for landing at index z: sum of unit-peak Gaussian bumps of the
// important frames within the window, clipped at stream edges.
inline double hit_reward(int64_t z, std::span<const uint8_t> labels, int w, double sigma) {
  require(z >= 0 && z < static_cast<int64_t>(labels.size()), errc::out_of_range,
          "landing index outside stream");
  const int64_t lo = std::max<int64_t>(0, z - w);
  const int64_t hi = std::min<int64_t>(static_cast<int64_t>(labels.size()) - 1, z + w);
  double sum = 0.0;
  for (int64_t i = lo; i <= hi; ++i) {
    if (!labels[i]) continue;
    const double d = static_cast<double>(z - i);
    sum += std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return sum;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-step reward: base (-SP + HR), scaled down for large skips under the
// slow pace and up under the fast pace.
inline double immediate_reward(Strategy s, double skip_pen, double hit_rew, int action) {
  const int a_max = action_space(s);
  require(action >= 1 && action <= a_max, errc::out_of_range,
          "action " + std::to_string(action) + " outside [1," + std::to_string(a_max) + "]");
  const double base = -skip_pen + hit_rew;
  switch (s) {
    case Strategy::normal: return base;
    case Strategy::slow: return base * (1.0 - sigmoid(action) / 2.0);
    case Strategy::fast: return base * (1.0 + sigmoid(action) / 2.0);
  }
  fail(errc::out_of_range, "bad strategy code");
}

// ---------------------------------------------------------------------------
// Q policy
// ---------------------------------------------------------------------------

struct QPolicy {
  Strategy strategy = Strategy::normal;
  Mlp net;

  int actions() const { return static_cast<int>(net.output_dim()); }

  void validate() const {
    require(actions() == action_space(strategy), errc::dim_mismatch,
            "network output width != action space of its strategy");
  }

  bool operator==(const QPolicy& o) const = default;
};

inline std::vector<float> q_values(const QPolicy& policy, std::span<const float> feature) {
  return policy.net.forward(feature);
}

// Smallest index wins ties, so the greedy action is deterministic and
// invariant under adding a constant to every output.
inline int greedy_action(std::span<const float> q) {
  require(!q.empty(), errc::empty_input, "greedy_action: no q values");
  size_t best = 0;
  for (size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = i;
  return static_cast<int>(best) + 1;  // action = index + 1
}

struct SelectionResult {
  std::vector<uint32_t> indices;  // processed (== selected) frame indices
  size_t processed = 0;           // number of forward passes
};

// Greedy fast-forward over [start, end): process frame k, skip a frames,
// continue from k + a + 1. Returns the cursor, which may land past `end` (it
// then belongs to the caller's next range). Skipped frames are never touched.
inline uint32_t fast_forward_range(const QPolicy& policy, const ViewStream& view, uint32_t start,
                                   uint32_t end, SelectionResult& out,
                                   std::vector<std::vector<float>>& scratch) {
  uint32_t k = start;
  while (k < end) {
    policy.net.forward(view.frames[k].feature, scratch);
    out.indices.push_back(k);
    ++out.processed;
    k += static_cast<uint32_t>(greedy_action(scratch.back())) + 1;
  }
  return k;
}

inline SelectionResult fast_forward(const QPolicy& policy, const ViewStream& view,
                                    uint32_t start_index) {
  require(start_index < view.length(), errc::out_of_range, "start_index outside stream");
  policy.validate();
  SelectionResult res;
  std::vector<std::vector<float>> scratch;
  fast_forward_range(policy, view, start_index, static_cast<uint32_t>(view.length()), res, scratch);
  return res;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int episodes = 90;
  double learning_rate = 1e-3;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.8;  // anneal over this fraction of episodes
  size_t replay_capacity = 10000;
  size_t batch_size = 32;
  int target_sync_interval = 500;  // steps
  uint64_t seed = 0;

  void validate() const {
    require(episodes >= 1, errc::invalid_config, "episodes must be >= 1");
    require(learning_rate > 0.0, errc::invalid_config, "learning_rate must be > 0");
    require(eps_start >= 0.0 && eps_start <= 1.0, errc::invalid_config, "eps_start in [0,1]");
    require(eps_end >= 0.0 && eps_end <= 1.0, errc::invalid_config, "eps_end in [0,1]");
    require(eps_decay_fraction > 0.0 && eps_decay_fraction <= 1.0, errc::invalid_config,
            "eps_decay_fraction in (0,1]");
    require(replay_capacity >= 1, errc::invalid_config, "replay_capacity must be >= 1");
    require(batch_size >= 1, errc::invalid_config, "batch_size must be >= 1");
    require(target_sync_interval >= 1, errc::invalid_config, "target_sync_interval must be >= 1");
  }

  double epsilon(int episode) const {
    const double span = eps_decay_fraction * episodes;
    if (span <= 0.0) return eps_end;
    const double frac = std::min(1.0, static_cast<double>(episode) / span);
    return eps_start + (eps_end - eps_start) * frac;
  }
};

namespace detail {

struct Transition {
  std::vector<float> state;
  std::vector<float> next_state;
  float reward;
  uint16_t action;  // 0-based index
};

}  // namespace detail

// One-step Q-learning over the given streams with experience replay, a
// periodically synced target network, and epsilon-greedy exploration.
// Episode e walks streams[e % |streams|] from frame 0; an action whose landing
// falls off the stream ends the episode and emits no reward.
inline QPolicy train(const std::vector<const ViewStream*>& streams, Strategy strategy,
                     const RewardParams& reward_in, const TrainConfig& cfg) {
  require(!streams.empty(), errc::empty_input, "train: no streams");
  cfg.validate();
  RewardParams reward = reward_in;
  reward.t_skip = action_space(strategy);
  reward.validate();

  const uint32_t dim = static_cast<uint32_t>(streams.front()->frames.front().feature.size());
  const int num_actions = action_space(strategy);

  {
    bool has0 = false, has1 = false;
    for (const ViewStream* s : streams)
      for (const FrameRecord& f : s->frames) (f.label ? has1 : has0) = true;
    if (!has0 || !has1)
      std::cerr << "warning: training labels are degenerate (all "
                << (has1 ? "important" : "unimportant") << "); proceeding anyway\n";
  }

  Rng rng(cfg.seed);
  Mlp net = Mlp::he_init({dim, 128, 64, static_cast<uint32_t>(num_actions)}, rng);
  Mlp target = net;
  AdamState opt(net, cfg.learning_rate);
  MlpWorkspace ws;

  std::vector<detail::Transition> replay;
  replay.reserve(std::min<size_t>(cfg.replay_capacity, 1 << 14));
  size_t replay_next = 0;  // ring position once full

  std::vector<std::vector<float>> scratch;
  std::vector<QSample> batch(cfg.batch_size);
  std::vector<float> targets(cfg.batch_size);
  int64_t step = 0;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const ViewStream& stream = *streams[static_cast<size_t>(ep) % streams.size()];
    const uint32_t len = static_cast<uint32_t>(stream.length());
    const double eps = cfg.epsilon(ep);
    // Anneal the step size to 10% so late updates sharpen the action ranking
    // instead of re-stirring it.
    opt.lr = cfg.learning_rate *
             (1.0 - 0.9 * static_cast<double>(ep) / static_cast<double>(cfg.episodes));
    uint32_t k = 0;
    while (true) {
      const std::vector<float>& state = stream.frames[k].feature;
      int action;
      if (rng.uniform() < eps) {
        action = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(num_actions))) + 1;
      } else {
        net.forward(state, scratch);
        action = greedy_action(scratch.back());
      }
      const uint32_t landing = k + static_cast<uint32_t>(action) + 1;
      if (landing >= len) break;  // truncated interval: episode over, no reward

      std::vector<uint8_t> interval(static_cast<size_t>(action));
      for (int i = 0; i < action; ++i) interval[i] = stream.frames[k + 1 + i].label;
      const double sp = skip_penalty(interval, reward.beta, reward.t_skip);
      // Same bump sum as hit_reward, reading labels straight off the stream.
      double hr = 0.0;
      {
        const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>(landing) - reward.hit_window);
        const int64_t hi = std::min<int64_t>(len - 1, static_cast<int64_t>(landing) + reward.hit_window);
        for (int64_t i = lo; i <= hi; ++i) {
          if (!stream.frames[i].label) continue;
          const double d = static_cast<double>(static_cast<int64_t>(landing) - i);
          hr += std::exp(-d * d / (2.0 * reward.hit_sigma * reward.hit_sigma));
        }
      }
      const double r = immediate_reward(strategy, sp, hr, action);

      detail::Transition tr{state, stream.frames[landing].feature, static_cast<float>(r),
                            static_cast<uint16_t>(action - 1)};
      if (replay.size() < cfg.replay_capacity) {
        replay.push_back(std::move(tr));
      } else {
        replay[replay_next] = std::move(tr);
        replay_next = (replay_next + 1) % cfg.replay_capacity;
      }

      if (replay.size() >= cfg.batch_size) {
        for (size_t b = 0; b < cfg.batch_size; ++b) {
          const detail::Transition& t = replay[rng.uniform_int(replay.size())];
          target.forward(t.next_state, scratch);
          float best = scratch.back()[0];
          for (float q : scratch.back()) best = std::max(best, q);
          targets[b] = t.reward + static_cast<float>(reward.gamma) * best;
          batch[b] = QSample{t.state.data(), t.action, targets[b]};
        }
        train_q_batch(net, opt, batch, ws);
      }

      ++step;
      if (step % cfg.target_sync_interval == 0) target = net;
      k = landing;
    }
  }

  QPolicy policy{strategy, std::move(net)};
  policy.validate();
  return policy;
}

// ---------------------------------------------------------------------------
// Checkpoint helpers (FFWQ with the strategy as the kind tag)
// ---------------------------------------------------------------------------

inline void save_policy(const std::string& path, const QPolicy& policy) {
  save_checkpoint(path, static_cast<uint8_t>(policy.strategy), policy.net);
}

inline QPolicy load_policy(const std::string& path) {
  auto [kind, net] = load_checkpoint(path);
  require(kind <= 2, errc::unknown_kind, "checkpoint kind is not an agent strategy");
  QPolicy p{static_cast<Strategy>(kind), std::move(net)};
  p.validate();
  return p;
}

}  // namespace ffward
