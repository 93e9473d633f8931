#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ffward/dmvf.hpp"
#include "ffward/error.hpp"
#include "ffward/ffagent.hpp"
#include "ffward/features.hpp"
#include "ffward/mlp.hpp"
#include "ffward/netsim.hpp"
#include "ffward/report.hpp"
#include "ffward/simkernel.hpp"

namespace ffward {

// ---------------------------------------------------------------------------
// Controller configuration and period buffers
// ---------------------------------------------------------------------------

struct ControllerConfig {
  SimParams sim;
  double tau = 0.4;          // matching-percentage threshold
  uint32_t period = 100;     // frames per control period
  int dedup_window = 50;     // frames; matches farther apart in time are kept
  int neighbor_window = 4;   // frames added around every kept frame

  void validate() const {
    sim.validate();
    require(tau > 0.0 && tau < 1.0, errc::invalid_config, "tau must be in (0,1)");
    require(period >= 1, errc::invalid_config, "period must be >= 1");
    require(dedup_window >= 0, errc::invalid_config, "dedup_window must be >= 0");
    require(neighbor_window >= 0, errc::invalid_config, "neighbor_window must be >= 0");
  }
};

struct PeriodBuffers {
  std::vector<FrameSet> by_agent;

  size_t num_agents() const { return by_agent.size(); }

  size_t total_frames() const {
    size_t total = 0;
    for (const FrameSet& b : by_agent) total += b.size();
    return total;
  }

  void validate() const {
    require(by_agent.size() >= 1, errc::empty_input, "no buffers");
    for (const FrameSet& b : by_agent)
      for (size_t k = 1; k < b.size(); ++k)
        require(b[k - 1].index < b[k].index, errc::invalid_config,
                "buffer indices must be strictly increasing");
  }
};

// ---------------------------------------------------------------------------
// Main view selection (exhaustive subset scan with cached similarities)
// ---------------------------------------------------------------------------

namespace detail {

// best_sim[i][k][j]: best similarity of frame k of view i against any frame
// of view j. This is the Similarity array of the selection algorithm.
inline std::vector<std::vector<std::vector<double>>> best_sim_table(const PeriodBuffers& buffers,
                                                                    double alpha) {
  const size_t n = buffers.num_agents();
  std::vector<std::vector<std::vector<double>>> best(n);
  for (size_t i = 0; i < n; ++i) {
    best[i].resize(buffers.by_agent[i].size(), std::vector<double>(n, 0.0));
    for (size_t k = 0; k < buffers.by_agent[i].size(); ++k)
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        best[i][k][j] =
            best_match_sim(buffers.by_agent[i][k].feature, buffers.by_agent[j], alpha);
      }
  }
  return best;
}

}  // namespace detail

// Score of one candidate main-view subset (bit i set = view i is main):
// matched frames of the other views per kept main frame.
inline double main_view_score(const PeriodBuffers& buffers, uint32_t mask, const SimParams& sim) {
  const size_t n = buffers.num_agents();
  size_t kept = 0;
  for (size_t j = 0; j < n; ++j)
    if ((mask >> j) & 1u) kept += buffers.by_agent[j].size();
  require(kept > 0, errc::empty_input, "candidate subset holds no frames");

  size_t matched = 0;
  for (size_t i = 0; i < n; ++i) {
    if ((mask >> i) & 1u) continue;
    for (const SelectedFrame& f : buffers.by_agent[i]) {
      for (size_t j = 0; j < n; ++j) {
        if (!((mask >> j) & 1u)) continue;
        if (best_match_sim(f.feature, buffers.by_agent[j], sim.alpha) > sim.rho) {
          ++matched;
          break;
        }
      }
    }
  }
  return static_cast<double>(matched) / static_cast<double>(kept);
}

// Exhaustive scan of all non-empty proper subsets. Ties break toward fewer
// views, then the smaller bitmask, so reports are reproducible. Subsets whose
// buffers are all empty are not scorable and are skipped.
inline uint32_t select_main_views(const PeriodBuffers& buffers, const SimParams& sim) {
  const size_t n = buffers.num_agents();
  require(n >= 2, errc::invalid_config, "need at least two views");
  require(n <= 20, errc::out_of_range, "exhaustive scan limited to 20 views");
  require(buffers.total_frames() > 0, errc::empty_input, "all buffers empty");
  sim.validate();

  const auto best = detail::best_sim_table(buffers, sim.alpha);

  bool found = false;
  double best_score = 0.0;
  uint32_t best_mask = 0;
  for (uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
    size_t kept = 0;
    for (size_t j = 0; j < n; ++j)
      if ((mask >> j) & 1u) kept += buffers.by_agent[j].size();
    if (kept == 0) continue;

    size_t matched = 0;
    for (size_t i = 0; i < n; ++i) {
      if ((mask >> i) & 1u) continue;
      for (size_t k = 0; k < buffers.by_agent[i].size(); ++k) {
        for (size_t j = 0; j < n; ++j) {
          if (!((mask >> j) & 1u)) continue;
          if (best[i][k][j] > sim.rho) {
            ++matched;
            break;
          }
        }
      }
    }
    const double score = static_cast<double>(matched) / static_cast<double>(kept);
    const bool better =
        !found || score > best_score ||
        (score == best_score && (std::popcount(mask) < std::popcount(best_mask) ||
                                 (std::popcount(mask) == std::popcount(best_mask) &&
                                  mask < best_mask)));
    if (better) {
      found = true;
      best_score = score;
      best_mask = mask;
    }
  }
  require(found, errc::empty_input, "no scorable subset");
  return best_mask;
}

// ---------------------------------------------------------------------------
// Strategy assignment
// ---------------------------------------------------------------------------

// Matching percentage of view `agent` against the main views.
inline double matching_percentage(const PeriodBuffers& buffers, uint32_t main_mask, size_t agent,
                                  const SimParams& sim) {
  const FrameSet& own = buffers.by_agent[agent];
  require(!own.empty(), errc::empty_input, "matching_percentage of empty buffer");
  FrameSet main_union;
  for (size_t j = 0; j < buffers.num_agents(); ++j)
    if ((main_mask >> j) & 1u)
      main_union.insert(main_union.end(), buffers.by_agent[j].begin(),
                        buffers.by_agent[j].end());
  require(!main_union.empty(), errc::empty_input, "main views hold no frames");
  return static_cast<double>(match_count(own, main_union, sim)) /
         static_cast<double>(own.size());
}

// Main views slow down; the rest go normal or fast depending on how much of
// their content the main views already cover. mp == tau stays normal, and an
// empty buffer is no evidence, so it stays normal too.
inline std::vector<Strategy> assign_strategies(const PeriodBuffers& buffers, uint32_t main_mask,
                                               const SimParams& sim, double tau) {
  const size_t n = buffers.num_agents();
  std::vector<Strategy> out(n, Strategy::normal);
  for (size_t i = 0; i < n; ++i) {
    if ((main_mask >> i) & 1u) {
      out[i] = Strategy::slow;
    } else if (buffers.by_agent[i].empty()) {
      out[i] = Strategy::normal;
    } else {
      const double mp = matching_percentage(buffers, main_mask, i, sim);
      out[i] = mp > tau ? Strategy::fast : Strategy::normal;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summary generation
// ---------------------------------------------------------------------------

struct PeriodSummary {
  std::vector<std::vector<uint32_t>> kept;      // per agent, surviving frame indices
  std::vector<std::vector<uint32_t>> expanded;  // kept plus the neighbor window
};

// Main-view frames all stay. A non-main frame is dropped iff some main-view
// frame within the dedup time window matches it above rho. Kept frames are
// then extended by the neighbor window (kept frames as window centroids).
inline PeriodSummary generate_summary(const PeriodBuffers& buffers, uint32_t main_mask,
                                      const SimParams& sim, int dedup_window, int neighbor_window,
                                      uint32_t stream_length) {
  const size_t n = buffers.num_agents();
  PeriodSummary summary;
  summary.kept.resize(n);
  summary.expanded.resize(n);

  for (size_t i = 0; i < n; ++i) {
    const bool is_main = (main_mask >> i) & 1u;
    for (const SelectedFrame& f : buffers.by_agent[i]) {
      bool drop = false;
      if (!is_main) {
        for (size_t j = 0; j < n && !drop; ++j) {
          if (!((main_mask >> j) & 1u)) continue;
          for (const SelectedFrame& m : buffers.by_agent[j]) {
            const int64_t dt = static_cast<int64_t>(f.index) - static_cast<int64_t>(m.index);
            if (dt < -dedup_window || dt > dedup_window) continue;
            if (frame_sim(f.feature, m.feature, sim.alpha) > sim.rho) {
              drop = true;
              break;
            }
          }
        }
      }
      if (!drop) summary.kept[i].push_back(f.index);
    }
    std::vector<uint32_t>& exp = summary.expanded[i];
    for (uint32_t idx : summary.kept[i]) {
      const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>(idx) - neighbor_window);
      const int64_t hi =
          std::min<int64_t>(stream_length - 1, static_cast<int64_t>(idx) + neighbor_window);
      for (int64_t t = lo; t <= hi; ++t) exp.push_back(static_cast<uint32_t>(t));
    }
    std::sort(exp.begin(), exp.end());
    exp.erase(std::unique(exp.begin(), exp.end()), exp.end());
  }
  return summary;
}

// ---------------------------------------------------------------------------
// DQN controller
// ---------------------------------------------------------------------------

struct ControllerPolicy {
  Mlp net;            // (N*D) -> ... -> 3^N action values
  uint16_t num_agents = 0;
};

constexpr uint8_t kControllerCheckpointKind = 10;
constexpr int kNumStrategies = 3;

inline uint32_t controller_action_count(uint16_t n) {
  require(n >= 1 && n <= 6, errc::out_of_range,
          "enumerated action space supports 1..6 agents, got " + std::to_string(n));
  uint32_t count = 1;
  for (uint16_t i = 0; i < n; ++i) count *= kNumStrategies;
  return count;
}

// Joint actions are base-3 numbers; agent 0 is the least significant digit.
inline std::vector<Strategy> decode_action(uint32_t action, uint16_t n) {
  require(action < controller_action_count(n), errc::out_of_range, "action index out of range");
  std::vector<Strategy> out(n);
  for (uint16_t i = 0; i < n; ++i) {
    out[i] = static_cast<Strategy>(action % kNumStrategies);
    action /= kNumStrategies;
  }
  return out;
}

inline uint32_t encode_action(const std::vector<Strategy>& strategies) {
  uint32_t action = 0;
  for (size_t i = strategies.size(); i-- > 0;)
    action = action * kNumStrategies + static_cast<uint32_t>(strategies[i]);
  return action;
}

// Controller state: per-agent mean feature vectors, concatenated. An empty
// buffer contributes a zero segment.
inline std::vector<float> dqn_state(const PeriodBuffers& buffers, uint32_t dim) {
  std::vector<float> state(buffers.num_agents() * dim, 0.0f);
  for (size_t i = 0; i < buffers.num_agents(); ++i) {
    const FrameSet& b = buffers.by_agent[i];
    if (b.empty()) continue;
    float* seg = state.data() + i * dim;
    for (const SelectedFrame& f : b) {
      require(f.feature.size() == dim, errc::dim_mismatch, "buffer frame dim != dataset dim");
      for (uint32_t d = 0; d < dim; ++d) seg[d] += f.feature[d];
    }
    const float inv = 1.0f / static_cast<float>(b.size());
    for (uint32_t d = 0; d < dim; ++d) seg[d] *= inv;
  }
  return state;
}

// Binary vector -> per-position Gaussian bumps, peak 1 at each set position,
// overlaps resolved by element-wise max.
inline std::vector<double> g_smooth(std::span<const uint8_t> binary, int window, double sigma) {
  std::vector<double> out(binary.size(), 0.0);
  for (size_t i = 0; i < binary.size(); ++i) {
    if (!binary[i]) continue;
    const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>(i) - window);
    const int64_t hi = std::min<int64_t>(binary.size() - 1, static_cast<int64_t>(i) + window);
    for (int64_t t = lo; t <= hi; ++t) {
      const double d = static_cast<double>(t - static_cast<int64_t>(i));
      out[t] = std::max(out[t], std::exp(-d * d / (2.0 * sigma * sigma)));
    }
  }
  return out;
}

// Controller reward: smoothed agreement of selections with per-view truth,
// plus a redundancy term that shrinks as agents select more frames. With no
// selected frames at all the redundancy term is defined as 0.
inline double dqn_reward(const std::vector<std::vector<uint8_t>>& selected,
                         const std::vector<std::vector<uint8_t>>& truth,
                         std::span<const uint8_t> global_truth, double alpha_red, int window,
                         double sigma) {
  require(selected.size() == truth.size(), errc::dim_mismatch, "selected/truth view counts");
  double first = 0.0;
  size_t selected_count = 0;
  for (size_t v = 0; v < selected.size(); ++v) {
    require(selected[v].size() == global_truth.size() && truth[v].size() == global_truth.size(),
            errc::length_mismatch, "vectors must all have the period length");
    const std::vector<double> gs = g_smooth(selected[v], window, sigma);
    const std::vector<double> gt = g_smooth(truth[v], window, sigma);
    for (size_t t = 0; t < gs.size(); ++t) first += gs[t] * gt[t];
    for (uint8_t b : selected[v]) selected_count += b ? 1 : 0;
  }
  if (selected_count == 0) return first;
  const std::vector<double> gg = g_smooth(global_truth, window, sigma);
  double truth_mass = 0.0;
  for (double x : gg) truth_mass += x;
  return first + alpha_red * truth_mass / static_cast<double>(selected_count);
}

inline void save_controller(const std::string& path, const ControllerPolicy& policy) {
  save_checkpoint(path, kControllerCheckpointKind, policy.net);
}

inline ControllerPolicy load_controller(const std::string& path, uint16_t num_agents,
                                        uint32_t dim) {
  auto [kind, net] = load_checkpoint(path);
  require(kind == kControllerCheckpointKind, errc::unknown_kind,
          "checkpoint is not a controller (kind " + std::to_string(kind) + ")");
  ControllerPolicy p{std::move(net), num_agents};
  require(p.net.input_dim() == num_agents * dim, errc::dim_mismatch,
          "controller input width != N*D");
  require(p.net.output_dim() == controller_action_count(num_agents), errc::dim_mismatch,
          "controller output width != 3^N");
  return p;
}

// ---------------------------------------------------------------------------
// Centralized run loop
// ---------------------------------------------------------------------------

// Per period: agents fast-forward with their current strategies and send
// their buffers to the controller (lossy). The controller scores the views it
// actually received (a lost buffer is empty this period), picks main views,
// assigns strategies, and generates the deduplicated summary. Strategy orders
// travel back one per agent; an agent whose order is lost keeps its strategy.
// Period 1 runs all-normal. With `dqn` set, strategy computation is the
// trained controller's argmax action instead; main-view selection and
// deduplication are skipped (the RL controller only steers paces).
inline RunReport run_mffnet(const SceneDataset& ds, const StrategyPolicies& policies,
                            const ControllerConfig& cfg, Channel& channel,
                            const ControllerPolicy* dqn = nullptr) {
  const uint16_t n = static_cast<uint16_t>(ds.num_views());
  require(n >= 2, errc::invalid_config, "need at least two views");
  cfg.validate();
  policies.validate();
  if (dqn)
    require(dqn->net.input_dim() == n * ds.dim &&
                dqn->net.output_dim() == controller_action_count(n),
            errc::dim_mismatch, "controller network does not fit this dataset");

  const uint32_t len = static_cast<uint32_t>(ds.length());
  const uint32_t num_periods = (len + cfg.period - 1) / cfg.period;
  const uint16_t controller_id = n;  // agents are 0..n-1

  RunReport report;
  report.method = "mffnet";
  report.num_views = n;
  report.length = len;
  report.dim = ds.dim;
  report.period = cfg.period;
  report.rho = cfg.sim.rho;
  report.tau = cfg.tau;
  report.controller = dqn ? "dqn" : "heuristic";

  std::vector<Strategy> strategies(n, Strategy::normal);
  std::vector<uint32_t> cursor(n, 0);
  std::vector<std::vector<float>> scratch;

  for (uint32_t p = 0; p < num_periods; ++p) {
    const uint32_t period_end = std::min(len, (p + 1) * cfg.period);
    PeriodLog plog;
    plog.agents.resize(n);

    // Agents: fast-forward, then ship the period buffer to the controller.
    std::vector<FrameSet> selections(n);
    for (uint16_t i = 0; i < n; ++i) {
      plog.agents[i].strategy = strategies[i];
      SelectionResult sel;
      cursor[i] = fast_forward_range(policies.of(strategies[i]), ds.views[i], cursor[i],
                                     period_end, sel, scratch);
      for (uint32_t idx : sel.indices)
        selections[i].push_back(SelectedFrame{idx, ds.views[i].frames[idx].feature});
      plog.agents[i].selected = std::move(sel.indices);
    }
    for (uint16_t i = 0; i < n; ++i) {
      Message m{i, p, FrameBatchPayload{selections[i]}};
      plog.agents[i].delivered = channel.send(m, controller_id, Bucket::central);
    }

    // Controller: collect what arrived; lost buffers are empty this period.
    PeriodBuffers buffers;
    buffers.by_agent.resize(n);
    for (Message& m : channel.drain(controller_id))
      buffers.by_agent[m.sender] = std::move(std::get<FrameBatchPayload>(m.payload).frames);

    std::vector<Strategy> next = strategies;
    if (buffers.total_frames() == 0) {
      // Nothing arrived: no evidence, keep strategies, empty summary.
      plog.summary_kept.assign(n, {});
    } else if (dqn) {
      const std::vector<float> state = dqn_state(buffers, ds.dim);
      const std::vector<float> q = dqn->net.forward(state);
      next = decode_action(static_cast<uint32_t>(greedy_action(q) - 1), n);
      plog.summary_kept.assign(n, {});
    } else {
      const uint32_t main_mask = select_main_views(buffers, cfg.sim);
      plog.main_view_mask = main_mask;
      next = assign_strategies(buffers, main_mask, cfg.sim, cfg.tau);
      PeriodSummary summary = generate_summary(buffers, main_mask, cfg.sim, cfg.dedup_window,
                                               cfg.neighbor_window, len);
      plog.summary_kept = std::move(summary.kept);
    }

    // Strategy orders back to the agents; a lost order keeps the old pace.
    StrategyOrderPayload order;
    order.strategies.resize(n);
    for (uint16_t i = 0; i < n; ++i) order.strategies[i] = static_cast<uint8_t>(next[i]);
    for (uint16_t i = 0; i < n; ++i) {
      Message m{controller_id, p, order};
      if (channel.send(m, i, Bucket::central)) strategies[i] = next[i];
    }
    for (uint16_t i = 0; i < n; ++i) channel.drain(i);  // agents consume their orders

    report.periods.push_back(std::move(plog));
  }

  report.comm = channel.report();
  return report;
}

// ---------------------------------------------------------------------------
// DQN controller training
// ---------------------------------------------------------------------------

// Q-learning over dataset periods. The state after period p is the buffer
// digest of period p; the chosen action sets the strategies for period p+1,
// and the reward is scored on period p+1's selections against the labels.
inline ControllerPolicy train_dqn_controller(const SceneDataset& ds,
                                             const StrategyPolicies& policies,
                                             const TrainConfig& cfg, double alpha_red,
                                             uint32_t period = 100, int g_window = 4,
                                             double g_sigma = 1.0, double gamma = 0.8) {
  const uint16_t n = static_cast<uint16_t>(ds.num_views());
  const uint32_t num_actions = controller_action_count(n);
  cfg.validate();
  policies.validate();

  const uint32_t len = static_cast<uint32_t>(ds.length());
  const uint32_t num_periods = (len + period - 1) / period;
  require(num_periods >= 2, errc::invalid_config, "need at least two periods to learn");

  Rng rng(cfg.seed);
  Mlp net = Mlp::he_init({n * ds.dim, 128, 64, num_actions}, rng);
  Mlp target = net;
  AdamState opt(net, cfg.learning_rate);
  MlpWorkspace ws;

  struct Transition {
    std::vector<float> state, next_state;
    float reward;
    uint16_t action;
  };
  std::vector<Transition> replay;
  size_t replay_next = 0;

  std::vector<std::vector<float>> scratch;
  std::vector<QSample> batch(cfg.batch_size);
  std::vector<float> targets(cfg.batch_size);
  int64_t step = 0;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const double eps = cfg.epsilon(ep);
    std::vector<Strategy> strategies(n, Strategy::normal);
    std::vector<uint32_t> cursor(n, 0);
    bool have_pending = false;
    std::vector<float> pending_state;
    uint32_t pending_action = 0;

    for (uint32_t p = 0; p < num_periods; ++p) {
      const uint32_t period_start = p * period;
      const uint32_t period_end = std::min(len, (p + 1) * period);
      const uint32_t period_len = period_end - period_start;

      PeriodBuffers buffers;
      buffers.by_agent.resize(n);
      std::vector<std::vector<uint8_t>> selected_bits(n,
                                                      std::vector<uint8_t>(period_len, 0));
      std::vector<std::vector<uint8_t>> truth_bits(n, std::vector<uint8_t>(period_len, 0));
      for (uint16_t i = 0; i < n; ++i) {
        SelectionResult sel;
        cursor[i] = fast_forward_range(policies.of(strategies[i]), ds.views[i], cursor[i],
                                       period_end, sel, scratch);
        for (uint32_t idx : sel.indices) {
          buffers.by_agent[i].push_back(SelectedFrame{idx, ds.views[i].frames[idx].feature});
          selected_bits[i][idx - period_start] = 1;
        }
        for (uint32_t t = 0; t < period_len; ++t)
          truth_bits[i][t] = ds.views[i].frames[period_start + t].label;
      }
      std::vector<uint8_t> global_bits(period_len);
      for (uint32_t t = 0; t < period_len; ++t)
        global_bits[t] = ds.global_truth[period_start + t];

      std::vector<float> state = dqn_state(buffers, ds.dim);

      if (have_pending) {
        const double r =
            dqn_reward(selected_bits, truth_bits, global_bits, alpha_red, g_window, g_sigma);
        Transition tr{std::move(pending_state), state, static_cast<float>(r),
                      static_cast<uint16_t>(pending_action)};
        if (replay.size() < cfg.replay_capacity) {
          replay.push_back(std::move(tr));
        } else {
          replay[replay_next] = std::move(tr);
          replay_next = (replay_next + 1) % cfg.replay_capacity;
        }
        if (replay.size() >= cfg.batch_size) {
          for (size_t b = 0; b < cfg.batch_size; ++b) {
            const Transition& t = replay[rng.uniform_int(replay.size())];
            target.forward(t.next_state, scratch);
            float best = scratch.back()[0];
            for (float q : scratch.back()) best = std::max(best, q);
            targets[b] = t.reward + static_cast<float>(gamma) * best;
            batch[b] = QSample{t.state.data(), t.action, targets[b]};
          }
          train_q_batch(net, opt, batch, ws);
        }
        ++step;
        if (step % cfg.target_sync_interval == 0) target = net;
      }

      uint32_t action;
      if (rng.uniform() < eps) {
        action = static_cast<uint32_t>(rng.uniform_int(num_actions));
      } else {
        net.forward(state, scratch);
        action = static_cast<uint32_t>(greedy_action(scratch.back()) - 1);
      }
      strategies = decode_action(action, n);
      pending_state = std::move(state);
      pending_action = action;
      have_pending = true;
    }
  }

  return ControllerPolicy{std::move(net), n};
}

}  // namespace ffward
