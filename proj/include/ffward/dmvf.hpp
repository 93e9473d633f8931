#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ffward/error.hpp"
#include "ffward/ffagent.hpp"
#include "ffward/features.hpp"
#include "ffward/netsim.hpp"
#include "ffward/report.hpp"
#include "ffward/simkernel.hpp"

namespace ffward {

// ---------------------------------------------------------------------------
// Communication graph
// ---------------------------------------------------------------------------

struct CommGraph {
  uint16_t n = 0;
  std::vector<std::vector<uint16_t>> adj;  // sorted, no self loops
  uint32_t diameter = 0;

  const std::vector<uint16_t>& neighbors(uint16_t i) const { return adj[i]; }

  // |V_i| = degree + self.
  size_t neighborhood_size(uint16_t i) const { return adj[i].size() + 1; }

  static CommGraph from_edges(uint16_t n, std::vector<std::pair<uint16_t, uint16_t>> edges) {
    require(n >= 2, errc::invalid_config, "graph needs at least 2 nodes");
    CommGraph g;
    g.n = n;
    g.adj.resize(n);
    for (auto [u, v] : edges) {
      require(u < n && v < n, errc::out_of_range, "edge endpoint out of range");
      require(u != v, errc::invalid_config, "self loops not allowed");
      g.adj[u].push_back(v);
      g.adj[v].push_back(u);
    }
    for (auto& nb : g.adj) {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    g.diameter = g.compute_diameter();  // also validates connectivity
    return g;
  }

  static CommGraph complete(uint16_t n) {
    std::vector<std::pair<uint16_t, uint16_t>> edges;
    for (uint16_t u = 0; u < n; ++u)
      for (uint16_t v = u + 1; v < n; ++v) edges.emplace_back(u, v);
    return from_edges(n, std::move(edges));
  }

  // Lines of "u v"; blank lines and lines starting with '#' are skipped.
  static CommGraph load_edgelist(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::missing_file, path);
    std::vector<std::pair<uint16_t, uint16_t>> edges;
    uint16_t max_node = 0;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      unsigned u, v;
      if (!(ls >> u >> v)) fail(errc::invalid_config, "bad edge line: " + line);
      edges.emplace_back(static_cast<uint16_t>(u), static_cast<uint16_t>(v));
      max_node = std::max<uint16_t>(max_node, static_cast<uint16_t>(std::max(u, v)));
    }
    return from_edges(static_cast<uint16_t>(max_node + 1), std::move(edges));
  }

 private:
  uint32_t compute_diameter() const {
    uint32_t diameter = 0;
    std::vector<int32_t> dist(n);
    for (uint16_t src = 0; src < n; ++src) {
      std::fill(dist.begin(), dist.end(), -1);
      std::deque<uint16_t> queue{src};
      dist[src] = 0;
      while (!queue.empty()) {
        const uint16_t u = queue.front();
        queue.pop_front();
        for (uint16_t v : adj[u])
          if (dist[v] < 0) {
            dist[v] = dist[u] + 1;
            queue.push_back(v);
          }
      }
      for (uint16_t v = 0; v < n; ++v) {
        if (dist[v] < 0) fail(errc::invalid_config, "graph is not connected");
        diameter = std::max(diameter, static_cast<uint32_t>(dist[v]));
      }
    }
    return diameter;
  }
};

using ScoreVector = std::vector<float>;

// ---------------------------------------------------------------------------
// Score computation
// ---------------------------------------------------------------------------

// Initial importance scores computed by agent i for every member of its
// neighborhood: x_ij = mean over other members k of agent_sim(v_j, v_k).
// `selections` maps agent id -> its selected frames this period; only members
// present with non-empty selections take part (empty ones contribute 0 and
// are skipped as comparison partners).
inline std::vector<double> initial_scores(uint16_t agent, const std::vector<uint16_t>& membership,
                                          const std::map<uint16_t, const FrameSet*>& selections,
                                          double alpha, uint16_t num_agents) {
  require(std::find(membership.begin(), membership.end(), agent) != membership.end(),
          errc::invalid_config, "membership must contain the agent itself");
  require(membership.size() >= 2, errc::invalid_config, "isolated neighborhood");

  std::vector<uint16_t> active;  // members with data this period
  for (uint16_t j : membership) {
    auto it = selections.find(j);
    if (it != selections.end() && it->second != nullptr && !it->second->empty())
      active.push_back(j);
  }

  std::vector<double> scores(num_agents, 0.0);
  for (uint16_t j : membership) {
    auto jt = selections.find(j);
    if (jt == selections.end() || jt->second == nullptr || jt->second->empty()) continue;
    double sum = 0.0;
    size_t terms = 0;
    for (uint16_t k : active) {
      if (k == j) continue;
      sum += agent_sim(*jt->second, *selections.at(k), alpha);
      ++terms;
    }
    scores[j] = terms == 0 ? 0.0 : sum / static_cast<double>(terms);
  }
  return scores;
}

// Weighted average of the evaluations received for one agent (Eq. 13 shape):
// x_i = sum_j x_ji / n_j  /  sum_j 1 / n_j.
inline double update_own_score(const std::vector<std::pair<double, double>>& score_weight_pairs) {
  require(!score_weight_pairs.empty(), errc::empty_input, "no evaluations received");
  double num = 0.0, den = 0.0;
  for (auto [score, n_j] : score_weight_pairs) {
    require(n_j > 0.0, errc::invalid_config, "weight must be positive");
    num += score / n_j;
    den += 1.0 / n_j;
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// Maximal consensus
// ---------------------------------------------------------------------------

// Exactly `diameter` synchronized rounds of element-wise max with neighbors.
// Returns every agent's final vector. If a channel is given, each round's
// vectors travel through it (reliable sends, p2p bucket) and bytes are
// counted; otherwise exchange is direct.
inline std::vector<ScoreVector> consensus_rounds(const CommGraph& g,
                                                 std::vector<ScoreVector> vectors,
                                                 Channel* channel = nullptr, uint32_t period = 0) {
  require(vectors.size() == g.n, errc::dim_mismatch, "one vector per agent required");
  for (uint32_t round = 0; round < g.diameter; ++round) {
    if (channel) {
      for (uint16_t i = 0; i < g.n; ++i) {
        Message m{i, period, ScoreVectorPayload{vectors[i]}};
        for (uint16_t j : g.neighbors(i)) channel->send_reliable(m, j, Bucket::p2p);
      }
      for (uint16_t i = 0; i < g.n; ++i) {
        for (const Message& m : channel->drain(i)) {
          const auto& sv = std::get<ScoreVectorPayload>(m.payload);
          require(sv.scores.size() == vectors[i].size(), errc::dim_mismatch,
                  "score vector length mismatch");
          for (size_t t = 0; t < vectors[i].size(); ++t)
            vectors[i][t] = std::max(vectors[i][t], sv.scores[t]);
        }
      }
    } else {
      std::vector<ScoreVector> next = vectors;
      for (uint16_t i = 0; i < g.n; ++i)
        for (uint16_t j : g.neighbors(i))
          for (size_t t = 0; t < next[i].size(); ++t)
            next[i][t] = std::max(next[i][t], vectors[j][t]);
      vectors = std::move(next);
    }
  }
  return vectors;
}

// Runs consensus and returns the agreed vector. The exactness contract is
// enforced, not assumed: any disagreement after diameter rounds is an error.
inline ScoreVector maximal_consensus(const CommGraph& g, const std::vector<ScoreVector>& sparse) {
  const std::vector<ScoreVector> out = consensus_rounds(g, sparse);
  for (uint16_t i = 1; i < g.n; ++i)
    require(out[i] == out[0], errc::length_mismatch, "consensus did not converge");
  return out[0];
}

// ---------------------------------------------------------------------------
// Strategy selection
// ---------------------------------------------------------------------------

struct StrategyPortions {
  std::array<uint32_t, 3> counts{};  // slow, normal, fast

  uint32_t total() const { return counts[0] + counts[1] + counts[2]; }

  static StrategyPortions even(uint16_t n) {
    const uint32_t third = static_cast<uint32_t>(n) / 3;
    StrategyPortions p;
    p.counts = {third, third, third};
    // Leftover agents go to normal first, then slow.
    for (uint32_t r = 0; r < static_cast<uint32_t>(n) % 3; ++r) ++p.counts[r == 0 ? 1 : 0];
    return p;
  }
};

// Rank agents by score (descending, lowest id first on ties); the top block
// runs slow, the middle normal, the rest fast.
inline std::vector<Strategy> select_strategies(const ScoreVector& scores,
                                               const StrategyPortions& portions) {
  require(portions.total() == scores.size(), errc::invalid_config,
          "portions must sum to the number of agents");
  std::vector<uint16_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](uint16_t a, uint16_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<Strategy> out(scores.size(), Strategy::fast);
  size_t rank = 0;
  for (uint32_t c = 0; c < portions.counts[0]; ++c) out[order[rank++]] = Strategy::slow;
  for (uint32_t c = 0; c < portions.counts[1]; ++c) out[order[rank++]] = Strategy::normal;
  for (uint32_t c = 0; c < portions.counts[2]; ++c) out[order[rank++]] = Strategy::fast;
  return out;
}

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

struct StrategyPolicies {
  QPolicy slow, normal, fast;

  const QPolicy& of(Strategy s) const {
    switch (s) {
      case Strategy::slow: return slow;
      case Strategy::normal: return normal;
      case Strategy::fast: return fast;
    }
    fail(errc::out_of_range, "bad strategy code");
  }

  void validate() const {
    require(slow.strategy == Strategy::slow && normal.strategy == Strategy::normal &&
                fast.strategy == Strategy::fast,
            errc::dim_mismatch, "policies must carry their own strategies");
    slow.validate();
    normal.validate();
    fast.validate();
  }
};

struct DmvfConfig {
  uint32_t period = 100;  // frames per adaptation period
  StrategyPortions portions;
  SimParams sim;
  // n_j of the weighted score update. The neighborhood size |V_j| by default;
  // uniform weights otherwise.
  bool weight_by_neighborhood = true;

  void validate(uint16_t n) const {
    require(period >= 1, errc::invalid_config, "period must be >= 1");
    require(portions.total() == n, errc::invalid_config, "portions must sum to N");
    sim.validate();
  }
};

// Lock-step distributed run. Per period: fast-forward, exchange selections
// with neighbors (lossy), score locally, reliable score exchange plus
// maximal consensus, then rank-based strategy selection for the next period.
// Selections lost on the wire shrink the receiver's neighborhood for that
// period's scoring only.
inline RunReport run_dmvf(const SceneDataset& ds, const CommGraph& graph,
                          const StrategyPolicies& policies, const DmvfConfig& cfg,
                          Channel& channel) {
  const uint16_t n = static_cast<uint16_t>(ds.num_views());
  require(graph.n == n, errc::dim_mismatch, "graph size != number of views");
  cfg.validate(n);
  policies.validate();

  const uint32_t len = static_cast<uint32_t>(ds.length());
  const uint32_t num_periods = (len + cfg.period - 1) / cfg.period;

  RunReport report;
  report.method = "dmvf";
  report.num_views = n;
  report.length = len;
  report.dim = ds.dim;
  report.period = cfg.period;
  report.rho = cfg.sim.rho;

  // Period 0 assignment: ranking over all-equal scores, i.e. pure id order.
  std::vector<Strategy> strategies = select_strategies(ScoreVector(n, 0.0f), cfg.portions);
  std::vector<uint32_t> cursor(n, 0);
  std::vector<std::vector<float>> scratch;

  for (uint32_t p = 0; p < num_periods; ++p) {
    const uint32_t period_end = std::min(len, (p + 1) * cfg.period);
    PeriodLog plog;
    plog.agents.resize(n);

    // 1. Fast-forward this period's raw frames.
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

    // 2. Exchange selections with neighbors (data plane, lossy).
    for (uint16_t i = 0; i < n; ++i) {
      Message m{i, p, FrameBatchPayload{selections[i]}};
      for (uint16_t j : graph.neighbors(i)) channel.send(m, j, Bucket::p2p);
    }
    std::vector<std::map<uint16_t, FrameSet>> received(n);
    for (uint16_t i = 0; i < n; ++i)
      for (Message& m : channel.drain(i))
        received[i][m.sender] = std::move(std::get<FrameBatchPayload>(m.payload).frames);

    // 3. Local-neighborhood scoring over whatever actually arrived.
    std::vector<std::vector<double>> eval(n);  // eval[i][j] = x_ij^0
    for (uint16_t i = 0; i < n; ++i) {
      std::vector<uint16_t> membership{i};
      std::map<uint16_t, const FrameSet*> sel_map{{i, &selections[i]}};
      for (auto& [j, frames] : received[i]) {
        membership.push_back(j);
        sel_map[j] = &frames;
      }
      std::sort(membership.begin(), membership.end());
      eval[i] = membership.size() >= 2
                    ? initial_scores(i, membership, sel_map, cfg.sim.alpha, n)
                    : std::vector<double>(n, 0.0);
    }

    // 4. Reliable score exchange; each agent averages the evaluations of
    //    itself (Eq. 13 shape). A zero entry means "not evaluated".
    for (uint16_t i = 0; i < n; ++i) {
      ScoreVectorPayload sv;
      sv.scores.assign(eval[i].begin(), eval[i].end());
      Message m{i, p, sv};
      for (uint16_t j : graph.neighbors(i)) channel.send_reliable(m, j, Bucket::p2p);
    }
    ScoreVector own(n, 0.0f);
    std::vector<std::vector<std::pair<double, double>>> incoming(n);
    for (uint16_t i = 0; i < n; ++i) {
      const double self_weight =
          cfg.weight_by_neighborhood ? static_cast<double>(graph.neighborhood_size(i)) : 1.0;
      if (eval[i][i] > 0.0) incoming[i].push_back({eval[i][i], self_weight});
      for (const Message& m : channel.drain(i)) {
        const auto& sv = std::get<ScoreVectorPayload>(m.payload);
        const double w = cfg.weight_by_neighborhood
                             ? static_cast<double>(graph.neighborhood_size(m.sender))
                             : 1.0;
        if (sv.scores[i] > 0.0f) incoming[i].push_back({sv.scores[i], w});
      }
      own[i] = incoming[i].empty() ? 0.0f : static_cast<float>(update_own_score(incoming[i]));
    }

    // 5. Maximal consensus over the channel, diameter rounds, then ranking.
    std::vector<ScoreVector> sparse(n, ScoreVector(n, 0.0f));
    for (uint16_t i = 0; i < n; ++i) sparse[i][i] = own[i];
    std::vector<ScoreVector> agreed = consensus_rounds(graph, std::move(sparse), &channel, p);
    for (uint16_t i = 1; i < n; ++i)
      require(agreed[i] == agreed[0], errc::length_mismatch, "consensus did not converge");
    plog.consensus_scores = agreed[0];
    strategies = select_strategies(agreed[0], cfg.portions);

    report.periods.push_back(std::move(plog));
  }

  report.comm = channel.report();
  return report;
}

}  // namespace ffward
