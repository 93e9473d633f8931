#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ffward/error.hpp"
#include "ffward/ffagent.hpp"
#include "ffward/netsim.hpp"

namespace ffward {

// ---------------------------------------------------------------------------
// Run report: everything a run produced, in replayable detail
// ---------------------------------------------------------------------------

struct AgentPeriodLog {
  Strategy strategy = Strategy::normal;
  std::vector<uint32_t> selected;  // frame indices processed this period
  bool delivered = true;           // centralized runs: batch reached the controller
};

struct PeriodLog {
  std::vector<AgentPeriodLog> agents;
  uint32_t main_view_mask = 0;                      // centralized runs
  std::vector<std::vector<uint32_t>> summary_kept;  // per agent, deduplicated centroids
  std::vector<float> consensus_scores;              // distributed runs
};

struct RunReport {
  std::string method;   // random | uniform | ffnet | dmvf | mffnet
  std::string dataset;  // path or label
  uint32_t num_views = 0;
  uint32_t length = 0;
  uint32_t dim = 0;
  uint32_t period = 0;
  uint64_t seed = 0;
  double loss_prob = 0.0;
  double rho = 0.0;
  double tau = 0.0;
  int32_t desync_view = -1;
  int32_t desync_offset = 0;
  int eval_window = 4;
  std::string controller;  // heuristic | dqn | empty for non-centralized

  std::vector<PeriodLog> periods;
  CommReport comm;

  // Metrics (filled by the bench layer after the run).
  double coverage = -1.0;
  double processing_rate = -1.0;
  double summary_coverage = -1.0;

  size_t processed_total() const {
    size_t total = 0;
    for (const PeriodLog& p : periods)
      for (const AgentPeriodLog& a : p.agents) total += a.selected.size();
    return total;
  }
};

// ---------------------------------------------------------------------------
// Text serialization: "key = value" header plus CSV sections. Deterministic
// byte-for-byte for identical runs.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);  // exact double round-trip
  return buf;
}

inline const char* bucket_name(Bucket b) { return b == Bucket::p2p ? "p2p" : "central"; }

inline const char* kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::frame_batch: return "frame_batch";
    case MsgKind::score_vector: return "score_vector";
    case MsgKind::strategy_order: return "strategy_order";
  }
  return "?";
}

}  // namespace detail

inline std::string format_report(const RunReport& r) {
  std::string out;
  out.reserve(1 << 16);
  auto line = [&](const std::string& s) {
    out += s;
    out += '\n';
  };
  auto kv = [&](const char* k, const std::string& v) { line(std::string(k) + " = " + v); };

  line("ffward-run-report v1");
  kv("method", r.method);
  kv("dataset", r.dataset);
  kv("views", std::to_string(r.num_views));
  kv("length", std::to_string(r.length));
  kv("dim", std::to_string(r.dim));
  kv("period", std::to_string(r.period));
  kv("seed", std::to_string(r.seed));
  kv("loss", detail::fmt_double(r.loss_prob));
  kv("rho", detail::fmt_double(r.rho));
  kv("tau", detail::fmt_double(r.tau));
  kv("desync_view", std::to_string(r.desync_view));
  kv("desync_offset", std::to_string(r.desync_offset));
  kv("eval_window", std::to_string(r.eval_window));
  kv("controller", r.controller);

  line("");
  line("[strategies]");
  line("period,agent,strategy,delivered,main");
  for (size_t p = 0; p < r.periods.size(); ++p) {
    const PeriodLog& pl = r.periods[p];
    for (size_t a = 0; a < pl.agents.size(); ++a) {
      const bool main = (pl.main_view_mask >> a) & 1u;
      line(std::to_string(p) + "," + std::to_string(a) + "," +
           strategy_name(pl.agents[a].strategy) + "," +
           (pl.agents[a].delivered ? "1" : "0") + "," + (main ? "1" : "0"));
    }
  }

  line("");
  line("[selected]");
  line("period,agent,index");
  for (size_t p = 0; p < r.periods.size(); ++p)
    for (size_t a = 0; a < r.periods[p].agents.size(); ++a)
      for (uint32_t idx : r.periods[p].agents[a].selected)
        line(std::to_string(p) + "," + std::to_string(a) + "," + std::to_string(idx));

  line("");
  line("[summary]");
  line("period,agent,index");
  for (size_t p = 0; p < r.periods.size(); ++p)
    for (size_t a = 0; a < r.periods[p].summary_kept.size(); ++a)
      for (uint32_t idx : r.periods[p].summary_kept[a])
        line(std::to_string(p) + "," + std::to_string(a) + "," + std::to_string(idx));

  line("");
  line("[consensus]");
  line("period,agent,score");
  for (size_t p = 0; p < r.periods.size(); ++p)
    for (size_t a = 0; a < r.periods[p].consensus_scores.size(); ++a)
      line(std::to_string(p) + "," + std::to_string(a) + "," +
           detail::fmt_double(r.periods[p].consensus_scores[a]));

  line("");
  line("[comm]");
  line("bucket,kind,attempted_count,attempted_bytes,delivered_count,delivered_bytes");
  for (Bucket b : {Bucket::p2p, Bucket::central}) {
    for (MsgKind k : {MsgKind::frame_batch, MsgKind::score_vector, MsgKind::strategy_order}) {
      const KindStats& s = r.comm.at(b, k);
      line(std::string(detail::bucket_name(b)) + "," + detail::kind_name(k) + "," +
           std::to_string(s.attempted_count) + "," + std::to_string(s.attempted_bytes) + "," +
           std::to_string(s.delivered_count) + "," + std::to_string(s.delivered_bytes));
    }
  }

  line("");
  line("[metrics]");
  kv("coverage", detail::fmt_double(r.coverage));
  kv("processing_rate", detail::fmt_double(r.processing_rate));
  kv("summary_coverage", detail::fmt_double(r.summary_coverage));
  kv("processed_total", std::to_string(r.processed_total()));
  kv("bytes_p2p", std::to_string(r.comm.attempted_bytes(Bucket::p2p)));
  kv("bytes_central", std::to_string(r.comm.attempted_bytes(Bucket::central)));
  return out;
}

inline void write_report(const RunReport& r, const std::string& path) {
  const std::string text = format_report(r);
  std::vector<uint8_t> bytes(text.begin(), text.end());
  write_file_bytes(path, bytes);
}

inline RunReport parse_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "ffward-run-report v1")
    fail(errc::bad_magic, "not a ffward run report");

  RunReport r;
  std::map<std::string, std::string> header;
  std::string section;
  bool skip_column_row = false;

  auto ensure_period = [&](size_t p) -> PeriodLog& {
    if (r.periods.size() <= p) r.periods.resize(p + 1);
    return r.periods[p];
  };
  auto ensure_agent = [&](PeriodLog& pl, size_t a) -> AgentPeriodLog& {
    if (pl.agents.size() <= a) pl.agents.resize(a + 1);
    return pl.agents[a];
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
      const size_t comma = s.find(',', start);
      out.push_back(s.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line;
      skip_column_row = true;
      continue;
    }
    if (skip_column_row && line.find('=') == std::string::npos) {
      skip_column_row = false;  // column header row of a CSV section
      continue;
    }
    skip_column_row = false;
    const size_t eq = line.find(" = ");
    if (eq != std::string::npos) {
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 3);
      if (section.empty())
        header[key] = value;
      else if (section == "[metrics]") {
        if (key == "coverage") r.coverage = std::stod(value);
        else if (key == "processing_rate") r.processing_rate = std::stod(value);
        else if (key == "summary_coverage") r.summary_coverage = std::stod(value);
        // processed_total / bytes_* are derived; recomputed on demand
      }
      continue;
    }
    const std::vector<std::string> f = split(line);
    if (section == "[strategies]") {
      require(f.size() == 5, errc::length_mismatch, "bad strategies row");
      PeriodLog& pl = ensure_period(std::stoul(f[0]));
      AgentPeriodLog& al = ensure_agent(pl, std::stoul(f[1]));
      al.strategy = strategy_from_name(f[2]);
      al.delivered = f[3] == "1";
      if (f[4] == "1") pl.main_view_mask |= 1u << std::stoul(f[1]);
    } else if (section == "[selected]") {
      require(f.size() == 3, errc::length_mismatch, "bad selected row");
      PeriodLog& pl = ensure_period(std::stoul(f[0]));
      ensure_agent(pl, std::stoul(f[1])).selected.push_back(
          static_cast<uint32_t>(std::stoul(f[2])));
    } else if (section == "[summary]") {
      require(f.size() == 3, errc::length_mismatch, "bad summary row");
      PeriodLog& pl = ensure_period(std::stoul(f[0]));
      const size_t a = std::stoul(f[1]);
      if (pl.summary_kept.size() <= a) pl.summary_kept.resize(a + 1);
      pl.summary_kept[a].push_back(static_cast<uint32_t>(std::stoul(f[2])));
    } else if (section == "[consensus]") {
      require(f.size() == 3, errc::length_mismatch, "bad consensus row");
      PeriodLog& pl = ensure_period(std::stoul(f[0]));
      const size_t a = std::stoul(f[1]);
      if (pl.consensus_scores.size() <= a) pl.consensus_scores.resize(a + 1);
      pl.consensus_scores[a] = std::stof(f[2]);
    } else if (section == "[comm]") {
      require(f.size() == 6, errc::length_mismatch, "bad comm row");
      const Bucket b = f[0] == "p2p" ? Bucket::p2p : Bucket::central;
      MsgKind k;
      if (f[1] == "frame_batch") k = MsgKind::frame_batch;
      else if (f[1] == "score_vector") k = MsgKind::score_vector;
      else if (f[1] == "strategy_order") k = MsgKind::strategy_order;
      else fail(errc::unknown_kind, "comm kind " + f[1]);
      KindStats& s = r.comm.at(b, k);
      s.attempted_count = std::stoull(f[2]);
      s.attempted_bytes = std::stoull(f[3]);
      s.delivered_count = std::stoull(f[4]);
      s.delivered_bytes = std::stoull(f[5]);
    } else {
      fail(errc::length_mismatch, "row outside any known section: " + line);
    }
  }

  auto hget = [&](const char* k) -> const std::string& {
    auto it = header.find(k);
    if (it == header.end()) fail(errc::length_mismatch, std::string("missing header key ") + k);
    return it->second;
  };
  r.method = hget("method");
  r.dataset = hget("dataset");
  r.num_views = static_cast<uint32_t>(std::stoul(hget("views")));
  r.length = static_cast<uint32_t>(std::stoul(hget("length")));
  r.dim = static_cast<uint32_t>(std::stoul(hget("dim")));
  r.period = static_cast<uint32_t>(std::stoul(hget("period")));
  r.seed = std::stoull(hget("seed"));
  r.loss_prob = std::stod(hget("loss"));
  r.rho = std::stod(hget("rho"));
  r.tau = std::stod(hget("tau"));
  r.desync_view = static_cast<int32_t>(std::stol(hget("desync_view")));
  r.desync_offset = static_cast<int32_t>(std::stol(hget("desync_offset")));
  r.eval_window = std::stoi(hget("eval_window"));
  r.controller = hget("controller");
  return r;
}

inline RunReport read_report(const std::string& path) {
  const std::vector<uint8_t> bytes = read_file_bytes(path);
  return parse_report(std::string(bytes.begin(), bytes.end()));
}

}  // namespace ffward
