#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ffward/baselines.hpp"
#include "ffward/dmvf.hpp"
#include "ffward/error.hpp"
#include "ffward/ffagent.hpp"
#include "ffward/features.hpp"
#include "ffward/mffnet.hpp"
#include "ffward/netsim.hpp"
#include "ffward/report.hpp"

namespace ffward {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Fraction of important frames with a selected frame (any agent) within the
// window. Zero important frames counts as full coverage, with a warning.
inline double coverage(const std::vector<uint32_t>& selected, std::span<const uint8_t> truth,
                       int window) {
  const int64_t len = static_cast<int64_t>(truth.size());
  std::vector<uint8_t> covered(truth.size(), 0);
  for (uint32_t s : selected) {
    require(s < truth.size(), errc::out_of_range, "selected index outside stream");
    const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>(s) - window);
    const int64_t hi = std::min<int64_t>(len - 1, static_cast<int64_t>(s) + window);
    for (int64_t t = lo; t <= hi; ++t) covered[t] = 1;
  }
  size_t important = 0, hit = 0;
  for (size_t t = 0; t < truth.size(); ++t) {
    if (!truth[t]) continue;
    ++important;
    hit += covered[t];
  }
  if (important == 0) {
    std::cerr << "warning: coverage over a truth with zero important frames, defining 1.0\n";
    return 1.0;
  }
  return static_cast<double>(hit) / static_cast<double>(important);
}

inline double processing_rate(const RunReport& report) {
  require(report.num_views > 0 && report.length > 0, errc::invalid_config, "incomplete report");
  return static_cast<double>(report.processed_total()) /
         (static_cast<double>(report.num_views) * report.length);
}

// Frames that reached the collection point: everything selected, minus
// batches the controller never received.
inline std::vector<uint32_t> collected_indices(const RunReport& report) {
  std::vector<uint32_t> out;
  for (const PeriodLog& p : report.periods)
    for (const AgentPeriodLog& a : p.agents)
      if (a.delivered) out.insert(out.end(), a.selected.begin(), a.selected.end());
  return out;
}

inline std::vector<uint32_t> summary_indices(const RunReport& report) {
  std::vector<uint32_t> out;
  for (const PeriodLog& p : report.periods)
    for (const auto& kept : p.summary_kept) out.insert(out.end(), kept.begin(), kept.end());
  return out;
}

// Fills the metric fields of a finished run from its logs and the dataset.
inline void compute_metrics(RunReport& report, const SceneDataset& ds, int eval_window) {
  report.eval_window = eval_window;
  report.coverage = coverage(collected_indices(report), ds.global_truth, eval_window);
  report.processing_rate = processing_rate(report);
  const std::vector<uint32_t> summary = summary_indices(report);
  report.summary_coverage =
      summary.empty() && report.method != "mffnet"
          ? report.coverage
          : coverage(summary, ds.global_truth, eval_window);
}

// ---------------------------------------------------------------------------
// Non-coordinated runs (baselines and uniform-strategy FFNet)
// ---------------------------------------------------------------------------

// Every view runs the same policy independently, full stream, no
// communication. One period log carries the whole run.
inline RunReport run_uncoordinated(const SceneDataset& ds, const QPolicy& policy) {
  RunReport report;
  report.method = "ffnet";
  report.num_views = static_cast<uint32_t>(ds.num_views());
  report.length = static_cast<uint32_t>(ds.length());
  report.dim = ds.dim;
  report.period = report.length;
  PeriodLog plog;
  plog.agents.resize(ds.num_views());
  for (size_t i = 0; i < ds.num_views(); ++i) {
    SelectionResult sel = fast_forward(policy, ds.views[i], 0);
    plog.agents[i].strategy = policy.strategy;
    plog.agents[i].selected = std::move(sel.indices);
  }
  report.periods.push_back(std::move(plog));
  return report;
}

inline RunReport run_baseline(const SceneDataset& ds, BaselineKind kind, double target_rate,
                              uint64_t seed) {
  RunReport report;
  report.method = kind == BaselineKind::random ? "random" : "uniform";
  report.num_views = static_cast<uint32_t>(ds.num_views());
  report.length = static_cast<uint32_t>(ds.length());
  report.dim = ds.dim;
  report.period = report.length;
  report.seed = seed;
  PeriodLog plog;
  plog.agents.resize(ds.num_views());
  for (size_t i = 0; i < ds.num_views(); ++i) {
    BaselineConfig cfg{kind, target_rate, seed + i};
    plog.agents[i].strategy = Strategy::normal;
    plog.agents[i].selected = baseline_select(report.length, cfg);
  }
  report.periods.push_back(std::move(plog));
  return report;
}

// ---------------------------------------------------------------------------
// Standard synthetic benchmark
// ---------------------------------------------------------------------------

// Desk-scale stand-in for the multi-view recordings: 3 views, 64-d features,
// ~18% of the timeline inside heavily shared events short enough that skip
// placement decides how much of them gets covered. One 14k-frame scene per
// seed; policies fit on the first 4k frames and evaluate on the last 10k
// (the paper's train/test split, realized as a time split).
constexpr uint32_t kBenchmarkTrainFrames = 4000;

inline SynthConfig benchmark_scene_config(uint64_t seed) {
  SynthConfig cfg;
  cfg.num_views = 3;
  cfg.length = 14000;
  cfg.dim = 64;
  cfg.num_events = 16;
  cfg.event_min_len = 180;
  cfg.event_max_len = 280;
  cfg.overlap_prob = 0.8;
  cfg.noise_std = 0.3;
  cfg.seed = seed;
  return cfg;
}

inline SceneDataset benchmark_train_scene(const SceneDataset& full) {
  return slice_scene(full, 0, kBenchmarkTrainFrames);
}

inline SceneDataset benchmark_eval_scene(const SceneDataset& full) {
  return slice_scene(full, kBenchmarkTrainFrames, static_cast<uint32_t>(full.length()));
}

// ---------------------------------------------------------------------------
// Rho sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
  double rho;
  double coverage;
  double processing_rate;
};

inline std::vector<SweepPoint> sweep_rho(const SceneDataset& ds, const StrategyPolicies& policies,
                                         const std::vector<double>& rhos, ControllerConfig cfg,
                                         int eval_window, uint64_t channel_seed) {
  require(!rhos.empty(), errc::empty_input, "empty rho list");
  std::vector<SweepPoint> points;
  for (double rho : rhos) {
    cfg.sim.rho = rho;
    SimChannel channel(ChannelConfig{0.0, channel_seed});
    RunReport report = run_mffnet(ds, policies, cfg, channel);
    compute_metrics(report, ds, eval_window);
    points.push_back({rho, report.coverage, report.processing_rate});
  }
  return points;
}

inline std::string format_sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "rho,coverage,processing_rate\n";
  for (const SweepPoint& p : points)
    out += detail::fmt_double(p.rho) + "," + detail::fmt_double(p.coverage) + "," +
           detail::fmt_double(p.processing_rate) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Experiment matrix
// ---------------------------------------------------------------------------

struct MatrixConfig {
  std::string dataset_path;
  std::string policies_dir;
  std::vector<std::string> methods;
  std::vector<uint64_t> seeds{1};
  std::vector<double> loss{0.0};
  std::vector<int32_t> desync{0};
  double rho = 0.525;
  double tau = 0.4;
  uint32_t period = 100;
  int eval_window = 4;
  double target_rate = 0.05;  // random/uniform baselines
  std::string graph = "complete";
  std::vector<uint32_t> portions;  // dmvf; empty = even split
  std::string controller = "heuristic";
  std::string controller_checkpoint;  // required when controller == "dqn"
  bool identical_views = false;       // extreme-redundancy variant

  static MatrixConfig from_json(const nlohmann::json& j);
  static MatrixConfig load(const std::string& path);

  void validate() const {
    require(!dataset_path.empty(), errc::invalid_config, "dataset path required");
    require(!methods.empty(), errc::invalid_config, "at least one method required");
    for (const std::string& m : methods)
      require(m == "random" || m == "uniform" || m == "ffnet" || m == "dmvf" || m == "mffnet",
              errc::unknown_method, "unknown method: " + m);
    require(!seeds.empty(), errc::invalid_config, "at least one seed required");
    require(!loss.empty(), errc::invalid_config, "at least one loss value required");
    for (double p : loss)
      require(p >= 0.0 && p <= 1.0, errc::invalid_config, "loss must be in [0,1]");
    require(!desync.empty(), errc::invalid_config, "at least one desync value required");
    require(controller == "heuristic" || controller == "dqn", errc::invalid_config,
            "controller must be heuristic or dqn");
    bool needs_policies = false;
    for (const std::string& m : methods)
      needs_policies = needs_policies || m == "ffnet" || m == "dmvf" || m == "mffnet";
    if (needs_policies)
      require(!policies_dir.empty(), errc::invalid_config, "policies dir required");
  }
};

inline MatrixConfig MatrixConfig::from_json(const nlohmann::json& j) {
  MatrixConfig cfg;
  cfg.dataset_path = j.at("dataset").get<std::string>();
  if (j.contains("policies")) cfg.policies_dir = j["policies"].get<std::string>();
  cfg.methods = j.at("methods").get<std::vector<std::string>>();
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<uint64_t>>();
  if (j.contains("loss")) cfg.loss = j["loss"].get<std::vector<double>>();
  if (j.contains("desync")) cfg.desync = j["desync"].get<std::vector<int32_t>>();
  if (j.contains("rho")) cfg.rho = j["rho"].get<double>();
  if (j.contains("tau")) cfg.tau = j["tau"].get<double>();
  if (j.contains("period")) cfg.period = j["period"].get<uint32_t>();
  if (j.contains("eval_window")) cfg.eval_window = j["eval_window"].get<int>();
  if (j.contains("target_rate")) cfg.target_rate = j["target_rate"].get<double>();
  if (j.contains("graph")) cfg.graph = j["graph"].get<std::string>();
  if (j.contains("portions")) cfg.portions = j["portions"].get<std::vector<uint32_t>>();
  if (j.contains("controller")) cfg.controller = j["controller"].get<std::string>();
  if (j.contains("controller_checkpoint"))
    cfg.controller_checkpoint = j["controller_checkpoint"].get<std::string>();
  if (j.contains("identical_views")) cfg.identical_views = j["identical_views"].get<bool>();
  cfg.validate();
  return cfg;
}

inline MatrixConfig MatrixConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::missing_file, path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(errc::invalid_config, std::string("config parse error: ") + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::invalid_config, std::string("config schema error: ") + e.what());
  }
}

inline StrategyPolicies load_policies(const std::string& dir) {
  namespace fs = std::filesystem;
  auto path_of = [&](const char* name) {
    const fs::path p = fs::path(dir) / (std::string(name) + ".ffwq");
    if (!fs::exists(p)) fail(errc::missing_file, "missing checkpoint " + p.string());
    return p.string();
  };
  StrategyPolicies policies{load_policy(path_of("slow")), load_policy(path_of("normal")),
                            load_policy(path_of("fast"))};
  policies.validate();
  return policies;
}

namespace detail {

inline std::string cell_name(const std::string& method, uint64_t seed, double loss,
                             int32_t desync) {
  return method + "_s" + std::to_string(seed) + "_l" + fmt_double(loss) + "_d" +
         std::to_string(desync);
}

}  // namespace detail

// Runs one cell of the matrix. Desync shifts view 0 before the run; loss
// applies to the channel-based methods.
inline RunReport run_cell(const std::string& method, const SceneDataset& base,
                          const StrategyPolicies* policies, const MatrixConfig& cfg,
                          uint64_t seed, double loss, int32_t desync) {
  SceneDataset ds = base;
  if (desync != 0) ds = apply_desync(std::move(ds), 0, desync);

  RunReport report;
  if (method == "random" || method == "uniform") {
    report = run_baseline(ds, method == "random" ? BaselineKind::random : BaselineKind::uniform,
                          cfg.target_rate, seed);
  } else if (method == "ffnet") {
    report = run_uncoordinated(ds, policies->normal);
  } else if (method == "dmvf") {
    const uint16_t n = static_cast<uint16_t>(ds.num_views());
    CommGraph graph = cfg.graph == "complete" ? CommGraph::complete(n)
                                              : CommGraph::load_edgelist(cfg.graph);
    DmvfConfig dcfg;
    dcfg.period = cfg.period;
    dcfg.sim.rho = cfg.rho;
    if (cfg.portions.empty()) {
      dcfg.portions = StrategyPortions::even(n);
    } else {
      require(cfg.portions.size() == 3, errc::invalid_config, "portions must have 3 entries");
      dcfg.portions.counts = {cfg.portions[0], cfg.portions[1], cfg.portions[2]};
    }
    SimChannel channel(ChannelConfig{loss, seed});
    report = run_dmvf(ds, graph, *policies, dcfg, channel);
  } else if (method == "mffnet") {
    ControllerConfig mcfg;
    mcfg.sim.rho = cfg.rho;
    mcfg.tau = cfg.tau;
    mcfg.period = cfg.period;
    mcfg.neighbor_window = cfg.eval_window;
    SimChannel channel(ChannelConfig{loss, seed});
    if (cfg.controller == "dqn") {
      require(!cfg.controller_checkpoint.empty(), errc::invalid_config,
              "dqn controller needs controller_checkpoint");
      const ControllerPolicy dqn = load_controller(
          cfg.controller_checkpoint, static_cast<uint16_t>(ds.num_views()), ds.dim);
      report = run_mffnet(ds, *policies, mcfg, channel, &dqn);
    } else {
      report = run_mffnet(ds, *policies, mcfg, channel);
    }
  } else {
    fail(errc::unknown_method, method);
  }

  report.dataset = cfg.dataset_path;
  report.seed = seed;
  report.loss_prob = loss;
  if (desync != 0) {
    report.desync_view = 0;
    report.desync_offset = desync;
  }
  compute_metrics(report, ds, cfg.eval_window);
  return report;
}

// Runs every (method, seed, loss, desync) cell, writing one report per cell
// plus an aggregate CSV. Deterministic byte-for-byte given the same config.
inline void run_matrix(const MatrixConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  cfg.validate();
  fs::create_directories(out_dir);

  SceneDataset base = read_dataset(cfg.dataset_path);
  if (cfg.identical_views) base = make_identical_views(std::move(base));

  StrategyPolicies policies;
  bool have_policies = false;
  for (const std::string& m : cfg.methods)
    if (m == "ffnet" || m == "dmvf" || m == "mffnet") {
      policies = load_policies(cfg.policies_dir);
      have_policies = true;
      break;
    }

  std::string csv = "method,seed,loss,desync,coverage,processing_rate,summary_coverage,"
                    "bytes_p2p,bytes_central\n";
  for (const std::string& method : cfg.methods) {
    for (uint64_t seed : cfg.seeds) {
      for (double loss : cfg.loss) {
        for (int32_t desync : cfg.desync) {
          RunReport report = run_cell(method, base, have_policies ? &policies : nullptr, cfg,
                                      seed, loss, desync);
          const std::string name = detail::cell_name(method, seed, loss, desync);
          write_report(report, (fs::path(out_dir) / (name + ".report")).string());
          csv += method + "," + std::to_string(seed) + "," + detail::fmt_double(loss) + "," +
                 std::to_string(desync) + "," + detail::fmt_double(report.coverage) + "," +
                 detail::fmt_double(report.processing_rate) + "," +
                 detail::fmt_double(report.summary_coverage) + "," +
                 std::to_string(report.comm.attempted_bytes(Bucket::p2p)) + "," +
                 std::to_string(report.comm.attempted_bytes(Bucket::central)) + "\n";
        }
      }
    }
  }
  std::vector<uint8_t> bytes(csv.begin(), csv.end());
  write_file_bytes((fs::path(out_dir) / "aggregate.csv").string(), bytes);
}

// Reads every cell report in a matrix directory and renders the comparison
// table (per-cell rows plus per-method means).
inline std::string format_comparison_table(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".report") files.push_back(entry.path().string());
  require(!files.empty(), errc::missing_file, "no .report files in " + dir);
  std::sort(files.begin(), files.end());

  struct Acc {
    double coverage = 0, rate = 0;
    uint64_t bytes = 0;
    size_t count = 0;
  };
  std::map<std::string, Acc> by_method;

  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-44s %10s %10s %12s\n", "cell", "coverage", "rate",
                "comm bytes");
  out += buf;
  for (const std::string& f : files) {
    const RunReport r = read_report(f);
    const uint64_t bytes = r.comm.total_attempted_bytes();
    std::snprintf(buf, sizeof(buf), "%-44s %10.4f %10.4f %12llu\n",
                  fs::path(f).stem().string().c_str(), r.coverage, r.processing_rate,
                  static_cast<unsigned long long>(bytes));
    out += buf;
    Acc& acc = by_method[r.method];
    acc.coverage += r.coverage;
    acc.rate += r.processing_rate;
    acc.bytes += bytes;
    ++acc.count;
  }
  out += "\n";
  std::snprintf(buf, sizeof(buf), "%-44s %10s %10s %12s\n", "method (mean)", "coverage", "rate",
                "comm bytes");
  out += buf;
  for (const auto& [method, acc] : by_method) {
    std::snprintf(buf, sizeof(buf), "%-44s %10.4f %10.4f %12llu\n", method.c_str(),
                  acc.coverage / acc.count, acc.rate / acc.count,
                  static_cast<unsigned long long>(acc.bytes / acc.count));
    out += buf;
  }
  return out;
}

}  // namespace ffward
