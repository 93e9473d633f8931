// Command line front end: dataset generation, policy training, single runs
// of the distributed and centralized coordinators, the rho sweep, and the
// full benchmark matrix.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ffward/ffward.hpp"

namespace {

using namespace ffward;

StrategyPortions parse_portions(const std::vector<uint32_t>& raw, uint16_t n) {
  if (raw.empty()) return StrategyPortions::even(n);
  if (raw.size() != 3) fail(errc::invalid_config, "portions must be three counts: slow normal fast");
  StrategyPortions p;
  p.counts = {raw[0], raw[1], raw[2]};
  return p;
}

void print_metrics(const RunReport& r) {
  std::printf("method            %s\n", r.method.c_str());
  std::printf("coverage          %.4f\n", r.coverage);
  std::printf("processing_rate   %.4f\n", r.processing_rate);
  if (r.method == "mffnet") std::printf("summary_coverage  %.4f\n", r.summary_coverage);
  std::printf("bytes_p2p         %llu\n",
              static_cast<unsigned long long>(r.comm.attempted_bytes(Bucket::p2p)));
  std::printf("bytes_central     %llu\n",
              static_cast<unsigned long long>(r.comm.attempted_bytes(Bucket::central)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collaborative multi-agent video fast-forwarding"};
  app.require_subcommand(1);

  // --- gen ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate a synthetic multi-view dataset");
  SynthConfig synth;
  std::string gen_out;
  bool gen_benchmark = false, gen_identical = false;
  gen->add_option("--out", gen_out, "output dataset file")->required();
  gen->add_option("--views", synth.num_views, "number of views");
  gen->add_option("--length", synth.length, "frames per view");
  gen->add_option("--dim", synth.dim, "feature dimension");
  gen->add_option("--events", synth.num_events, "number of important events");
  gen->add_option("--event-min", synth.event_min_len, "shortest event, frames");
  gen->add_option("--event-max", synth.event_max_len, "longest event, frames");
  gen->add_option("--overlap", synth.overlap_prob, "probability an event shows in a view");
  gen->add_option("--noise", synth.noise_std, "feature noise std");
  gen->add_option("--seed", synth.seed, "generator seed");
  gen->add_flag("--benchmark", gen_benchmark, "use the standard benchmark configuration");
  gen->add_flag("--identical", gen_identical, "duplicate view 0 into all views");

  // --- train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train one strategy policy");
  std::string train_strategy = "normal", train_data, train_out;
  TrainConfig train_cfg;
  train_cmd->add_option("--strategy", train_strategy, "slow|normal|fast")->required();
  train_cmd->add_option("--data", train_data, "training dataset file")->required();
  train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
  train_cmd->add_option("--seed", train_cfg.seed, "training seed");
  train_cmd->add_option("--episodes", train_cfg.episodes, "training episodes");
  train_cmd->add_option("--lr", train_cfg.learning_rate, "learning rate");

  // --- train-controller ----------------------------------------------------
  auto* trainc = app.add_subcommand("train-controller", "train the RL central controller");
  std::string trainc_data, trainc_policies, trainc_out;
  TrainConfig trainc_cfg;
  double trainc_alpha = 1.0;
  uint32_t trainc_period = 100;
  trainc->add_option("--data", trainc_data, "training dataset file")->required();
  trainc->add_option("--policies", trainc_policies, "dir with slow/normal/fast.ffwq")->required();
  trainc->add_option("--out", trainc_out, "checkpoint output path")->required();
  trainc->add_option("--seed", trainc_cfg.seed, "training seed");
  trainc->add_option("--episodes", trainc_cfg.episodes, "training episodes");
  trainc->add_option("--alpha-red", trainc_alpha, "redundancy trade-off");
  trainc->add_option("--period", trainc_period, "control period, frames");

  // --- run-dmvf --------------------------------------------------------------
  auto* dmvf_cmd = app.add_subcommand("run-dmvf", "run the distributed coordinator");
  std::string dmvf_data, dmvf_graph = "complete", dmvf_policies, dmvf_out;
  std::vector<uint32_t> dmvf_portions;
  DmvfConfig dmvf_cfg;
  double dmvf_loss = 0.0;
  uint64_t dmvf_seed = 0;
  int dmvf_eval_window = 4;
  dmvf_cmd->add_option("--data", dmvf_data, "dataset file")->required();
  dmvf_cmd->add_option("--graph", dmvf_graph, "edge list file with lines 'u v', or 'complete'");
  dmvf_cmd->add_option("--policies", dmvf_policies, "dir with slow/normal/fast.ffwq")->required();
  dmvf_cmd->add_option("--period", dmvf_cfg.period, "adaptation period, frames");
  dmvf_cmd->add_option("--rho", dmvf_cfg.sim.rho, "frame match threshold");
  dmvf_cmd->add_option("--portions", dmvf_portions, "slow normal fast agent counts");
  dmvf_cmd->add_option("--loss", dmvf_loss, "packet loss probability");
  dmvf_cmd->add_option("--seed", dmvf_seed, "channel seed");
  dmvf_cmd->add_option("--eval-window", dmvf_eval_window, "coverage window, frames");
  dmvf_cmd->add_option("--out", dmvf_out, "report output path");

  // --- run-mffnet -------------------------------------------------------------
  auto* mff_cmd = app.add_subcommand("run-mffnet", "run the centralized coordinator");
  std::string mff_data, mff_policies, mff_out, mff_controller = "heuristic", mff_ckpt;
  ControllerConfig mff_cfg;
  double mff_loss = 0.0;
  uint64_t mff_seed = 0;
  int mff_eval_window = 4;
  mff_cmd->add_option("--data", mff_data, "dataset file")->required();
  mff_cmd->add_option("--policies", mff_policies, "dir with slow/normal/fast.ffwq")->required();
  mff_cmd->add_option("--rho", mff_cfg.sim.rho, "frame match threshold");
  mff_cmd->add_option("--tau", mff_cfg.tau, "matching percentage threshold");
  mff_cmd->add_option("--period", mff_cfg.period, "control period, frames");
  mff_cmd->add_option("--controller", mff_controller, "heuristic|dqn");
  mff_cmd->add_option("--controller-ckpt", mff_ckpt, "dqn controller checkpoint");
  mff_cmd->add_option("--loss", mff_loss, "packet loss probability");
  mff_cmd->add_option("--seed", mff_seed, "channel seed");
  mff_cmd->add_option("--eval-window", mff_eval_window, "coverage window, frames");
  mff_cmd->add_option("--out", mff_out, "report output path");

  // --- sweep-rho --------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep-rho", "coverage/rate trade-off over rho values");
  std::string sweep_data, sweep_policies, sweep_out;
  std::vector<double> sweep_rhos;
  ControllerConfig sweep_cfg;
  uint64_t sweep_seed = 0;
  int sweep_eval_window = 4;
  sweep_cmd->add_option("--data", sweep_data, "dataset file")->required();
  sweep_cmd->add_option("--policies", sweep_policies, "dir with slow/normal/fast.ffwq")->required();
  sweep_cmd->add_option("--rhos", sweep_rhos, "rho values")->required()->expected(-1);
  sweep_cmd->add_option("--tau", sweep_cfg.tau, "matching percentage threshold");
  sweep_cmd->add_option("--period", sweep_cfg.period, "control period, frames");
  sweep_cmd->add_option("--seed", sweep_seed, "channel seed");
  sweep_cmd->add_option("--eval-window", sweep_eval_window, "coverage window, frames");
  sweep_cmd->add_option("--out", sweep_out, "CSV output path");

  // --- bench -------------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "run an experiment matrix from a config file");
  std::string bench_config, bench_out;
  bench_cmd->add_option("--config", bench_config, "matrix config (json)")->required();
  bench_cmd->add_option("--out", bench_out, "output directory")->required();

  // --- report -------------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "print the comparison table of a matrix dir");
  std::string report_dir;
  report_cmd->add_option("dir", report_dir, "matrix output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      SynthConfig cfg = gen_benchmark ? benchmark_eval_config(synth.seed) : synth;
      SceneDataset ds = generate_scene(cfg);
      if (gen_identical) ds = make_identical_views(std::move(ds));
      write_dataset(ds, gen_out);
      std::printf("wrote %s: %zu views x %zu frames, dim %u\n", gen_out.c_str(), ds.num_views(),
                  ds.length(), ds.dim);
    } else if (*train_cmd) {
      const SceneDataset ds = read_dataset(train_data);
      std::vector<const ViewStream*> streams;
      for (const ViewStream& v : ds.views) streams.push_back(&v);
      const Strategy strategy = strategy_from_name(train_strategy);
      const QPolicy policy =
          train(streams, strategy, RewardParams::for_strategy(strategy), train_cfg);
      save_policy(train_out, policy);
      std::printf("wrote %s (%s, %d actions)\n", train_out.c_str(), strategy_name(strategy),
                  policy.actions());
    } else if (*trainc) {
      const SceneDataset ds = read_dataset(trainc_data);
      const StrategyPolicies policies = load_policies(trainc_policies);
      const ControllerPolicy controller =
          train_dqn_controller(ds, policies, trainc_cfg, trainc_alpha, trainc_period);
      save_controller(trainc_out, controller);
      std::printf("wrote %s (%u agents, %u actions)\n", trainc_out.c_str(),
                  controller.num_agents, controller.net.output_dim());
    } else if (*dmvf_cmd) {
      const SceneDataset ds = read_dataset(dmvf_data);
      const uint16_t n = static_cast<uint16_t>(ds.num_views());
      const CommGraph graph =
          dmvf_graph == "complete" ? CommGraph::complete(n) : CommGraph::load_edgelist(dmvf_graph);
      const StrategyPolicies policies = load_policies(dmvf_policies);
      dmvf_cfg.portions = parse_portions(dmvf_portions, n);
      SimChannel channel(ChannelConfig{dmvf_loss, dmvf_seed});
      RunReport report = run_dmvf(ds, graph, policies, dmvf_cfg, channel);
      report.dataset = dmvf_data;
      report.seed = dmvf_seed;
      report.loss_prob = dmvf_loss;
      compute_metrics(report, ds, dmvf_eval_window);
      if (!dmvf_out.empty()) write_report(report, dmvf_out);
      print_metrics(report);
    } else if (*mff_cmd) {
      const SceneDataset ds = read_dataset(mff_data);
      const StrategyPolicies policies = load_policies(mff_policies);
      SimChannel channel(ChannelConfig{mff_loss, mff_seed});
      RunReport report;
      if (mff_controller == "dqn") {
        require(!mff_ckpt.empty(), errc::invalid_config, "--controller-ckpt required for dqn");
        const ControllerPolicy dqn =
            load_controller(mff_ckpt, static_cast<uint16_t>(ds.num_views()), ds.dim);
        report = run_mffnet(ds, policies, mff_cfg, channel, &dqn);
      } else {
        require(mff_controller == "heuristic", errc::invalid_config,
                "controller must be heuristic or dqn");
        report = run_mffnet(ds, policies, mff_cfg, channel);
      }
      report.dataset = mff_data;
      report.seed = mff_seed;
      report.loss_prob = mff_loss;
      compute_metrics(report, ds, mff_eval_window);
      if (!mff_out.empty()) write_report(report, mff_out);
      print_metrics(report);
    } else if (*sweep_cmd) {
      const SceneDataset ds = read_dataset(sweep_data);
      const StrategyPolicies policies = load_policies(sweep_policies);
      const std::vector<SweepPoint> points =
          sweep_rho(ds, policies, sweep_rhos, sweep_cfg, sweep_eval_window, sweep_seed);
      const std::string csv = format_sweep_csv(points);
      if (!sweep_out.empty()) {
        std::vector<uint8_t> bytes(csv.begin(), csv.end());
        write_file_bytes(sweep_out, bytes);
      }
      std::fputs(csv.c_str(), stdout);
    } else if (*bench_cmd) {
      const MatrixConfig cfg = MatrixConfig::load(bench_config);
      run_matrix(cfg, bench_out);
      std::printf("matrix written to %s\n", bench_out.c_str());
    } else if (*report_cmd) {
      std::fputs(format_comparison_table(report_dir).c_str(), stdout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
