#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ffward/bench.hpp"

#include <filesystem>

using namespace ffward;
namespace fs = std::filesystem;

namespace {

QPolicy constant_policy(Strategy s, int action, uint32_t dim) {
  Rng rng(1);
  QPolicy p{s, Mlp::he_init({dim, 4, 4, static_cast<uint32_t>(action_space(s))}, rng)};
  for (DenseLayer& l : p.net.layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0f);
    std::fill(l.b.begin(), l.b.end(), 0.0f);
  }
  p.net.layers.back().b[action - 1] = 1.0f;
  return p;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SynthConfig tiny_scene(uint64_t seed) {
  SynthConfig cfg;
  cfg.num_views = 3;
  cfg.length = 600;
  cfg.dim = 8;
  cfg.num_events = 4;
  cfg.event_min_len = 40;
  cfg.event_max_len = 60;
  cfg.overlap_prob = 0.9;
  cfg.noise_std = 0.3;
  cfg.seed = seed;
  return cfg;
}

void write_constant_policies(const fs::path& dir) {
  fs::create_directories(dir);
  save_policy((dir / "slow.ffwq").string(), constant_policy(Strategy::slow, 1, 8));
  save_policy((dir / "normal.ffwq").string(), constant_policy(Strategy::normal, 9, 8));
  save_policy((dir / "fast.ffwq").string(), constant_policy(Strategy::fast, 25, 8));
}

}  // namespace

// --- coverage -------------------------------------------------------------------

TEST_CASE("coverage is 1 when every important frame is selected") {
  std::vector<uint8_t> truth{0, 1, 1, 0, 1};
  CHECK(coverage({1, 2, 4}, truth, 0) == 1.0);
}

TEST_CASE("coverage of an empty selection is 0") {
  std::vector<uint8_t> truth{0, 1};
  CHECK(coverage({}, truth, 4) == 0.0);
}

TEST_CASE("window arithmetic: selected at 103 covers 100, at 106 does not") {
  std::vector<uint8_t> truth(200, 0);
  truth[100] = 1;
  CHECK(coverage({103}, truth, 4) == 1.0);
  CHECK(coverage({106}, truth, 4) == 0.0);
}

TEST_CASE("coverage with no important frames is 1.0 by definition") {
  std::vector<uint8_t> truth(10, 0);
  CHECK(coverage({3}, truth, 4) == 1.0);
}

TEST_CASE("coverage is monotone under adding selected frames") {
  Rng rng(3);
  std::vector<uint8_t> truth(500, 0);
  for (int i = 0; i < 60; ++i) truth[rng.uniform_int(500)] = 1;
  std::vector<uint32_t> selected;
  double prev = coverage(selected, truth, 4);
  for (int i = 0; i < 40; ++i) {
    selected.push_back(static_cast<uint32_t>(rng.uniform_int(500)));
    const double now = coverage(selected, truth, 4);
    CHECK(now >= prev);
    prev = now;
  }
}

// --- processing rate ---------------------------------------------------------------

TEST_CASE("processing every frame gives rate 1") {
  const SceneDataset ds = generate_scene(tiny_scene(1));
  const RunReport r = run_baseline(ds, BaselineKind::uniform, 1.0, 0);
  CHECK(processing_rate(r) == 1.0);
}

TEST_CASE("uniform baseline at r=0.04 lands on 0.04") {
  const SceneDataset ds = generate_scene(tiny_scene(2));
  const RunReport r = run_baseline(ds, BaselineKind::uniform, 0.04, 0);
  CHECK(processing_rate(r) == doctest::Approx(0.04).epsilon(0.01));
}

// --- report io ------------------------------------------------------------------------

TEST_CASE("report text round-trips through the parser") {
  const SceneDataset ds = generate_scene(tiny_scene(3));
  TempDir tmp("ffward_report_rt");
  write_constant_policies(tmp.path / "policies");
  const StrategyPolicies policies = load_policies((tmp.path / "policies").string());

  ControllerConfig cfg;
  cfg.sim.rho = 0.5;
  SimChannel channel(ChannelConfig{0.1, 5});
  RunReport report = run_mffnet(ds, policies, cfg, channel);
  report.dataset = "synthetic";
  report.seed = 5;
  report.loss_prob = 0.1;
  compute_metrics(report, ds, 4);

  const std::string text = format_report(report);
  const RunReport parsed = parse_report(text);
  CHECK(format_report(parsed) == text);
}

TEST_CASE("stored metrics are recomputable from the report logs") {
  const SceneDataset ds = generate_scene(tiny_scene(4));
  TempDir tmp("ffward_selfcheck");
  write_constant_policies(tmp.path / "policies");
  const StrategyPolicies policies = load_policies((tmp.path / "policies").string());

  ControllerConfig cfg;
  cfg.sim.rho = 0.5;
  SimChannel channel(ChannelConfig{0.15, 9});
  RunReport report = run_mffnet(ds, policies, cfg, channel);
  compute_metrics(report, ds, 4);
  const std::string path = (tmp.path / "run.report").string();
  write_report(report, path);

  const RunReport loaded = read_report(path);
  CHECK(coverage(collected_indices(loaded), ds.global_truth, loaded.eval_window) ==
        loaded.coverage);
  CHECK(processing_rate(loaded) == loaded.processing_rate);
}

// --- rho sweep --------------------------------------------------------------------------

TEST_CASE("sweep with one rho yields one row; sweeps are deterministic") {
  const SceneDataset ds = generate_scene(tiny_scene(5));
  TempDir tmp("ffward_sweep");
  write_constant_policies(tmp.path / "policies");
  const StrategyPolicies policies = load_policies((tmp.path / "policies").string());
  ControllerConfig cfg;

  const std::vector<SweepPoint> one = sweep_rho(ds, policies, {0.525}, cfg, 4, 1);
  CHECK(one.size() == 1);
  CHECK(one[0].rho == 0.525);

  const std::vector<SweepPoint> a = sweep_rho(ds, policies, {0.4, 0.525, 0.6}, cfg, 4, 1);
  const std::vector<SweepPoint> b = sweep_rho(ds, policies, {0.4, 0.525, 0.6}, cfg, 4, 1);
  CHECK(format_sweep_csv(a) == format_sweep_csv(b));
  CHECK(a.size() == 3);
}

TEST_CASE("empty rho list is rejected") {
  const SceneDataset ds = generate_scene(tiny_scene(6));
  TempDir tmp("ffward_sweep_err");
  write_constant_policies(tmp.path / "policies");
  const StrategyPolicies policies = load_policies((tmp.path / "policies").string());
  ControllerConfig cfg;
  CHECK_THROWS_AS(sweep_rho(ds, policies, {}, cfg, 4, 1), Error);
}

// --- matrix ------------------------------------------------------------------------------

TEST_CASE("matrix with one method and seed produces one cell plus the aggregate") {
  TempDir tmp("ffward_matrix_one");
  const SceneDataset ds = generate_scene(tiny_scene(7));
  const std::string data_path = (tmp.path / "scene.ffwd").string();
  write_dataset(ds, data_path);

  MatrixConfig cfg;
  cfg.dataset_path = data_path;
  cfg.methods = {"uniform"};
  cfg.seeds = {3};
  const std::string out = (tmp.path / "out").string();
  run_matrix(cfg, out);

  CHECK(fs::exists(fs::path(out) / "uniform_s3_l0_d0.report"));
  CHECK(fs::exists(fs::path(out) / "aggregate.csv"));
  size_t reports = 0;
  for (const auto& e : fs::directory_iterator(out))
    reports += e.path().extension() == ".report" ? 1 : 0;
  CHECK(reports == 1);
  // The comparison table renders from the written cell files.
  const std::string table = format_comparison_table(out);
  CHECK(table.find("uniform_s3_l0_d0") != std::string::npos);
}

TEST_CASE("unknown methods and missing checkpoints are named errors") {
  TempDir tmp("ffward_matrix_err");
  const SceneDataset ds = generate_scene(tiny_scene(8));
  const std::string data_path = (tmp.path / "scene.ffwd").string();
  write_dataset(ds, data_path);

  MatrixConfig cfg;
  cfg.dataset_path = data_path;
  cfg.methods = {"kmeans"};
  try {
    cfg.validate();
    FAIL("expected unknown_method");
  } catch (const Error& e) {
    CHECK(e.code() == errc::unknown_method);
  }

  cfg.methods = {"mffnet"};
  cfg.policies_dir = (tmp.path / "nopolicies").string();
  try {
    run_matrix(cfg, (tmp.path / "out").string());
    FAIL("expected missing_file");
  } catch (const Error& e) {
    CHECK(e.code() == errc::missing_file);
  }
}

TEST_CASE("matrix runs are byte-identical across repeats") {
  TempDir tmp("ffward_matrix_det");
  const SceneDataset ds = generate_scene(tiny_scene(9));
  const std::string data_path = (tmp.path / "scene.ffwd").string();
  write_dataset(ds, data_path);
  write_constant_policies(tmp.path / "policies");

  MatrixConfig cfg;
  cfg.dataset_path = data_path;
  cfg.policies_dir = (tmp.path / "policies").string();
  cfg.methods = {"uniform", "random", "ffnet", "dmvf", "mffnet"};
  cfg.seeds = {1, 2};
  cfg.loss = {0.0, 0.1};
  cfg.rho = 0.5;

  const std::string out1 = (tmp.path / "o1").string(), out2 = (tmp.path / "o2").string();
  run_matrix(cfg, out1);
  run_matrix(cfg, out2);
  for (const auto& e : fs::directory_iterator(out1)) {
    const fs::path twin = fs::path(out2) / e.path().filename();
    REQUIRE(fs::exists(twin));
    CHECK(read_file_bytes(e.path().string()) == read_file_bytes(twin.string()));
  }
}

TEST_CASE("matrix config json loads and validates") {
  TempDir tmp("ffward_cfg");
  const std::string cfg_path = (tmp.path / "cfg.json").string();
  {
    std::ofstream out(cfg_path);
    out << R"({"dataset": "x.ffwd", "methods": ["uniform"], "seeds": [1, 2],
               "loss": [0.0], "desync": [0, 20], "rho": 0.5})";
  }
  const MatrixConfig cfg = MatrixConfig::load(cfg_path);
  CHECK(cfg.dataset_path == "x.ffwd");
  CHECK(cfg.seeds == std::vector<uint64_t>{1, 2});
  CHECK(cfg.desync == std::vector<int32_t>{0, 20});
  CHECK(cfg.rho == 0.5);

  {
    std::ofstream out(cfg_path);
    out << R"({"methods": ["uniform"]})";
  }
  CHECK_THROWS_AS(MatrixConfig::load(cfg_path), Error);
}
