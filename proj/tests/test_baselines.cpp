#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ffward/baselines.hpp"

#include <cmath>

using namespace ffward;

TEST_CASE("uniform stride: r=0.25 over 8 frames picks 0 and 4") {
  BaselineConfig cfg{BaselineKind::uniform, 0.25, 0};
  CHECK(baseline_select(8, cfg) == std::vector<uint32_t>{0, 4});
}

TEST_CASE("uniform with r=1 selects every frame") {
  BaselineConfig cfg{BaselineKind::uniform, 1.0, 0};
  const std::vector<uint32_t> s = baseline_select(10, cfg);
  CHECK(s.size() == 10);
  for (uint32_t i = 0; i < 10; ++i) CHECK(s[i] == i);
}

TEST_CASE("uniform realized rate is within 1/L of the target") {
  for (double r : {0.03, 0.1, 0.25, 0.7}) {
    const uint32_t L = 10000;
    BaselineConfig cfg{BaselineKind::uniform, r, 0};
    const double realized = static_cast<double>(baseline_select(L, cfg).size()) / L;
    // ceil(1/r) quantizes the stride; realized rate may sit below target by
    // the quantization, but never further than one frame in L beyond it.
    CHECK(realized <= r + 1.0 / L);
    CHECK(realized >= 1.0 / std::ceil(1.0 / r) - 1.0 / L);
  }
}

TEST_CASE("random selection is deterministic per seed") {
  BaselineConfig cfg{BaselineKind::random, 0.1, 42};
  CHECK(baseline_select(5000, cfg) == baseline_select(5000, cfg));
  BaselineConfig other{BaselineKind::random, 0.1, 43};
  CHECK(baseline_select(5000, cfg) != baseline_select(5000, other));
}

TEST_CASE("random expected rate within 3 sigma binomial bounds at L=10000") {
  const uint32_t L = 10000;
  for (double r : {0.05, 0.2}) {
    BaselineConfig cfg{BaselineKind::random, r, 7};
    const double realized = static_cast<double>(baseline_select(L, cfg).size()) / L;
    const double sigma = std::sqrt(r * (1.0 - r) / L);
    CHECK(std::abs(realized - r) <= 3.0 * sigma);
  }
}

TEST_CASE("selection is never empty") {
  BaselineConfig cfg{BaselineKind::random, 1e-9, 1};
  CHECK(baseline_select(3, cfg).size() >= 1);
}

TEST_CASE("rates outside (0,1] are rejected") {
  BaselineConfig cfg{BaselineKind::uniform, 0.0, 0};
  try {
    baseline_select(10, cfg);
    FAIL("expected invalid_config");
  } catch (const Error& e) {
    CHECK(e.code() == errc::invalid_config);
  }
  cfg.target_rate = 1.5;
  CHECK_THROWS_AS(baseline_select(10, cfg), Error);
}
