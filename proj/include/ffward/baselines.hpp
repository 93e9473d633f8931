#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ffward/error.hpp"
#include "ffward/rng.hpp"

namespace ffward {

// Reference skippers: uniform stride and seeded Bernoulli selection.

enum class BaselineKind : uint8_t { random = 0, uniform = 1 };

struct BaselineConfig {
  BaselineKind kind = BaselineKind::uniform;
  double target_rate = 0.05;  // in (0, 1]
  uint64_t seed = 0;

  void validate() const {
    require(target_rate > 0.0 && target_rate <= 1.0, errc::invalid_config,
            "target_rate must be in (0,1]");
  }
};

inline std::vector<uint32_t> baseline_select(uint32_t length, const BaselineConfig& cfg) {
  require(length >= 1, errc::invalid_config, "length must be >= 1");
  cfg.validate();
  std::vector<uint32_t> selected;
  if (cfg.kind == BaselineKind::uniform) {
    const uint32_t stride = static_cast<uint32_t>(std::ceil(1.0 / cfg.target_rate));
    for (uint32_t t = 0; t < length; t += stride) selected.push_back(t);
  } else {
    Rng rng(cfg.seed);
    for (uint32_t t = 0; t < length; ++t)
      if (rng.bernoulli(cfg.target_rate)) selected.push_back(t);
    if (selected.empty()) selected.push_back(0);  // never return an empty pick
  }
  return selected;
}

}  // namespace ffward
