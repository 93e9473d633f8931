#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ffward/error.hpp"
#include "ffward/features.hpp"

namespace ffward {

// Similarity primitives shared by the distributed and centralized
// coordinators.

struct SimParams {
  double alpha = 0.05;  // L2 scale of the frame similarity kernel
  double rho = 0.525;   // frame match threshold, strict ">"

  void validate() const {
    require(alpha > 0.0, errc::invalid_config, "alpha must be > 0");
    require(rho > 0.0 && rho < 1.0, errc::invalid_config, "rho must be in (0,1)");
  }
};

// exp(-alpha * ||x - y||_2). Symmetric, in (0,1], equals 1 iff x == y.
inline double frame_sim(std::span<const float> x, std::span<const float> y, double alpha) {
  require(x.size() == y.size(), errc::dim_mismatch,
          "frame_sim: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  double sq = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    sq += d * d;
  }
  return std::exp(-alpha * std::sqrt(sq));
}

inline double best_match_sim(std::span<const float> x, const FrameSet& ref, double alpha) {
  double best = 0.0;
  for (const SelectedFrame& f : ref) best = std::max(best, frame_sim(x, f.feature, alpha));
  return best;
}

// Average, over frames of `from`, of the best frame similarity found in `to`.
// Asymmetric: this is the similarity of `from` TO `to`.
inline double agent_sim(const FrameSet& from, const FrameSet& to, double alpha) {
  require(!from.empty() && !to.empty(), errc::empty_input, "agent_sim: empty frame set");
  double sum = 0.0;
  for (const SelectedFrame& f : from) sum += best_match_sim(f.feature, to, alpha);
  return sum / static_cast<double>(from.size());
}

// Number of frames of u whose best match in v exceeds rho (strictly).
inline size_t match_count(const FrameSet& u, const FrameSet& v, const SimParams& p) {
  if (u.empty()) return 0;
  require(!v.empty(), errc::empty_input, "match_count: empty reference set");
  size_t matches = 0;
  for (const SelectedFrame& f : u)
    if (best_match_sim(f.feature, v, p.alpha) > p.rho) ++matches;
  return matches;
}

}  // namespace ffward
