#pragma once

// Umbrella header for the collaborative multi-agent video fast-forwarding
// library: per-view skip agents, the distributed (consensus) and centralized
// coordinators, the simulated lossy channel, and the benchmark harness.

#include "ffward/baselines.hpp"
#include "ffward/bench.hpp"
#include "ffward/dmvf.hpp"
#include "ffward/error.hpp"
#include "ffward/features.hpp"
#include "ffward/ffagent.hpp"
#include "ffward/mffnet.hpp"
#include "ffward/netsim.hpp"
#include "ffward/report.hpp"
#include "ffward/simkernel.hpp"
