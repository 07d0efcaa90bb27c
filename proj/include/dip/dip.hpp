#pragma once

// Umbrella header for the dip library: two-layer deep-inverse-prior models,
// gradient-flow integration, convergence diagnostics, and phase-transition
// experiments on linear inverse problems.

#include "dip/activation.hpp"
#include "dip/errors.hpp"
#include "dip/experiment.hpp"
#include "dip/flow.hpp"
#include "dip/model.hpp"
#include "dip/problem.hpp"
#include "dip/rng.hpp"
#include "dip/serialize.hpp"
#include "dip/svg.hpp"
#include "dip/theory.hpp"
#include "dip/thread_pool.hpp"
