#pragma once

// Umbrella header for the probe-and-solve tuning toolkit.

#include "psa/adapter.hpp"
#include "psa/bench.hpp"
#include "psa/config_space.hpp"
#include "psa/engine.hpp"
#include "psa/evaluator.hpp"
#include "psa/gp.hpp"
#include "psa/solver.hpp"
#include "psa/strategies.hpp"
#include "psa/synthetic.hpp"
