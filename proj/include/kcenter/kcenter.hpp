#pragma once
// Umbrella header for the kcenter library.

#include "kcenter/algorithms.hpp"
#include "kcenter/bandit.hpp"
#include "kcenter/dataset.hpp"
#include "kcenter/diagnostics.hpp"
#include "kcenter/harness.hpp"
#include "kcenter/maximin.hpp"
#include "kcenter/oracles.hpp"
#include "kcenter/rng.hpp"
