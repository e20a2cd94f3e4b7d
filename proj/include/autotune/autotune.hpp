#pragma once

#include "autotune/doe_sampling.hpp"
#include "autotune/error.hpp"
#include "autotune/eval_metrics.hpp"
#include "autotune/nnls.hpp"
#include "autotune/param_space.hpp"
#include "autotune/rng.hpp"
#include "autotune/scaling_testbed.hpp"
#include "autotune/surrogate_rf.hpp"
#include "autotune/target_harness.hpp"
#include "autotune/trial_log.hpp"
#include "autotune/tuner_core.hpp"
