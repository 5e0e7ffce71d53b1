#pragma once

#include "blindspot/detlog.hpp"
#include "blindspot/error.hpp"
#include "blindspot/evalharness.hpp"
#include "blindspot/grid.hpp"
#include "blindspot/heatmap.hpp"
#include "blindspot/lbat.hpp"
#include "blindspot/parallel.hpp"
#include "blindspot/planner.hpp"
#include "blindspot/render.hpp"
#include "blindspot/rng.hpp"
#include "blindspot/synth.hpp"
#include "blindspot/synth_config.hpp"
