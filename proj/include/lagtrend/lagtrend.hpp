#pragma once

// Umbrella header.

#include "lagtrend/baselines.hpp"
#include "lagtrend/config.hpp"
#include "lagtrend/csv.hpp"
#include "lagtrend/error.hpp"
#include "lagtrend/features.hpp"
#include "lagtrend/harness.hpp"
#include "lagtrend/market_data.hpp"
#include "lagtrend/neural.hpp"
#include "lagtrend/report.hpp"
#include "lagtrend/rng.hpp"
#include "lagtrend/stats.hpp"
#include "lagtrend/synth.hpp"
#include "lagtrend/time.hpp"
