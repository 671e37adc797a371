#pragma once

// Umbrella header for the whole library.

#include "stockcast/cli.hpp"
#include "stockcast/csv.hpp"
#include "stockcast/date.hpp"
#include "stockcast/evaluate.hpp"
#include "stockcast/experiments.hpp"
#include "stockcast/mlp.hpp"
#include "stockcast/persist.hpp"
#include "stockcast/series.hpp"
