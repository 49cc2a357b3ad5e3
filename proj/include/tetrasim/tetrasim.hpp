#pragma once

#include "tetrasim/abstract_queue.hpp"
#include "tetrasim/analytic.hpp"
#include "tetrasim/cli.hpp"
#include "tetrasim/config.hpp"
#include "tetrasim/csv.hpp"
#include "tetrasim/des.hpp"
#include "tetrasim/dmo.hpp"
#include "tetrasim/event.hpp"
#include "tetrasim/metrics.hpp"
#include "tetrasim/rng.hpp"
#include "tetrasim/scenario.hpp"
#include "tetrasim/time.hpp"
#include "tetrasim/tmo.hpp"
#include "tetrasim/types.hpp"
