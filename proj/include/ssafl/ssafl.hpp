#pragma once

#include "ssafl/aggregation.hpp"
#include "ssafl/config.hpp"
#include "ssafl/data.hpp"
#include "ssafl/diagnostics.hpp"
#include "ssafl/error.hpp"
#include "ssafl/experiment.hpp"
#include "ssafl/intent.hpp"
#include "ssafl/model.hpp"
#include "ssafl/rng.hpp"
#include "ssafl/sim.hpp"
#include "ssafl/similarity.hpp"
