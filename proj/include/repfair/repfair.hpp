#pragma once

#include "repfair/attack_sim.hpp"
#include "repfair/core_model.hpp"
#include "repfair/data_ingest.hpp"
#include "repfair/errors.hpp"
#include "repfair/experiment.hpp"
#include "repfair/independence.hpp"
#include "repfair/pipeline.hpp"
#include "repfair/reputation_engine.hpp"
#include "repfair/rng.hpp"
#include "repfair/stats_metrics.hpp"
