#pragma once

#include "aabo/anchor_space.hpp"
#include "aabo/bandit_sim.hpp"
#include "aabo/baselines.hpp"
#include "aabo/density_model.hpp"
#include "aabo/encoding.hpp"
#include "aabo/engine.hpp"
#include "aabo/error.hpp"
#include "aabo/external_objective.hpp"
#include "aabo/hash.hpp"
#include "aabo/kmeans.hpp"
#include "aabo/log.hpp"
#include "aabo/objectives.hpp"
#include "aabo/random.hpp"
#include "aabo/report.hpp"
#include "aabo/search_types.hpp"
#include "aabo/serialization.hpp"
#include "aabo/smc.hpp"
#include "aabo/trial_log.hpp"
