#pragma once

#include "ctrlgen/baselines.hpp"
#include "ctrlgen/core.hpp"
#include "ctrlgen/datagen.hpp"
#include "ctrlgen/distill.hpp"
#include "ctrlgen/errors.hpp"
#include "ctrlgen/evalsuite.hpp"
#include "ctrlgen/objectives.hpp"
#include "ctrlgen/random.hpp"
#include "ctrlgen/records.hpp"
#include "ctrlgen/reward.hpp"
#include "ctrlgen/stats.hpp"
#include "ctrlgen/tasksynth.hpp"
#include "ctrlgen/toylm.hpp"
