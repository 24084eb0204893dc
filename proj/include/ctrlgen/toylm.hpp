#pragma once

#include "ctrlgen/toylm/checkpoint.hpp"
#include "ctrlgen/toylm/model.hpp"
#include "ctrlgen/toylm/sampling.hpp"
#include "ctrlgen/toylm/train.hpp"
