#pragma once

#include "core.hpp"
#include "data.hpp"
#include "inference.hpp"
#include "io.hpp"
#include "model.hpp"
#include "sim.hpp"
#include "solvers.hpp"
#include "tuning.hpp"
