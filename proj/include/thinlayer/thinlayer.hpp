/**
 * @file thinlayer.hpp
 * @brief Umbrella header.
 */
#pragma once

#include "thinlayer/conservation.hpp"
#include "thinlayer/discretization.hpp"
#include "thinlayer/field.hpp"
#include "thinlayer/flux.hpp"
#include "thinlayer/inequalities.hpp"
#include "thinlayer/mesh.hpp"
#include "thinlayer/scenarios.hpp"
#include "thinlayer/solver.hpp"
#include "thinlayer/stage.hpp"
#include "thinlayer/timestepping.hpp"
