#pragma once

#include "memorybeam/config.hpp"
#include "memorybeam/errors.hpp"
#include "memorybeam/expression.hpp"
#include "memorybeam/generator.hpp"
#include "memorybeam/matrix_exponential.hpp"
#include "memorybeam/memory.hpp"
#include "memorybeam/scenario.hpp"
#include "memorybeam/solver.hpp"
#include "memorybeam/stability.hpp"
#include "memorybeam/state_space.hpp"
