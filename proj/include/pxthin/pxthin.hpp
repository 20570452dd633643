#pragma once

#include "pxthin/core.hpp"
#include "pxthin/exponent.hpp"
#include "pxthin/mesh.hpp"
#include "pxthin/vxspace.hpp"
#include "pxthin/energy.hpp"
#include "pxthin/solver.hpp"
#include "pxthin/comparison.hpp"
#include "pxthin/analysis.hpp"
#include "pxthin/cli.hpp"
