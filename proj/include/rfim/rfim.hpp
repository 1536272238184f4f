#pragma once

#include "rfim/errors.hpp"
#include "rfim/field_models.hpp"
#include "rfim/gibbs.hpp"
#include "rfim/groundstate.hpp"
#include "rfim/lattice.hpp"
#include "rfim/maxflow.hpp"
#include "rfim/metrics.hpp"
#include "rfim/quadrature.hpp"
#include "rfim/rng.hpp"
#include "rfim/stats.hpp"
#include "rfim/stein.hpp"
