#pragma once

#include "fitnet/errors.hpp"
#include "fitnet/estimator.hpp"
#include "fitnet/fitness.hpp"
#include "fitnet/params.hpp"
#include "fitnet/quadrature.hpp"
#include "fitnet/ranking.hpp"
#include "fitnet/rng.hpp"
#include "fitnet/simulator.hpp"
#include "fitnet/snapshot.hpp"
#include "fitnet/stats.hpp"
#include "fitnet/theory.hpp"
#include "fitnet/weighted_index.hpp"
