#pragma once

#include "rfnet/ensembles.hpp"
#include "rfnet/error.hpp"
#include "rfnet/experiments.hpp"
#include "rfnet/green.hpp"
#include "rfnet/linalg.hpp"
#include "rfnet/maxflow.hpp"
#include "rfnet/mmspace.hpp"
#include "rfnet/network.hpp"
#include "rfnet/resistance.hpp"
#include "rfnet/rng.hpp"
#include "rfnet/sim.hpp"
#include "rfnet/stats.hpp"
