#pragma once

// Umbrella header: certified lower bounds for ReLU networks over box input
// regions, via zonotope intermediate bounds and a partitioned Lagrangian
// decomposition dual.

#include "zono/dual.hpp"
#include "zono/fixtures.hpp"
#include "zono/geom.hpp"
#include "zono/geom2d.hpp"
#include "zono/linalg.hpp"
#include "zono/lp.hpp"
#include "zono/netio.hpp"
#include "zono/parallel.hpp"
#include "zono/partition.hpp"
#include "zono/pipeline.hpp"
#include "zono/pushforward.hpp"
#include "zono/reluprog.hpp"
