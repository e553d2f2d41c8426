#pragma once

// Umbrella header for the library.

#include "lgcarpet/errors.hpp"
#include "lgcarpet/rng.hpp"
#include "lgcarpet/system.hpp"
#include "lgcarpet/block_measure.hpp"
#include "lgcarpet/measures.hpp"
#include "lgcarpet/symbolic.hpp"
#include "lgcarpet/parallel.hpp"
#include "lgcarpet/optimize.hpp"
#include "lgcarpet/spectrum.hpp"
#include "lgcarpet/oracle.hpp"
#include "lgcarpet/io.hpp"
