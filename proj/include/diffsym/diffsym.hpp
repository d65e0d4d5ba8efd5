#pragma once

// Umbrella header; pulls in the whole library in dependency order.

#include "rational.hpp"
#include "error.hpp"
#include "coords.hpp"
#include "expr.hpp"
#include "canonical.hpp"
#include "parser.hpp"
#include "compiled.hpp"
#include "linalg.hpp"
#include "geometry.hpp"
#include "symmetry.hpp"
#include "rng.hpp"
#include "stochastic.hpp"
#include "model.hpp"
#include "cli.hpp"
