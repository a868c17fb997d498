#pragma once

// Finite-dimensional laboratory for regularization curves and their limits.

#include "spst/blend.hpp"
#include "spst/classify.hpp"
#include "spst/dini.hpp"
#include "spst/dlsp.hpp"
#include "spst/examples.hpp"
#include "spst/measure.hpp"
#include "spst/ode.hpp"
#include "spst/rg.hpp"
