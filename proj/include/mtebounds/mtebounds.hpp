#pragma once

// Umbrella header.

#include "mtebounds/normal.hpp"
#include "mtebounds/bvn.hpp"
#include "mtebounds/quadrature.hpp"
#include "mtebounds/geometry.hpp"
#include "mtebounds/distributions.hpp"
#include "mtebounds/selection.hpp"
#include "mtebounds/moments.hpp"
#include "mtebounds/lp.hpp"
#include "mtebounds/mtr_space.hpp"
#include "mtebounds/targets.hpp"
#include "mtebounds/engine.hpp"
#include "mtebounds/config.hpp"
#include "mtebounds/data.hpp"
#include "mtebounds/results.hpp"
