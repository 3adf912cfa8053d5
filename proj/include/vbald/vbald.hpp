#pragma once

#include "vbald/basis.hpp"
#include "vbald/bench.hpp"
#include "vbald/errors.hpp"
#include "vbald/estimators.hpp"
#include "vbald/linop.hpp"
#include "vbald/matrix_market.hpp"
#include "vbald/maxent.hpp"
#include "vbald/probes.hpp"
#include "vbald/quadrature.hpp"
#include "vbald/rng.hpp"
#include "vbald/synth.hpp"
