#pragma once

#include "constants.hpp"
#include "coupledcavity.hpp"
#include "defaults.hpp"
#include "errors.hpp"
#include "gaussmodes.hpp"
#include "lsq.hpp"
#include "measured_spectrum.hpp"
#include "numerics.hpp"
#include "purcell.hpp"
#include "raman.hpp"
#include "spectrafit.hpp"
#include "stack.hpp"
#include "stack_io.hpp"
#include "tmm.hpp"
