#pragma once

#include "phasekit/legendre.hpp"
#include "phasekit/tensor.hpp"
#include "phasekit/potential.hpp"
#include "phasekit/schemes.hpp"
#include "phasekit/diagnostics.hpp"
#include "phasekit/snapshot.hpp"
#include "phasekit/experiments.hpp"
