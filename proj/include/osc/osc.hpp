#pragma once

#include "osc/bounds.hpp"
#include "osc/chaos.hpp"
#include "osc/cli.hpp"
#include "osc/config.hpp"
#include "osc/duhamel.hpp"
#include "osc/fft.hpp"
#include "osc/fields.hpp"
#include "osc/grid.hpp"
#include "osc/harness.hpp"
#include "osc/io.hpp"
#include "osc/moments.hpp"
#include "osc/numerics.hpp"
#include "osc/pairing.hpp"
#include "osc/rng.hpp"
#include "osc/solver.hpp"
