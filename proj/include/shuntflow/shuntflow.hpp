#pragma once

// Umbrella header: branch-flow power system modeling with per-end line
// shunts, phasor/branch-flow equivalence maps, a second-order-cone
// relaxation of optimal power flow with an exactness certificate, and the
// linearised distribution-flow approximation.

#include "shuntflow/bfm.hpp"
#include "shuntflow/bim.hpp"
#include "shuntflow/case_io.hpp"
#include "shuntflow/conic.hpp"
#include "shuntflow/equivalence.hpp"
#include "shuntflow/errors.hpp"
#include "shuntflow/lindistflow.hpp"
#include "shuntflow/network.hpp"
#include "shuntflow/socp.hpp"
