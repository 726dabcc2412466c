#pragma once

#include "lvlset/error.hpp"
#include "lvlset/phase_grid.hpp"
#include "lvlset/kernels.hpp"
#include "lvlset/expr.hpp"
#include "lvlset/models.hpp"
#include "lvlset/parallel.hpp"
#include "lvlset/liouville.hpp"
#include "lvlset/linsys.hpp"
#include "lvlset/observables.hpp"
#include "lvlset/reference.hpp"
#include "lvlset/quantum_pipeline.hpp"
#include "lvlset/cost_model.hpp"
