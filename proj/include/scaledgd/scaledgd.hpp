#pragma once

// Umbrella header: the full ScaledGD library surface.

#include "scaledgd/bench.hpp"
#include "scaledgd/dense.hpp"
#include "scaledgd/errors.hpp"
#include "scaledgd/linalg.hpp"
#include "scaledgd/models.hpp"
#include "scaledgd/operators.hpp"
#include "scaledgd/rng.hpp"
#include "scaledgd/solvers_matrix.hpp"
#include "scaledgd/solvers_tensor.hpp"
