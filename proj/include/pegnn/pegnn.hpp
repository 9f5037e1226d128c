#pragma once

// Umbrella header for the PE-GNN toolkit.

#include "pegnn/adam.hpp"
#include "pegnn/checkpoint.hpp"
#include "pegnn/data.hpp"
#include "pegnn/encoder.hpp"
#include "pegnn/error.hpp"
#include "pegnn/geo.hpp"
#include "pegnn/gradcheck.hpp"
#include "pegnn/matrix.hpp"
#include "pegnn/model.hpp"
#include "pegnn/moran.hpp"
#include "pegnn/sparse.hpp"
#include "pegnn/tensor.hpp"
#include "pegnn/training.hpp"
