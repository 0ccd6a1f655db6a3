// Umbrella header.
#pragma once

#include "tcs/baseline_bp.hpp"
#include "tcs/imaging.hpp"
#include "tcs/model.hpp"
#include "tcs/network.hpp"
#include "tcs/numerics.hpp"
#include "tcs/persistence.hpp"
#include "tcs/pipeline.hpp"
#include "tcs/projection.hpp"
#include "tcs/training.hpp"
