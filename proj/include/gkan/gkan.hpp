#pragma once

#include "gkan/rng.hpp"
#include "gkan/matrix.hpp"
#include "gkan/splines.hpp"
#include "gkan/kan_layer.hpp"
#include "gkan/graph.hpp"
#include "gkan/dataset.hpp"
#include "gkan/models.hpp"
#include "gkan/checkpoint.hpp"
#include "gkan/training.hpp"
#include "gkan/experiment.hpp"
