#pragma once

#include "sketchlra/dense_matrix.hpp"
#include "sketchlra/errors.hpp"
#include "sketchlra/experiment.hpp"
#include "sketchlra/io.hpp"
#include "sketchlra/norms.hpp"
#include "sketchlra/random.hpp"
#include "sketchlra/sketch.hpp"
#include "sketchlra/solver.hpp"
#include "sketchlra/sparse_matrix.hpp"
#include "sketchlra/svd.hpp"
