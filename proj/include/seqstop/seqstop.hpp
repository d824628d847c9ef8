#pragma once

#include "seqstop/bernoulli.hpp"
#include "seqstop/calibrate.hpp"
#include "seqstop/io.hpp"
#include "seqstop/math.hpp"
#include "seqstop/model.hpp"
#include "seqstop/rng.hpp"
#include "seqstop/scenario.hpp"
#include "seqstop/simulate.hpp"
#include "seqstop/solver.hpp"
