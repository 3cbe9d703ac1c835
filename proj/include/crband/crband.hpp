#pragma once

#include "crband/error.hpp"
#include "crband/rng.hpp"
#include "crband/step_function.hpp"
#include "crband/data.hpp"
#include "crband/partial_likelihood.hpp"
#include "crband/newton.hpp"
#include "crband/censoring.hpp"
#include "crband/parallel.hpp"
#include "crband/imputation.hpp"
#include "crband/finegray.hpp"
#include "crband/ipcw.hpp"
#include "crband/resampling.hpp"
#include "crband/bands.hpp"
#include "crband/simulation.hpp"
#include "crband/io.hpp"
