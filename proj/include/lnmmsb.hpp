#pragma once

// Umbrella header for the lnmmsb library.

#include "lnmmsb/alignment.hpp"
#include "lnmmsb/dynamic_inference.hpp"
#include "lnmmsb/evaluation.hpp"
#include "lnmmsb/init.hpp"
#include "lnmmsb/io.hpp"
#include "lnmmsb/kalman.hpp"
#include "lnmmsb/linalg.hpp"
#include "lnmmsb/logistic.hpp"
#include "lnmmsb/rng.hpp"
#include "lnmmsb/sampler.hpp"
#include "lnmmsb/static_inference.hpp"
#include "lnmmsb/types.hpp"
