// Umbrella header for the abdeform library.
#pragma once

#include "numerics.hpp"
#include "solutions.hpp"
#include "laxcurv.hpp"
#include "loopalgebra.hpp"
#include "nhd.hpp"
#include "qid.hpp"
