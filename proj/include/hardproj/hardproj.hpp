#pragma once

#include "hardproj/checkpoint.hpp"
#include "hardproj/constraints.hpp"
#include "hardproj/dataset.hpp"
#include "hardproj/errors.hpp"
#include "hardproj/linalg.hpp"
#include "hardproj/metrics.hpp"
#include "hardproj/model.hpp"
#include "hardproj/net.hpp"
#include "hardproj/projection.hpp"
#include "hardproj/reactor.hpp"
#include "hardproj/rng.hpp"
#include "hardproj/sweep.hpp"
#include "hardproj/thermo.hpp"
#include "hardproj/train.hpp"
