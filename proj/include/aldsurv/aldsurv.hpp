#pragma once

#include "aldsurv/core.hpp"
#include "aldsurv/distributions.hpp"
#include "aldsurv/losses.hpp"
#include "aldsurv/neuralnet.hpp"
#include "aldsurv/dataset.hpp"
#include "aldsurv/dataio.hpp"
#include "aldsurv/datagen.hpp"
#include "aldsurv/metrics.hpp"
#include "aldsurv/models.hpp"
#include "aldsurv/stats.hpp"
#include "aldsurv/bench.hpp"
