#pragma once

#include "fsbench/attribution.hpp"
#include "fsbench/datagen.hpp"
#include "fsbench/embedded.hpp"
#include "fsbench/errors.hpp"
#include "fsbench/filters.hpp"
#include "fsbench/forest.hpp"
#include "fsbench/harness.hpp"
#include "fsbench/importance.hpp"
#include "fsbench/io.hpp"
#include "fsbench/knockoffs.hpp"
#include "fsbench/matrix.hpp"
#include "fsbench/metrics.hpp"
#include "fsbench/nn.hpp"
#include "fsbench/random.hpp"
