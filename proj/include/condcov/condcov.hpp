#pragma once

#include "condcov/benchmark_tests.hpp"
#include "condcov/config.hpp"
#include "condcov/constants.hpp"
#include "condcov/copulas.hpp"
#include "condcov/matrix.hpp"
#include "condcov/moments.hpp"
#include "condcov/monte_carlo.hpp"
#include "condcov/pipeline.hpp"
#include "condcov/rng.hpp"
#include "condcov/special.hpp"
#include "condcov/statistics.hpp"
#include "condcov/version.hpp"
