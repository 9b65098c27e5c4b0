#pragma once

#include "ifts/common.hpp"
#include "ifts/gridcurves.hpp"
#include "ifts/fpca.hpp"
#include "ifts/var.hpp"
#include "ifts/sieve.hpp"
#include "ifts/metrics.hpp"
#include "ifts/updating.hpp"
#include "ifts/datagen.hpp"
#include "ifts/backtest.hpp"
#include "ifts/io.hpp"
