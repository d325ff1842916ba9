#pragma once

#include "covcraft/backtest.hpp"
#include "covcraft/errors.hpp"
#include "covcraft/estimators.hpp"
#include "covcraft/market_data.hpp"
#include "covcraft/matrix.hpp"
#include "covcraft/portfolio.hpp"
#include "covcraft/rmt.hpp"
#include "covcraft/spectral.hpp"
#include "covcraft/synthetic.hpp"
#include "covcraft/tuning.hpp"
