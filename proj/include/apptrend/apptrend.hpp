// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include "apptrend/dataset.hpp"
#include "apptrend/evaluate.hpp"
#include "apptrend/recommend.hpp"
#include "apptrend/report.hpp"
#include "apptrend/retention.hpp"
#include "apptrend/series.hpp"
#include "apptrend/synth.hpp"
#include "apptrend/trendfilter.hpp"
