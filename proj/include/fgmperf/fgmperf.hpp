#pragma once

#include "fgmperf/bundle.hpp"
#include "fgmperf/contingency.hpp"
#include "fgmperf/cut.hpp"
#include "fgmperf/data.hpp"
#include "fgmperf/error.hpp"
#include "fgmperf/feature_group.hpp"
#include "fgmperf/groups.hpp"
#include "fgmperf/label_oracle.hpp"
#include "fgmperf/metrics.hpp"
#include "fgmperf/model.hpp"
#include "fgmperf/qcqp.hpp"
#include "fgmperf/text.hpp"
#include "fgmperf/train.hpp"
