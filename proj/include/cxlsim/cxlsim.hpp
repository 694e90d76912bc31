#pragma once

#include "cxlsim/cmmh.hpp"
#include "cxlsim/config.hpp"
#include "cxlsim/device_cache.hpp"
#include "cxlsim/engine.hpp"
#include "cxlsim/experiments.hpp"
#include "cxlsim/flash.hpp"
#include "cxlsim/flat_dram.hpp"
#include "cxlsim/persistence.hpp"
#include "cxlsim/random.hpp"
#include "cxlsim/report.hpp"
#include "cxlsim/stats.hpp"
#include "cxlsim/topology.hpp"
#include "cxlsim/types.hpp"
#include "cxlsim/workloads.hpp"
