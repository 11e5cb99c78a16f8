#pragma once

#include "gcpn/harness/checkpoint.hpp"
#include "gcpn/harness/config.hpp"
#include "gcpn/harness/metrics.hpp"
#include "gcpn/harness/report.hpp"
#include "gcpn/harness/train.hpp"
#include "gcpn/harness/oracle_run.hpp"
