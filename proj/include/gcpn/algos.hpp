#pragma once

#include "gcpn/algos/learner.hpp"
#include "gcpn/algos/networks.hpp"
#include "gcpn/algos/updates.hpp"
