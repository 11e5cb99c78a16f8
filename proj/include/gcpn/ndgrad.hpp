#pragma once

#include "gcpn/ndgrad/grad_check.hpp"
#include "gcpn/ndgrad/mlp.hpp"
#include "gcpn/ndgrad/optim.hpp"
#include "gcpn/ndgrad/param_vector.hpp"
