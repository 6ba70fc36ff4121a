#pragma once

// SPDX-License-Identifier: Apache-2.0

// Umbrella header.

#include "ddorm/config.hpp"
#include "ddorm/errors.hpp"
#include "ddorm/experiment.hpp"
#include "ddorm/metrics.hpp"
#include "ddorm/objectives.hpp"
#include "ddorm/oracles.hpp"
#include "ddorm/plot.hpp"
#include "ddorm/policy.hpp"
#include "ddorm/serialize.hpp"
#include "ddorm/simplex.hpp"
#include "ddorm/trainer.hpp"
#include "ddorm/verify.hpp"
#include "ddorm/world.hpp"
