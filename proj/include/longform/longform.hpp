#pragma once

// Umbrella header.

#include "longform/common.hpp"
#include "longform/config.hpp"
#include "longform/corpus.hpp"
#include "longform/diagnostics.hpp"
#include "longform/io.hpp"
#include "longform/loss.hpp"
#include "longform/model.hpp"
#include "longform/optim.hpp"
#include "longform/rng.hpp"
#include "longform/runner.hpp"
#include "longform/sampler.hpp"
