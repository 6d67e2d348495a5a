#pragma once

#include "plugid/dataio.hpp"
#include "plugid/decimate.hpp"
#include "plugid/ensemble.hpp"
#include "plugid/harness.hpp"
#include "plugid/manifest.hpp"
#include "plugid/metrics.hpp"
#include "plugid/mlp.hpp"
#include "plugid/rng.hpp"
#include "plugid/signal.hpp"
#include "plugid/synth.hpp"
