// Umbrella header.
#pragma once

#include "mmhar/common.hpp"
#include "mmhar/core.hpp"
#include "mmhar/harness.hpp"
#include "mmhar/image.hpp"
#include "mmhar/models.hpp"
#include "mmhar/pipeline.hpp"
#include "mmhar/recording.hpp"
#include "mmhar/rng.hpp"
#include "mmhar/runcfg.hpp"
#include "mmhar/stream.hpp"
#include "mmhar/synthgen.hpp"
