#pragma once

// Umbrella header for the whole reconstruction library.

#include "core.hpp"
#include "geometry.hpp"
#include "projector.hpp"
#include "physics.hpp"
#include "denoiser.hpp"
#include "training.hpp"
#include "mbir.hpp"
#include "dense.hpp"
#include "fbp.hpp"
#include "evaluation.hpp"
#include "pipeline.hpp"
#include "io.hpp"
#include "config.hpp"
