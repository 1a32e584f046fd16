#pragma once

// Umbrella header: the whole library.

#include "srdm/analytics.hpp"
#include "srdm/calendar.hpp"
#include "srdm/config.hpp"
#include "srdm/data_model.hpp"
#include "srdm/diffusion.hpp"
#include "srdm/error.hpp"
#include "srdm/generator.hpp"
#include "srdm/nn.hpp"
#include "srdm/params_io.hpp"
#include "srdm/pipeline.hpp"
#include "srdm/plots.hpp"
#include "srdm/power.hpp"
#include "srdm/synth.hpp"
#include "srdm/text.hpp"
#include "srdm/vae.hpp"

#ifndef SRDM_VERSION
#define SRDM_VERSION "0.1.0"
#endif
