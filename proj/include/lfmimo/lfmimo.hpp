// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "channel.hpp"
#include "codebook.hpp"
#include "errors.hpp"
#include "gmd.hpp"
#include "objectives.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "selection.hpp"
#include "simkit.hpp"
#include "zfdfe.hpp"

namespace lfmimo {
inline constexpr const char* version = "0.1.0";
}
