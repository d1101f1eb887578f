#pragma once

// Umbrella header: the complete time-modulated-array OFDM directional
// modulation toolkit - transmitter model, blind separation attack, ambiguity
// resolution, security analysis, defenses, and the experiment harness.

#include "tmadm/constellation.hpp"
#include "tmadm/frame_io.hpp"
#include "tmadm/harness.hpp"
#include "tmadm/ica.hpp"
#include "tmadm/preprocess.hpp"
#include "tmadm/resolver.hpp"
#include "tmadm/security.hpp"
#include "tmadm/tma.hpp"
#include "tmadm/types.hpp"
