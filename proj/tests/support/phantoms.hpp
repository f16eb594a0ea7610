#pragma once

// Test-local alias for the synthetic generators.

#include "fpforge/synthetic.hpp"

namespace phantoms {
using namespace fpforge::synth;
} // namespace phantoms
