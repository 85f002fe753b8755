#pragma once

#include <cstdint>

#include "bsr/network/case.hpp"

namespace bsr::network {

struct Ieee123Options {
    std::uint64_t seed = 7;
    double gei_fraction = 1.0;  // share of the 88 houses flagged has_gei
};

// Modified IEEE-123 feeder: 14 switches, 11 bus blocks, two grid-forming
// batteries (51r, 89r), eight PV units, substation behind switch S14.
// House parameters are drawn from the seeded RNG; GEI subsets are nested
// across fractions for a fixed seed.
GridCase generate_ieee123(const Ieee123Options& opts = {});

// Re-flags has_gei on an existing generated case using the same nested order.
void set_gei_fraction(GridCase& c, double fraction, std::uint64_t seed);

}  // namespace bsr::network
