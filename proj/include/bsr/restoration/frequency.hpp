#pragma once

#include "bsr/network/case.hpp"

namespace bsr::restoration {

inline constexpr double kNominalHz = 60.0;

// Symmetric limits (Hz, Hz/s).
struct FrequencyBounds {
    double qss = 0.5;
    double nadir = 1.5;
    double rocof = 3.0;
    double sync = 0.5;  // |df*|

    void validate() const;
};

// Droop frequency of a grid-forming unit carrying p_total kW over all phases.
double compute_qss_frequency(const network::DerUnit& unit, double p_total, double df_star, bool sync_active);

// Settled deviation caused by a step of dp_total kW.
double compute_qss_deviation(const network::DerUnit& unit, double dp_total);

struct RocofNadir {
    double rocof = 0.0;  // Hz/s
    double nadir = 0.0;  // Hz
};

RocofNadir compute_rocof_and_nadir(const network::DerUnit& unit, double dp_total);

}  // namespace bsr::restoration
