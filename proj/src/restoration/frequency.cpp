#include "bsr/restoration/frequency.hpp"

#include <stdexcept>

namespace bsr::restoration {

namespace {

void require_gfm(const network::DerUnit& u) {
    if (u.kind != network::DerKind::GfmBess) {
        throw std::invalid_argument("frequency response needs a grid-forming unit, got " + u.id);
    }
}

}  // namespace

void FrequencyBounds::validate() const {
    if (!(qss > 0 && nadir > 0 && rocof > 0 && sync >= 0)) {
        throw std::invalid_argument("frequency bounds must be positive");
    }
}

double compute_qss_frequency(const network::DerUnit& unit, double p_total, double df_star, bool sync_active) {
    require_gfm(unit);
    const double droop = p_total / (unit.s_rat * (unit.d + unit.k_f));
    return kNominalHz * (1.0 - droop) + (sync_active ? df_star : 0.0);
}

double compute_qss_deviation(const network::DerUnit& unit, double dp_total) {
    require_gfm(unit);
    return kNominalHz * dp_total / (unit.s_rat * (unit.d + unit.k_f));
}

RocofNadir compute_rocof_and_nadir(const network::DerUnit& unit, double dp_total) {
    require_gfm(unit);
    RocofNadir r;
    r.rocof = kNominalHz * dp_total / (2.0 * unit.s_rat * unit.h);
    r.nadir = kNominalHz * dp_total / (unit.s_rat * (unit.d + unit.k_f)) * (1.0 + unit.gamma);
    return r;
}

}  // namespace bsr::restoration
