#pragma once

// Independent re-derivations used as test oracles. Nothing here calls the
// library's own dynamics or solver code.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "bsr/gei/house.hpp"

namespace bsr::testing {

// Implicit wall/room update: solves the 5x5 system of the wall and room
// balances with end-of-step temperatures by Gaussian elimination.
struct ThermalOut {
    std::array<double, 4> t_wall{};
    double t_room = 0.0;
};

inline ThermalOut thermal_step(const gei::HouseThermalParams& th, const std::array<double, 4>& tw0, double tr0,
                               double t_out, const std::array<double, 4>& q_wall, double q_win, double q_int,
                               double q_hvac, double dt_h) {
    double a[5][6] = {};
    for (int i = 0; i < 4; ++i) {
        // C_i (Tw - Tw0)/dt = (Tr - Tw)/R_i + (To - Tw)/R_i + w_i q_i
        a[i][i] = th.c_wall[i] / dt_h + 2.0 / th.r_wall[i];
        a[i][4] = -1.0 / th.r_wall[i];
        a[i][5] = th.c_wall[i] / dt_h * tw0[i] + t_out / th.r_wall[i] + th.w_wall[i] * q_wall[i];
    }
    // C_r (Tr - Tr0)/dt = sum (Tw_i - Tr)/R_i + (To - Tr)/R_win + w_win q_win + q_int + Q_hvac
    a[4][4] = th.c_room / dt_h + 1.0 / th.r_win;
    for (int i = 0; i < 4; ++i) {
        a[4][4] += 1.0 / th.r_wall[i];
        a[4][i] = -1.0 / th.r_wall[i];
    }
    a[4][5] = th.c_room / dt_h * tr0 + t_out / th.r_win + th.w_win * q_win + q_int + q_hvac;
    for (int col = 0; col < 5; ++col) {
        int piv = col;
        for (int r = col + 1; r < 5; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        for (int j = 0; j < 6; ++j) std::swap(a[col][j], a[piv][j]);
        for (int r = 0; r < 5; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int j = col; j < 6; ++j) a[r][j] -= f * a[col][j];
        }
    }
    ThermalOut out;
    for (int i = 0; i < 4; ++i) out.t_wall[i] = a[i][5] / a[i][i];
    out.t_room = a[4][5] / a[4][4];
    return out;
}

inline double bes_energy_after(double e, double p_c, double p_d, double eta_c, double eta_d, double dt_h) {
    return e + dt_h * eta_c * p_c - dt_h * p_d / eta_d;
}

// Candidate values for a scalar on [lo, hi]: an even grid plus breakpoints.
inline std::vector<double> candidates(double lo, double hi, std::initializer_list<double> breaks, int grid = 10) {
    std::set<double> s;
    if (hi < lo) return {};
    for (int i = 0; i <= grid; ++i) s.insert(lo + (hi - lo) * i / grid);
    for (double b : breaks) {
        if (std::isfinite(b) && b >= lo - 1e-12 && b <= hi + 1e-12) s.insert(std::clamp(b, lo, hi));
    }
    return {s.begin(), s.end()};
}

// Extreme single-step net consumption found by enumerating device settings on
// a grid that contains every bound and breakpoint of the one-step polytope.
struct EnumResult {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    long evaluated = 0;
};

inline EnumResult enumerate_one_step(const gei::HouseParams& hp, const gei::HouseForecast& f,
                                     const gei::HouseState& s, double dt_h) {
    constexpr double kTol = 1e-9;
    std::vector<double> pcs{0.0}, pds{0.0}, qs{0.0}, pvs{0.0}, loads{0.0};
    double coef = 0.0;
    if (hp.bes) {
        const auto& b = *hp.bes;
        const double rc_lo = std::clamp(b.ramp_c_lo, -b.p_c_max, b.p_c_max);
        const double rc_hi = std::clamp(b.ramp_c_hi, -b.p_c_max, b.p_c_max);
        const double rd_lo = std::clamp(b.ramp_d_lo, -b.p_d_max, b.p_d_max);
        const double rd_hi = std::clamp(b.ramp_d_hi, -b.p_d_max, b.p_d_max);
        pcs = candidates(0.0, b.p_c_max,
                         {(b.e_hi - s.e_es) / (dt_h * b.eta_c), (b.e_lo - s.e_es) / (dt_h * b.eta_c),
                          s.p_es_c_prev + rc_lo, s.p_es_c_prev + rc_hi});
        pds = candidates(0.0, b.p_d_max,
                         {(s.e_es - b.e_lo) * b.eta_d / dt_h, (s.e_es - b.e_hi) * b.eta_d / dt_h,
                          s.p_es_d_prev + rd_lo, s.p_es_d_prev + rd_hi});
    }
    if (hp.thermal) {
        const auto& th = *hp.thermal;
        const auto& hv = *hp.hvac;
        // Electrical per thermal kW at the band midpoint, measured room temperature.
        coef = std::abs(0.5 * (hv.t_set_lo + hv.t_set_hi) - s.t_room) / (th.cop * (273.0 + s.t_room));
        const double qcap = coef > 0 ? std::min(hv.q_max, hv.p_max / coef) : hv.q_max;
        qs = candidates(0.0, qcap, {});
    }
    if (hp.has_pv) pvs = candidates(hp.pv_floor, 1.0, {});
    if (hp.has_load) loads = candidates(hp.load_floor, 1.0, {});

    EnumResult r;
    for (double pc : pcs) {
        for (double pd : pds) {
            if (pc > kTol && pd > kTol) continue;  // one of charge/discharge
            if (hp.bes) {
                const auto& b = *hp.bes;
                const double e = bes_energy_after(s.e_es, pc, pd, b.eta_c, b.eta_d, dt_h);
                if (e < b.e_lo - kTol || e > b.e_hi + kTol) continue;
                const double dc = pc - s.p_es_c_prev, dd = pd - s.p_es_d_prev;
                if (dc < std::clamp(b.ramp_c_lo, -b.p_c_max, b.p_c_max) - kTol) continue;
                if (dc > std::clamp(b.ramp_c_hi, -b.p_c_max, b.p_c_max) + kTol) continue;
                if (dd < std::clamp(b.ramp_d_lo, -b.p_d_max, b.p_d_max) - kTol) continue;
                if (dd > std::clamp(b.ramp_d_hi, -b.p_d_max, b.p_d_max) + kTol) continue;
            }
            for (double q : qs) {
                const double p_hvac = coef * q;
                for (double xpv : pvs) {
                    for (double xl : loads) {
                        const double net = pc - pd + p_hvac - (hp.has_pv ? f.p_pv_hat[0] * xpv : 0.0) +
                                           (hp.has_load ? f.p_load_hat[0] * xl : 0.0);
                        r.min = std::min(r.min, net);
                        r.max = std::max(r.max, net);
                        ++r.evaluated;
                    }
                }
            }
        }
    }
    return r;
}

}  // namespace bsr::testing
