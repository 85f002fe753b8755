#include "bsr/network/ieee123.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

namespace bsr::network {

namespace {

using cd = std::complex<double>;
using CMat = std::array<std::array<cd, 3>, 3>;

constexpr double kPi = 3.14159265358979323846;

// Ohm per mile.
CMat config1() {
    CMat z{};
    z[0][0] = {0.4576, 1.0780};
    z[0][1] = {0.1560, 0.5017};
    z[0][2] = {0.1535, 0.3849};
    z[1][1] = {0.4666, 1.0482};
    z[1][2] = {0.1580, 0.4236};
    z[2][2] = {0.4615, 1.0651};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < i; ++j) z[i][j] = z[j][i];
    }
    return z;
}

CMat config12() {
    CMat z{};
    z[0][0] = {1.5209, 0.7521};
    z[0][1] = {0.5198, 0.2775};
    z[0][2] = {0.4924, 0.2157};
    z[1][1] = {1.5329, 0.7162};
    z[1][2] = {0.5198, 0.2775};
    z[2][2] = {1.5209, 0.7521};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < i; ++j) z[i][j] = z[j][i];
    }
    return z;
}

struct Config {
    PhaseSet phases;
    CMat z{};
};

// Configs 2..6 reuse the config-1 conductor matrix with a different phasing:
// conductor position i carries phase order[i].
Config permuted(const std::array<int, 3>& order) {
    const CMat z1 = config1();
    Config c{PhaseSet::all(), {}};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            c.z[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]
               [static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = z1[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return c;
}

Config config(int id) {
    const CMat z1 = config1();
    switch (id) {
        case 1: return {PhaseSet::all(), z1};
        case 2: return permuted({2, 0, 1});
        case 3: return permuted({1, 2, 0});
        case 4: return permuted({2, 1, 0});
        case 5: return permuted({1, 0, 2});
        case 6: return permuted({0, 2, 1});
        case 7:
        case 8: {
            const int other = id == 7 ? 2 : 1;
            Config c{PhaseSet::single(0) | PhaseSet::single(other), {}};
            for (int p : {0, other}) {
                for (int q : {0, other}) c.z[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] = z1[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
            }
            return c;
        }
        case 9:
        case 10:
        case 11: {
            const int p = id - 9;
            Config c{PhaseSet::single(p), {}};
            c.z[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)] = {1.3292, 1.3475};
            return c;
        }
        case 12: return {PhaseSet::all(), config12()};
        default: throw CaseError({fmt::format("unknown line configuration {}", id)});
    }
}

struct LineRow {
    const char* from;
    const char* to;
    double feet;
    int config;
};

// Original feeder sections that stay lines. Sections replaced by switches
// (13-18, 23-25, 60-62, 97-98, 76-77, 86-87) are omitted here.
constexpr LineRow kLines[] = {
    {"1", "2", 175, 10},    {"1", "3", 250, 11},    {"1", "7", 300, 1},     {"3", "4", 200, 11},
    {"3", "5", 325, 11},    {"5", "6", 250, 11},    {"7", "8", 200, 1},     {"8", "12", 225, 10},
    {"8", "9", 225, 9},     {"8", "13", 300, 1},    {"9", "14", 425, 9},    {"13", "34", 150, 11},
    {"14", "11", 250, 9},   {"14", "10", 250, 9},   {"15", "16", 375, 11},  {"15", "17", 350, 11},
    {"18", "19", 250, 9},   {"18", "21", 300, 2},   {"19", "20", 325, 9},   {"21", "22", 525, 10},
    {"21", "23", 250, 2},   {"23", "24", 550, 11},  {"25", "26", 350, 7},   {"25", "28", 200, 2},
    {"26", "27", 275, 7},   {"26", "31", 225, 11},  {"27", "33", 500, 9},   {"28", "29", 300, 2},
    {"29", "30", 350, 2},   {"30", "250", 200, 2},  {"31", "32", 300, 11},  {"34", "15", 100, 11},
    {"35", "36", 650, 8},   {"35", "40", 250, 1},   {"36", "37", 300, 9},   {"36", "38", 250, 10},
    {"38", "39", 325, 10},  {"40", "41", 325, 11},  {"40", "42", 250, 1},   {"42", "43", 500, 10},
    {"42", "44", 200, 1},   {"44", "45", 200, 9},   {"44", "47", 250, 1},   {"45", "46", 300, 9},
    {"47", "48", 150, 4},   {"47", "49", 250, 4},   {"49", "50", 250, 4},   {"50", "51", 250, 4},
    {"52", "53", 200, 1},   {"53", "54", 125, 1},   {"54", "55", 275, 1},   {"54", "57", 350, 3},
    {"55", "56", 275, 1},   {"57", "58", 250, 10},  {"57", "60", 750, 3},   {"58", "59", 250, 10},
    {"60", "61", 550, 5},   {"62", "63", 175, 12},  {"63", "64", 350, 12},  {"64", "65", 425, 12},
    {"65", "66", 325, 12},  {"67", "68", 200, 9},   {"67", "72", 275, 3},   {"67", "97", 250, 3},
    {"68", "69", 275, 9},   {"69", "70", 325, 9},   {"70", "71", 275, 9},   {"72", "73", 275, 11},
    {"72", "76", 200, 3},   {"73", "74", 350, 11},  {"74", "75", 400, 11},  {"76", "86", 700, 3},
    {"77", "78", 100, 6},   {"78", "79", 225, 6},   {"78", "80", 475, 6},   {"80", "81", 475, 6},
    {"81", "82", 250, 6},   {"81", "84", 675, 11},  {"82", "83", 250, 6},   {"84", "85", 475, 11},
    {"87", "88", 175, 9},   {"87", "89", 275, 6},   {"89", "90", 225, 10},  {"89", "91", 225, 6},
    {"91", "92", 300, 11},  {"91", "93", 225, 6},   {"93", "94", 275, 9},   {"93", "95", 300, 6},
    {"95", "96", 200, 10},  {"98", "99", 550, 3},   {"99", "100", 300, 3},  {"100", "450", 800, 3},
    {"101", "102", 225, 11}, {"101", "105", 275, 3}, {"102", "103", 325, 11}, {"103", "104", 700, 11},
    {"105", "106", 225, 10}, {"105", "108", 325, 3}, {"106", "107", 575, 10}, {"108", "109", 450, 9},
    {"108", "300", 1000, 3}, {"109", "110", 300, 9}, {"110", "111", 575, 9}, {"110", "112", 125, 9},
    {"112", "113", 525, 9}, {"113", "114", 325, 9}, {"135", "35", 375, 4},  {"149", "1", 400, 1},
    {"152", "52", 400, 1},  {"160", "67", 350, 6},  {"197", "101", 250, 3},
    // Short ties added so that 149 hangs off the substation-side bus 150r and
    // 151 (switch S4) sits in the block of 135.
    {"150r", "149", 10, 1}, {"135", "151", 10, 1},
};

struct SwitchRow {
    const char* id;
    const char* from;
    const char* to;
    SwitchKind kind;
};

constexpr SwitchRow kSwitches[] = {
    {"S1", "13", "18", SwitchKind::Esw},     {"S2", "18", "135", SwitchKind::Esw},
    {"S3", "23", "25", SwitchKind::Esw},     {"S4", "151", "300", SwitchKind::Esw},
    {"S5", "51r", "51", SwitchKind::Esw},    {"S6", "60", "62", SwitchKind::Esw},
    {"S7", "13", "152", SwitchKind::Ssw},    {"S8", "60", "160", SwitchKind::Esw},
    {"S9", "97", "197", SwitchKind::Esw},    {"S10a", "97", "98", SwitchKind::Esw},
    {"S10b", "76", "77", SwitchKind::Esw},   {"S12", "86", "87", SwitchKind::Esw},
    {"S13", "89r", "89", SwitchKind::Esw},   {"S14", "150r", "150", SwitchKind::Ssw},
};

struct LoadRow {
    const char* bus;
    char phase;
};

// Spot-load buses with the phase of their largest load, plus three extra
// houses (25, 78, 101) to reach 88 load nodes.
constexpr LoadRow kLoads[] = {
    {"1", 'a'},   {"2", 'b'},   {"4", 'c'},   {"5", 'c'},   {"6", 'c'},   {"7", 'a'},   {"9", 'a'},   {"10", 'a'},
    {"11", 'a'},  {"12", 'b'},  {"16", 'c'},  {"17", 'c'},  {"19", 'a'},  {"20", 'a'},  {"22", 'b'},  {"24", 'c'},
    {"28", 'a'},  {"29", 'a'},  {"30", 'c'},  {"31", 'c'},  {"32", 'c'},  {"33", 'a'},  {"34", 'c'},  {"35", 'a'},
    {"37", 'a'},  {"38", 'b'},  {"39", 'b'},  {"41", 'c'},  {"42", 'a'},  {"43", 'b'},  {"45", 'a'},  {"46", 'a'},
    {"47", 'a'},  {"48", 'a'},  {"49", 'b'},  {"50", 'c'},  {"51", 'a'},  {"52", 'a'},  {"53", 'a'},  {"55", 'a'},
    {"56", 'b'},  {"58", 'b'},  {"59", 'b'},  {"60", 'a'},  {"62", 'c'},  {"63", 'a'},  {"64", 'b'},  {"65", 'c'},
    {"66", 'c'},  {"68", 'a'},  {"69", 'a'},  {"70", 'a'},  {"71", 'a'},  {"73", 'c'},  {"74", 'c'},  {"75", 'c'},
    {"76", 'a'},  {"77", 'b'},  {"79", 'a'},  {"80", 'b'},  {"82", 'a'},  {"83", 'c'},  {"84", 'c'},  {"85", 'c'},
    {"86", 'b'},  {"87", 'b'},  {"88", 'a'},  {"90", 'b'},  {"92", 'c'},  {"94", 'a'},  {"95", 'b'},  {"96", 'b'},
    {"98", 'a'},  {"99", 'b'},  {"100", 'c'}, {"102", 'c'}, {"103", 'c'}, {"104", 'c'}, {"106", 'b'}, {"107", 'b'},
    {"109", 'a'}, {"111", 'a'}, {"112", 'a'}, {"113", 'a'}, {"114", 'a'}, {"25", 'a'},  {"78", 'b'},  {"101", 'c'},
};

struct PvRow {
    const char* id;
    const char* bus;
    double kw;
};

constexpr PvRow kPvs[] = {
    {"PV1", "6", 24.5},  {"PV2", "20", 44.1}, {"PV3", "28", 24.5}, {"PV4", "43", 24.5},
    {"PV5", "56", 24.5}, {"PV6", "84", 12.25}, {"PV7", "88", 24.5}, {"PV8", "106", 24.5},
};

Profiles make_profiles() {
    Profiles p;
    p.step_min = 15.0;
    for (int i = 0; i < 96; ++i) {
        const double h = i / 4.0;
        p.solar.push_back(std::max(0.0, std::sin(kPi * (h - 6.0) / 13.0)));
        p.load.push_back(0.4 + 0.2 * std::exp(-std::pow((h - 7.5) / 1.5, 2)) +
                         0.5 * std::exp(-std::pow((h - 19.0) / 2.5, 2)));
        p.t_out.push_back(22.0 + 8.0 * std::sin(kPi * (h - 9.0) / 12.0));
        p.q_int.push_back(0.3);
    }
    p.rad_wall_factor = 0.5;
    p.rad_win_factor = 1.0;
    return p;
}

gei::HouseParams draw_house_params(std::mt19937_64& rng, const std::string& id) {
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    gei::HouseParams hp;
    hp.id = id;
    gei::HouseThermalParams th;
    for (int w = 0; w < 4; ++w) {
        th.c_wall[static_cast<std::size_t>(w)] = u(2.0, 4.0);
        th.r_wall[static_cast<std::size_t>(w)] = u(4.0, 8.0);
        th.w_wall[static_cast<std::size_t>(w)] = u(0.5, 0.8);
    }
    th.r_win = u(8.0, 12.0);
    th.c_room = u(0.8, 1.2);
    th.w_win = u(0.3, 0.6);
    th.cop = u(3.0, 4.0);
    hp.thermal = th;
    gei::HvacParams hv;
    hv.p_max = u(3.0, 5.0);
    hv.q_max = hv.p_max * th.cop;
    hv.t_set_lo = 20.0;
    hv.t_set_hi = 24.0;
    hv.mode = gei::HvacMode::Cooling;
    hp.hvac = hv;
    gei::BesParams bes;
    const double cap = u(15.0, 20.0);
    bes.e_lo = 0.1 * cap;
    bes.e_hi = cap;
    bes.p_c_max = 5.0;
    bes.p_d_max = 5.0;
    bes.eta_c = 0.95;
    bes.eta_d = 0.95;
    hp.bes = bes;
    hp.has_pv = true;
    hp.has_load = true;
    return hp;
}

std::vector<std::size_t> gei_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

}  // namespace

void set_gei_fraction(GridCase& c, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw CaseError({fmt::format("gei_fraction must lie in [0, 1], got {}", fraction)});
    }
    const auto order = gei_order(c.houses.size(), seed);
    const auto count = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(c.houses.size())));
    for (HouseSpec& h : c.houses) h.has_gei = false;
    for (std::size_t i = 0; i < count; ++i) c.houses[order[i]].has_gei = true;
    c.finalize();
}

GridCase generate_ieee123(const Ieee123Options& opts) {
    GridCase c;
    c.name = "ieee123-blackstart";
    c.base = {4.16, 100.0};

    std::map<std::string, PhaseSet, std::less<>> bus_phases;
    for (const LineRow& r : kLines) {
        const Config cfg = config(r.config);
        Line l;
        l.id = fmt::format("L{}-{}", r.from, r.to);
        l.from = r.from;
        l.to = r.to;
        l.phases = cfg.phases;
        const double miles = r.feet / 5280.0;
        for (int p = 0; p < 3; ++p) {
            for (int q = 0; q < 3; ++q) {
                const cd z = cfg.z[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] * miles;
                l.r_ohm[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] = z.real();
                l.x_ohm[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] = z.imag();
            }
        }
        bus_phases[l.from] = bus_phases[l.from] | cfg.phases;
        bus_phases[l.to] = bus_phases[l.to] | cfg.phases;
        c.lines.push_back(std::move(l));
    }
    for (const SwitchRow& r : kSwitches) {
        Switch s;
        s.id = r.id;
        s.from = r.from;
        s.to = r.to;
        s.kind = r.kind;
        s.phases = PhaseSet::all();
        bus_phases[s.from] = bus_phases[s.from] | s.phases;
        bus_phases[s.to] = bus_phases[s.to] | s.phases;
        c.switches.push_back(std::move(s));
    }
    std::vector<std::string> ids;
    for (const auto& [id, ph] : bus_phases) ids.push_back(id);
    std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) { return natural_less(a, b); });
    for (const std::string& id : ids) c.buses.push_back({id, bus_phases[id]});

    for (const char* bus : {"51r", "89r"}) {
        DerUnit g;
        g.id = std::string(bus) == "51r" ? "BESS1" : "BESS2";
        g.bus = bus;
        g.kind = DerKind::GfmBess;
        g.s_rat = 24.5;
        g.e_cap = 98.0;
        g.e_init = 0.9 * 98.0;
        g.d = 20.0;
        g.k_f = 30.0;
        g.h = 5.0;
        g.gamma = 0.3;
        c.ders.push_back(g);
    }
    for (const PvRow& r : kPvs) {
        DerUnit pv;
        pv.id = r.id;
        pv.bus = r.bus;
        pv.kind = DerKind::GflPv;
        pv.p_rated = r.kw;
        pv.s_rat = r.kw;
        c.ders.push_back(pv);
    }
    TgInterface tg;
    tg.bus = "150";
    tg.ss_rat = 5000.0;
    tg.schedule = {{0, 0}, {11 * 60 + 45, 1}};
    c.tg = tg;

    std::mt19937_64 rng(opts.seed);
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    for (const LoadRow& r : kLoads) {
        HouseSpec h;
        h.id = r.bus;
        h.bus = r.bus;
        h.phase = phase_from_char(r.phase);
        h.peak_kw = u(10.0, 15.0);
        h.pv_kw = u(5.0, 7.0);
        h.soc0 = u(0.4, 0.5);
        h.t_room0 = 23.0;
        h.params = draw_house_params(rng, h.id);
        c.houses.push_back(std::move(h));
    }
    c.profiles = make_profiles();
    set_gei_fraction(c, opts.gei_fraction, opts.seed);
    return c;
}

}  // namespace bsr::network
