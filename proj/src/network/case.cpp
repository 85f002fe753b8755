#include "bsr/network/case.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace bsr::network {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::string out = fmt::format("case validation failed ({} problem{})", problems.size(),
                                  problems.size() == 1 ? "" : "s");
    for (const std::string& p : problems) out += "\n  - " + p;
    return out;
}

}  // namespace

CaseError::CaseError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

int parse_clock(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 3 != text.size()) {
        throw CaseError({fmt::format("bad clock value '{}', expected HH:MM", text)});
    }
    int h = 0, m = 0;
    for (char ch : text.substr(0, colon)) {
        if (!std::isdigit(static_cast<unsigned char>(ch))) throw CaseError({fmt::format("bad clock value '{}'", text)});
        h = h * 10 + (ch - '0');
    }
    for (char ch : text.substr(colon + 1)) {
        if (!std::isdigit(static_cast<unsigned char>(ch))) throw CaseError({fmt::format("bad clock value '{}'", text)});
        m = m * 10 + (ch - '0');
    }
    if (m >= 60) throw CaseError({fmt::format("bad clock value '{}'", text)});
    return h * 60 + m;
}

std::string format_clock(int minutes) { return fmt::format("{:02d}:{:02d}", minutes / 60, minutes % 60); }

bool natural_less(std::string_view a, std::string_view b) {
    // digit runs compare by value, other runs as text; digits sort first
    auto is_digit = [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)) != 0; };
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = is_digit(a[i]), db = is_digit(b[j]);
        if (da != db) return da;
        std::size_t ei = i, ej = j;
        while (ei < a.size() && is_digit(a[ei]) == da) ++ei;
        while (ej < b.size() && is_digit(b[ej]) == db) ++ej;
        const std::string_view ca = a.substr(i, ei - i), cb = b.substr(j, ej - j);
        if (da) {
            const std::string_view ta = ca.substr(std::min(ca.find_first_not_of('0'), ca.size()));
            const std::string_view tb = cb.substr(std::min(cb.find_first_not_of('0'), cb.size()));
            if (ta.size() != tb.size()) return ta.size() < tb.size();
            if (ta != tb) return ta < tb;
        } else if (ca != cb) {
            return ca < cb;
        }
        i = ei;
        j = ej;
    }
    if ((a.size() - i) != (b.size() - j)) return a.size() - i < b.size() - j;
    return a < b;
}

PhaseSet PhaseSet::from_string(std::string_view s) {
    unsigned m = 0;
    for (char ch : s) {
        const int p = phase_from_char(ch);
        if (p < 0) throw CaseError({fmt::format("bad phase letter '{}' in '{}'", ch, s)});
        m |= 1u << p;
    }
    return PhaseSet(m);
}

int PhaseSet::count() const { return std::popcount(mask_); }

std::vector<int> PhaseSet::list() const {
    std::vector<int> out;
    for (int p = 0; p < 3; ++p) {
        if (has(p)) out.push_back(p);
    }
    return out;
}

std::string PhaseSet::to_string() const {
    std::string s;
    for (int p : list()) s.push_back(phase_name(p));
    return s;
}

char phase_name(int p) { return static_cast<char>('a' + p); }

int phase_from_char(char c) {
    const char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return (l >= 'a' && l <= 'c') ? l - 'a' : -1;
}

double PerUnitBase::z_base_ohm() const {
    const double kv_ln = kv_ll / std::sqrt(3.0);
    return kv_ln * kv_ln / (kva_per_phase / 1000.0);
}

std::string_view to_string(SwitchKind k) { return k == SwitchKind::Esw ? "ESW" : "SSW"; }

int TgInterface::status_at(int minute) const {
    int y = 0;
    int best = -1;
    for (const TgEvent& e : schedule) {
        if (e.minute <= minute && e.minute >= best) {
            best = e.minute;
            y = e.y;
        }
    }
    return y;
}

double Profiles::at(const std::vector<double>& series, int minute) const {
    if (series.empty()) return 0.0;
    const long n = static_cast<long>(series.size());
    long idx = static_cast<long>(std::floor(minute / step_min));
    idx %= n;
    if (idx < 0) idx += n;
    return series[static_cast<std::size_t>(idx)];
}

std::size_t GridCase::bus_index(std::string_view id) const {
    if (bus_lookup_.size() != buses.size()) {
        bus_lookup_.clear();
        for (std::size_t i = 0; i < buses.size(); ++i) bus_lookup_.emplace(buses[i].id, i);
    }
    const auto it = bus_lookup_.find(id);
    if (it == bus_lookup_.end()) throw CaseError({fmt::format("unknown bus '{}'", id)});
    return it->second;
}

bool GridCase::has_bus(std::string_view id) const {
    return std::any_of(buses.begin(), buses.end(), [&](const Bus& b) { return b.id == id; });
}

const HouseSpec& GridCase::house(std::string_view id) const {
    for (const HouseSpec& h : houses) {
        if (h.id == id) return h;
    }
    throw CaseError({fmt::format("unknown house '{}'", id)});
}

bool GridCase::is_source_bus(std::string_view id) const {
    if (tg && tg->bus == id) return true;
    return std::any_of(ders.begin(), ders.end(),
                       [&](const DerUnit& d) { return d.kind == DerKind::GfmBess && d.bus == id; });
}

double GridCase::total_peak_kw() const {
    double s = 0.0;
    for (const HouseSpec& h : houses) s += h.peak_kw;
    return s;
}

std::vector<std::size_t> GridCase::gfm_units() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ders.size(); ++i) {
        if (ders[i].kind == DerKind::GfmBess) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> GridCase::pv_units() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ders.size(); ++i) {
        if (ders[i].kind == DerKind::GflPv) out.push_back(i);
    }
    return out;
}

void aggregate_impedance(const Mat3& r_ohm, const Mat3& x_ohm, PhaseSet phases, double z_base_ohm, Mat3& r_bar,
                         Mat3& x_bar) {
    constexpr double kTwoPiThird = 2.0 * 3.14159265358979323846 / 3.0;
    const std::array<double, 3> theta{0.0, -kTwoPiThird, kTwoPiThird};
    r_bar = {};
    x_bar = {};
    for (int p : phases.list()) {
        for (int q : phases.list()) {
            const double gr = std::cos(theta[p] - theta[q]);
            const double gi = std::sin(theta[p] - theta[q]);
            r_bar[p][q] = (r_ohm[p][q] * gr + x_ohm[p][q] * gi) / z_base_ohm;
            x_bar[p][q] = (x_ohm[p][q] * gr - r_ohm[p][q] * gi) / z_base_ohm;
        }
    }
}

PhaseMatrix phase_matrix(const Line& line, PhaseSet phases) {
    if (!phases.subset_of(line.phases)) {
        throw CaseError({fmt::format("line {} has phases '{}', requested '{}'", line.id, line.phases.to_string(),
                                     phases.to_string())});
    }
    PhaseMatrix pm;
    pm.phases = phases.list();
    for (int p : pm.phases) {
        for (int q : pm.phases) {
            pm.r.push_back(line.r_bar[p][q]);
            pm.x.push_back(line.x_bar[p][q]);
        }
    }
    return pm;
}

std::vector<BusBlock> derive_bus_blocks(const GridCase& c) {
    const std::size_t n = c.buses.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::map<std::string, std::size_t, std::less<>> idx;
    for (std::size_t i = 0; i < n; ++i) idx.emplace(c.buses[i].id, i);
    for (const Line& l : c.lines) {
        const auto a = idx.find(l.from), b = idx.find(l.to);
        if (a == idx.end() || b == idx.end()) continue;
        parent[find(a->second)] = find(b->second);
    }

    std::map<std::size_t, std::vector<std::string>> comps;
    for (std::size_t i = 0; i < n; ++i) comps[find(i)].push_back(c.buses[i].id);

    std::vector<std::vector<std::string>> kept;
    for (auto& [root, members] : comps) {
        const bool only_sources =
            std::all_of(members.begin(), members.end(), [&](const std::string& id) { return c.is_source_bus(id); });
        if (only_sources) continue;
        std::sort(members.begin(), members.end(), [](const std::string& a, const std::string& b) {
            return natural_less(a, b);
        });
        kept.push_back(std::move(members));
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return natural_less(a.front(), b.front()); });

    std::map<std::string, int, std::less<>> block_of;
    std::vector<BusBlock> blocks;
    for (std::size_t b = 0; b < kept.size(); ++b) {
        BusBlock blk;
        blk.index = static_cast<int>(b);
        blk.id = fmt::format("B{}", b + 1);
        blk.buses = kept[b];
        for (const std::string& id : blk.buses) block_of.emplace(id, static_cast<int>(b));
        blocks.push_back(std::move(blk));
    }
    for (std::size_t i = 0; i < c.lines.size(); ++i) {
        const auto it = block_of.find(c.lines[i].from);
        if (it != block_of.end()) blocks[static_cast<std::size_t>(it->second)].lines.push_back(i);
    }
    for (std::size_t s = 0; s < c.switches.size(); ++s) {
        std::set<int> touched;
        for (const std::string* end : {&c.switches[s].from, &c.switches[s].to}) {
            const auto it = block_of.find(*end);
            if (it != block_of.end()) touched.insert(it->second);
        }
        for (int b : touched) blocks[static_cast<std::size_t>(b)].switches.push_back(s);
    }
    return blocks;
}

void GridCase::finalize() {
    std::vector<std::string> problems;
    auto bad = [&](std::string msg) { problems.push_back(std::move(msg)); };

    std::map<std::string, std::size_t, std::less<>> lookup;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        Bus& b = buses[i];
        if (b.id.empty()) bad(fmt::format("bus #{} has an empty id", i));
        if (b.phases.empty()) bad(fmt::format("bus {} has no phases", b.id));
        if (!lookup.emplace(b.id, i).second) bad(fmt::format("duplicate bus id '{}'", b.id));
        b.has_gei = false;
        b.peak_load = {};
        b.block = -1;
    }
    bus_lookup_ = lookup;
    auto find_bus = [&](const std::string& id, const std::string& who) -> Bus* {
        const auto it = lookup.find(id);
        if (it == lookup.end()) {
            bad(fmt::format("{} references unknown bus '{}'", who, id));
            return nullptr;
        }
        return &buses[it->second];
    };

    const double zb = base.z_base_ohm();
    if (!(base.kv_ll > 0 && base.kva_per_phase > 0)) bad("per-unit base values must be positive");
    std::set<std::string> line_ids;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        Line& l = lines[i];
        if (l.id.empty()) l.id = l.from + "-" + l.to;
        const std::string who = "line " + l.id;
        if (!line_ids.insert(l.id).second) bad(fmt::format("duplicate line id '{}'", l.id));
        const Bus* a = find_bus(l.from, who);
        const Bus* b = find_bus(l.to, who);
        if (l.from == l.to) bad(who + " connects a bus to itself");
        if (l.phases.empty()) bad(who + " has no phases");
        if (a && !l.phases.subset_of(a->phases)) {
            bad(fmt::format("{}: phases '{}' not present at bus {} ('{}')", who, l.phases.to_string(), a->id,
                            a->phases.to_string()));
        }
        if (b && !l.phases.subset_of(b->phases)) {
            bad(fmt::format("{}: phases '{}' not present at bus {} ('{}')", who, l.phases.to_string(), b->id,
                            b->phases.to_string()));
        }
        for (int p = 0; p < 3; ++p) {
            for (int q = 0; q < 3; ++q) {
                if (!std::isfinite(l.r_ohm[p][q]) || !std::isfinite(l.x_ohm[p][q])) bad(who + " has non-finite impedance");
                const bool present = l.phases.has(p) && l.phases.has(q);
                if (present && (std::abs(l.r_ohm[p][q] - l.r_ohm[q][p]) > 1e-9 ||
                                std::abs(l.x_ohm[p][q] - l.x_ohm[q][p]) > 1e-9) && p < q) {
                    bad(fmt::format("{}: impedance matrix not symmetric at ({},{})", who, p, q));
                }
            }
            if (l.phases.has(p) && !(l.r_ohm[p][p] > 0)) bad(fmt::format("{}: non-positive resistance on phase {}", who, phase_name(p)));
        }
        aggregate_impedance(l.r_ohm, l.x_ohm, l.phases, zb, l.r_bar, l.x_bar);
    }

    std::set<std::string> switch_ids;
    for (Switch& s : switches) {
        const std::string who = "switch " + s.id;
        if (s.id.empty()) bad("switch with empty id");
        if (!switch_ids.insert(s.id).second) bad(fmt::format("duplicate switch id '{}'", s.id));
        const Bus* a = find_bus(s.from, who);
        const Bus* b = find_bus(s.to, who);
        if (s.from == s.to) bad(who + " endpoints must be distinct");
        if (s.phases.empty()) bad(who + " has no phases");
        if (a && b && !(s.phases.subset_of(a->phases) && s.phases.subset_of(b->phases))) {
            bad(fmt::format("{}: phases '{}' not present at both endpoints", who, s.phases.to_string()));
        }
    }

    std::set<std::string> der_ids;
    for (const DerUnit& d : ders) {
        const std::string who = "DER " + d.id;
        if (!der_ids.insert(d.id).second) bad(fmt::format("duplicate DER id '{}'", d.id));
        find_bus(d.bus, who);
        if (!(d.s_rat > 0)) bad(who + ": S_rat must be positive");
        if (d.kind == DerKind::GfmBess) {
            if (!(d.d + d.k_f > 0)) bad(who + ": D + k_f must be positive");
            if (!(d.h > 0)) bad(who + ": H must be positive");
            if (!(d.e_cap > 0 && d.e_init >= 0 && d.e_init <= d.e_cap)) bad(who + ": need 0 <= E_init <= E_cap, E_cap > 0");
            if (!(d.gamma >= 0)) bad(who + ": gamma must be non-negative");
        } else if (!(d.p_rated >= 0)) {
            bad(who + ": PV rating must be non-negative");
        }
    }
    if (tg) {
        find_bus(tg->bus, "TG interface");
        if (!(tg->ss_rat > 0)) bad("TG interface: SS_rat must be positive");
        if (tg->schedule.empty()) bad("TG interface: outage schedule is empty");
        for (const TgEvent& e : tg->schedule) {
            if (e.y != 0 && e.y != 1) bad("TG interface: schedule status must be 0 or 1");
        }
    }

    std::set<std::string> house_ids;
    for (HouseSpec& h : houses) {
        const std::string who = "house " + h.id;
        if (!house_ids.insert(h.id).second) bad(fmt::format("duplicate house id '{}'", h.id));
        Bus* b = find_bus(h.bus, who);
        if (h.phase < 0 || h.phase > 2) {
            bad(who + ": bad phase");
        } else if (b && !b->phases.has(h.phase)) {
            bad(fmt::format("{}: phase {} not present at bus {}", who, phase_name(h.phase), h.bus));
        }
        if (!(h.peak_kw >= 0 && h.pv_kw >= 0)) bad(who + ": peak and PV ratings must be non-negative");
        if (h.params.id.empty()) h.params.id = h.id;
        try {
            h.params.validate();
        } catch (const gei::HouseError& e) {
            bad(who + ": " + e.what());
        }
        if (h.params.bes && !(h.soc0 * h.params.bes->e_hi >= h.params.bes->e_lo - 1e-9 && h.soc0 <= 1.0)) {
            bad(who + ": initial state of charge outside the storage bounds");
        }
        if (b && h.phase >= 0 && h.phase <= 2) {
            b->peak_load[static_cast<std::size_t>(h.phase)] += h.peak_kw;
            b->has_gei = b->has_gei || h.has_gei;
        }
    }

    if (!(profiles.step_min > 0)) bad("profiles: step_min must be positive");
    for (const auto* series : {&profiles.solar, &profiles.load, &profiles.t_out, &profiles.q_int}) {
        if (series->empty()) bad("profiles: every series needs at least one sample");
        for (double v : *series) {
            if (!std::isfinite(v)) bad("profiles: non-finite sample");
        }
    }

    blocks = derive_bus_blocks(*this);
    for (const BusBlock& blk : blocks) {
        for (const std::string& id : blk.buses) {
            const auto it = lookup.find(id);
            if (it != lookup.end()) buses[it->second].block = blk.index;
        }
    }
    for (const Switch& s : switches) {
        const auto a = lookup.find(s.from), b = lookup.find(s.to);
        if (a == lookup.end() || b == lookup.end()) continue;
        const int ba = buses[a->second].block, bb = buses[b->second].block;
        if (ba >= 0 && ba == bb) bad(fmt::format("switch {} lies inside block {}", s.id, blocks[static_cast<std::size_t>(ba)].id));
        if (ba < 0 && bb < 0) bad(fmt::format("switch {} connects two source buses", s.id));
    }
    for (const Bus& b : buses) {
        if (b.block < 0 && !is_source_bus(b.id)) bad(fmt::format("bus {} belongs to no block", b.id));
    }

    if (!declared_blocks.empty()) {
        std::map<std::string, std::size_t> seen;
        for (std::size_t i = 0; i < declared_blocks.size(); ++i) {
            for (const std::string& id : declared_blocks[i]) {
                const auto [it, fresh] = seen.emplace(id, i);
                if (!fresh) bad(fmt::format("bus {} appears in declared blocks {} and {}", id, it->second + 1, i + 1));
                if (!lookup.count(id)) bad(fmt::format("declared block {} references unknown bus '{}'", i + 1, id));
            }
        }
        std::set<std::set<std::string>> derived, declared;
        for (const BusBlock& blk : blocks) derived.emplace(blk.buses.begin(), blk.buses.end());
        for (const auto& d : declared_blocks) declared.emplace(d.begin(), d.end());
        if (derived != declared) bad("declared bus blocks do not match the switch-separated components");
    }

    if (!problems.empty()) throw CaseError(std::move(problems));
}

gei::HouseForecast house_forecast(const GridCase& c, const HouseSpec& h, int start_min, std::size_t steps,
                                  double dt_min) {
    gei::HouseForecast f;
    const Profiles& pr = c.profiles;
    for (std::size_t k = 0; k < steps; ++k) {
        const int t = start_min + static_cast<int>(std::lround(static_cast<double>(k) * dt_min));
        const double solar = pr.at(pr.solar, t);
        f.t_out.push_back(pr.at(pr.t_out, t));
        for (auto& q : f.q_rad_wall) q.push_back(pr.rad_wall_factor * solar);
        f.q_rad_win.push_back(pr.rad_win_factor * solar);
        f.q_int.push_back(pr.at(pr.q_int, t));
        f.p_pv_hat.push_back(h.params.has_pv ? h.pv_kw * solar : 0.0);
        f.p_load_hat.push_back(h.peak_kw * pr.at(pr.load, t));
    }
    return f;
}

std::vector<double> load_forecast(const GridCase& c, const HouseSpec& h, int start_min, std::size_t steps,
                                  double dt_min) {
    std::vector<double> out;
    for (std::size_t k = 0; k < steps; ++k) {
        const int t = start_min + static_cast<int>(std::lround(static_cast<double>(k) * dt_min));
        out.push_back(h.peak_kw * c.profiles.at(c.profiles.load, t));
    }
    return out;
}

std::vector<double> pv_forecast(const GridCase& c, const DerUnit& d, int start_min, std::size_t steps,
                                double dt_min) {
    std::vector<double> out;
    for (std::size_t k = 0; k < steps; ++k) {
        const int t = start_min + static_cast<int>(std::lround(static_cast<double>(k) * dt_min));
        out.push_back(d.p_rated * c.profiles.at(c.profiles.solar, t));
    }
    return out;
}

gei::HouseState house_initial_state(const GridCase& c, const HouseSpec& h, int clock_min) {
    const double e0 = h.params.bes ? h.soc0 * h.params.bes->e_hi : 0.0;
    return gei::initial_state(h.params, h.t_room0, c.profiles.at(c.profiles.t_out, clock_min), e0, clock_min);
}

}  // namespace bsr::network
