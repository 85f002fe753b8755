#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bsr/gei/house.hpp"

namespace bsr::network {

// Case validation failure; `problems` lists every violation found.
class CaseError : public std::runtime_error {
public:
    explicit CaseError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

// "HH:MM" <-> minutes since midnight (hours may exceed 23).
int parse_clock(std::string_view text);
std::string format_clock(int minutes);

// Orders ids like "2" < "10" < "51" < "51r" < "150".
bool natural_less(std::string_view a, std::string_view b);

class PhaseSet {
public:
    constexpr PhaseSet() = default;
    static PhaseSet from_string(std::string_view s);  // e.g. "abc", "ac"
    static constexpr PhaseSet all() { return PhaseSet(7u); }
    static constexpr PhaseSet single(int p) { return PhaseSet(1u << p); }

    constexpr bool has(int p) const { return (mask_ >> p) & 1u; }
    constexpr bool empty() const { return mask_ == 0; }
    int count() const;
    std::vector<int> list() const;
    std::string to_string() const;
    constexpr bool subset_of(PhaseSet o) const { return (mask_ & ~o.mask_) == 0; }
    constexpr PhaseSet operator&(PhaseSet o) const { return PhaseSet(mask_ & o.mask_); }
    constexpr PhaseSet operator|(PhaseSet o) const { return PhaseSet(mask_ | o.mask_); }
    constexpr unsigned mask() const { return mask_; }
    friend constexpr bool operator==(PhaseSet, PhaseSet) = default;

private:
    constexpr explicit PhaseSet(unsigned m) : mask_(m) {}
    unsigned mask_ = 0;
};

char phase_name(int p);
int phase_from_char(char c);

using Mat3 = std::array<std::array<double, 3>, 3>;

struct PerUnitBase {
    double kv_ll = 4.16;
    double kva_per_phase = 100.0;
    double z_base_ohm() const;  // (kV_LN)^2 / MVA_phase
};

struct Bus {
    std::string id;
    PhaseSet phases;
    // Derived by finalize():
    bool has_gei = false;
    std::array<double, 3> peak_load{};  // kW per phase
    int block = -1;                     // -1 for source-only buses
};

struct Line {
    std::string id;
    std::string from, to;
    PhaseSet phases;
    Mat3 r_ohm{};  // phase impedance, rows/cols a,b,c; absent phases zero
    Mat3 x_ohm{};
    // Derived: phase-aggregate matrices of the linearized flow model, per unit.
    Mat3 r_bar{};
    Mat3 x_bar{};
};

enum class SwitchKind { Esw, Ssw };
std::string_view to_string(SwitchKind k);

struct Switch {
    std::string id;
    std::string from, to;
    SwitchKind kind = SwitchKind::Esw;
    PhaseSet phases = PhaseSet::all();
};

struct BusBlock {
    int index = 0;
    std::string id;                     // "B1", "B2", ... in block order
    std::vector<std::string> buses;     // natural order
    std::vector<std::size_t> lines;     // indices into GridCase::lines
    std::vector<std::size_t> switches;  // boundary switches
};

enum class DerKind { GfmBess, GflPv };

struct DerUnit {
    std::string id;
    std::string bus;
    DerKind kind = DerKind::GflPv;
    double s_rat = 0.0;  // kVA
    // Grid-forming storage only:
    double e_cap = 0.0;   // kWh
    double e_init = 0.0;  // kWh
    double d = 20.0;
    double k_f = 30.0;
    double h = 5.0;
    double gamma = 0.3;
    // Grid-following PV only: forecast = p_rated * solar profile.
    double p_rated = 0.0;  // kW
};

struct TgEvent {
    int minute = 0;
    int y = 0;
};

struct TgInterface {
    std::string bus;
    double ss_rat = 0.0;  // kVA
    std::vector<TgEvent> schedule;

    int status_at(int minute) const;
};

// Daily profiles sampled every step_min minutes; lookups wrap around midnight.
struct Profiles {
    double step_min = 15.0;
    std::vector<double> solar;  // per unit of rated PV
    std::vector<double> load;   // per unit of house peak
    std::vector<double> t_out;  // degC
    std::vector<double> q_int;  // kW thermal
    double rad_wall_factor = 0.5;  // wall radiation per unit solar, kW
    double rad_win_factor = 1.0;

    double at(const std::vector<double>& series, int minute) const;
};

struct HouseSpec {
    std::string id;
    std::string bus;
    int phase = 0;
    double peak_kw = 0.0;
    double pv_kw = 0.0;
    bool has_gei = false;
    double t_room0 = 24.0;
    double soc0 = 0.45;  // initial BES energy as a fraction of E_hi
    gei::HouseParams params;
};

struct GridCase {
    std::string name = "case";
    PerUnitBase base;
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Switch> switches;
    std::vector<DerUnit> ders;
    std::optional<TgInterface> tg;
    std::vector<HouseSpec> houses;
    Profiles profiles;
    // Optional declared partition; checked against the derived blocks.
    std::vector<std::vector<std::string>> declared_blocks;

    // Derived by finalize():
    std::vector<BusBlock> blocks;

    std::size_t bus_index(std::string_view id) const;  // throws CaseError on unknown id
    bool has_bus(std::string_view id) const;
    const Bus& bus(std::string_view id) const { return buses[bus_index(id)]; }
    const HouseSpec& house(std::string_view id) const;
    bool is_source_bus(std::string_view id) const;  // GFM or TG bus
    double total_peak_kw() const;
    std::vector<std::size_t> gfm_units() const;
    std::vector<std::size_t> pv_units() const;

    // Validates and fills derived fields; throws CaseError listing all problems.
    void finalize();

private:
    mutable std::map<std::string, std::size_t, std::less<>> bus_lookup_;  // rebuilt lazily
};

// Components of the graph with switch edges removed, ignoring components that
// only hold source buses, ordered by their smallest member bus id.
std::vector<BusBlock> derive_bus_blocks(const GridCase& c);

// Phase-aggregate matrices (per unit) from a 3x3 phase impedance in ohms.
void aggregate_impedance(const Mat3& r_ohm, const Mat3& x_ohm, PhaseSet phases, double z_base_ohm, Mat3& r_bar,
                         Mat3& x_bar);

struct PhaseMatrix {
    std::vector<int> phases;
    std::vector<double> r;  // row-major n x n
    std::vector<double> x;
    double r_at(std::size_t i, std::size_t j) const { return r[i * phases.size() + j]; }
    double x_at(std::size_t i, std::size_t j) const { return x[i * phases.size() + j]; }
};

// Principal submatrix of the line's aggregate matrices; throws CaseError if a
// requested phase is absent on the line.
PhaseMatrix phase_matrix(const Line& line, PhaseSet phases);

// Forecast builders from the case profiles.
gei::HouseForecast house_forecast(const GridCase& c, const HouseSpec& h, int start_min, std::size_t steps,
                                  double dt_min);
std::vector<double> load_forecast(const GridCase& c, const HouseSpec& h, int start_min, std::size_t steps,
                                  double dt_min);
std::vector<double> pv_forecast(const GridCase& c, const DerUnit& d, int start_min, std::size_t steps,
                                double dt_min);
gei::HouseState house_initial_state(const GridCase& c, const HouseSpec& h, int clock_min);

}  // namespace bsr::network
